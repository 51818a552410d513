#pragma once

#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "molbuild/objectives.hpp"
#include "molbuild/policy.hpp"
#include "molbuild/sampler.hpp"
#include "molbuild/trainer.hpp"

namespace molbuild {

struct ScoredMolecule {
  Molecule molecule;
  double objective = 0.0;
  /// Sub-action choices from the initial molecule, ending with DontChange.
  std::vector<int> choices;
  std::vector<Action> actions;
  int epoch = 0;
  /// Global discovery counter; smaller means found earlier.
  std::size_t discovery = 0;
  std::string key;
};

/// Top-s molecules by objective, one entry per isomorphism class. Order:
/// objective descending, then earlier discovery, then canonical key.
class Archive {
 public:
  explicit Archive(std::size_t capacity = 100) : capacity_(capacity) {}

  const std::vector<ScoredMolecule>& entries() const noexcept { return entries_; }
  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  double best() const;
  double mean_top(std::size_t count) const;

  /// Non-finite entries are ignored. Returns true if the contents changed.
  bool merge(std::vector<ScoredMolecule> scored);

 private:
  std::size_t capacity_;
  std::vector<ScoredMolecule> entries_;
};

Archive merge_archive(Archive archive, std::vector<ScoredMolecule> scored);

struct LearnerConfig {
  std::size_t archive_size = 100;  // s
  TasarConfig tasar;               // beam, sigma, budget
  int epochs = 100;
  int batches_per_epoch = 20;
  int batch_size = 64;
  AdamConfig adam;
  /// Epochs without a better best objective before stopping; 0 disables.
  int patience = 50;
  /// Soft limit checked at epoch boundaries; 0 disables.
  double wall_clock_limit_s = 0.0;
  /// Train the whole network instead of the output heads only.
  bool train_all = false;
  bool dropout = false;

  nlohmann::json to_json() const;
  static LearnerConfig from_json(const nlohmann::json& j);
};

struct EpochRecord {
  int epoch = 0;
  double best = 0.0;
  double mean_top20 = 0.0;
  std::size_t archive_size = 0;
  std::size_t sampled = 0;
  long long wall_ms = 0;
  bool aborted = false;

  nlohmann::json to_json() const;
};

struct LearnerResult {
  Archive archive;
  std::vector<EpochRecord> history;
  std::string stop_reason;
};

/// Self-improvement loop: sample with TASAR, keep the best s molecules, then
/// fit the policy to the archived action sequences.
template <class T>
LearnerResult run_learner(Policy<T>& policy, const Molecule& m0, Objective& objective, const DesignSpace& space,
                          const LearnerConfig& config, Rng& rng,
                          const std::function<void(const EpochRecord&)>& on_epoch = {});

extern template LearnerResult run_learner(Policy<float>&, const Molecule&, Objective&, const DesignSpace&,
                                          const LearnerConfig&, Rng&, const std::function<void(const EpochRecord&)>&);
extern template LearnerResult run_learner(Policy<double>&, const Molecule&, Objective&, const DesignSpace&,
                                          const LearnerConfig&, Rng&, const std::function<void(const EpochRecord&)>&);

}  // namespace molbuild
