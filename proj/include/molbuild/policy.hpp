#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "molbuild/masking.hpp"
#include "molbuild/molecule.hpp"
#include "molbuild/rng.hpp"

namespace molbuild {

struct PolicyConfig {
  int d = 64;
  int n_layers = 4;
  int n_heads = 4;
  int ff_dim = 256;
  int k = 3;           // alphabet size
  int y = 3;           // max bond order
  int max_degree = 4;  // degree embedding rows are 0..max_degree
  double dropout = 0.1;

  void validate() const;
  nlohmann::json to_json() const;
  /// `k` and `y` come from the alphabet; JSON may override the rest.
  static PolicyConfig from_json(const nlohmann::json& j, int k, int y, int max_degree);
  static PolicyConfig large(int k, int y, int max_degree);
  bool operator==(const PolicyConfig&) const = default;
};

struct TensorInfo {
  std::string name;
  std::size_t offset = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t size() const { return rows * cols; }
  /// Output projections; everything else belongs to the body.
  bool head() const;
};

/// Named views into one flat parameter vector.
class ParamLayout {
 public:
  ParamLayout() = default;
  explicit ParamLayout(const PolicyConfig& config);

  const std::vector<TensorInfo>& tensors() const noexcept { return tensors_; }
  const TensorInfo& at(const std::string& name) const;
  std::size_t total() const noexcept { return total_; }

 private:
  void add(const std::string& name, std::size_t rows, std::size_t cols);
  std::vector<TensorInfo> tensors_;
  std::size_t total_ = 0;
};

template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

/// Raw logits for the three action levels of one (molecule, level state).
///   level0: [DontChange, new type 0..k-1, existing atom 0..n-1]
///   level1: atom 0..n-1
///   level2: bond order 1..y
template <class T>
struct LogitsBundle {
  Level level = Level::L0;
  std::vector<T> level0;
  std::vector<T> level1;
  std::vector<T> level2;

  const std::vector<T>& active() const {
    return level == Level::L0 ? level0 : level == Level::L1 ? level1 : level2;
  }
};

/// Softmax restricted to the allowed entries; the rest are exactly 0.
/// Throws EmptyFeasibleSet if nothing is allowed and ShapeMismatch on size.
template <class T>
std::vector<T> masked_distribution(const std::vector<T>& logits, const ChoiceMask& mask);

/// Masked log-softmax; masked entries are -inf.
template <class T>
std::vector<T> masked_log_distribution(const std::vector<T>& logits, const ChoiceMask& mask);

struct PolicyInput {
  const Molecule* molecule = nullptr;
  ActionLevelState state;
};

/// One supervised decision: the state before a sub-action and the index that
/// was chosen there.
struct TrainItem {
  Molecule molecule;
  ActionLevelState state;
  int target = 0;
};

/// Graph transformer over (virtual atom, atoms) with bond-order attention
/// biases and ReZero residuals.
template <class T>
class Policy {
 public:
  Policy() = default;
  Policy(const PolicyConfig& config, std::uint64_t seed);
  Policy(const PolicyConfig& config, std::vector<T> params);

  const PolicyConfig& config() const noexcept { return config_; }
  const ParamLayout& layout() const noexcept { return layout_; }
  std::vector<T>& params() noexcept { return params_; }
  const std::vector<T>& params() const noexcept { return params_; }

  /// `width` pads the token sequence (virtual atom included) to a fixed
  /// length; 0 means n + 1. A non-null `dropout_rng` enables dropout.
  LogitsBundle<T> forward(const Molecule& m, const ActionLevelState& state, Rng* dropout_rng = nullptr,
                          int width = 0) const;

  /// Pads every item to the widest molecule in the batch.
  std::vector<LogitsBundle<T>> forward_batch(const std::vector<PolicyInput>& batch,
                                             Rng* dropout_rng = nullptr) const;

  /// Mean negative log-likelihood of the targets under the masked
  /// distributions; gradients (same layout as params) are added to `grad`.
  /// Throws TargetMasked if a target is not feasible.
  T loss_and_grad(const std::vector<TrainItem>& batch, const DesignSpace& space, std::vector<T>& grad,
                  Rng* dropout_rng = nullptr) const;

  /// Same loss without gradients.
  T loss(const std::vector<TrainItem>& batch, const DesignSpace& space) const;

  template <class U>
  Policy<U> cast() const {
    return Policy<U>(config_, std::vector<U>(params_.begin(), params_.end()));
  }

 private:
  struct Cache;
  LogitsBundle<T> run(const Molecule& m, const ActionLevelState& state, Rng* dropout_rng, int width,
                      Cache* cache) const;
  void backward(const Cache& cache, const std::vector<T>& dlogits, std::vector<T>& grad) const;

  PolicyConfig config_;
  ParamLayout layout_;
  std::vector<T> params_;
};

extern template class Policy<float>;
extern template class Policy<double>;

}  // namespace molbuild
