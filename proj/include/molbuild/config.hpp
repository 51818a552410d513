#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "molbuild/constraints.hpp"
#include "molbuild/learner.hpp"
#include "molbuild/policy.hpp"
#include "molbuild/trainer.hpp"

namespace molbuild {

/// One JSON document drives a run. Top-level keys:
///   alphabet      "solvent-CNO" | "drug-full" | {"preset"|"symbols", "max_bond_order"} | {"atoms": [...]}
///   constraints   see Constraints::from_json
///   policy        {"preset": "desk"|"large", d, n_layers, n_heads, ff_dim, max_degree, dropout}
///   learner       see LearnerConfig::from_json
///   pretrain      see PretrainConfig::from_json
///   objective     see make_objective
///   oracle        shared oracle block for solvent objectives
///   initial       SMILES of the starting molecule (default "C")
///   seed          unsigned integer
///   precision     "float32" | "float64"
///   output_dir    directory for design results
/// Unknown keys are rejected with ConfigError.
struct RunConfig {
  nlohmann::json raw = nlohmann::json::object();
  Alphabet alphabet;
  Constraints constraints;
  PolicyConfig policy;
  LearnerConfig learner;
  PretrainConfig pretrain;
  nlohmann::json objective;
  nlohmann::json oracle;
  std::string initial = "C";
  std::uint64_t seed = 0;
  bool float64 = false;
  std::string output_dir = "out";

  DesignSpace space() const { return {alphabet, constraints}; }
  /// Parses and validates the initial molecule against the design space.
  Molecule initial_molecule() const;

  static RunConfig from_json(const nlohmann::json& j);
  /// Accepts a config file or a run manifest (whose "config" is used).
  static RunConfig load(const std::string& path);
};

Alphabet alphabet_from_json(const nlohmann::json& j);

}  // namespace molbuild
