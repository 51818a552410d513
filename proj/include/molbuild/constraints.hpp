#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "molbuild/alphabet.hpp"
#include "molbuild/molecule.hpp"

namespace molbuild {

/// One neighbour requirement of an atom pattern. `symbol` is an alphabet
/// symbol or "*"; `order` 0 accepts any bond order.
struct NeighborSpec {
  std::string symbol = "*";
  int order = 0;
  bool operator==(const NeighborSpec&) const = default;
};

/// A centre atom with a multiset of required neighbours. The pattern matches
/// at atom c when c's symbol matches and the required neighbours can be
/// assigned injectively to distinct bonded neighbours of c. Extra neighbours
/// are allowed. `hydrogens`, when set, must equal c's implicit hydrogen count.
struct AtomPattern {
  std::string center = "*";
  std::vector<NeighborSpec> neighbors;
  std::optional<int> hydrogens;
  bool operator==(const AtomPattern&) const = default;
};

/// Forbidden local motif; `exception`, when it also matches at the same centre,
/// lifts the ban (e.g. urea for the C(-N)(-N) rule).
struct ForbiddenPattern {
  std::string name;
  AtomPattern pattern;
  std::optional<AtomPattern> exception;
  bool operator==(const ForbiddenPattern&) const = default;
};

struct Constraints {
  int max_atoms = 25;
  /// Unset means ring sizes are unrestricted.
  std::optional<std::set<int>> allowed_ring_sizes;
  std::vector<ForbiddenPattern> forbidden_patterns;
  /// Atoms of the initial molecule whose bonds and hydrogens are locked.
  std::vector<int> frozen_atoms;

  bool frozen(int atom) const;
  bool has_structural_rules() const {
    return allowed_ring_sizes.has_value() || !forbidden_patterns.empty();
  }

  /// Rings of five or six atoms plus the four bonding rules used for the
  /// solvent tasks (N-N, O-O, C(-N)(-N) unless urea, C(-N)(-O)(-X)H).
  static Constraints solvent_structural(int max_atoms = 25);

  nlohmann::json to_json() const;
  static Constraints from_json(const nlohmann::json& j);
};

/// Everything the masking engine needs to judge a molecule.
struct DesignSpace {
  Alphabet alphabet;
  Constraints constraints;
};

struct ConstraintReport {
  bool ok = true;
  std::vector<std::string> violations;
  explicit operator bool() const noexcept { return ok; }
};

/// Ring sizes of a minimum cycle basis (sorted ascending). The multiset is the
/// same for every minimum cycle basis of the graph.
std::vector<int> ring_sizes(const Molecule& m);

bool pattern_matches_at(const Molecule& m, const Alphabet& alphabet, const AtomPattern& pattern,
                        int center);

/// Full from-scratch check of ring sizes and forbidden patterns. Valence and
/// frozen atoms are not part of this check.
ConstraintReport check_structural_constraints(const Molecule& m, const DesignSpace& space);

}  // namespace molbuild
