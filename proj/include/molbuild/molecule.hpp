#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "molbuild/alphabet.hpp"

namespace molbuild {

/// Hydrogen-suppressed molecular graph: atom types (indices into an Alphabet)
/// plus a symmetric bond-order matrix with zero diagonal. Atom indices are
/// zero-based throughout the library.
class Molecule {
 public:
  Molecule() = default;
  explicit Molecule(std::vector<int> atoms);
  Molecule(std::vector<int> atoms, std::vector<std::uint8_t> bonds);

  static Molecule single(int type) { return Molecule(std::vector<int>{type}); }

  int size() const noexcept { return static_cast<int>(atoms_.size()); }
  bool empty() const noexcept { return atoms_.empty(); }
  int atom(int i) const { return atoms_[static_cast<std::size_t>(i)]; }
  const std::vector<int>& atoms() const noexcept { return atoms_; }
  const std::vector<std::uint8_t>& bond_matrix() const noexcept { return bonds_; }

  int bond(int i, int j) const { return bonds_[index(i, j)]; }
  void set_bond(int i, int j, int order);

  /// Appends an unbonded atom and returns its index.
  int add_atom(int type);

  /// Total bond order carried by atom i.
  int bond_sum(int i) const;
  /// Number of bonded neighbours of atom i.
  int degree(int i) const;
  std::vector<int> neighbors(int i) const;
  int bond_count() const;

  /// Relabels atoms: atom i of this molecule becomes atom perm[i].
  Molecule permuted(const std::vector<int>& perm) const;

  bool connected() const;

  bool operator==(const Molecule&) const = default;

 private:
  std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(i) * atoms_.size() + static_cast<std::size_t>(j);
  }

  std::vector<int> atoms_;
  std::vector<std::uint8_t> bonds_;
};

/// Terminates the design; the molecule is left unchanged.
struct DontChange {
  bool operator==(const DontChange&) const = default;
};

/// Appends an atom of alphabet type `type` bonded to existing atom `target`.
struct AddAtom {
  int type = 0;
  int target = 0;
  int order = 1;
  bool operator==(const AddAtom&) const = default;
};

/// Bonds two existing, currently unbonded atoms.
struct AddBond {
  int first = 0;
  int second = 0;
  int order = 1;
  bool operator==(const AddBond&) const = default;
};

using Action = std::variant<DontChange, AddAtom, AddBond>;

std::string to_string(const Action& action);

/// Remaining bond capacity of atom i, i.e. its implicit hydrogen count.
int valence_slack(const Molecule& m, int i, const Alphabet& alphabet);

/// Valence invariant over the whole molecule: every atom within capacity,
/// symmetric matrix, zero diagonal.
bool satisfies_valence(const Molecule& m, const Alphabet& alphabet);

/// Applies an action without any feasibility checking. Indices must be in
/// range; callers are expected to have consulted the feasibility masks.
Molecule apply_unchecked(const Molecule& m, const Action& action);

/// Element counts (including implicit hydrogens) keyed by atomic number.
std::vector<std::pair<int, int>> element_counts(const Molecule& m, const Alphabet& alphabet);

}  // namespace molbuild
