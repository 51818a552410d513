#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "molbuild/constraints.hpp"
#include "molbuild/error.hpp"
#include "molbuild/molecule.hpp"

namespace molbuild {

/// Parse failure with the zero-based character offset it refers to.
class SmilesError : public Error {
 public:
  SmilesError(ErrorKind kind, std::size_t position, const std::string& message)
      : Error(kind, message + " (at position " + std::to_string(position) + ")"), position_(position) {}
  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

/// Parses a single connected SMILES string. Aromatic input is kekulised;
/// bracket hydrogen counts must agree with the alphabet's valence model
/// (implicit hydrogens are always the remaining valence). Stereo bonds,
/// isotopes, atom classes and '.' are rejected.
Molecule parse_smiles(std::string_view smiles, const Alphabet& alphabet);

/// Canonical SMILES (Kekulé form). Charged or chiral atoms, and atoms outside
/// the organic subset, are written in brackets with explicit hydrogens.
std::string write_smiles(const Molecule& m, const Alphabet& alphabet);

/// Initial single atom plus the actions rebuilding a molecule, ending with
/// DontChange.
struct ActionTrace {
  Molecule initial;
  std::vector<Action> steps;
};

/// Breadth-first spanning tree from atom 0 (lowest index first): AddAtom
/// along tree edges, then AddBond for ring closures, then DontChange.
ActionTrace to_action_trace(const Molecule& m);

/// Replays a trace. With a design space every step is checked against the
/// masks (throws InfeasibleAction); without one the actions are applied raw.
Molecule replay(const ActionTrace& trace, const DesignSpace* space = nullptr);

/// Sub-action decisions of a trace, in order.
std::vector<int> trace_choices(const ActionTrace& trace, std::size_t alphabet_size);

/// Reads a corpus file: one SMILES per line, blank and '#' lines skipped.
std::vector<std::string> read_corpus(const std::string& path);

}  // namespace molbuild
