#pragma once

#include <cstddef>
#include <map>
#include <string>

#include "molbuild/constraints.hpp"
#include "molbuild/molecule.hpp"

namespace molbuild {

struct Enumeration {
  /// Canonical key -> one representative molecule.
  std::map<std::string, Molecule> molecules;
  std::size_t states_expanded = 0;
};

/// Exhaustive closure of the feasible action graph from every single-atom
/// start, deduplicated by isomorphism. Every reachable state is a complete
/// molecule since DontChange is always available. Guarded to max_atoms <= 6.
Enumeration enumerate_valid(const DesignSpace& space, std::size_t state_cap = 2'000'000);

}  // namespace molbuild
