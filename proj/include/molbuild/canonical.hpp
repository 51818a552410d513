#pragma once

#include <string>
#include <vector>

#include "molbuild/molecule.hpp"

namespace molbuild {

/// Canonical labelling of a molecule. `order[p]` is the atom placed at
/// canonical position p; `key` is a byte string that is equal for two
/// molecules iff they are isomorphic (atom types and bond orders included).
struct CanonicalForm {
  std::string key;
  std::vector<int> order;
};

/// Colour refinement followed by an individualisation search over the
/// remaining ties, pruned with the automorphisms discovered on the way.
CanonicalForm canonical_form(const Molecule& m);

std::string canonical_key(const Molecule& m);

bool isomorphic(const Molecule& a, const Molecule& b);

/// Hex rendering of a key for logs and JSON.
std::string key_hex(const std::string& key);

}  // namespace molbuild
