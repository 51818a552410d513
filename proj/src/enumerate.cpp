#include "molbuild/enumerate.hpp"

#include <deque>

#include "molbuild/canonical.hpp"
#include "molbuild/error.hpp"
#include "molbuild/masking.hpp"

namespace molbuild {

Enumeration enumerate_valid(const DesignSpace& space, std::size_t state_cap) {
  if (space.constraints.max_atoms > 6)
    throw Error(ErrorKind::InvalidArgument, "enumeration is limited to molecules of at most 6 atoms");
  if (!space.constraints.frozen_atoms.empty())
    throw Error(ErrorKind::InvalidArgument, "enumeration does not support frozen atoms");

  Enumeration out;
  std::deque<Molecule> queue;
  const std::size_t k = space.alphabet.size();
  for (std::size_t t = 0; t < k; ++t) {
    Molecule m = Molecule::single(static_cast<int>(t));
    if (!check_structural_constraints(m, space)) continue;
    if (out.molecules.emplace(canonical_key(m), m).second) queue.push_back(std::move(m));
  }

  while (!queue.empty()) {
    const Molecule m = std::move(queue.front());
    queue.pop_front();
    if (++out.states_expanded > state_cap)
      throw Error(ErrorKind::BudgetExceeded, "enumeration exceeded " + std::to_string(state_cap) + " states");

    const ChoiceMask first = feasible_level0(m, space);
    for (int c : first.indices()) {
      if (c == kDontChangeIndex) continue;
      ActionLevelState l1;
      l1.level = Level::L1;
      l1.first = c <= static_cast<int>(k) ? FirstChoice{FirstChoice::Kind::NewAtom, c - 1}
                                          : FirstChoice{FirstChoice::Kind::Existing, c - 1 - static_cast<int>(k)};
      for (int l : feasible_level1(m, space, l1).indices()) {
        ActionLevelState l2 = l1;
        l2.level = Level::L2;
        l2.second = l;
        for (int o : feasible_level2(m, space, l2).indices()) {
          const Action action = l1.first->kind == FirstChoice::Kind::NewAtom
                                    ? Action{AddAtom{l1.first->index, l, o + 1}}
                                    : Action{AddBond{l1.first->index, l, o + 1}};
          Molecule next = apply_unchecked(m, action);
          std::string key = canonical_key(next);
          if (out.molecules.emplace(std::move(key), next).second) queue.push_back(std::move(next));
        }
      }
    }
  }
  return out;
}

}  // namespace molbuild
