#include "molbuild/masking.hpp"

#include <algorithm>

#include "molbuild/error.hpp"

namespace molbuild {

namespace {

// Structural rules on the hypothetical successor. The current molecule is
// assumed to satisfy them already, so only what the action can change is
// re-examined: rings (AddBond only) and patterns centred on the endpoints.
bool structure_ok(const Molecule& m, const DesignSpace& space, const Action& action, bool check_rings = true) {
  const auto& c = space.constraints;
  if (!c.has_structural_rules()) return true;
  const Molecule next = apply_unchecked(m, action);
  int a = 0;
  int b = 0;
  if (const auto* add = std::get_if<AddAtom>(&action)) {
    a = next.size() - 1;
    b = add->target;
  } else if (const auto* bond = std::get_if<AddBond>(&action)) {
    a = bond->first;
    b = bond->second;
    if (check_rings && c.allowed_ring_sizes) {
      for (int size : ring_sizes(next))
        if (!c.allowed_ring_sizes->contains(size)) return false;
    }
  } else {
    return true;
  }
  for (const auto& rule : c.forbidden_patterns) {
    for (int centre : {a, b}) {
      if (!pattern_matches_at(next, space.alphabet, rule.pattern, centre)) continue;
      if (rule.exception && pattern_matches_at(next, space.alphabet, *rule.exception, centre)) continue;
      return false;
    }
  }
  return true;
}

bool ring_ok(const Molecule& m, const DesignSpace& space, int j, int l) {
  if (!space.constraints.allowed_ring_sizes) return true;
  const Molecule next = apply_unchecked(m, AddBond{j, l, 1});
  for (int size : ring_sizes(next))
    if (!space.constraints.allowed_ring_sizes->contains(size)) return false;
  return true;
}

bool patterns_ok(const Molecule& m, const DesignSpace& space, const Action& action) {
  if (space.constraints.forbidden_patterns.empty()) return true;
  return structure_ok(m, space, action, /*check_rings=*/false);
}

int max_new_atom_order(const Molecule& m, const DesignSpace& space, int type, int target) {
  return std::min({valence_slack(m, target, space.alphabet), space.alphabet[static_cast<std::size_t>(type)].valence,
                   space.alphabet.max_bond_order()});
}

int max_bond_order_between(const Molecule& m, const DesignSpace& space, int j, int l) {
  return std::min({valence_slack(m, j, space.alphabet), valence_slack(m, l, space.alphabet),
                   space.alphabet.max_bond_order()});
}

bool new_atom_completion(const Molecule& m, const DesignSpace& space, int type, int target) {
  if (space.constraints.frozen(target)) return false;
  const int max_order = max_new_atom_order(m, space, type, target);
  for (int o = 1; o <= max_order; ++o)
    if (structure_ok(m, space, AddAtom{type, target, o})) return true;
  return false;
}

bool bond_completion(const Molecule& m, const DesignSpace& space, int j, int l) {
  if (j == l || m.bond(j, l) != 0) return false;
  if (space.constraints.frozen(j) || space.constraints.frozen(l)) return false;
  const int max_order = max_bond_order_between(m, space, j, l);
  if (max_order < 1) return false;
  if (!ring_ok(m, space, j, l)) return false;
  for (int o = 1; o <= max_order; ++o)
    if (patterns_ok(m, space, AddBond{j, l, o})) return true;
  return false;
}

}  // namespace

std::size_t ChoiceMask::count() const {
  return static_cast<std::size_t>(std::count(allowed_.begin(), allowed_.end(), 1));
}

std::vector<int> ChoiceMask::indices() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < allowed_.size(); ++i)
    if (allowed_[i]) out.push_back(static_cast<int>(i));
  return out;
}

ChoiceMask feasible_level0(const Molecule& m, const DesignSpace& space) {
  const std::size_t k = space.alphabet.size();
  const int n = m.size();
  ChoiceMask mask(1 + k + static_cast<std::size_t>(n));
  mask.set(kDontChangeIndex);
  if (n < space.constraints.max_atoms) {
    for (std::size_t type = 0; type < k; ++type) {
      for (int l = 0; l < n; ++l) {
        if (new_atom_completion(m, space, static_cast<int>(type), l)) {
          mask.set(static_cast<std::size_t>(new_atom_index(static_cast<int>(type))));
          break;
        }
      }
    }
  }
  for (int j = 0; j < n; ++j) {
    if (space.constraints.frozen(j) || valence_slack(m, j, space.alphabet) < 1) continue;
    for (int l = 0; l < n; ++l) {
      if (bond_completion(m, space, j, l)) {
        mask.set(static_cast<std::size_t>(existing_atom_index(j, k)));
        break;
      }
    }
  }
  return mask;
}

ChoiceMask feasible_level1(const Molecule& m, const DesignSpace& space, const ActionLevelState& state) {
  const int n = m.size();
  ChoiceMask mask(static_cast<std::size_t>(n));
  if (state.level != Level::L1 || !state.first) return mask;
  const FirstChoice& first = *state.first;
  if (first.kind == FirstChoice::Kind::NewAtom) {
    if (n >= space.constraints.max_atoms) return mask;
    for (int l = 0; l < n; ++l)
      if (new_atom_completion(m, space, first.index, l)) mask.set(static_cast<std::size_t>(l));
  } else {
    for (int l = 0; l < n; ++l)
      if (bond_completion(m, space, first.index, l)) mask.set(static_cast<std::size_t>(l));
  }
  return mask;
}

ChoiceMask feasible_level2(const Molecule& m, const DesignSpace& space, const ActionLevelState& state) {
  const int y = space.alphabet.max_bond_order();
  ChoiceMask mask(static_cast<std::size_t>(y));
  if (state.level != Level::L2 || !state.first || !state.second) return mask;
  const FirstChoice& first = *state.first;
  const int l = *state.second;
  for (int o = 1; o <= y; ++o) {
    Action action = first.kind == FirstChoice::Kind::NewAtom ? Action{AddAtom{first.index, l, o}}
                                                             : Action{AddBond{first.index, l, o}};
    if (action_feasible(m, space, action)) mask.set(static_cast<std::size_t>(o - 1));
  }
  return mask;
}

ChoiceMask feasible(const Molecule& m, const DesignSpace& space, const ActionLevelState& state) {
  switch (state.level) {
    case Level::L0: return feasible_level0(m, space);
    case Level::L1: return feasible_level1(m, space, state);
    case Level::L2: return feasible_level2(m, space, state);
  }
  return {};
}

bool action_feasible(const Molecule& m, const DesignSpace& space, const Action& action) {
  const int n = m.size();
  const int y = space.alphabet.max_bond_order();
  const auto& c = space.constraints;
  if (std::holds_alternative<DontChange>(action)) return true;
  if (const auto* a = std::get_if<AddAtom>(&action)) {
    if (a->type < 0 || a->type >= static_cast<int>(space.alphabet.size())) return false;
    if (a->target < 0 || a->target >= n || n >= c.max_atoms || c.frozen(a->target)) return false;
    if (a->order < 1 || a->order > y || a->order > max_new_atom_order(m, space, a->type, a->target)) return false;
    return structure_ok(m, space, action);
  }
  const auto& b = std::get<AddBond>(action);
  if (b.first < 0 || b.first >= n || b.second < 0 || b.second >= n || b.first == b.second) return false;
  if (m.bond(b.first, b.second) != 0 || c.frozen(b.first) || c.frozen(b.second)) return false;
  if (b.order < 1 || b.order > max_bond_order_between(m, space, b.first, b.second)) return false;
  return structure_ok(m, space, action);
}

Molecule apply_action(const Molecule& m, const Action& action, const DesignSpace& space) {
  if (!action_feasible(m, space, action))
    throw Error(ErrorKind::InfeasibleAction, to_string(action) + " is not allowed on this molecule");
  return apply_unchecked(m, action);
}

std::vector<int> decompose(const Action& action, std::size_t alphabet_size) {
  if (const auto* a = std::get_if<AddAtom>(&action)) return {new_atom_index(a->type), a->target, a->order - 1};
  if (const auto* b = std::get_if<AddBond>(&action))
    return {existing_atom_index(b->first, alphabet_size), b->second, b->order - 1};
  return {kDontChangeIndex};
}

std::optional<Action> DesignState::step(int choice, std::size_t alphabet_size) {
  if (done_) throw Error(ErrorKind::InfeasibleAction, "design already completed");
  choices_.push_back(choice);
  const int k = static_cast<int>(alphabet_size);
  switch (level_.level) {
    case Level::L0:
      if (choice == kDontChangeIndex) {
        done_ = true;
        actions_.emplace_back(DontChange{});
        return actions_.back();
      }
      if (choice <= k)
        level_.first = FirstChoice{FirstChoice::Kind::NewAtom, choice - 1};
      else
        level_.first = FirstChoice{FirstChoice::Kind::Existing, choice - 1 - k};
      level_.level = Level::L1;
      return std::nullopt;
    case Level::L1:
      level_.second = choice;
      level_.level = Level::L2;
      return std::nullopt;
    case Level::L2: {
      const int order = choice + 1;
      const FirstChoice first = *level_.first;
      Action action = first.kind == FirstChoice::Kind::NewAtom ? Action{AddAtom{first.index, *level_.second, order}}
                                                               : Action{AddBond{first.index, *level_.second, order}};
      molecule_ = apply_unchecked(molecule_, action);
      level_ = ActionLevelState{};
      actions_.push_back(action);
      return action;
    }
  }
  return std::nullopt;
}

}  // namespace molbuild
