#pragma once

#include <optional>
#include <vector>

#include "molbuild/constraints.hpp"
#include "molbuild/molecule.hpp"

namespace molbuild {

enum class Level { L0 = 0, L1 = 1, L2 = 2 };

/// What was picked at level 0: a new atom of some alphabet type, or an
/// existing atom that will receive a new bond.
struct FirstChoice {
  enum class Kind { NewAtom, Existing };
  Kind kind = Kind::NewAtom;
  int index = 0;
  bool operator==(const FirstChoice&) const = default;
};

struct ActionLevelState {
  Level level = Level::L0;
  std::optional<FirstChoice> first;
  std::optional<int> second;
  bool operator==(const ActionLevelState&) const = default;
};

/// Boolean mask over the logits of one action level.
///   level 0: [DontChange, new type 0..k-1, existing atom 0..n-1]
///   level 1: atom 0..n-1
///   level 2: bond order 1..y (stored at index order-1)
class ChoiceMask {
 public:
  ChoiceMask() = default;
  explicit ChoiceMask(std::size_t size) : allowed_(size, 0) {}

  std::size_t size() const noexcept { return allowed_.size(); }
  bool operator[](std::size_t i) const { return allowed_[i] != 0; }
  void set(std::size_t i, bool v = true) { allowed_[i] = v ? 1 : 0; }
  std::size_t count() const;
  bool any() const { return count() > 0; }
  std::vector<int> indices() const;

  bool operator==(const ChoiceMask&) const = default;

 private:
  std::vector<char> allowed_;
};

// Level-0 index helpers.
constexpr int kDontChangeIndex = 0;
inline int new_atom_index(int type) { return 1 + type; }
inline int existing_atom_index(int atom, std::size_t k) { return 1 + static_cast<int>(k) + atom; }

/// Level 0 with full lookahead: a choice is set iff some (second atom, order)
/// completion produces a molecule satisfying valence and all constraints.
/// Assumes `m` itself satisfies the constraints.
ChoiceMask feasible_level0(const Molecule& m, const DesignSpace& space);
ChoiceMask feasible_level1(const Molecule& m, const DesignSpace& space, const ActionLevelState& state);
ChoiceMask feasible_level2(const Molecule& m, const DesignSpace& space, const ActionLevelState& state);
ChoiceMask feasible(const Molecule& m, const DesignSpace& space, const ActionLevelState& state);

/// True iff the full action keeps `m` valid under valence, frozen atoms,
/// atom cap and structural rules.
bool action_feasible(const Molecule& m, const DesignSpace& space, const Action& action);

/// Checked transition; throws InfeasibleAction when the action is not allowed.
Molecule apply_action(const Molecule& m, const Action& action, const DesignSpace& space);

/// Sub-action indices (one per level) that encode `action`.
std::vector<int> decompose(const Action& action, std::size_t alphabet_size);

/// Incremental construction state: a molecule, the pending sub-action levels
/// and the history of choices. Choices are trusted to come from the masks.
class DesignState {
 public:
  DesignState() = default;
  explicit DesignState(Molecule initial) : molecule_(std::move(initial)) {}

  const Molecule& molecule() const noexcept { return molecule_; }
  const ActionLevelState& level_state() const noexcept { return level_; }
  bool done() const noexcept { return done_; }
  const std::vector<int>& choices() const noexcept { return choices_; }
  const std::vector<Action>& actions() const noexcept { return actions_; }

  /// Advances by one sub-action. Returns the completed action, if any.
  std::optional<Action> step(int choice, std::size_t alphabet_size);

  ChoiceMask mask(const DesignSpace& space) const { return feasible(molecule_, space, level_); }

 private:
  Molecule molecule_;
  ActionLevelState level_;
  bool done_ = false;
  std::vector<int> choices_;
  std::vector<Action> actions_;
};

}  // namespace molbuild
