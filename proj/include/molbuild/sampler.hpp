#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <set>
#include <vector>

#include "molbuild/constraints.hpp"
#include "molbuild/error.hpp"
#include "molbuild/masking.hpp"
#include "molbuild/policy.hpp"
#include "molbuild/rng.hpp"

namespace molbuild {

/// log(1 - exp(a)) for a <= 0.
inline double log1mexp(double a) {
  if (a >= 0.0) return -std::numeric_limits<double>::infinity();
  return a > -0.6931471805599453 ? std::log(-std::expm1(a)) : std::log1p(-std::exp(a));
}

/// Perturbed score of a child whose own Gumbel is `g`, given the parent's
/// score `parent` and the maximum `z` over its siblings, so that the children
/// jointly have maximum `parent`.
inline double conditional_gumbel(double parent, double z, double g) {
  const double v = parent - g + log1mexp(g - z);
  return parent - std::max(0.0, v) - std::log1p(std::exp(-std::abs(v)));
}

template <class State>
struct BeamResult {
  std::vector<int> choices;
  double log_prob = 0.0;
  double perturbed = 0.0;
  State state;
};

/// Samples up to `beam` distinct complete sequences without replacement
/// (Gumbel-top-k over the sequence tree). The space must provide
///   using State;
///   bool terminal(const State&) const;
///   State advance(const State&, int choice) const;
///   void log_probs(const std::vector<const State*>&, std::vector<std::vector<double>>&) const;
/// where log_probs yields one log-probability per choice (-inf if masked).
/// Complete sequences listed in `exclude` (keyed by the full choice list,
/// `prefix` included) are dropped when they appear.
template <class Space>
std::vector<BeamResult<typename Space::State>> stochastic_beam_search(
    const Space& space, const typename Space::State& root, std::size_t beam, Rng& rng,
    const std::vector<int>& prefix = {}, const std::set<std::vector<int>>* exclude = nullptr) {
  using State = typename Space::State;
  struct Node {
    State state;
    std::vector<int> choices;
    double phi = 0.0;
    double g = 0.0;
    bool done = false;
  };
  std::vector<Node> frontier;
  if (beam == 0) return {};
  frontier.push_back({root, prefix, 0.0, 0.0, space.terminal(root)});
  std::vector<std::vector<double>> logp;
  while (true) {
    std::vector<const State*> open;
    for (const auto& node : frontier)
      if (!node.done) open.push_back(&node.state);
    if (open.empty()) break;
    space.log_probs(open, logp);
    std::vector<Node> candidates;
    std::size_t o = 0;
    for (auto& node : frontier) {
      if (node.done) {
        candidates.push_back(std::move(node));
        continue;
      }
      const auto& lp = logp[o++];
      std::vector<std::pair<int, double>> kids;  // choice, perturbed log-prob
      double z = -std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < lp.size(); ++c) {
        if (!std::isfinite(lp[c])) continue;
        const double gi = node.phi + lp[c] + rng.gumbel();
        kids.emplace_back(static_cast<int>(c), gi);
        z = std::max(z, gi);
      }
      for (const auto& [c, gi] : kids) {
        Node child;
        child.phi = node.phi + lp[static_cast<std::size_t>(c)];
        child.g = conditional_gumbel(node.g, z, gi);
        child.choices = node.choices;
        child.choices.push_back(c);
        child.state = space.advance(node.state, c);
        child.done = space.terminal(child.state);
        if (child.done && exclude && exclude->count(child.choices)) continue;
        candidates.push_back(std::move(child));
      }
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Node& a, const Node& b) { return a.g > b.g; });
    if (candidates.size() > beam) candidates.resize(beam);
    frontier = std::move(candidates);
  }
  std::vector<BeamResult<State>> out;
  out.reserve(frontier.size());
  for (auto& node : frontier) out.push_back({std::move(node.choices), node.phi, node.g, std::move(node.state)});
  return out;
}

/// Sequence tree of molecular designs under a policy snapshot: one choice
/// per action level, masked by the feasibility engine.
template <class T>
class MoleculeSpace {
 public:
  using State = DesignState;

  MoleculeSpace(const Policy<T>& policy, const DesignSpace& space) : policy_(policy), space_(space) {}

  bool terminal(const State& s) const { return s.done(); }

  State advance(const State& s, int choice) const {
    State next = s;
    next.step(choice, space_.alphabet.size());
    return next;
  }

  void log_probs(const std::vector<const State*>& states, std::vector<std::vector<double>>& out) const {
    out.resize(states.size());
    for (std::size_t i = 0; i < states.size(); ++i) {
      const ChoiceMask mask = states[i]->mask(space_);
      const auto logits = policy_.forward(states[i]->molecule(), states[i]->level_state());
      const auto lp = masked_log_distribution(logits.active(), mask);
      out[i].assign(lp.begin(), lp.end());
    }
  }

  const DesignSpace& design_space() const noexcept { return space_; }

 private:
  const Policy<T>& policy_;
  const DesignSpace& space_;
};

/// Objective over a batch of molecules; failures are reported as -inf.
using BatchObjective = std::function<std::vector<double>(const std::vector<Molecule>&)>;

struct ScoredTrace {
  Molecule molecule;
  double objective = 0.0;
  std::vector<int> choices;
  std::vector<Action> actions;
};

struct TasarConfig {
  std::size_t beam = 64;
  /// Committed sub-actions per round.
  std::size_t sigma = 12;
  /// Completed traces per call; 0 means 4 * beam.
  std::size_t budget = 0;
};

struct TasarResult {
  std::vector<ScoredTrace> traces;
  std::size_t rounds = 0;
};

template <class State>
struct TasarTrace {
  std::vector<int> choices;
  State state;
  double objective = 0.0;
};

/// Take-a-step-and-reconsider sampling: beam search from the committed
/// prefix, score the new complete sequences, then commit `sigma` more
/// choices along the best sequence seen so far and search again. Sequences
/// are never returned twice. Stops once the committed prefix is complete,
/// nothing new can be sampled, or `budget` sequences have been scored.
template <class Space>
std::vector<TasarTrace<typename Space::State>> tasar_search(
    const Space& space, const typename Space::State& root, const TasarConfig& config,
    const std::function<std::vector<double>(const std::vector<const typename Space::State*>&)>& score, Rng& rng,
    std::size_t* rounds = nullptr) {
  using State = typename Space::State;
  if (config.beam == 0 || config.sigma == 0) throw Error(ErrorKind::InvalidArgument, "beam and sigma must be positive");
  const std::size_t budget = config.budget == 0 ? 4 * config.beam : config.budget;
  if (budget < config.beam) throw Error(ErrorKind::InvalidArgument, "budget must be at least the beam width");
  std::vector<TasarTrace<State>> out;
  std::set<std::vector<int>> seen;
  std::vector<int> committed;
  State current = root;
  std::ptrdiff_t incumbent = -1;
  if (rounds) *rounds = 0;
  while (!space.terminal(current)) {
    if (rounds) ++*rounds;
    auto sampled = stochastic_beam_search(space, current, config.beam, rng, committed, &seen);
    const std::size_t first_new = out.size();
    for (auto& s : sampled)
      if (seen.insert(s.choices).second) out.push_back({std::move(s.choices), std::move(s.state), 0.0});
    if (out.size() == first_new) break;
    std::vector<const State*> states;
    for (std::size_t i = first_new; i < out.size(); ++i) states.push_back(&out[i].state);
    const std::vector<double> values = score(states);
    if (values.size() != states.size()) throw Error(ErrorKind::ObjectiveFailure, "objective returned wrong count");
    for (std::size_t i = 0; i < values.size(); ++i) {
      auto& t = out[first_new + i];
      t.objective = std::isnan(values[i]) ? -std::numeric_limits<double>::infinity() : values[i];
      if (incumbent < 0 || t.objective > out[static_cast<std::size_t>(incumbent)].objective)
        incumbent = static_cast<std::ptrdiff_t>(first_new + i);
    }
    if (out.size() >= budget) break;
    const std::vector<int> best = out[static_cast<std::size_t>(incumbent)].choices;
    const std::size_t next = std::min(best.size(), committed.size() + config.sigma);
    for (std::size_t i = committed.size(); i < next; ++i) {
      current = space.advance(current, best[i]);
      committed.push_back(best[i]);
    }
  }
  return out;
}

/// tasar_search over molecular designs starting from `m0`.
template <class T>
TasarResult tasar_sample(const Policy<T>& policy, const Molecule& m0, const DesignSpace& space,
                         const TasarConfig& config, const BatchObjective& objective, Rng& rng);

extern template TasarResult tasar_sample(const Policy<float>&, const Molecule&, const DesignSpace&,
                                         const TasarConfig&, const BatchObjective&, Rng&);
extern template TasarResult tasar_sample(const Policy<double>&, const Molecule&, const DesignSpace&,
                                         const TasarConfig&, const BatchObjective&, Rng&);

}  // namespace molbuild
