// Measurements shared by the unit tests and the acceptance binary.
#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <vector>

#include "molbuild/policy.hpp"
#include "molbuild/rng.hpp"

namespace checks {

using namespace molbuild;

inline std::vector<int> random_perm(int n, Rng& rng) {
  std::vector<int> p(static_cast<std::size_t>(n));
  std::iota(p.begin(), p.end(), 0);
  for (int i = n - 1; i > 0; --i)
    std::swap(p[static_cast<std::size_t>(i)], p[rng.below(static_cast<std::size_t>(i + 1))]);
  return p;
}

/// Adds N(0, scale) noise to every parameter, gates included, so that the
/// attention layers actually contribute.
template <class T>
void perturb(Policy<T>& policy, Rng& rng, double scale) {
  for (auto& v : policy.params()) v += static_cast<T>(rng.normal(0.0, scale));
}

inline ActionLevelState permuted_state(ActionLevelState s, const std::vector<int>& perm) {
  if (s.first && s.first->kind == FirstChoice::Kind::Existing)
    s.first->index = perm[static_cast<std::size_t>(s.first->index)];
  if (s.second) s.second = perm[static_cast<std::size_t>(*s.second)];
  return s;
}

/// Largest deviation from equivariance: class logits must not move and
/// per-atom logits must follow the relabelling.
template <class T>
double equivariance_error(const Policy<T>& policy, const Molecule& m, const std::vector<int>& perm,
                          const ActionLevelState& state) {
  const auto a = policy.forward(m, state);
  const auto b = policy.forward(m.permuted(perm), permuted_state(state, perm));
  const int k = policy.config().k;
  double worst = 0.0;
  auto diff = [&](T x, T y) { worst = std::max(worst, static_cast<double>(std::abs(x - y))); };
  for (int j = 0; j <= k; ++j) diff(a.level0[static_cast<std::size_t>(j)], b.level0[static_cast<std::size_t>(j)]);
  for (int i = 0; i < m.size(); ++i) {
    const auto pi = static_cast<std::size_t>(perm[static_cast<std::size_t>(i)]);
    diff(a.level0[static_cast<std::size_t>(k + 1 + i)], b.level0[k + 1 + pi]);
    diff(a.level1[static_cast<std::size_t>(i)], b.level1[pi]);
  }
  for (std::size_t o = 0; o < a.level2.size(); ++o) diff(a.level2[o], b.level2[o]);
  return worst;
}

/// Worst relative error between analytic and central-difference gradients.
/// Half the coordinates are drawn uniformly, half among coordinates with a
/// non-zero analytic gradient.
inline double gradient_check(Policy<double>& policy, const std::vector<TrainItem>& batch, const DesignSpace& space,
                             int coordinates, Rng& rng, double h = 1e-5) {
  std::vector<double> grad;
  policy.loss_and_grad(batch, space, grad);
  std::vector<std::size_t> active;
  for (std::size_t i = 0; i < grad.size(); ++i)
    if (grad[i] != 0.0) active.push_back(i);
  double worst = 0.0;
  for (int t = 0; t < coordinates; ++t) {
    const std::size_t i = (t % 2 == 0 || active.empty()) ? rng.below(grad.size()) : active[rng.below(active.size())];
    double& p = policy.params()[i];
    const double old = p;
    p = old + h;
    const double up = policy.loss(batch, space);
    p = old - h;
    const double down = policy.loss(batch, space);
    p = old;
    const double numeric = (up - down) / (2.0 * h);
    const double rel = std::abs(numeric - grad[i]) / std::max({std::abs(numeric), std::abs(grad[i]), 1e-8});
    worst = std::max(worst, rel);
  }
  return worst;
}

/// Explicit sequence tree: every non-terminal prefix has a categorical
/// distribution over its children (zero entries are masked).
class ToySpace {
 public:
  using State = std::vector<int>;

  std::map<std::vector<int>, std::vector<double>> children;

  bool terminal(const State& s) const { return !children.count(s); }
  State advance(const State& s, int c) const {
    State next = s;
    next.push_back(c);
    return next;
  }
  void log_probs(const std::vector<const State*>& states, std::vector<std::vector<double>>& out) const {
    out.resize(states.size());
    for (std::size_t i = 0; i < states.size(); ++i) {
      const auto& p = children.at(*states[i]);
      out[i].resize(p.size());
      for (std::size_t c = 0; c < p.size(); ++c)
        out[i][c] = p[c] > 0 ? std::log(p[c]) : -std::numeric_limits<double>::infinity();
    }
  }

  /// Exact probability of every complete sequence.
  std::map<std::vector<int>, double> sequences() const {
    std::map<std::vector<int>, double> out;
    std::vector<std::pair<State, double>> stack{{State{}, 1.0}};
    while (!stack.empty()) {
      auto [s, p] = stack.back();
      stack.pop_back();
      if (terminal(s)) {
        out[s] = p;
        continue;
      }
      const auto& probs = children.at(s);
      for (std::size_t c = 0; c < probs.size(); ++c)
        if (probs[c] > 0) stack.push_back({advance(s, static_cast<int>(c)), p * probs[c]});
    }
    return out;
  }
};

/// Three toy policies over six complete sequences of uneven length.
inline std::vector<ToySpace> toy_policies() {
  std::vector<ToySpace> out(3);
  // Two steps, 2 x 3 sequences.
  out[0].children = {{{}, {0.3, 0.7}}, {{0}, {0.2, 0.5, 0.3}}, {{1}, {0.6, 0.1, 0.3}}};
  // Uneven depths: one early stop, one masked branch.
  out[1].children = {{{}, {0.5, 0.25, 0.25}},
                     {{0}, {0.9, 0.1}},
                     {{1}, {0.4, 0.0, 0.6}},
                     {{1, 2}, {0.5, 0.5}}};
  // Highly skewed probabilities.
  out[2].children = {{{}, {0.01, 0.98, 0.01}}, {{1}, {0.97, 0.02, 0.01}}, {{1, 0}, {0.999, 0.001}}};
  return out;
}

}  // namespace checks
