#include "molbuild/constraints.hpp"

#include <algorithm>
#include <cstdint>
#include <numeric>

#include "molbuild/error.hpp"

namespace molbuild {

namespace {

using EdgeSet = std::vector<std::uint64_t>;

struct Candidate {
  int length;
  EdgeSet edges;
};

int lowest_bit(const EdgeSet& v) {
  for (std::size_t w = 0; w < v.size(); ++w)
    if (v[w] != 0) return static_cast<int>(w * 64) + __builtin_ctzll(v[w]);
  return -1;
}

bool test_bit(const EdgeSet& v, int bit) {
  return (v[static_cast<std::size_t>(bit / 64)] >> (bit % 64)) & 1ULL;
}

void set_bit(EdgeSet& v, int bit) { v[static_cast<std::size_t>(bit / 64)] |= 1ULL << (bit % 64); }

bool symbol_matches(const std::string& pattern_symbol, const AtomSpec& spec) {
  return pattern_symbol == "*" || pattern_symbol == spec.symbol;
}

bool assign_neighbors(const Molecule& m, const Alphabet& alphabet, const std::vector<NeighborSpec>& specs,
                      std::size_t next, const std::vector<int>& nbrs, std::vector<char>& used, int center) {
  if (next == specs.size()) return true;
  const auto& want = specs[next];
  for (std::size_t k = 0; k < nbrs.size(); ++k) {
    if (used[k]) continue;
    const int u = nbrs[k];
    if (!symbol_matches(want.symbol, alphabet[static_cast<std::size_t>(m.atom(u))])) continue;
    if (want.order != 0 && m.bond(center, u) != want.order) continue;
    used[k] = 1;
    if (assign_neighbors(m, alphabet, specs, next + 1, nbrs, used, center)) return true;
    used[k] = 0;
  }
  return false;
}

NeighborSpec neighbor_from_json(const nlohmann::json& j) {
  if (j.is_array()) return {j.at(0).get<std::string>(), j.size() > 1 ? j.at(1).get<int>() : 0};
  return {j.value("symbol", std::string("*")), j.value("order", 0)};
}

AtomPattern pattern_from_json(const nlohmann::json& j) {
  for (const auto& [key, _] : j.items())
    if (key != "center" && key != "neighbors" && key != "hydrogens" && key != "exception" && key != "name")
      throw Error(ErrorKind::ConfigError, "unknown pattern key '" + key + "'");
  AtomPattern p;
  p.center = j.value("center", std::string("*"));
  if (j.contains("neighbors"))
    for (const auto& n : j.at("neighbors")) p.neighbors.push_back(neighbor_from_json(n));
  if (j.contains("hydrogens") && !j.at("hydrogens").is_null()) p.hydrogens = j.at("hydrogens").get<int>();
  if (p.neighbors.size() > 7) throw Error(ErrorKind::ConfigError, "patterns are limited to 8 atoms");
  return p;
}

nlohmann::json pattern_to_json(const AtomPattern& p) {
  nlohmann::json nbrs = nlohmann::json::array();
  for (const auto& n : p.neighbors) nbrs.push_back({n.symbol, n.order});
  nlohmann::json j = {{"center", p.center}, {"neighbors", nbrs}};
  if (p.hydrogens) j["hydrogens"] = *p.hydrogens;
  return j;
}

}  // namespace

bool Constraints::frozen(int atom) const {
  return std::find(frozen_atoms.begin(), frozen_atoms.end(), atom) != frozen_atoms.end();
}

Constraints Constraints::solvent_structural(int max_atoms) {
  Constraints c;
  c.max_atoms = max_atoms;
  c.allowed_ring_sizes = std::set<int>{5, 6};
  c.forbidden_patterns = {
      {"N-N single bond", {"N", {{"N", 1}}, std::nullopt}, std::nullopt},
      {"O-O single bond", {"O", {{"O", 1}}, std::nullopt}, std::nullopt},
      {"C single-bonded to two N (urea excepted)",
       {"C", {{"N", 1}, {"N", 1}}, std::nullopt},
       AtomPattern{"C", {{"O", 2}}, std::nullopt}},
      {"C single-bonded to N, O, H and one more group",
       {"C", {{"N", 1}, {"O", 1}, {"*", 1}}, 1},
       std::nullopt},
  };
  return c;
}

nlohmann::json Constraints::to_json() const {
  nlohmann::json j;
  j["max_atoms"] = max_atoms;
  if (allowed_ring_sizes)
    j["allowed_ring_sizes"] = std::vector<int>(allowed_ring_sizes->begin(), allowed_ring_sizes->end());
  else
    j["allowed_ring_sizes"] = nullptr;
  nlohmann::json pats = nlohmann::json::array();
  for (const auto& f : forbidden_patterns) {
    nlohmann::json p = pattern_to_json(f.pattern);
    p["name"] = f.name;
    if (f.exception) p["exception"] = pattern_to_json(*f.exception);
    pats.push_back(p);
  }
  j["forbidden_patterns"] = pats;
  j["frozen_atoms"] = frozen_atoms;
  return j;
}

Constraints Constraints::from_json(const nlohmann::json& j) {
  try {
    Constraints c;
    for (const auto& [key, _] : j.items())
      if (key != "max_atoms" && key != "allowed_ring_sizes" && key != "forbidden_patterns" &&
          key != "frozen_atoms" && key != "preset")
        throw Error(ErrorKind::ConfigError, "unknown constraints key '" + key + "'");
    if (j.contains("preset")) {
      const auto name = j.at("preset").get<std::string>();
      if (name == "solvent-structural")
        c = solvent_structural();
      else if (name != "none")
        throw Error(ErrorKind::ConfigError, "unknown constraints preset '" + name + "'");
    }
    c.max_atoms = j.value("max_atoms", c.max_atoms);
    if (c.max_atoms < 1) throw Error(ErrorKind::ConfigError, "max_atoms must be positive");
    if (j.contains("allowed_ring_sizes")) {
      const auto& r = j.at("allowed_ring_sizes");
      if (r.is_null())
        c.allowed_ring_sizes.reset();
      else
        c.allowed_ring_sizes = r.get<std::set<int>>();
    }
    if (j.contains("forbidden_patterns")) {
      c.forbidden_patterns.clear();
      for (const auto& p : j.at("forbidden_patterns")) {
        ForbiddenPattern f;
        f.name = p.value("name", std::string("pattern"));
        f.pattern = pattern_from_json(p);
        if (p.contains("exception") && !p.at("exception").is_null()) f.exception = pattern_from_json(p.at("exception"));
        c.forbidden_patterns.push_back(std::move(f));
      }
    }
    if (j.contains("frozen_atoms")) c.frozen_atoms = j.at("frozen_atoms").get<std::vector<int>>();
    std::sort(c.frozen_atoms.begin(), c.frozen_atoms.end());
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ConfigError, std::string("malformed constraints: ") + e.what());
  }
}

std::vector<int> ring_sizes(const Molecule& m) {
  const int n = m.size();
  // Restrict to the 2-core: cycles never pass through pendant trees.
  std::vector<int> deg(static_cast<std::size_t>(n));
  std::vector<char> alive(static_cast<std::size_t>(n), 1);
  for (int i = 0; i < n; ++i) deg[static_cast<std::size_t>(i)] = m.degree(i);
  std::vector<int> stack;
  for (int i = 0; i < n; ++i)
    if (deg[static_cast<std::size_t>(i)] <= 1) stack.push_back(i);
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    if (!alive[static_cast<std::size_t>(v)]) continue;
    alive[static_cast<std::size_t>(v)] = 0;
    for (int u = 0; u < n; ++u) {
      if (m.bond(v, u) != 0 && alive[static_cast<std::size_t>(u)]) {
        if (--deg[static_cast<std::size_t>(u)] <= 1) stack.push_back(u);
      }
    }
  }

  std::vector<int> core;
  for (int i = 0; i < n; ++i)
    if (alive[static_cast<std::size_t>(i)]) core.push_back(i);
  if (core.empty()) return {};

  std::vector<std::pair<int, int>> edges;
  std::vector<int> edge_id(static_cast<std::size_t>(n * n), -1);
  for (int a : core)
    for (int b : core)
      if (a < b && m.bond(a, b) != 0) {
        edge_id[static_cast<std::size_t>(a * n + b)] = edge_id[static_cast<std::size_t>(b * n + a)] =
            static_cast<int>(edges.size());
        edges.emplace_back(a, b);
      }

  // Cycle rank of the core: m - n + components.
  int components = 0;
  {
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    for (int s : core) {
      if (seen[static_cast<std::size_t>(s)]) continue;
      ++components;
      std::vector<int> st{s};
      seen[static_cast<std::size_t>(s)] = 1;
      while (!st.empty()) {
        const int v = st.back();
        st.pop_back();
        for (int u : core)
          if (m.bond(v, u) != 0 && !seen[static_cast<std::size_t>(u)]) {
            seen[static_cast<std::size_t>(u)] = 1;
            st.push_back(u);
          }
      }
    }
  }
  const int rank = static_cast<int>(edges.size()) - static_cast<int>(core.size()) + components;
  if (rank <= 0) return {};

  const std::size_t words = (edges.size() + 63) / 64;
  std::vector<Candidate> candidates;

  // Horton candidates: for each root v and non-tree edge (x, y), the cycle
  // P(v, x) + (x, y) + P(y, v) when both tree paths meet only at v.
  std::vector<int> dist(static_cast<std::size_t>(n)), parent(static_cast<std::size_t>(n)),
      branch(static_cast<std::size_t>(n));
  for (int v : core) {
    std::fill(dist.begin(), dist.end(), -1);
    std::fill(parent.begin(), parent.end(), -1);
    dist[static_cast<std::size_t>(v)] = 0;
    branch[static_cast<std::size_t>(v)] = v;
    std::vector<int> queue{v};
    for (std::size_t head = 0; head < queue.size(); ++head) {
      const int x = queue[head];
      for (int u : core) {
        if (m.bond(x, u) == 0 || dist[static_cast<std::size_t>(u)] >= 0) continue;
        dist[static_cast<std::size_t>(u)] = dist[static_cast<std::size_t>(x)] + 1;
        parent[static_cast<std::size_t>(u)] = x;
        branch[static_cast<std::size_t>(u)] = (x == v) ? u : branch[static_cast<std::size_t>(x)];
        queue.push_back(u);
      }
    }
    for (const auto& [x, y] : edges) {
      if (dist[static_cast<std::size_t>(x)] < 0 || dist[static_cast<std::size_t>(y)] < 0) continue;
      if (parent[static_cast<std::size_t>(x)] == y || parent[static_cast<std::size_t>(y)] == x) continue;
      // Paths share only v iff they leave v through different first edges,
      // or one endpoint is v itself.
      if (x != v && y != v && branch[static_cast<std::size_t>(x)] == branch[static_cast<std::size_t>(y)]) continue;
      Candidate c{dist[static_cast<std::size_t>(x)] + dist[static_cast<std::size_t>(y)] + 1, EdgeSet(words, 0)};
      set_bit(c.edges, edge_id[static_cast<std::size_t>(x * n + y)]);
      for (int w = x; w != v; w = parent[static_cast<std::size_t>(w)])
        set_bit(c.edges, edge_id[static_cast<std::size_t>(w * n + parent[static_cast<std::size_t>(w)])]);
      for (int w = y; w != v; w = parent[static_cast<std::size_t>(w)])
        set_bit(c.edges, edge_id[static_cast<std::size_t>(w * n + parent[static_cast<std::size_t>(w)])]);
      candidates.push_back(std::move(c));
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Candidate& a, const Candidate& b) { return a.length < b.length; });

  // Greedy independence test over GF(2).
  std::vector<EdgeSet> basis;
  std::vector<int> pivots;
  std::vector<int> sizes;
  for (auto& c : candidates) {
    EdgeSet v = c.edges;
    for (std::size_t b = 0; b < basis.size(); ++b)
      if (test_bit(v, pivots[b]))
        for (std::size_t w = 0; w < words; ++w) v[w] ^= basis[b][w];
    const int p = lowest_bit(v);
    if (p < 0) continue;
    basis.push_back(std::move(v));
    pivots.push_back(p);
    sizes.push_back(c.length);
    if (static_cast<int>(sizes.size()) == rank) break;
  }
  std::sort(sizes.begin(), sizes.end());
  return sizes;
}

bool pattern_matches_at(const Molecule& m, const Alphabet& alphabet, const AtomPattern& pattern, int center) {
  if (!symbol_matches(pattern.center, alphabet[static_cast<std::size_t>(m.atom(center))])) return false;
  if (pattern.hydrogens && valence_slack(m, center, alphabet) != *pattern.hydrogens) return false;
  if (pattern.neighbors.empty()) return true;
  const std::vector<int> nbrs = m.neighbors(center);
  if (nbrs.size() < pattern.neighbors.size()) return false;
  std::vector<char> used(nbrs.size(), 0);
  return assign_neighbors(m, alphabet, pattern.neighbors, 0, nbrs, used, center);
}

ConstraintReport check_structural_constraints(const Molecule& m, const DesignSpace& space) {
  ConstraintReport report;
  const auto& c = space.constraints;
  if (c.allowed_ring_sizes) {
    for (int size : ring_sizes(m)) {
      if (!c.allowed_ring_sizes->contains(size)) {
        report.ok = false;
        report.violations.push_back("ring of size " + std::to_string(size) + " not allowed");
      }
    }
  }
  for (const auto& rule : c.forbidden_patterns) {
    for (int i = 0; i < m.size(); ++i) {
      if (!pattern_matches_at(m, space.alphabet, rule.pattern, i)) continue;
      if (rule.exception && pattern_matches_at(m, space.alphabet, *rule.exception, i)) continue;
      report.ok = false;
      report.violations.push_back(rule.name + " at atom " + std::to_string(i));
    }
  }
  return report;
}

}  // namespace molbuild
