#include "molbuild/canonical.hpp"

#include <algorithm>
#include <map>
#include <numeric>

namespace molbuild {

namespace {

using Colors = std::vector<int>;

int rerank(Colors& colors, const std::vector<std::vector<int>>& signatures) {
  std::vector<std::vector<int>> unique = signatures;
  std::sort(unique.begin(), unique.end());
  unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
  for (std::size_t v = 0; v < colors.size(); ++v)
    colors[v] = static_cast<int>(std::lower_bound(unique.begin(), unique.end(), signatures[v]) - unique.begin());
  return static_cast<int>(unique.size());
}

int count_colors(const Colors& colors) {
  if (colors.empty()) return 0;
  return *std::max_element(colors.begin(), colors.end()) + 1;
}

// Equitable refinement: repeatedly split cells by the multiset of
// (bond order, neighbour colour) until no cell splits any further.
void refine(const Molecule& m, Colors& colors) {
  const int n = m.size();
  int classes = count_colors(colors);
  std::vector<std::vector<int>> sig(static_cast<std::size_t>(n));
  while (true) {
    for (int v = 0; v < n; ++v) {
      auto& s = sig[static_cast<std::size_t>(v)];
      s.clear();
      s.push_back(colors[static_cast<std::size_t>(v)]);
      std::vector<int> nb;
      for (int u = 0; u < n; ++u) {
        const int b = m.bond(v, u);
        if (b != 0) nb.push_back(b * 4096 + colors[static_cast<std::size_t>(u)]);
      }
      std::sort(nb.begin(), nb.end());
      s.insert(s.end(), nb.begin(), nb.end());
    }
    const int next = rerank(colors, sig);
    if (next == classes) return;
    classes = next;
  }
}

Colors individualize(const Colors& colors, int v) {
  Colors out(colors.size());
  std::vector<std::vector<int>> sig(colors.size());
  for (std::size_t u = 0; u < colors.size(); ++u)
    sig[u] = {colors[u], static_cast<int>(u) == v ? 0 : 1};
  rerank(out, sig);
  return out;
}

class CanonicalSearch {
 public:
  explicit CanonicalSearch(const Molecule& m) : m_(m), n_(m.size()) {}

  CanonicalForm run() {
    Colors colors(static_cast<std::size_t>(n_));
    for (int v = 0; v < n_; ++v) colors[static_cast<std::size_t>(v)] = m_.atom(v);
    std::vector<std::vector<int>> sig(colors.size());
    for (std::size_t v = 0; v < colors.size(); ++v) sig[v] = {colors[v]};
    rerank(colors, sig);
    std::vector<int> prefix;
    search(colors, prefix);
    return {best_cert_, best_order_};
  }

 private:
  std::string certificate(const std::vector<int>& order) const {
    std::string c;
    c.reserve(static_cast<std::size_t>(2 + 2 * n_ + n_ * (n_ - 1) / 2));
    c.push_back(static_cast<char>(n_ & 0xff));
    c.push_back(static_cast<char>((n_ >> 8) & 0xff));
    for (int v : order) {
      c.push_back(static_cast<char>(m_.atom(v) & 0xff));
      c.push_back(static_cast<char>((m_.atom(v) >> 8) & 0xff));
    }
    for (int i = 0; i < n_; ++i)
      for (int j = i + 1; j < n_; ++j)
        c.push_back(static_cast<char>(m_.bond(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)])));
    return c;
  }

  void leaf(const Colors& colors) {
    std::vector<int> order(static_cast<std::size_t>(n_));
    for (int v = 0; v < n_; ++v) order[static_cast<std::size_t>(colors[static_cast<std::size_t>(v)])] = v;
    std::string cert = certificate(order);
    if (!have_leaf_) {
      have_leaf_ = true;
      first_cert_ = best_cert_ = cert;
      first_order_ = best_order_ = order;
      return;
    }
    if (cert == first_cert_) {
      add_automorphism(first_order_, order);
    } else if (cert == best_cert_) {
      add_automorphism(best_order_, order);
    } else if (cert < best_cert_) {
      best_cert_ = std::move(cert);
      best_order_ = std::move(order);
    }
  }

  void add_automorphism(const std::vector<int>& from, const std::vector<int>& to) {
    std::vector<int> gamma(static_cast<std::size_t>(n_));
    bool identity = true;
    for (int p = 0; p < n_; ++p) {
      gamma[static_cast<std::size_t>(from[static_cast<std::size_t>(p)])] = to[static_cast<std::size_t>(p)];
      identity &= from[static_cast<std::size_t>(p)] == to[static_cast<std::size_t>(p)];
    }
    if (!identity) generators_.push_back(std::move(gamma));
  }

  int find(std::vector<int>& parent, int x) const {
    while (parent[static_cast<std::size_t>(x)] != x) {
      parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
      x = parent[static_cast<std::size_t>(x)];
    }
    return x;
  }

  // Orbit partition under the discovered automorphisms that fix `prefix`.
  std::vector<int> orbits(const std::vector<int>& prefix) {
    std::vector<int> parent(static_cast<std::size_t>(n_));
    std::iota(parent.begin(), parent.end(), 0);
    for (const auto& g : generators_) {
      bool fixes = true;
      for (int p : prefix) fixes &= g[static_cast<std::size_t>(p)] == p;
      if (!fixes) continue;
      for (int v = 0; v < n_; ++v) {
        const int a = find(parent, v);
        const int b = find(parent, g[static_cast<std::size_t>(v)]);
        if (a != b) parent[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
      }
    }
    for (int v = 0; v < n_; ++v) parent[static_cast<std::size_t>(v)] = find(parent, v);
    return parent;
  }

  void search(Colors colors, std::vector<int>& prefix) {
    refine(m_, colors);
    const int classes = count_colors(colors);
    if (classes == n_) {
      leaf(colors);
      return;
    }
    // Target cell: the first colour class with more than one member.
    std::vector<int> size(static_cast<std::size_t>(classes), 0);
    for (int c : colors) ++size[static_cast<std::size_t>(c)];
    int target = 0;
    while (size[static_cast<std::size_t>(target)] < 2) ++target;
    std::vector<int> members;
    for (int v = 0; v < n_; ++v)
      if (colors[static_cast<std::size_t>(v)] == target) members.push_back(v);

    std::vector<int> explored;
    std::size_t seen_generators = 0;
    std::vector<int> orbit;
    for (int w : members) {
      if (!explored.empty()) {
        if (generators_.size() != seen_generators || orbit.empty()) {
          orbit = orbits(prefix);
          seen_generators = generators_.size();
        }
        bool pruned = false;
        for (int e : explored) pruned |= orbit[static_cast<std::size_t>(e)] == orbit[static_cast<std::size_t>(w)];
        if (pruned) continue;
      }
      prefix.push_back(w);
      search(individualize(colors, w), prefix);
      prefix.pop_back();
      explored.push_back(w);
    }
  }

  const Molecule& m_;
  int n_;
  bool have_leaf_ = false;
  std::string first_cert_, best_cert_;
  std::vector<int> first_order_, best_order_;
  std::vector<std::vector<int>> generators_;
};

}  // namespace

CanonicalForm canonical_form(const Molecule& m) {
  if (m.size() == 0) return {std::string(2, '\0'), {}};
  return CanonicalSearch(m).run();
}

std::string canonical_key(const Molecule& m) { return canonical_form(m).key; }

bool isomorphic(const Molecule& a, const Molecule& b) {
  if (a.size() != b.size()) return false;
  return canonical_key(a) == canonical_key(b);
}

std::string key_hex(const std::string& key) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(key.size() * 2);
  for (unsigned char c : key) {
    out.push_back(kHex[c >> 4]);
    out.push_back(kHex[c & 15]);
  }
  return out;
}

}  // namespace molbuild
