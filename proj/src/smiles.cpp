#include "molbuild/smiles.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <optional>
#include <functional>
#include <set>
#include <tuple>

#include "molbuild/canonical.hpp"
#include "molbuild/masking.hpp"

namespace molbuild {

namespace {

enum class BondKind { Single = 1, Double = 2, Triple = 3, Quadruple = 4, Aromatic = 5 };

struct ParsedAtom {
  int atomic_number = 0;
  bool aromatic = false;
  bool bracket = false;
  int charge = 0;
  ChiralTag chiral = ChiralTag::None;
  int hydrogens = 0;
  std::size_t position = 0;
};

struct ParsedBond {
  int a;
  int b;
  BondKind kind;
  std::size_t position;
};

struct RingOpen {
  int atom;
  std::optional<BondKind> bond;
  std::size_t position;
};

bool organic_subset(int z) {
  return z == 5 || z == 6 || z == 7 || z == 8 || z == 9 || z == 15 || z == 16 || z == 17 || z == 35 || z == 53;
}

bool aromatic_capable(int z) { return z == 5 || z == 6 || z == 7 || z == 8 || z == 15 || z == 16 || z == 33 || z == 34; }

// Lowest normal valence used to decide which aromatic atoms carry a double
// bond; charged atoms follow their isoelectronic neighbour.
int kekule_valence(int z, int charge) {
  int electrons_like = z - charge;
  switch (electrons_like) {
    case 5: return 3;   // B, C+
    case 6: return 4;   // C, N+
    case 7: return 3;   // N, C-, O+
    case 8: return 2;   // O, N-
    case 9: return 1;   // F, O-
    case 14: return 4;  // Si, P+
    case 15: return 3;  // P, S+
    case 16: return 2;  // S, P-
    case 33: return 3;
    case 34: return 2;
    default: return 0;
  }
}

class Parser {
 public:
  Parser(std::string_view s, const Alphabet& alphabet) : s_(s), alphabet_(alphabet) {}

  Molecule parse() {
    if (s_.empty()) throw SmilesError(ErrorKind::SyntaxError, 0, "empty SMILES");
    int prev = -1;
    std::optional<BondKind> pending;
    std::size_t pending_pos = 0;
    std::vector<int> branches;
    while (pos_ < s_.size()) {
      const char c = s_[pos_];
      if (c == '(') {
        if (prev < 0) fail(ErrorKind::SyntaxError, "branch without a preceding atom");
        if (pending) fail(ErrorKind::SyntaxError, "bond symbol before '('");
        branches.push_back(prev);
        ++pos_;
      } else if (c == ')') {
        if (branches.empty()) fail(ErrorKind::SyntaxError, "unbalanced ')'");
        if (pending) fail(ErrorKind::SyntaxError, "dangling bond symbol before ')'");
        if (pos_ > 0 && s_[pos_ - 1] == '(') fail(ErrorKind::SyntaxError, "empty branch");
        prev = branches.back();
        branches.pop_back();
        ++pos_;
      } else if (c == '-' || c == '=' || c == '#' || c == '$' || c == ':') {
        if (prev < 0) fail(ErrorKind::SyntaxError, "bond symbol without a preceding atom");
        if (pending) fail(ErrorKind::SyntaxError, "two consecutive bond symbols");
        pending = c == '-' ? BondKind::Single
                  : c == '=' ? BondKind::Double
                  : c == '#' ? BondKind::Triple
                  : c == '$' ? BondKind::Quadruple
                             : BondKind::Aromatic;
        pending_pos = pos_;
        ++pos_;
      } else if (c == '/' || c == '\\') {
        fail(ErrorKind::SyntaxError, "directional (stereo) bonds are not supported");
      } else if (c == '.') {
        fail(ErrorKind::SyntaxError, "disconnected components ('.') are not supported");
      } else if (std::isdigit(static_cast<unsigned char>(c)) || c == '%') {
        if (prev < 0) fail(ErrorKind::SyntaxError, "ring closure without a preceding atom");
        const std::size_t at = pos_;
        const int label = ring_label();
        ring_bond(prev, label, pending, at);
        pending.reset();
      } else {
        const int atom = parse_atom();
        if (prev >= 0) {
          BondKind kind = pending ? *pending
                                  : (atoms_[static_cast<std::size_t>(prev)].aromatic &&
                                     atoms_[static_cast<std::size_t>(atom)].aromatic)
                                        ? BondKind::Aromatic
                                        : BondKind::Single;
          add_bond(prev, atom, kind, pending ? pending_pos : atoms_[static_cast<std::size_t>(atom)].position);
        } else if (pending) {
          fail(ErrorKind::SyntaxError, "bond symbol before the first atom");
        }
        pending.reset();
        prev = atom;
      }
    }
    if (pending) throw SmilesError(ErrorKind::SyntaxError, pending_pos, "dangling bond symbol at end of input");
    if (!branches.empty()) throw SmilesError(ErrorKind::SyntaxError, s_.size(), "unclosed branch '('");
    if (!rings_.empty())
      throw SmilesError(ErrorKind::SyntaxError, rings_.begin()->second.position, "unclosed ring bond");
    return build();
  }

 private:
  [[noreturn]] void fail(ErrorKind kind, const std::string& message) const {
    throw SmilesError(kind, pos_, message);
  }

  int ring_label() {
    if (s_[pos_] == '%') {
      if (pos_ + 2 >= s_.size() + 0 || !std::isdigit(static_cast<unsigned char>(s_[pos_ + 1])) ||
          pos_ + 2 >= s_.size() || !std::isdigit(static_cast<unsigned char>(s_[pos_ + 2])))
        fail(ErrorKind::SyntaxError, "'%' must be followed by two digits");
      const int label = (s_[pos_ + 1] - '0') * 10 + (s_[pos_ + 2] - '0');
      pos_ += 3;
      return label;
    }
    return s_[pos_++] - '0';
  }

  void ring_bond(int atom, int label, std::optional<BondKind> bond, std::size_t at) {
    auto it = rings_.find(label);
    if (it == rings_.end()) {
      rings_.emplace(label, RingOpen{atom, bond, at});
      return;
    }
    const RingOpen open = it->second;
    rings_.erase(it);
    if (open.atom == atom) throw SmilesError(ErrorKind::SyntaxError, at, "ring bond closes on the same atom");
    if (open.bond && bond && *open.bond != *bond)
      throw SmilesError(ErrorKind::SyntaxError, at, "conflicting ring-closure bond symbols");
    BondKind kind = bond ? *bond
                    : open.bond ? *open.bond
                    : (atoms_[static_cast<std::size_t>(open.atom)].aromatic && atoms_[static_cast<std::size_t>(atom)].aromatic)
                        ? BondKind::Aromatic
                        : BondKind::Single;
    add_bond(open.atom, atom, kind, at);
  }

  void add_bond(int a, int b, BondKind kind, std::size_t at) {
    for (const auto& e : bonds_)
      if ((e.a == a && e.b == b) || (e.a == b && e.b == a))
        throw SmilesError(ErrorKind::SyntaxError, at, "duplicate bond between the same atoms");
    bonds_.push_back({a, b, kind, at});
  }

  int parse_atom() {
    ParsedAtom atom;
    atom.position = pos_;
    const char c = s_[pos_];
    if (c == '[') {
      parse_bracket(atom);
    } else if (c == '*') {
      fail(ErrorKind::UnsupportedAtom, "wildcard atoms are not supported");
    } else if (std::isupper(static_cast<unsigned char>(c))) {
      std::string sym(1, c);
      if (pos_ + 1 < s_.size() && ((c == 'C' && s_[pos_ + 1] == 'l') || (c == 'B' && s_[pos_ + 1] == 'r')))
        sym.push_back(s_[pos_ + 1]);
      const int z = atomic_number_of(sym);
      if (z == 0 || !organic_subset(z)) fail(ErrorKind::SyntaxError, "'" + sym + "' must be written in brackets");
      atom.atomic_number = z;
      pos_ += sym.size();
    } else if (c == 'b' || c == 'c' || c == 'n' || c == 'o' || c == 'p' || c == 's') {
      atom.atomic_number = atomic_number_of(std::string(1, static_cast<char>(std::toupper(c))));
      atom.aromatic = true;
      ++pos_;
    } else {
      fail(ErrorKind::SyntaxError, std::string("unexpected character '") + c + "'");
    }
    atoms_.push_back(atom);
    return static_cast<int>(atoms_.size()) - 1;
  }

  void parse_bracket(ParsedAtom& atom) {
    atom.bracket = true;
    ++pos_;  // '['
    auto at_end = [&] { return pos_ >= s_.size(); };
    if (at_end()) fail(ErrorKind::SyntaxError, "unterminated bracket atom");
    if (std::isdigit(static_cast<unsigned char>(s_[pos_]))) fail(ErrorKind::SyntaxError, "isotopes are not supported");
    const char c = s_[pos_];
    if (c == '*') fail(ErrorKind::UnsupportedAtom, "wildcard atoms are not supported");
    if (std::isupper(static_cast<unsigned char>(c))) {
      std::string sym(1, c);
      if (pos_ + 1 < s_.size() && std::islower(static_cast<unsigned char>(s_[pos_ + 1]))) {
        std::string two = sym + s_[pos_ + 1];
        if (atomic_number_of(two) != 0) sym = two;
      }
      atom.atomic_number = atomic_number_of(sym);
      if (atom.atomic_number == 0) fail(ErrorKind::SyntaxError, "unknown element '" + sym + "'");
      pos_ += sym.size();
    } else if (std::islower(static_cast<unsigned char>(c))) {
      std::string sym(1, static_cast<char>(std::toupper(c)));
      if (pos_ + 1 < s_.size() && (s_.substr(pos_, 2) == "se" || s_.substr(pos_, 2) == "as"))
        sym.push_back(s_[pos_ + 1]);
      atom.atomic_number = atomic_number_of(sym);
      if (atom.atomic_number == 0 || !aromatic_capable(atom.atomic_number))
        fail(ErrorKind::SyntaxError, "invalid aromatic symbol");
      atom.aromatic = true;
      pos_ += sym.size();
    } else {
      fail(ErrorKind::SyntaxError, "expected an element symbol");
    }
    if (atom.atomic_number == 1) fail(ErrorKind::UnsupportedAtom, "explicit hydrogen atoms are not supported");
    if (!at_end() && s_[pos_] == '@') {
      ++pos_;
      if (!at_end() && s_[pos_] == '@') {
        ++pos_;
        atom.chiral = ChiralTag::CCW;
      } else {
        atom.chiral = ChiralTag::CW;
      }
      if (!at_end() && std::isupper(static_cast<unsigned char>(s_[pos_])) && s_[pos_] != 'H')
        fail(ErrorKind::SyntaxError, "extended chirality classes are not supported");
    }
    if (!at_end() && s_[pos_] == 'H') {
      ++pos_;
      atom.hydrogens = 1;
      if (!at_end() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) atom.hydrogens = s_[pos_++] - '0';
    }
    if (!at_end() && (s_[pos_] == '+' || s_[pos_] == '-')) {
      const char sign = s_[pos_++];
      int magnitude = 1;
      if (!at_end() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) {
        magnitude = s_[pos_++] - '0';
      } else {
        while (!at_end() && s_[pos_] == sign) {
          ++magnitude;
          ++pos_;
        }
      }
      atom.charge = sign == '+' ? magnitude : -magnitude;
    }
    if (!at_end() && s_[pos_] == ':') fail(ErrorKind::SyntaxError, "atom classes are not supported");
    if (at_end() || s_[pos_] != ']') fail(ErrorKind::SyntaxError, "expected ']'");
    ++pos_;
  }

  void kekulize(std::vector<int>& orders) const {
    const std::size_t n = atoms_.size();
    std::vector<int> sigma(n, 0);
    std::vector<std::vector<std::size_t>> aromatic_edges(n);
    bool any_aromatic = false;
    for (std::size_t e = 0; e < bonds_.size(); ++e) {
      const auto& b = bonds_[e];
      const int w = b.kind == BondKind::Aromatic ? 1 : static_cast<int>(b.kind);
      sigma[static_cast<std::size_t>(b.a)] += w;
      sigma[static_cast<std::size_t>(b.b)] += w;
      if (b.kind == BondKind::Aromatic) {
        aromatic_edges[static_cast<std::size_t>(b.a)].push_back(e);
        aromatic_edges[static_cast<std::size_t>(b.b)].push_back(e);
        any_aromatic = true;
      }
    }
    for (std::size_t e = 0; e < bonds_.size(); ++e)
      orders[e] = bonds_[e].kind == BondKind::Aromatic ? 1 : static_cast<int>(bonds_[e].kind);
    bool lowercase = false;
    for (const auto& a : atoms_) lowercase |= a.aromatic;
    if (!any_aromatic && !lowercase) return;

    std::vector<char> needs(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& a = atoms_[i];
      if (!a.aromatic) continue;
      const int target = kekule_valence(a.atomic_number, a.charge);
      const int free = target - sigma[i] - (a.bracket ? a.hydrogens : 0);
      needs[i] = free >= 1;
    }

    // Perfect matching over aromatic bonds between atoms that need a double
    // bond; most-constrained atom first, with backtracking.
    std::vector<int> mate(n, -1);
    std::size_t budget = 200000;
    std::function<bool()> solve = [&]() -> bool {
      if (budget-- == 0) return false;
      int best = -1;
      int best_options = 1 << 30;
      for (std::size_t i = 0; i < n; ++i) {
        if (!needs[i] || mate[i] >= 0) continue;
        int options = 0;
        for (std::size_t e : aromatic_edges[i]) {
          const int other = bonds_[e].a == static_cast<int>(i) ? bonds_[e].b : bonds_[e].a;
          if (needs[static_cast<std::size_t>(other)] && mate[static_cast<std::size_t>(other)] < 0) ++options;
        }
        if (options < best_options) {
          best_options = options;
          best = static_cast<int>(i);
        }
      }
      if (best < 0) return true;
      if (best_options == 0) return false;
      for (std::size_t e : aromatic_edges[static_cast<std::size_t>(best)]) {
        const int other = bonds_[e].a == best ? bonds_[e].b : bonds_[e].a;
        if (!needs[static_cast<std::size_t>(other)] || mate[static_cast<std::size_t>(other)] >= 0) continue;
        mate[static_cast<std::size_t>(best)] = static_cast<int>(e);
        mate[static_cast<std::size_t>(other)] = static_cast<int>(e);
        if (solve()) return true;
        mate[static_cast<std::size_t>(best)] = -1;
        mate[static_cast<std::size_t>(other)] = -1;
      }
      return false;
    };
    if (!solve()) {
      std::size_t where = 0;
      for (std::size_t i = 0; i < n; ++i)
        if (atoms_[i].aromatic) {
          where = atoms_[i].position;
          break;
        }
      throw SmilesError(ErrorKind::KekulizationFailure, where, "cannot assign alternating bonds to aromatic system");
    }
    for (std::size_t i = 0; i < n; ++i)
      if (mate[i] >= 0) orders[static_cast<std::size_t>(mate[i])] = 2;
  }

  Molecule build() const {
    std::vector<int> orders(bonds_.size(), 1);
    kekulize(orders);
    std::vector<int> types;
    types.reserve(atoms_.size());
    for (const auto& a : atoms_) {
      auto idx = alphabet_.find(a.atomic_number, a.charge, a.chiral);
      if (!idx)
        throw SmilesError(ErrorKind::UnsupportedAtom, a.position,
                          "atom '" + std::string(element_symbol(a.atomic_number)) + "' with charge " +
                              std::to_string(a.charge) + " is not in the alphabet");
      types.push_back(static_cast<int>(*idx));
    }
    Molecule m(std::move(types));
    for (std::size_t e = 0; e < bonds_.size(); ++e) {
      if (orders[e] > alphabet_.max_bond_order())
        throw SmilesError(ErrorKind::ValenceViolation, bonds_[e].position, "bond order exceeds the alphabet maximum");
      m.set_bond(bonds_[e].a, bonds_[e].b, orders[e]);
    }
    for (std::size_t i = 0; i < atoms_.size(); ++i) {
      const int slack = valence_slack(m, static_cast<int>(i), alphabet_);
      if (slack < 0)
        throw SmilesError(ErrorKind::ValenceViolation, atoms_[i].position, "atom exceeds its valence");
      if (atoms_[i].bracket && atoms_[i].hydrogens != slack)
        throw SmilesError(ErrorKind::ValenceViolation, atoms_[i].position,
                          "bracket hydrogen count " + std::to_string(atoms_[i].hydrogens) +
                              " disagrees with remaining valence " + std::to_string(slack));
    }
    return m;
  }

  std::string_view s_;
  const Alphabet& alphabet_;
  std::size_t pos_ = 0;
  std::vector<ParsedAtom> atoms_;
  std::vector<ParsedBond> bonds_;
  std::map<int, RingOpen> rings_;
};

std::string atom_text(const Molecule& m, int i, const Alphabet& alphabet) {
  const AtomSpec& spec = alphabet[static_cast<std::size_t>(m.atom(i))];
  const std::string element(element_symbol(spec.atomic_number));
  if (spec.formal_charge == 0 && spec.chiral_tag == ChiralTag::None && organic_subset(spec.atomic_number))
    return element;
  std::string out = "[" + element;
  if (spec.chiral_tag == ChiralTag::CW) out += "@";
  if (spec.chiral_tag == ChiralTag::CCW) out += "@@";
  const int h = valence_slack(m, i, alphabet);
  if (h > 0) out += "H";
  if (h > 1) out += std::to_string(h);
  if (spec.formal_charge != 0) {
    out += spec.formal_charge > 0 ? "+" : "-";
    if (std::abs(spec.formal_charge) > 1) out += std::to_string(std::abs(spec.formal_charge));
  }
  return out + "]";
}

std::string bond_text(int order) {
  switch (order) {
    case 2: return "=";
    case 3: return "#";
    case 4: return "$";
    default: return "";
  }
}

std::string ring_digit(int d) { return d < 10 ? std::to_string(d) : "%" + std::to_string(d); }

}  // namespace

Molecule parse_smiles(std::string_view smiles, const Alphabet& alphabet) { return Parser(smiles, alphabet).parse(); }

std::string write_smiles(const Molecule& m, const Alphabet& alphabet) {
  const int n = m.size();
  if (n == 0) return "";
  const CanonicalForm cf = canonical_form(m);
  std::vector<int> rank(static_cast<std::size_t>(n));
  for (int p = 0; p < n; ++p) rank[static_cast<std::size_t>(cf.order[static_cast<std::size_t>(p)])] = p;
  auto sorted_neighbors = [&](int v) {
    std::vector<int> nb = m.neighbors(v);
    std::sort(nb.begin(), nb.end(), [&](int a, int b) { return rank[static_cast<std::size_t>(a)] < rank[static_cast<std::size_t>(b)]; });
    return nb;
  };

  // First pass: DFS tree; every non-tree edge becomes a ring closure.
  const int root = cf.order[0];
  std::vector<int> parent(static_cast<std::size_t>(n), -1);
  std::vector<char> visited(static_cast<std::size_t>(n), 0);
  std::vector<std::vector<int>> children(static_cast<std::size_t>(n));
  std::function<void(int)> dfs = [&](int v) {
    visited[static_cast<std::size_t>(v)] = 1;
    for (int u : sorted_neighbors(v)) {
      if (visited[static_cast<std::size_t>(u)]) continue;
      parent[static_cast<std::size_t>(u)] = v;
      children[static_cast<std::size_t>(v)].push_back(u);
      dfs(u);
    }
  };
  dfs(root);

  std::string out;
  std::map<std::pair<int, int>, int> open_digits;
  std::set<int> free_digits;
  for (int d = 1; d < 100; ++d) free_digits.insert(d);
  std::vector<char> emitted(static_cast<std::size_t>(n), 0);
  std::function<void(int)> emit = [&](int v) {
    emitted[static_cast<std::size_t>(v)] = 1;
    out += atom_text(m, v, alphabet);
    for (int u : sorted_neighbors(v)) {
      const bool tree_edge = parent[static_cast<std::size_t>(u)] == v || parent[static_cast<std::size_t>(v)] == u;
      if (tree_edge) continue;
      const auto key = std::minmax(u, v);
      if (emitted[static_cast<std::size_t>(u)]) {
        const int d = open_digits.at(key);
        open_digits.erase(key);
        free_digits.insert(d);
        out += ring_digit(d);
      } else {
        const int d = *free_digits.begin();
        free_digits.erase(free_digits.begin());
        open_digits[key] = d;
        out += bond_text(m.bond(u, v)) + ring_digit(d);
      }
    }
    const auto& kids = children[static_cast<std::size_t>(v)];
    for (std::size_t c = 0; c < kids.size(); ++c) {
      const bool last = c + 1 == kids.size();
      if (!last) out += "(";
      out += bond_text(m.bond(v, kids[c]));
      emit(kids[c]);
      if (!last) out += ")";
    }
  };
  emit(root);
  return out;
}

ActionTrace to_action_trace(const Molecule& m) {
  if (m.empty()) throw Error(ErrorKind::InvalidArgument, "cannot trace an empty molecule");
  if (!m.connected()) throw Error(ErrorKind::DisconnectedMolecule, "molecule is not connected");
  const int n = m.size();
  ActionTrace trace{Molecule::single(m.atom(0)), {}};
  std::vector<int> new_index(static_cast<std::size_t>(n), -1);
  std::vector<std::pair<int, int>> tree_edges;
  new_index[0] = 0;
  int next = 1;
  std::vector<int> queue{0};
  for (std::size_t head = 0; head < queue.size(); ++head) {
    const int v = queue[head];
    for (int u = 0; u < n; ++u) {
      if (m.bond(v, u) == 0 || new_index[static_cast<std::size_t>(u)] >= 0) continue;
      new_index[static_cast<std::size_t>(u)] = next++;
      trace.steps.emplace_back(AddAtom{m.atom(u), new_index[static_cast<std::size_t>(v)], m.bond(v, u)});
      tree_edges.emplace_back(std::min(u, v), std::max(u, v));
      queue.push_back(u);
    }
  }
  std::vector<std::tuple<int, int, int>> closures;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      if (m.bond(i, j) == 0) continue;
      if (std::find(tree_edges.begin(), tree_edges.end(), std::make_pair(i, j)) != tree_edges.end()) continue;
      const int a = new_index[static_cast<std::size_t>(i)];
      const int b = new_index[static_cast<std::size_t>(j)];
      closures.emplace_back(std::min(a, b), std::max(a, b), m.bond(i, j));
    }
  std::sort(closures.begin(), closures.end());
  for (const auto& [a, b, o] : closures) trace.steps.emplace_back(AddBond{a, b, o});
  trace.steps.emplace_back(DontChange{});
  return trace;
}

Molecule replay(const ActionTrace& trace, const DesignSpace* space) {
  Molecule m = trace.initial;
  for (const auto& step : trace.steps) m = space ? apply_action(m, step, *space) : apply_unchecked(m, step);
  return m;
}

std::vector<int> trace_choices(const ActionTrace& trace, std::size_t alphabet_size) {
  std::vector<int> out;
  for (const auto& step : trace.steps) {
    const auto sub = decompose(step, alphabet_size);
    out.insert(out.end(), sub.begin(), sub.end());
  }
  return out;
}

std::vector<std::string> read_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::InvalidArgument, "cannot read corpus '" + path + "'");
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.pop_back();
    std::size_t start = 0;
    while (start < line.size() && std::isspace(static_cast<unsigned char>(line[start]))) ++start;
    line = line.substr(start);
    if (line.empty() || line[0] == '#') continue;
    out.push_back(line);
  }
  return out;
}

}  // namespace molbuild
