#include "molbuild/molecule.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "molbuild/error.hpp"

namespace molbuild {

Molecule::Molecule(std::vector<int> atoms)
    : atoms_(std::move(atoms)), bonds_(atoms_.size() * atoms_.size(), 0) {}

Molecule::Molecule(std::vector<int> atoms, std::vector<std::uint8_t> bonds)
    : atoms_(std::move(atoms)), bonds_(std::move(bonds)) {
  if (bonds_.size() != atoms_.size() * atoms_.size())
    throw Error(ErrorKind::ShapeMismatch, "bond matrix size does not match atom count");
}

void Molecule::set_bond(int i, int j, int order) {
  bonds_[index(i, j)] = static_cast<std::uint8_t>(order);
  bonds_[index(j, i)] = static_cast<std::uint8_t>(order);
}

int Molecule::add_atom(int type) {
  const std::size_t n = atoms_.size();
  std::vector<std::uint8_t> grown((n + 1) * (n + 1), 0);
  for (std::size_t i = 0; i < n; ++i)
    std::copy_n(bonds_.begin() + static_cast<std::ptrdiff_t>(i * n), n,
                grown.begin() + static_cast<std::ptrdiff_t>(i * (n + 1)));
  bonds_ = std::move(grown);
  atoms_.push_back(type);
  return static_cast<int>(n);
}

int Molecule::bond_sum(int i) const {
  int s = 0;
  const auto n = atoms_.size();
  const auto* row = bonds_.data() + static_cast<std::size_t>(i) * n;
  for (std::size_t j = 0; j < n; ++j) s += row[j];
  return s;
}

int Molecule::degree(int i) const {
  int d = 0;
  const auto n = atoms_.size();
  const auto* row = bonds_.data() + static_cast<std::size_t>(i) * n;
  for (std::size_t j = 0; j < n; ++j) d += row[j] != 0;
  return d;
}

std::vector<int> Molecule::neighbors(int i) const {
  std::vector<int> out;
  for (int j = 0; j < size(); ++j)
    if (bond(i, j) != 0) out.push_back(j);
  return out;
}

int Molecule::bond_count() const {
  int c = 0;
  for (int i = 0; i < size(); ++i)
    for (int j = i + 1; j < size(); ++j) c += bond(i, j) != 0;
  return c;
}

Molecule Molecule::permuted(const std::vector<int>& perm) const {
  const int n = size();
  std::vector<int> atoms(atoms_.size());
  for (int i = 0; i < n; ++i) atoms[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] = atom(i);
  Molecule out(std::move(atoms));
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (bond(i, j) != 0) out.set_bond(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)], bond(i, j));
  return out;
}

bool Molecule::connected() const {
  const int n = size();
  if (n <= 1) return true;
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  int count = 1;
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    for (int u = 0; u < n; ++u) {
      if (bond(v, u) != 0 && !seen[static_cast<std::size_t>(u)]) {
        seen[static_cast<std::size_t>(u)] = 1;
        ++count;
        stack.push_back(u);
      }
    }
  }
  return count == n;
}

std::string to_string(const Action& action) {
  std::ostringstream os;
  std::visit(
      [&](const auto& a) {
        using A = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<A, DontChange>) {
          os << "DontChange";
        } else if constexpr (std::is_same_v<A, AddAtom>) {
          os << "AddAtom(" << a.type << "," << a.target << "," << a.order << ")";
        } else {
          os << "AddBond(" << a.first << "," << a.second << "," << a.order << ")";
        }
      },
      action);
  return os.str();
}

int valence_slack(const Molecule& m, int i, const Alphabet& alphabet) {
  return alphabet[static_cast<std::size_t>(m.atom(i))].valence - m.bond_sum(i);
}

bool satisfies_valence(const Molecule& m, const Alphabet& alphabet) {
  const int n = m.size();
  for (int i = 0; i < n; ++i) {
    if (m.atom(i) < 0 || m.atom(i) >= static_cast<int>(alphabet.size())) return false;
    if (m.bond(i, i) != 0) return false;
    for (int j = 0; j < n; ++j)
      if (m.bond(i, j) != m.bond(j, i)) return false;
    if (valence_slack(m, i, alphabet) < 0) return false;
  }
  return true;
}

Molecule apply_unchecked(const Molecule& m, const Action& action) {
  Molecule out = m;
  if (const auto* a = std::get_if<AddAtom>(&action)) {
    const int idx = out.add_atom(a->type);
    out.set_bond(idx, a->target, a->order);
  } else if (const auto* b = std::get_if<AddBond>(&action)) {
    out.set_bond(b->first, b->second, b->order);
  }
  return out;
}

std::vector<std::pair<int, int>> element_counts(const Molecule& m, const Alphabet& alphabet) {
  std::map<int, int> counts;
  for (int i = 0; i < m.size(); ++i) {
    counts[alphabet[static_cast<std::size_t>(m.atom(i))].atomic_number] += 1;
    const int h = valence_slack(m, i, alphabet);
    if (h > 0) counts[1] += h;
  }
  return {counts.begin(), counts.end()};
}

}  // namespace molbuild
