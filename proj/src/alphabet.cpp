#include "molbuild/alphabet.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <set>

#include "molbuild/error.hpp"

namespace molbuild {

namespace {

constexpr std::array<std::string_view, 54> kElements = {
    "",   "H",  "He", "Li", "Be", "B",  "C",  "N",  "O",  "F",  "Ne", "Na", "Mg", "Al",
    "Si", "P",  "S",  "Cl", "Ar", "K",  "Ca", "Sc", "Ti", "V",  "Cr", "Mn", "Fe", "Co",
    "Ni", "Cu", "Zn", "Ga", "Ge", "As", "Se", "Br", "Kr", "Rb", "Sr", "Y",  "Zr", "Nb",
    "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd", "In", "Sn", "Sb", "Te", "I"};

}  // namespace

std::string_view element_symbol(int atomic_number) {
  if (atomic_number <= 0 || atomic_number >= static_cast<int>(kElements.size())) return {};
  return kElements[static_cast<std::size_t>(atomic_number)];
}

int atomic_number_of(std::string_view element) {
  for (std::size_t z = 1; z < kElements.size(); ++z)
    if (kElements[z] == element) return static_cast<int>(z);
  return 0;
}

std::string_view to_string(ChiralTag tag) {
  switch (tag) {
    case ChiralTag::None: return "none";
    case ChiralTag::CW: return "cw";
    case ChiralTag::CCW: return "ccw";
  }
  return "none";
}

ChiralTag chiral_tag_from_string(std::string_view s) {
  if (s == "none" || s.empty()) return ChiralTag::None;
  if (s == "cw" || s == "CHI_TETRAHEDRAL_CW") return ChiralTag::CW;
  if (s == "ccw" || s == "CHI_TETRAHEDRAL_CCW") return ChiralTag::CCW;
  throw Error(ErrorKind::ConfigError, "unknown chiral tag '" + std::string(s) + "'");
}

Alphabet::Alphabet(std::vector<AtomSpec> specs, int max_bond_order)
    : specs_(std::move(specs)), max_bond_order_(max_bond_order) {
  if (specs_.empty()) throw Error(ErrorKind::InvalidArgument, "alphabet must not be empty");
  if (max_bond_order_ < 1) throw Error(ErrorKind::InvalidArgument, "max bond order must be >= 1");
  std::set<std::string> seen;
  for (const auto& s : specs_) {
    if (s.valence < 1) throw Error(ErrorKind::InvalidArgument, "valence of '" + s.symbol + "' must be >= 1");
    if (!seen.insert(s.symbol).second)
      throw Error(ErrorKind::InvalidArgument, "duplicate alphabet symbol '" + s.symbol + "'");
  }
}

Alphabet Alphabet::solvent_cno(int max_bond_order) {
  return Alphabet({{"C", 6, 4}, {"N", 7, 3}, {"O", 8, 2}}, max_bond_order);
}

Alphabet Alphabet::drug_full(int max_bond_order) {
  using C = ChiralTag;
  return Alphabet(
      {
          {"C", 6, 4},          {"C-", 6, 3, -1},      {"C+", 6, 5, 1},
          {"C@", 6, 4, 0, C::CW}, {"C@@", 6, 4, 0, C::CCW}, {"N", 7, 3},
          {"N-", 7, 2, -1},     {"N+", 7, 4, 1},       {"O", 8, 2},
          {"O-", 8, 1, -1},     {"O+", 8, 3, 1},       {"F", 9, 1},
          {"P", 15, 7},         {"P-", 15, 6, -1},     {"P+", 15, 8, 1},
          {"S", 16, 6},         {"S-", 16, 5, -1},     {"S+", 16, 7, 1},
          {"S@", 16, 6, 0, C::CW}, {"S@@", 16, 6, 0, C::CCW}, {"Cl", 17, 1},
          {"Br", 35, 1},        {"I", 53, 1},
      },
      max_bond_order);
}

Alphabet Alphabet::only(const std::vector<std::string>& symbols, int max_bond_order) {
  const Alphabet full = drug_full(max_bond_order);
  std::vector<AtomSpec> specs;
  for (const auto& s : symbols) {
    auto idx = full.find_symbol(s);
    if (!idx) throw Error(ErrorKind::UnsupportedAtom, "unknown alphabet symbol '" + s + "'");
    specs.push_back(full[*idx]);
  }
  return Alphabet(std::move(specs), max_bond_order);
}

Alphabet Alphabet::preset(std::string_view name, int max_bond_order) {
  if (name == "solvent-CNO") return solvent_cno(max_bond_order);
  if (name == "drug-full") return drug_full(max_bond_order);
  throw Error(ErrorKind::ConfigError, "unknown alphabet preset '" + std::string(name) + "'");
}

int Alphabet::max_valence() const noexcept {
  int v = 0;
  for (const auto& s : specs_) v = std::max(v, s.valence);
  return v;
}

std::optional<std::size_t> Alphabet::find_symbol(std::string_view symbol) const {
  for (std::size_t i = 0; i < specs_.size(); ++i)
    if (specs_[i].symbol == symbol) return i;
  return std::nullopt;
}

std::optional<std::size_t> Alphabet::find(int atomic_number, int formal_charge, ChiralTag tag) const {
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    const auto& s = specs_[i];
    if (s.atomic_number == atomic_number && s.formal_charge == formal_charge && s.chiral_tag == tag)
      return i;
  }
  return std::nullopt;
}

nlohmann::json Alphabet::to_json() const {
  nlohmann::json atoms = nlohmann::json::array();
  for (const auto& s : specs_) {
    atoms.push_back({{"symbol", s.symbol},
                     {"atomic_number", s.atomic_number},
                     {"valence", s.valence},
                     {"formal_charge", s.formal_charge},
                     {"chiral_tag", std::string(to_string(s.chiral_tag))}});
  }
  return {{"max_bond_order", max_bond_order_}, {"atoms", atoms}};
}

Alphabet Alphabet::from_json(const nlohmann::json& j) {
  try {
    std::vector<AtomSpec> specs;
    for (const auto& a : j.at("atoms")) {
      for (const auto& [key, _] : a.items()) {
        if (key != "symbol" && key != "atomic_number" && key != "valence" && key != "formal_charge" &&
            key != "chiral_tag")
          throw Error(ErrorKind::ConfigError, "unknown alphabet atom key '" + key + "'");
      }
      AtomSpec s;
      s.symbol = a.at("symbol").get<std::string>();
      s.atomic_number = a.at("atomic_number").get<int>();
      s.valence = a.at("valence").get<int>();
      s.formal_charge = a.value("formal_charge", 0);
      s.chiral_tag = chiral_tag_from_string(a.value("chiral_tag", std::string("none")));
      specs.push_back(std::move(s));
    }
    return Alphabet(std::move(specs), j.value("max_bond_order", 3));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ConfigError, std::string("malformed alphabet: ") + e.what());
  }
}

std::string Alphabet::hash() const {
  // FNV-1a over the canonical JSON dump.
  const std::string text = to_json().dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace molbuild
