#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace molbuild {

enum class ChiralTag { None, CW, CCW };

std::string_view to_string(ChiralTag tag);
ChiralTag chiral_tag_from_string(std::string_view s);

/// One atom type of the design alphabet. `valence` is the maximum total
/// non-hydrogen bond order; whatever is left over is implicit hydrogen.
struct AtomSpec {
  std::string symbol;
  int atomic_number = 6;
  int valence = 4;
  int formal_charge = 0;
  ChiralTag chiral_tag = ChiralTag::None;

  bool operator==(const AtomSpec&) const = default;
};

class Alphabet {
 public:
  Alphabet() = default;
  Alphabet(std::vector<AtomSpec> specs, int max_bond_order);

  /// Three-letter organic alphabet C, N, O.
  static Alphabet solvent_cno(int max_bond_order = 3);
  /// Full drug-design alphabet including charged and chiral variants.
  static Alphabet drug_full(int max_bond_order = 3);
  /// Single-element alphabets are handy in tests, e.g. only("C").
  static Alphabet only(const std::vector<std::string>& symbols, int max_bond_order = 3);
  static Alphabet preset(std::string_view name, int max_bond_order = 3);

  std::size_t size() const noexcept { return specs_.size(); }
  const AtomSpec& operator[](std::size_t i) const { return specs_.at(i); }
  const std::vector<AtomSpec>& specs() const noexcept { return specs_; }
  int max_bond_order() const noexcept { return max_bond_order_; }
  int max_valence() const noexcept;

  std::optional<std::size_t> find_symbol(std::string_view symbol) const;
  std::optional<std::size_t> find(int atomic_number, int formal_charge, ChiralTag tag) const;

  /// Stable digest of the alphabet contents (symbols, valences, bond order).
  std::string hash() const;

  nlohmann::json to_json() const;
  static Alphabet from_json(const nlohmann::json& j);

  bool operator==(const Alphabet&) const = default;

 private:
  std::vector<AtomSpec> specs_;
  int max_bond_order_ = 3;
};

/// Element symbol for an atomic number, e.g. 6 -> "C". Empty if unknown.
std::string_view element_symbol(int atomic_number);
/// Inverse of element_symbol; 0 if unknown.
int atomic_number_of(std::string_view element);

}  // namespace molbuild
