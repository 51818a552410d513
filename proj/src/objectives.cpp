#include "molbuild/objectives.hpp"

#include <cctype>
#include <cmath>
#include <functional>
#include <limits>

#include "molbuild/error.hpp"
#include "molbuild/smiles.hpp"

namespace molbuild {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void allow_keys(const nlohmann::json& j, const std::string& where, std::initializer_list<const char*> keys) {
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* k : keys) ok |= key == k;
    if (!ok) throw Error(ErrorKind::ConfigError, "unknown key '" + key + "' in " + where);
  }
}

}  // namespace

Formula parse_formula(const std::string& text) {
  Formula f;
  std::size_t i = 0;
  if (text.empty()) throw Error(ErrorKind::InvalidArgument, "empty formula");
  while (i < text.size()) {
    if (!std::isupper(static_cast<unsigned char>(text[i])))
      throw Error(ErrorKind::InvalidArgument, "bad formula '" + text + "'");
    std::string sym(1, text[i++]);
    while (i < text.size() && std::islower(static_cast<unsigned char>(text[i]))) sym.push_back(text[i++]);
    const int z = atomic_number_of(sym);
    if (z == 0) throw Error(ErrorKind::InvalidArgument, "unknown element '" + sym + "' in formula");
    int count = 0;
    bool digits = false;
    while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) {
      count = count * 10 + (text[i++] - '0');
      digits = true;
    }
    f[z] += digits ? count : 1;
  }
  return f;
}

Formula molecule_formula(const Molecule& m, const Alphabet& alphabet) {
  Formula f;
  for (const auto& [z, c] : element_counts(m, alphabet))
    if (c > 0) f[z] += c;
  return f;
}

double isomer_score(const Molecule& m, const Alphabet& alphabet, const Formula& target) {
  const Formula have = molecule_formula(m, alphabet);
  long distance = 0;
  for (const auto& [z, c] : target) {
    auto it = have.find(z);
    distance += std::abs((it == have.end() ? 0 : it->second) - c);
  }
  for (const auto& [z, c] : have)
    if (!target.count(z)) distance += c;
  return distance == 0 ? 1.0 : 1.0 / (1.0 + static_cast<double>(distance));
}

namespace {

long count_embeddings(const Molecule& host, const Alphabet& alphabet, const SubstructurePattern& p,
                      bool check_hydrogens) {
  const int pn = p.graph.size();
  const int hn = host.size();
  if (pn == 0 || pn > hn) return 0;
  std::vector<int> map(static_cast<std::size_t>(pn), -1);
  std::vector<char> used(static_cast<std::size_t>(hn), 0);
  long count = 0;
  std::function<void(int)> extend = [&](int i) {
    if (i == pn) {
      ++count;
      return;
    }
    for (int h = 0; h < hn; ++h) {
      if (used[static_cast<std::size_t>(h)] || host.atom(h) != p.graph.atom(i)) continue;
      if (check_hydrogens && valence_slack(host, h, alphabet) < p.min_hydrogens[static_cast<std::size_t>(i)]) continue;
      bool ok = true;
      for (int j = 0; j < i && ok; ++j) {
        const int order = p.graph.bond(i, j);
        if (order != 0 && host.bond(h, map[static_cast<std::size_t>(j)]) != order) ok = false;
      }
      if (!ok) continue;
      map[static_cast<std::size_t>(i)] = h;
      used[static_cast<std::size_t>(h)] = 1;
      extend(i + 1);
      used[static_cast<std::size_t>(h)] = 0;
    }
  };
  extend(0);
  return count;
}

}  // namespace

long substructure_count(const Molecule& m, const Alphabet& alphabet, const SubstructurePattern& pattern) {
  if (pattern.graph.size() > 8) throw Error(ErrorKind::InvalidArgument, "patterns are limited to 8 atoms");
  SubstructurePattern p = pattern;
  p.min_hydrogens.resize(static_cast<std::size_t>(p.graph.size()), 0);
  const long embeddings = count_embeddings(m, alphabet, p, true);
  if (embeddings == 0) return 0;
  // Automorphisms of the pattern graph (hydrogen requirements included).
  long automorphisms = 0;
  {
    const int pn = p.graph.size();
    std::vector<int> map(static_cast<std::size_t>(pn), -1);
    std::vector<char> used(static_cast<std::size_t>(pn), 0);
    std::function<void(int)> extend = [&](int i) {
      if (i == pn) {
        ++automorphisms;
        return;
      }
      for (int h = 0; h < pn; ++h) {
        if (used[static_cast<std::size_t>(h)] || p.graph.atom(h) != p.graph.atom(i) ||
            p.min_hydrogens[static_cast<std::size_t>(h)] != p.min_hydrogens[static_cast<std::size_t>(i)])
          continue;
        bool ok = true;
        for (int j = 0; j < i && ok; ++j) ok = p.graph.bond(i, j) == p.graph.bond(h, map[static_cast<std::size_t>(j)]);
        if (!ok) continue;
        map[static_cast<std::size_t>(i)] = h;
        used[static_cast<std::size_t>(h)] = 1;
        extend(i + 1);
        used[static_cast<std::size_t>(h)] = 0;
      }
    };
    extend(0);
  }
  return embeddings / automorphisms;
}

double miscibility_penalty(double gamma_sw, double gamma_ws) {
  return (std::tanh(gamma_sw * gamma_ws - std::exp(4.0)) - 1.0) * 10.0;
}

namespace {
void require_positive(std::initializer_list<double> values) {
  for (double v : values)
    if (!(v > 0.0)) throw Error(ErrorKind::NonPositiveGamma, "activity coefficients must be positive");
}
}  // namespace

double solvent_iba_objective(double gamma_iba_s, double gamma_s_w, double gamma_w_s) {
  require_positive({gamma_iba_s, gamma_s_w, gamma_w_s});
  return 1.0 / gamma_iba_s + miscibility_penalty(gamma_s_w, gamma_w_s);
}

double solvent_tmb_objective(double gamma_tmb_s, double gamma_dmba_s, double gamma_s_w, double gamma_w_s) {
  require_positive({gamma_tmb_s, gamma_dmba_s, gamma_s_w, gamma_w_s});
  return gamma_tmb_s / gamma_dmba_s + miscibility_penalty(gamma_s_w, gamma_w_s);
}

namespace {

class FunctionObjective : public Objective {
 public:
  explicit FunctionObjective(std::function<double(const Molecule&)> f) : f_(std::move(f)) {}
  std::vector<double> evaluate(const std::vector<Molecule>& molecules) override {
    std::vector<double> out;
    out.reserve(molecules.size());
    for (const auto& m : molecules) out.push_back(f_(m));
    return out;
  }

 private:
  std::function<double(const Molecule&)> f_;
};

class SolventObjective : public Objective {
 public:
  SolventObjective(bool tmb, double temperature, SolventSpecies species, const Alphabet& alphabet,
                   std::shared_ptr<OracleClient> client)
      : tmb_(tmb), temperature_(temperature), species_(std::move(species)), alphabet_(alphabet), cache_(std::move(client)) {}

  std::vector<double> evaluate(const std::vector<Molecule>& molecules) override {
    const std::size_t per = tmb_ ? 4 : 3;
    std::vector<GammaPair> pairs;
    pairs.reserve(per * molecules.size());
    for (const auto& m : molecules) {
      const std::string s = write_smiles(m, alphabet_);
      if (tmb_) {
        pairs.push_back({species_.tmb, s, temperature_});
        pairs.push_back({species_.dmba, s, temperature_});
      } else {
        pairs.push_back({species_.iba, s, temperature_});
      }
      pairs.push_back({s, species_.water, temperature_});
      pairs.push_back({species_.water, s, temperature_});
    }
    const auto gammas = cache_.gamma(pairs);
    std::vector<double> out;
    out.reserve(molecules.size());
    for (std::size_t i = 0; i < molecules.size(); ++i) {
      const auto* g = &gammas[i * per];
      bool missing = false;
      for (std::size_t j = 0; j < per; ++j) missing |= !g[j].has_value();
      if (missing) {
        out.push_back(kNegInf);
        continue;
      }
      try {
        out.push_back(tmb_ ? solvent_tmb_objective(*g[0], *g[1], *g[2], *g[3])
                           : solvent_iba_objective(*g[0], *g[1], *g[2]));
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::NonPositiveGamma) throw;
        out.push_back(kNegInf);
      }
    }
    return out;
  }

 private:
  bool tmb_;
  double temperature_;
  SolventSpecies species_;
  Alphabet alphabet_;
  GammaCache cache_;
};

class CompositeObjective : public Objective {
 public:
  void add(double weight, std::unique_ptr<Objective> term) { terms_.emplace_back(weight, std::move(term)); }
  std::vector<double> evaluate(const std::vector<Molecule>& molecules) override {
    std::vector<double> out(molecules.size(), 0.0);
    for (auto& [w, term] : terms_) {
      const auto values = term->evaluate(molecules);
      for (std::size_t i = 0; i < out.size(); ++i) out[i] += w * values[i];
    }
    return out;
  }

 private:
  std::vector<std::pair<double, std::unique_ptr<Objective>>> terms_;
};

}  // namespace

std::unique_ptr<Objective> make_objective(const nlohmann::json& spec, const Alphabet& alphabet,
                                          std::shared_ptr<OracleClient> oracle) {
  if (!spec.is_object() || !spec.contains("type"))
    throw Error(ErrorKind::ConfigError, "objective must be an object with a 'type'");
  const auto type = spec.at("type").get<std::string>();
  try {
    if (type == "isomer") {
      allow_keys(spec, "isomer objective", {"type", "formula"});
      const Formula target = parse_formula(spec.at("formula").get<std::string>());
      return std::make_unique<FunctionObjective>(
          [alphabet, target](const Molecule& m) { return isomer_score(m, alphabet, target); });
    }
    if (type == "atom_count") {
      allow_keys(spec, "atom_count objective", {"type"});
      return std::make_unique<FunctionObjective>([](const Molecule& m) { return static_cast<double>(m.size()); });
    }
    if (type == "atom_count_target") {
      allow_keys(spec, "atom_count_target objective", {"type", "target"});
      const int target = spec.at("target").get<int>();
      return std::make_unique<FunctionObjective>(
          [target](const Molecule& m) { return -static_cast<double>(std::abs(m.size() - target)); });
    }
    if (type == "substructure") {
      allow_keys(spec, "substructure objective", {"type", "smiles", "min_hydrogens", "weight"});
      SubstructurePattern p;
      p.graph = parse_smiles(spec.at("smiles").get<std::string>(), alphabet);
      if (spec.contains("min_hydrogens")) p.min_hydrogens = spec.at("min_hydrogens").get<std::vector<int>>();
      if (p.min_hydrogens.size() > static_cast<std::size_t>(p.graph.size()))
        throw Error(ErrorKind::ConfigError, "min_hydrogens longer than the pattern");
      const double weight = spec.value("weight", 1.0);
      if (!std::isfinite(weight)) throw Error(ErrorKind::ConfigError, "weight must be finite");
      return std::make_unique<FunctionObjective>([alphabet, p, weight](const Molecule& m) {
        return weight * static_cast<double>(substructure_count(m, alphabet, p));
      });
    }
    if (type == "solvent_iba" || type == "solvent_tmb") {
      allow_keys(spec, type + " objective", {"type", "temperature", "oracle", "species"});
      const double temperature = spec.value("temperature", 298.0);
      if (!(temperature > 0.0)) throw Error(ErrorKind::ConfigError, "temperature must be positive");
      SolventSpecies species;
      if (spec.contains("species")) {
        const auto& s = spec.at("species");
        allow_keys(s, "species", {"water", "iba", "dmba", "tmb"});
        species.water = s.value("water", species.water);
        species.iba = s.value("iba", species.iba);
        species.dmba = s.value("dmba", species.dmba);
        species.tmb = s.value("tmb", species.tmb);
      }
      if (!oracle) {
        if (!spec.contains("oracle")) throw Error(ErrorKind::ConfigError, type + " needs an oracle block");
        oracle = connect_oracle(spec.at("oracle"));
      }
      return std::make_unique<SolventObjective>(type == "solvent_tmb", temperature, species, alphabet, oracle);
    }
    if (type == "composite") {
      allow_keys(spec, "composite objective", {"type", "terms"});
      auto composite = std::make_unique<CompositeObjective>();
      for (const auto& term : spec.at("terms")) {
        allow_keys(term, "composite term", {"weight", "objective"});
        const double w = term.value("weight", 1.0);
        if (!std::isfinite(w)) throw Error(ErrorKind::ConfigError, "weight must be finite");
        composite->add(w, make_objective(term.at("objective"), alphabet, oracle));
      }
      return composite;
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ConfigError, "objective '" + type + "': " + e.what());
  } catch (const SmilesError& e) {
    throw Error(ErrorKind::ConfigError, std::string("objective pattern: ") + e.what());
  }
  throw Error(ErrorKind::ConfigError, "unknown objective type '" + type + "'");
}

}  // namespace molbuild
