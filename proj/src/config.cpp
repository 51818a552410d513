#include "molbuild/config.hpp"

#include <fstream>

#include "molbuild/error.hpp"
#include "molbuild/masking.hpp"
#include "molbuild/smiles.hpp"

namespace molbuild {

Alphabet alphabet_from_json(const nlohmann::json& j) {
  if (j.is_null()) return Alphabet::solvent_cno();
  if (j.is_string()) return Alphabet::preset(j.get<std::string>());
  if (!j.is_object()) throw Error(ErrorKind::ConfigError, "alphabet must be a preset name or an object");
  if (j.contains("atoms")) {
    for (const auto& [key, _] : j.items())
      if (key != "atoms" && key != "max_bond_order") throw Error(ErrorKind::ConfigError, "unknown alphabet key '" + key + "'");
    return Alphabet::from_json(j);
  }
  for (const auto& [key, _] : j.items())
    if (key != "preset" && key != "symbols" && key != "max_bond_order")
      throw Error(ErrorKind::ConfigError, "unknown alphabet key '" + key + "'");
  try {
    const int y = j.value("max_bond_order", 3);
    if (j.contains("symbols")) {
      if (j.contains("preset")) throw Error(ErrorKind::ConfigError, "alphabet takes either preset or symbols");
      return Alphabet::only(j.at("symbols").get<std::vector<std::string>>(), y);
    }
    return Alphabet::preset(j.value("preset", std::string("solvent-CNO")), y);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ConfigError, std::string("malformed alphabet: ") + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::ConfigError) throw;
    throw Error(ErrorKind::ConfigError, e.what());
  }
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorKind::ConfigError, "config must be a JSON object");
  static const char* kKeys[] = {"alphabet", "constraints", "policy", "learner", "pretrain", "objective",
                                "oracle",   "initial",     "seed",   "precision", "output_dir"};
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* k : kKeys) ok |= key == k;
    if (!ok) throw Error(ErrorKind::ConfigError, "unknown config key '" + key + "'");
  }
  RunConfig c;
  c.raw = j;
  try {
    c.alphabet = alphabet_from_json(j.value("alphabet", nlohmann::json()));
    c.constraints = j.contains("constraints") ? Constraints::from_json(j.at("constraints")) : Constraints{};
    c.policy = PolicyConfig::from_json(j.value("policy", nlohmann::json()), static_cast<int>(c.alphabet.size()),
                                       c.alphabet.max_bond_order(), c.alphabet.max_valence());
    c.learner = LearnerConfig::from_json(j.value("learner", nlohmann::json()));
    c.pretrain = PretrainConfig::from_json(j.value("pretrain", nlohmann::json()));
    c.objective = j.value("objective", nlohmann::json());
    c.oracle = j.value("oracle", nlohmann::json());
    c.initial = j.value("initial", std::string("C"));
    c.seed = j.value("seed", std::uint64_t{0});
    const auto precision = j.value("precision", std::string("float32"));
    if (precision != "float32" && precision != "float64")
      throw Error(ErrorKind::ConfigError, "precision must be float32 or float64");
    c.float64 = precision == "float64";
    c.output_dir = j.value("output_dir", std::string("out"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ConfigError, e.what());
  }
  c.initial_molecule();
  return c;
}

Molecule RunConfig::initial_molecule() const {
  Molecule m;
  try {
    m = parse_smiles(initial, alphabet);
  } catch (const Error& e) {
    throw Error(ErrorKind::ConfigError, std::string("initial molecule: ") + e.what());
  }
  if (m.size() > constraints.max_atoms)
    throw Error(ErrorKind::ConfigError, "initial molecule exceeds max_atoms");
  for (int a : constraints.frozen_atoms)
    if (a < 0 || a >= m.size()) throw Error(ErrorKind::ConfigError, "frozen atom " + std::to_string(a) + " is not in the initial molecule");
  const auto report = check_structural_constraints(m, space());
  if (!report.ok) throw Error(ErrorKind::ConfigError, "initial molecule violates constraints: " + report.violations.front());
  return m;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::ConfigError, "cannot read config '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ConfigError, "config is not valid JSON: " + std::string(e.what()));
  }
  if (j.is_object() && j.contains("config") && j.contains("version")) return from_json(j.at("config"));
  return from_json(j);
}

}  // namespace molbuild
