#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "molbuild/alphabet.hpp"
#include "molbuild/molecule.hpp"
#include "molbuild/oracle.hpp"

namespace molbuild {

/// Atomic number -> count; hydrogen is key 1.
using Formula = std::map<int, int>;

/// Parses "C4H10"-style formulas. Throws InvalidArgument.
Formula parse_formula(const std::string& text);
Formula molecule_formula(const Molecule& m, const Alphabet& alphabet);

/// 1 for an exact match, otherwise 1 / (1 + L1 distance of the counts).
double isomer_score(const Molecule& m, const Alphabet& alphabet, const Formula& target);

/// Small query graph; atom i additionally needs at least min_hydrogens[i]
/// implicit hydrogens in the host.
struct SubstructurePattern {
  Molecule graph;
  std::vector<int> min_hydrogens;
};

/// Embeddings of the pattern as a (not necessarily induced) subgraph with
/// matching atom types and bond orders, divided by the pattern's own
/// automorphism count.
long substructure_count(const Molecule& m, const Alphabet& alphabet, const SubstructurePattern& pattern);

/// (tanh(product - e^4) - 1) * 10, the phase-split penalty.
double miscibility_penalty(double gamma_sw, double gamma_ws);
double solvent_iba_objective(double gamma_iba_s, double gamma_s_w, double gamma_w_s);
double solvent_tmb_objective(double gamma_tmb_s, double gamma_dmba_s, double gamma_s_w, double gamma_w_s);

class Objective {
 public:
  virtual ~Objective() = default;
  /// One value per molecule; failures are -inf.
  virtual std::vector<double> evaluate(const std::vector<Molecule>& molecules) = 0;
  double evaluate(const Molecule& m) { return evaluate(std::vector<Molecule>{m}).front(); }
};

struct SolventSpecies {
  std::string water = "O";
  std::string iba = "CC(C)CO";
  std::string dmba = "COc1cc(C=O)cc(OC)c1";
  std::string tmb = "COc1cc(cc(OC)c1)C(=O)C(O)c1cc(OC)cc(OC)c1";
};

/// Builds an objective from its JSON spec. Recognised types:
///   {"type": "isomer", "formula": "C4H10"}
///   {"type": "atom_count"}
///   {"type": "atom_count_target", "target": 6}
///   {"type": "substructure", "smiles": "CO", "min_hydrogens": [0, 1], "weight": 1}
///   {"type": "solvent_iba" | "solvent_tmb", "temperature": 298, "oracle": {...}, "species": {...}}
///   {"type": "composite", "terms": [{"weight": w, "objective": {...}}]}
/// `oracle` overrides the spec's oracle block when given.
std::unique_ptr<Objective> make_objective(const nlohmann::json& spec, const Alphabet& alphabet,
                                          std::shared_ptr<OracleClient> oracle = nullptr);

}  // namespace molbuild
