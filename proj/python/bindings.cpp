#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "molbuild/canonical.hpp"
#include "molbuild/checkpoint.hpp"
#include "molbuild/cli.hpp"
#include "molbuild/config.hpp"
#include "molbuild/enumerate.hpp"
#include "molbuild/learner.hpp"
#include "molbuild/objectives.hpp"
#include "molbuild/smiles.hpp"

namespace py = pybind11;
using namespace molbuild;

namespace {

nlohmann::json to_json(const py::object& obj) {
  if (obj.is_none()) return nullptr;
  return nlohmann::json::parse(py::module_::import("json").attr("dumps")(obj).cast<std::string>());
}

py::object from_json(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

Alphabet alphabet_arg(const py::object& obj) { return alphabet_from_json(to_json(obj)); }

DesignSpace space_arg(const py::object& alphabet, const py::object& constraints) {
  DesignSpace space{alphabet_arg(alphabet), Constraints{}};
  if (!constraints.is_none()) space.constraints = Constraints::from_json(to_json(constraints));
  return space;
}

std::vector<std::vector<int>> bond_matrix(const Molecule& m) {
  std::vector<std::vector<int>> out(static_cast<std::size_t>(m.size()), std::vector<int>(static_cast<std::size_t>(m.size())));
  for (int i = 0; i < m.size(); ++i)
    for (int j = 0; j < m.size(); ++j) out[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = m.bond(i, j);
  return out;
}

py::dict design(const py::object& config, const std::string& checkpoint) {
  const RunConfig cfg = RunConfig::from_json(to_json(config));
  if (cfg.objective.is_null()) throw Error(ErrorKind::ConfigError, "design needs an objective");
  std::shared_ptr<OracleClient> oracle;
  if (!cfg.oracle.is_null()) oracle = connect_oracle(cfg.oracle);
  auto objective = make_objective(cfg.objective, cfg.alphabet, oracle);
  Policy<float> policy;
  if (checkpoint.empty()) {
    policy = Policy<float>(cfg.policy, cfg.seed);
  } else {
    const Checkpoint ck = load_checkpoint(checkpoint, cfg.alphabet);
    policy = Policy<float>(ck.config, ck.params);
  }
  Rng rng(cfg.seed);
  LearnerResult result;
  {
    py::gil_scoped_release release;
    result = run_learner(policy, cfg.initial_molecule(), *objective, cfg.space(), cfg.learner, rng);
  }
  py::list best;
  for (const auto& e : result.archive.entries()) {
    py::dict d;
    d["smiles"] = write_smiles(e.molecule, cfg.alphabet);
    d["objective"] = e.objective;
    d["epoch"] = e.epoch;
    py::list actions;
    for (const auto& a : e.actions) actions.append(to_string(a));
    d["actions"] = actions;
    best.append(d);
  }
  py::list history;
  for (const auto& r : result.history) history.append(from_json(r.to_json()));
  py::dict out;
  out["best"] = best;
  out["history"] = history;
  out["stop_reason"] = result.stop_reason;
  return out;
}

}  // namespace

PYBIND11_MODULE(_molbuild, m) {
  m.doc() = "Molecular design by sequential graph edits";

  // Raised with a `kind` attribute naming the failure category.
  static PyObject* error_type = py::exception<Error>(m, "MolbuildError").inc_ref().ptr();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object instance = py::handle(error_type)(e.what());
      instance.attr("kind") = std::string(to_string(e.kind()));
      PyErr_SetObject(error_type, instance.ptr());
    }
  });

  py::class_<Molecule>(m, "Molecule")
      .def_property_readonly("atoms", &Molecule::atoms, "Alphabet index of every atom")
      .def_property_readonly("bonds", &bond_matrix, "Bond-order matrix")
      .def("__len__", &Molecule::size)
      .def("__eq__", [](const Molecule& a, const Molecule& b) { return a == b; })
      .def("canonical_key", [](const Molecule& a) { return canonical_key(a); });

  m.def("parse_smiles", [](const std::string& s, const py::object& alphabet) { return parse_smiles(s, alphabet_arg(alphabet)); },
        py::arg("smiles"), py::arg("alphabet") = "solvent-CNO");
  m.def("write_smiles", [](const Molecule& mol, const py::object& alphabet) { return write_smiles(mol, alphabet_arg(alphabet)); },
        py::arg("molecule"), py::arg("alphabet") = "solvent-CNO");
  m.def("isomorphic", &isomorphic);

  m.def(
      "action_trace",
      [](const std::string& s, const py::object& alphabet) {
        std::vector<std::string> out;
        for (const auto& a : to_action_trace(parse_smiles(s, alphabet_arg(alphabet))).steps) out.push_back(to_string(a));
        return out;
      },
      py::arg("smiles"), py::arg("alphabet") = "solvent-CNO",
      "Actions rebuilding the molecule from its first atom, ending with DontChange.");

  m.def(
      "level0_mask",
      [](const std::string& s, const py::object& constraints, const py::object& alphabet) {
        const DesignSpace space = space_arg(alphabet, constraints);
        const ChoiceMask mask = feasible_level0(parse_smiles(s, space.alphabet), space);
        std::vector<bool> out(mask.size());
        for (std::size_t i = 0; i < mask.size(); ++i) out[i] = mask[i];
        return out;
      },
      py::arg("smiles"), py::arg("constraints") = py::none(), py::arg("alphabet") = "solvent-CNO",
      "Feasible level-0 choices: [DontChange, new atom per type, existing atom per index].");

  m.def(
      "enumerate",
      [](int max_atoms, const py::object& alphabet) {
        DesignSpace space{alphabet_arg(alphabet), Constraints{}};
        space.constraints.max_atoms = max_atoms;
        std::vector<std::string> out;
        for (const auto& [key, mol] : enumerate_valid(space).molecules) out.push_back(write_smiles(mol, space.alphabet));
        std::sort(out.begin(), out.end());
        return out;
      },
      py::arg("max_atoms"), py::arg("alphabet") = "solvent-CNO");

  m.def(
      "score",
      [](const py::object& objective, const std::vector<std::string>& smiles, const py::object& alphabet) {
        const Alphabet a = alphabet_arg(alphabet);
        std::vector<Molecule> ms;
        for (const auto& s : smiles) ms.push_back(parse_smiles(s, a));
        return make_objective(to_json(objective), a)->evaluate(ms);
      },
      py::arg("objective"), py::arg("smiles"), py::arg("alphabet") = "solvent-CNO");

  m.def("miscibility_penalty", &miscibility_penalty, py::arg("gamma_sw"), py::arg("gamma_ws"));
  m.def("solvent_iba_objective", &solvent_iba_objective, py::arg("gamma_iba_s"), py::arg("gamma_s_w"), py::arg("gamma_w_s"));
  m.def("solvent_tmb_objective", &solvent_tmb_objective, py::arg("gamma_tmb_s"), py::arg("gamma_dmba_s"),
        py::arg("gamma_s_w"), py::arg("gamma_w_s"));

  m.def("design", &design, py::arg("config"), py::arg("checkpoint") = "",
        "Runs the learner on a configuration dict and returns the archive and epoch history.");

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::vector<std::string> full{"molbuild"};
        full.insert(full.end(), args.begin(), args.end());
        std::vector<const char*> argv;
        for (const auto& a : full) argv.push_back(a.c_str());
        std::ostringstream out, err;
        const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs a command-line invocation in-process; returns (status, stdout, stderr).");
}
