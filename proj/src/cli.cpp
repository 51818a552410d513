#include "molbuild/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "molbuild/canonical.hpp"
#include "molbuild/checkpoint.hpp"
#include "molbuild/config.hpp"
#include "molbuild/enumerate.hpp"
#include "molbuild/learner.hpp"
#include "molbuild/objectives.hpp"
#include "molbuild/smiles.hpp"

namespace molbuild {

namespace fs = std::filesystem;

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ConfigError:
    case ErrorKind::AlphabetMismatch:
    case ErrorKind::CorruptCheckpoint:
      return 2;
    case ErrorKind::OracleUnreachable:
    case ErrorKind::OracleTimeout:
    case ErrorKind::ProtocolError:
      return 3;
    case ErrorKind::BudgetExceeded:
      return 4;
    default:
      return 1;
  }
}

namespace {

std::string format_double(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

Alphabet alphabet_arg(const std::string& spec, int max_bond_order) {
  if (spec == "solvent-CNO" || spec == "drug-full") return Alphabet::preset(spec, max_bond_order);
  std::vector<std::string> symbols;
  std::stringstream in(spec);
  for (std::string s; std::getline(in, s, ',');)
    if (!s.empty()) symbols.push_back(s);
  if (symbols.empty()) throw Error(ErrorKind::ConfigError, "empty alphabet");
  try {
    return Alphabet::only(symbols, max_bond_order);
  } catch (const Error& e) {
    throw Error(ErrorKind::ConfigError, e.what());
  }
}

nlohmann::json json_arg(const std::string& text) {
  try {
    if (!text.empty() && text[0] == '@') {
      std::ifstream in(text.substr(1));
      if (!in) throw Error(ErrorKind::ConfigError, "cannot read '" + text.substr(1) + "'");
      return nlohmann::json::parse(in);
    }
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ConfigError, std::string("invalid JSON argument: ") + e.what());
  }
}

std::uint64_t policy_seed(std::uint64_t seed) { return Rng(seed).split(0x5eed).next_u64(); }

int cmd_pretrain(const std::string& corpus_path, const std::string& out_path, const std::string& config_path,
                 std::string log_path, std::ostream& out, std::ostream& err) {
  const RunConfig cfg = config_path.empty() ? RunConfig::from_json(nlohmann::json::object()) : RunConfig::load(config_path);
  const DesignSpace space = cfg.space();
  std::vector<std::string> lines;
  try {
    lines = read_corpus(corpus_path);
  } catch (const Error& e) {
    throw Error(ErrorKind::EmptyCorpus, e.what());
  }
  std::vector<ActionTrace> traces;
  std::size_t rejected = 0;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    try {
      ActionTrace trace = to_action_trace(parse_smiles(lines[i], space.alphabet));
      replay(trace, &space);
      traces.push_back(std::move(trace));
    } catch (const Error& e) {
      ++rejected;
      err << "reject " << i + 1 << ": " << lines[i] << ": " << e.what() << "\n";
    }
  }
  out << "corpus " << lines.size() << " accepted " << traces.size() << " rejected " << rejected << "\n";
  if (traces.empty()) throw Error(ErrorKind::EmptyCorpus, "no corpus molecule fits the alphabet and constraints");
  if (log_path.empty()) log_path = out_path + ".log.csv";
  std::ofstream log(log_path);
  if (!log) throw Error(ErrorKind::InvalidArgument, "cannot write '" + log_path + "'");
  Rng rng(cfg.seed);
  auto on_epoch = [&](const EpochLoss& e) {
    out << nlohmann::json{{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"validation_loss", e.validation_loss}}.dump()
        << "\n";
  };
  Policy<float> policy(cfg.policy, policy_seed(cfg.seed));
  if (cfg.float64) {
    Policy<double> wide = policy.cast<double>();
    pretrain(wide, traces, space, cfg.pretrain, rng, &log, on_epoch);
    policy = wide.cast<float>();
  } else {
    pretrain(policy, traces, space, cfg.pretrain, rng, &log, on_epoch);
  }
  save_checkpoint(out_path, policy, space.alphabet);
  out << "checkpoint " << out_path << "\n";
  return 0;
}

int cmd_design(const std::string& config_path, const std::string& checkpoint, const std::string& out_override,
               std::ostream& out) {
  RunConfig cfg = RunConfig::load(config_path);
  if (!out_override.empty()) {
    cfg.output_dir = out_override;
    cfg.raw["output_dir"] = out_override;
  }
  if (cfg.objective.is_null()) throw Error(ErrorKind::ConfigError, "design needs an objective");
  const DesignSpace space = cfg.space();
  const Molecule m0 = cfg.initial_molecule();
  std::shared_ptr<OracleClient> oracle;
  if (!cfg.oracle.is_null()) oracle = connect_oracle(cfg.oracle);
  auto objective = make_objective(cfg.objective, cfg.alphabet, oracle);

  Policy<float> policy;
  std::string input_digest;
  if (!checkpoint.empty()) {
    const Checkpoint ck = load_checkpoint(checkpoint, cfg.alphabet);
    policy = Policy<float>(ck.config, ck.params);
    input_digest = file_digest(checkpoint);
  } else {
    policy = Policy<float>(cfg.policy, policy_seed(cfg.seed));
  }

  fs::create_directories(cfg.output_dir);
  const fs::path dir(cfg.output_dir);
  std::ofstream epochs(dir / "epochs.jsonl");
  auto on_epoch = [&](const EpochRecord& r) {
    const std::string line = r.to_json().dump();
    out << line << "\n";
    epochs << line << "\n";
    epochs.flush();
  };
  Rng rng(cfg.seed);
  LearnerResult result;
  if (cfg.float64) {
    Policy<double> wide = policy.cast<double>();
    result = run_learner(wide, m0, *objective, space, cfg.learner, rng, on_epoch);
    policy = wide.cast<float>();
  } else {
    result = run_learner(policy, m0, *objective, space, cfg.learner, rng, on_epoch);
  }

  std::ofstream csv(dir / "best.csv");
  csv << "rank,smiles,objective,epoch\n";
  nlohmann::json best = nlohmann::json::array();
  int rank = 0;
  for (const auto& e : result.archive.entries()) {
    ++rank;
    const std::string smiles = write_smiles(e.molecule, cfg.alphabet);
    csv << rank << ',' << smiles << ',' << format_double(e.objective) << ',' << e.epoch << '\n';
    nlohmann::json actions = nlohmann::json::array();
    for (const auto& a : e.actions) actions.push_back(to_string(a));
    best.push_back({{"rank", rank}, {"smiles", smiles}, {"objective", e.objective}, {"epoch", e.epoch}, {"actions", actions}});
  }
  std::ofstream(dir / "best.json") << best.dump(2) << "\n";
  const fs::path final_ckpt = dir / "final.ckpt";
  save_checkpoint(final_ckpt.string(), policy, cfg.alphabet);
  nlohmann::json manifest = {{"version", MOLBUILD_VERSION},
                             {"seed", cfg.seed},
                             {"config", cfg.raw},
                             {"stop_reason", result.stop_reason},
                             {"epochs_run", result.history.size()},
                             {"checkpoints",
                              {{"input", checkpoint.empty() ? nlohmann::json(nullptr) : nlohmann::json(input_digest)},
                               {"final", file_digest(final_ckpt.string())}}}};
  std::ofstream(dir / "manifest.json") << manifest.dump(2) << "\n";
  out << "best " << format_double(result.archive.best()) << " written to " << cfg.output_dir << "\n";
  return 0;
}

int cmd_enumerate(const std::string& alphabet, int max_bond_order, int max_atoms, std::size_t state_cap,
                  std::ostream& out) {
  DesignSpace space{alphabet_arg(alphabet, max_bond_order), Constraints{}};
  space.constraints.max_atoms = max_atoms;
  if (max_atoms < 1 || max_atoms > 6) throw Error(ErrorKind::ConfigError, "--max-atoms must lie in 1..6");
  const Enumeration e = enumerate_valid(space, state_cap);
  std::vector<std::string> smiles;
  for (const auto& [key, m] : e.molecules) smiles.push_back(write_smiles(m, space.alphabet));
  std::sort(smiles.begin(), smiles.end());
  out << e.molecules.size() << "\n";
  for (const auto& s : smiles) out << s << "\n";
  return 0;
}

int cmd_score(const std::string& objective_text, const std::vector<std::string>& smiles, const std::string& alphabet,
              int max_bond_order, const std::string& config_path, std::ostream& out) {
  Alphabet alpha = alphabet_arg(alphabet, max_bond_order);
  nlohmann::json spec;
  std::shared_ptr<OracleClient> oracle;
  if (!config_path.empty()) {
    const RunConfig cfg = RunConfig::load(config_path);
    alpha = cfg.alphabet;
    spec = cfg.objective;
    if (!cfg.oracle.is_null()) oracle = connect_oracle(cfg.oracle);
  }
  if (!objective_text.empty()) spec = json_arg(objective_text);
  if (spec.is_null()) throw Error(ErrorKind::ConfigError, "score needs --objective or a config with an objective");
  auto objective = make_objective(spec, alpha, oracle);
  int status = 0;
  std::vector<Molecule> molecules;
  std::vector<std::string> names;
  for (const auto& s : smiles) {
    try {
      molecules.push_back(parse_smiles(s, alpha));
      names.push_back(s);
    } catch (const Error& e) {
      out << s << "\terror: " << e.what() << "\n";
      status = 1;
    }
  }
  const auto values = objective->evaluate(molecules);
  for (std::size_t i = 0; i < values.size(); ++i) out << names[i] << '\t' << format_double(values[i]) << "\n";
  return status;
}

int cmd_roundtrip(const std::string& corpus, const std::string& alphabet, int max_bond_order, std::ostream& out) {
  const Alphabet alpha = alphabet_arg(alphabet, max_bond_order);
  const auto lines = read_corpus(corpus);
  std::size_t passed = 0;
  for (const auto& line : lines) {
    try {
      const Molecule m = parse_smiles(line, alpha);
      const std::string written = write_smiles(m, alpha);
      if (!isomorphic(m, parse_smiles(written, alpha))) throw Error(ErrorKind::InvalidArgument, "re-parsed molecule differs");
      out << "PASS\t" << line << '\t' << written << "\n";
      ++passed;
    } catch (const Error& e) {
      out << "FAIL\t" << line << '\t' << e.what() << "\n";
    }
  }
  out << "passed " << passed << "/" << lines.size() << "\n";
  return passed == lines.size() ? 0 : 1;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Molecular design by sequential graph edits"};
  app.require_subcommand(1);
  app.set_version_flag("--version", MOLBUILD_VERSION);

  std::string corpus, ckpt_out, config, log_path, checkpoint, out_dir, alphabet = "solvent-CNO", objective;
  int max_atoms = 0, max_bond_order = 3;
  std::vector<std::string> smiles;

  auto* pre = app.add_subcommand("pretrain", "Pretrain the policy on a SMILES corpus");
  pre->add_option("--corpus", corpus, "SMILES file, one per line")->required();
  pre->add_option("--out", ckpt_out, "Checkpoint to write")->required();
  pre->add_option("--config", config, "Run configuration (JSON)");
  pre->add_option("--log", log_path, "Training log CSV (default <out>.log.csv)");

  auto* design = app.add_subcommand("design", "Optimise molecules for an objective");
  design->add_option("--config", config, "Run configuration (JSON) or a run manifest")->required();
  design->add_option("--checkpoint", checkpoint, "Pretrained checkpoint");
  design->add_option("--out", out_dir, "Output directory (overrides output_dir)");

  auto* enumerate = app.add_subcommand("enumerate", "List every valid molecule up to a size");
  enumerate->add_option("--alphabet", alphabet, "Preset name or comma-separated symbols");
  enumerate->add_option("--max-bond-order", max_bond_order, "Maximum bond order");
  enumerate->add_option("--max-atoms", max_atoms, "Heavy-atom limit (at most 6)")->required();
  std::size_t state_cap = 2'000'000;
  enumerate->add_option("--state-cap", state_cap, "Abort after expanding this many states");

  auto* score = app.add_subcommand("score", "Evaluate an objective on molecules");
  score->add_option("--objective", objective, "Objective JSON, or @file");
  score->add_option("--smiles", smiles, "Molecules to score")->required();
  score->add_option("--alphabet", alphabet, "Preset name or comma-separated symbols");
  score->add_option("--max-bond-order", max_bond_order, "Maximum bond order");
  score->add_option("--config", config, "Take alphabet, objective and oracle from a run configuration");

  auto* roundtrip = app.add_subcommand("roundtrip", "Check parse/write/parse on a corpus");
  roundtrip->add_option("--corpus", corpus, "SMILES file, one per line")->required();
  roundtrip->add_option("--alphabet", alphabet, "Preset name or comma-separated symbols");
  roundtrip->add_option("--max-bond-order", max_bond_order, "Maximum bond order");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }
  try {
    if (*pre) return cmd_pretrain(corpus, ckpt_out, config, log_path, out, err);
    if (*design) return cmd_design(config, checkpoint, out_dir, out);
    if (*enumerate) return cmd_enumerate(alphabet, max_bond_order, max_atoms, state_cap, out);
    if (*score) return cmd_score(objective, smiles, alphabet, max_bond_order, config, out);
    if (*roundtrip) return cmd_roundtrip(corpus, alphabet, max_bond_order, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace molbuild
