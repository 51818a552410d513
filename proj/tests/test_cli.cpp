#include <doctest.h>

#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "molbuild/cli.hpp"
#include "molbuild/smiles.hpp"
#include "oracles.hpp"

using namespace molbuild;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "molbuild");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Run r;
  r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() / ("molbuild_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string file(const std::string& name, const std::string& content) const {
    std::ofstream(path_ / name) << content;
    return (path_ / name).string();
  }
  std::string operator/(const std::string& name) const { return (path_ / name).string(); }

 private:
  fs::path path_;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

const nlohmann::json kTinyPolicy = {{"d", 16}, {"n_layers", 1}, {"n_heads", 2}, {"ff_dim", 32}};

nlohmann::json butane_config(const std::string& out_dir) {
  return {{"alphabet", "solvent-CNO"},
          {"constraints", {{"max_atoms", 4}}},
          {"policy", kTinyPolicy},
          {"learner",
           {{"archive_size", 20},
            {"beam", 64},
            {"sigma", 20},
            {"epochs", 15},
            {"batches_per_epoch", 10},
            {"batch_size", 32},
            {"lr", 3e-3}}},
          {"objective", {{"type", "isomer"}, {"formula", "C4H10"}}},
          {"initial", "C"},
          {"seed", 5},
          {"output_dir", out_dir}};
}

std::vector<std::vector<std::string>> csv_rows(const std::string& path) {
  std::vector<std::vector<std::string>> rows;
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream s(line);
    for (std::string c; std::getline(s, c, ',');) cells.push_back(c);
    rows.push_back(cells);
  }
  return rows;
}

Action parse_action(const std::string& s) {
  if (s == "DontChange") return DontChange{};
  int a = 0, b = 0, c = 0;
  if (std::sscanf(s.c_str(), "AddAtom(%d,%d,%d)", &a, &b, &c) == 3) return AddAtom{a, b, c};
  REQUIRE(std::sscanf(s.c_str(), "AddBond(%d,%d,%d)", &a, &b, &c) == 3);
  return AddBond{a, b, c};
}

Molecule rebuild(const char* initial, const nlohmann::json& actions) {
  ActionTrace trace{parse_smiles(initial, Alphabet::solvent_cno()), {}};
  for (const auto& a : actions) trace.steps.push_back(parse_action(a.get<std::string>()));
  return replay(trace);
}

}  // namespace

TEST_CASE("enumerate") {
  const Run r = cli({"enumerate", "--alphabet", "C", "--max-bond-order", "3", "--max-atoms", "2"});
  CHECK(r.code == 0);
  CHECK(r.out == "4\nC\nC#C\nC=C\nCC\n");
  CHECK(cli({"enumerate", "--alphabet", "solvent-CNO", "--max-atoms", "4"}).out.rfind("571\n", 0) == 0);
  CHECK(cli({"enumerate", "--alphabet", "C", "--max-atoms", "7"}).code == 2);
  CHECK(cli({"enumerate", "--alphabet", "solvent-CNO", "--max-atoms", "5", "--state-cap", "50"}).code == 4);
}

TEST_CASE("score") {
  const Run r = cli({"score", "--objective", R"({"type":"isomer","formula":"C4H10"})", "--smiles", "CCCC", "C"});
  CHECK(r.code == 0);
  CHECK(r.out == "CCCC\t1\nC\t0.10000000000000001\n");
  TempDir dir;
  const auto spec = dir.file("objective.json", R"({"type":"atom_count"})");
  CHECK(cli({"score", "--objective", "@" + spec, "--smiles", "CCO"}).out == "CCO\t3\n");
  const Run bad = cli({"score", "--objective", R"({"type":"atom_count"})", "--smiles", "C((", "CC"});
  CHECK(bad.code == 1);
  CHECK(bad.out.find("CC\t2\n") != std::string::npos);
  CHECK(cli({"score", "--objective", R"({"type":"nope"})", "--smiles", "C"}).code == 2);
  CHECK(cli({"score", "--objective", "{not json", "--smiles", "C"}).code == 2);
}

TEST_CASE("roundtrip on the bundled corpus") {
  const Run r = cli({"roundtrip", "--corpus", std::string(MOLBUILD_DATA_DIR) + "/corpus.smi", "--alphabet", "drug-full"});
  CHECK(r.code == 0);
  CHECK(r.out.find("FAIL") == std::string::npos);
  TempDir dir;
  const auto mixed = dir.file("mixed.smi", "CCO\nC((\n");
  const Run m = cli({"roundtrip", "--corpus", mixed});
  CHECK(m.code == 1);
  CHECK(m.out.find("passed 1/2") != std::string::npos);
}

TEST_CASE("pretrain") {
  TempDir dir;
  const auto config =
      dir.file("config.json", nlohmann::json{{"policy", kTinyPolicy}, {"pretrain", {{"epochs", 2}, {"batch_size", 4}}}}.dump());

  const auto one = dir.file("one.smi", "C\n");
  Run r = cli({"pretrain", "--corpus", one, "--out", dir / "one.ckpt", "--config", config});
  CHECK(r.code == 0);
  CHECK(r.out.find("accepted 1 rejected 0") != std::string::npos);
  CHECK(fs::exists(dir / "one.ckpt"));
  CHECK(fs::exists(dir / "one.ckpt.log.csv"));

  const auto messy = dir.file("messy.smi", "CCO\nC((\nCC=O\n");
  r = cli({"pretrain", "--corpus", messy, "--out", dir / "messy.ckpt", "--config", config, "--log", dir / "log.csv"});
  CHECK(r.code == 0);
  CHECK(r.out.find("accepted 2 rejected 1") != std::string::npos);
  CHECK(r.err.find("reject 2: C((") != std::string::npos);
  CHECK(!slurp(dir / "log.csv").empty());

  const auto foreign = dir.file("foreign.smi", "CS\nCCl\n");
  r = cli({"pretrain", "--corpus", foreign, "--out", dir / "foreign.ckpt", "--config", config});
  CHECK(r.code != 0);
  CHECK(!fs::exists(dir / "foreign.ckpt"));
}

TEST_CASE("design run outputs and reproducibility") {
  TempDir dir;
  const auto config = dir.file("config.json", butane_config(dir / "a").dump());
  const Run r = cli({"design", "--config", config});
  REQUIRE(r.code == 0);
  for (const char* f : {"best.csv", "best.json", "final.ckpt", "epochs.jsonl", "manifest.json"})
    CHECK(fs::exists(fs::path(dir / "a") / f));

  const auto rows = csv_rows(dir / "a/best.csv");
  REQUIRE(!rows.empty());
  CHECK(rows[0][0] == "1");
  CHECK(rows[0][2] == "1");
  const auto best = nlohmann::json::parse(slurp(dir / "a/best.json"));
  REQUIRE(best.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(best[i]["rank"] == i + 1);
    CHECK(best[i]["smiles"] == rows[i][1]);
    CHECK(best[i]["objective"].get<double>() == std::stod(rows[i][2]));
    CHECK(best[i]["epoch"] == std::stoi(rows[i][3]));
    // Recorded actions rebuild the molecule from the initial atom.
    CHECK(write_smiles(rebuild("C", best[i]["actions"]), Alphabet::solvent_cno()) == rows[i][1]);
  }

  const auto manifest = nlohmann::json::parse(slurp(dir / "a/manifest.json"));
  CHECK(manifest["seed"] == 5);
  CHECK(manifest["epochs_run"].get<int>() >= 1);

  REQUIRE(cli({"design", "--config", config, "--out", dir / "b"}).code == 0);
  CHECK(slurp(dir / "a/best.csv") == slurp(dir / "b/best.csv"));
  REQUIRE(cli({"design", "--config", dir / "a/manifest.json", "--out", dir / "c"}).code == 0);
  CHECK(slurp(dir / "a/best.csv") == slurp(dir / "c/best.csv"));

  // Fine-tuning from a checkpoint records its digest.
  REQUIRE(cli({"design", "--config", config, "--checkpoint", dir / "a/final.ckpt", "--out", dir / "d"}).code == 0);
  CHECK(nlohmann::json::parse(slurp(dir / "d/manifest.json"))["checkpoints"]["input"].is_string());
}

TEST_CASE("design keeps a frozen hydroxy group") {
  TempDir dir;
  auto cfg = butane_config(dir / "out");
  cfg["initial"] = "CO";
  cfg["constraints"] = {{"preset", "solvent-structural"}, {"max_atoms", 5}, {"frozen_atoms", {1}}};
  cfg["objective"] = {{"type", "atom_count"}};
  const auto config = dir.file("config.json", cfg.dump());
  REQUIRE(cli({"design", "--config", config}).code == 0);
  const Alphabet cno = Alphabet::solvent_cno();
  const DesignSpace space{cno, Constraints::solvent_structural(5)};
  const auto best = nlohmann::json::parse(slurp(dir / "out/best.json"));
  REQUIRE(!best.empty());
  for (const auto& e : best) {
    const Molecule m = rebuild("CO", e["actions"]);
    CAPTURE(e["smiles"].get<std::string>());
    CHECK(m.atom(1) == static_cast<int>(*cno.find_symbol("O")));
    CHECK(m.bond(0, 1) == 1);
    CHECK(oracle::bond_total(m, 1) == 1);
    CHECK(oracle::solvent_rules_ok(m, cno));
  }
}

TEST_CASE("exit codes") {
  TempDir dir;
  CHECK(cli({}).code == 2);
  CHECK(cli({"design"}).code == 2);
  CHECK(cli({"design", "--config", dir / "missing.json"}).code == 2);

  auto cfg = butane_config(dir / "x");
  cfg["colour"] = "blue";
  CHECK(cli({"design", "--config", dir.file("bad.json", cfg.dump())}).code == 2);

  // Checkpoint trained on another alphabet.
  const auto pre = dir.file("pre.json", nlohmann::json{{"alphabet", {{"symbols", {"C", "N"}}}},
                                                       {"policy", kTinyPolicy},
                                                       {"pretrain", {{"epochs", 1}}}}
                                            .dump());
  REQUIRE(cli({"pretrain", "--corpus", dir.file("c.smi", "CN\n"), "--out", dir / "cn.ckpt", "--config", pre}).code == 0);
  CHECK(cli({"design", "--config", dir.file("ok.json", butane_config(dir / "y").dump()), "--checkpoint", dir / "cn.ckpt"})
            .code == 2);

  auto oracle_cfg = butane_config(dir / "z");
  oracle_cfg["objective"] = {{"type", "solvent_iba"}};
  oracle_cfg["oracle"] = {{"command", std::string(MOLBUILD_MOCK_ORACLE) + " --fault garbage"}, {"timeout_ms", 5000}};
  CHECK(cli({"design", "--config", dir.file("oracle.json", oracle_cfg.dump())}).code == 3);
  oracle_cfg["oracle"] = {{"command", std::string(MOLBUILD_MOCK_ORACLE) + " --delay-ms 2000"}, {"timeout_ms", 50}};
  CHECK(cli({"design", "--config", dir.file("slow.json", oracle_cfg.dump())}).code == 3);
}
