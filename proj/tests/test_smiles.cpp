#include <doctest.h>

#include "molbuild/canonical.hpp"
#include "molbuild/enumerate.hpp"
#include "molbuild/smiles.hpp"
#include "oracles.hpp"

using namespace molbuild;

namespace {

const Alphabet kCNO = Alphabet::solvent_cno();
const Alphabet kDrug = Alphabet::drug_full();

ErrorKind parse_error(const std::string& s, const Alphabet& a, std::size_t* position = nullptr) {
  try {
    parse_smiles(s, a);
  } catch (const SmilesError& e) {
    if (position) *position = e.position();
    return e.kind();
  }
  FAIL("no error for " << s);
  return ErrorKind::InvalidArgument;
}

std::vector<std::string> corpus() { return read_corpus(std::string(MOLBUILD_DATA_DIR) + "/corpus.smi"); }

}  // namespace

TEST_CASE("formaldehyde") {
  const Molecule m = parse_smiles("C=O", kCNO);
  CHECK(m.atoms() == std::vector<int>{0, 2});
  CHECK(m.bond(0, 1) == 2);
}

TEST_CASE("methane is one carbon with four hydrogens") {
  const Molecule m = parse_smiles("C", kCNO);
  CHECK(m.size() == 1);
  CHECK(valence_slack(m, 0, kCNO) == 4);
}

TEST_CASE("benzene is kekulised into alternating bonds") {
  const Molecule m = parse_smiles("c1ccccc1", kCNO);
  REQUIRE(m.size() == 6);
  int doubles = 0;
  for (int i = 0; i < 6; ++i) {
    CHECK(oracle::bond_total(m, i) == 3);
    CHECK(oracle::hydrogens(m, i, kCNO) == 1);
    int d = 0;
    for (int j = 0; j < 6; ++j) d += m.bond(i, j) == 2;
    CHECK(d == 1);
    doubles += d;
  }
  CHECK(doubles == 6);
  CHECK(oracle::cycle_basis_sizes(m) == std::vector<int>{6});
}

TEST_CASE("aromatic heterocycles") {
  CHECK(parse_smiles("c1ccncc1", kCNO).size() == 6);
  CHECK(parse_smiles("c1cc[nH]c1", kCNO).size() == 5);
  CHECK(parse_smiles("c1ccoc1", kCNO).size() == 5);
  CHECK(parse_smiles("c1ccc2ccccc2c1", kCNO).size() == 10);
}

TEST_CASE("writer examples") {
  CHECK(write_smiles(Molecule::single(0), kCNO) == "C");
  const std::string fa = write_smiles(parse_smiles("O=C", kCNO), kCNO);
  CHECK((fa == "C=O" || fa == "O=C"));
  const std::string ring = write_smiles(parse_smiles("C1CCCCC1", kCNO), kCNO);
  int digits = 0;
  for (char c : ring) digits += c == '1';
  CHECK(digits == 2);
  CHECK(ring.find('2') == std::string::npos);
  CHECK(isomorphic(parse_smiles(ring, kCNO), parse_smiles("C1CCCCC1", kCNO)));
}

TEST_CASE("written SMILES is canonical") {
  CHECK(write_smiles(parse_smiles("OCC", kCNO), kCNO) == write_smiles(parse_smiles("CCO", kCNO), kCNO));
  CHECK(write_smiles(parse_smiles("C(C)(C)CN", kCNO), kCNO) == write_smiles(parse_smiles("NCC(C)C", kCNO), kCNO));
}

TEST_CASE("charged and chiral atoms") {
  const Molecule m = parse_smiles("C[N+](C)(C)C", kDrug);
  CHECK(kDrug[static_cast<std::size_t>(m.atom(1))].symbol == "N+");
  const Molecule a = parse_smiles("C[C@H](N)O", kDrug);
  CHECK(kDrug[static_cast<std::size_t>(a.atom(1))].symbol == "C@");
  const Molecule b = parse_smiles("C[C@@H](N)O", kDrug);
  CHECK_FALSE(isomorphic(a, b));
  for (const char* s : {"C[N+](C)(C)C", "C[C@H](N)O", "CC(=O)[O-]", "FC(Cl)(Br)I", "CS(=O)(=O)N", "OP(=O)(O)O"}) {
    const Molecule x = parse_smiles(s, kDrug);
    CHECK(isomorphic(x, parse_smiles(write_smiles(x, kDrug), kDrug)));
  }
}

TEST_CASE("errors carry a kind and a position") {
  std::size_t pos = 999;
  CHECK(parse_error("CC(C", kCNO, &pos) == ErrorKind::SyntaxError);
  CHECK(pos == 4);
  CHECK(parse_error("CC)C", kCNO, &pos) == ErrorKind::SyntaxError);
  CHECK(pos == 2);
  CHECK(parse_error("C1CC", kCNO, &pos) == ErrorKind::SyntaxError);
  CHECK(pos == 1);
  CHECK(parse_error("C/C=C/C", kCNO, &pos) == ErrorKind::SyntaxError);
  CHECK(pos == 1);
  CHECK(parse_error("[13CH4]", kCNO, &pos) == ErrorKind::SyntaxError);
  CHECK(parse_error("C.C", kCNO, &pos) == ErrorKind::SyntaxError);
  CHECK(pos == 1);
  CHECK(parse_error("", kCNO) == ErrorKind::SyntaxError);
  CHECK(parse_error("=C", kCNO, &pos) == ErrorKind::SyntaxError);
  CHECK(pos == 0);
  CHECK(parse_error("C==C", kCNO) == ErrorKind::SyntaxError);
  CHECK(parse_error("CCX", kCNO, &pos) == ErrorKind::SyntaxError);
  CHECK(pos == 2);
  CHECK(parse_error("[CH4:1]", kCNO) == ErrorKind::SyntaxError);
}

TEST_CASE("atoms outside the alphabet are unsupported") {
  std::size_t pos = 0;
  CHECK(parse_error("CCS", kCNO, &pos) == ErrorKind::UnsupportedAtom);
  CHECK(pos == 2);
  CHECK(parse_error("C[Si](C)C", kDrug) == ErrorKind::UnsupportedAtom);
  CHECK(parse_error("[H]C", kCNO) == ErrorKind::UnsupportedAtom);
}

TEST_CASE("valence and kekulisation failures") {
  std::size_t pos = 0;
  CHECK(parse_error("C(C)(C)(C)(C)C", kCNO, &pos) == ErrorKind::ValenceViolation);
  CHECK(pos == 0);
  CHECK(parse_error("[CH2]C", kCNO) == ErrorKind::ValenceViolation);
  CHECK(parse_error("O=O=O", kCNO) == ErrorKind::ValenceViolation);
  CHECK(parse_error("c1cccc1", kCNO) == ErrorKind::KekulizationFailure);
  CHECK(parse_error("C#C", Alphabet::solvent_cno(2)) == ErrorKind::ValenceViolation);
}

TEST_CASE("traces of small molecules") {
  const ActionTrace fa = to_action_trace(parse_smiles("C=O", kCNO));
  CHECK(fa.initial == Molecule::single(0));
  REQUIRE(fa.steps.size() == 2);
  CHECK(fa.steps[0] == Action{AddAtom{2, 0, 2}});
  CHECK(fa.steps[1] == Action{DontChange{}});

  const ActionTrace single = to_action_trace(Molecule::single(1));
  CHECK(single.initial == Molecule::single(1));
  CHECK(single.steps == std::vector<Action>{DontChange{}});

  const ActionTrace cp = to_action_trace(parse_smiles("C1CC1", kCNO));
  REQUIRE(cp.steps.size() == 4);
  CHECK(std::holds_alternative<AddAtom>(cp.steps[0]));
  CHECK(std::holds_alternative<AddAtom>(cp.steps[1]));
  CHECK(std::holds_alternative<AddBond>(cp.steps[2]));
  CHECK(std::holds_alternative<DontChange>(cp.steps[3]));
  CHECK(isomorphic(replay(cp), parse_smiles("C1CC1", kCNO)));
}

TEST_CASE("trace choices decompose each action") {
  const ActionTrace t = to_action_trace(parse_smiles("C=O", kCNO));
  CHECK(trace_choices(t, 3) == std::vector<int>{3, 0, 1, 0});
}

TEST_CASE("disconnected molecules cannot be traced") {
  Molecule m(std::vector<int>{0, 0});
  try {
    to_action_trace(m);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DisconnectedMolecule);
  }
}

TEST_CASE("corpus traces are legal rollouts and round trip") {
  const auto lines = corpus();
  REQUIRE(lines.size() >= 1000);
  const DesignSpace space{kDrug, Constraints{60, std::nullopt, {}, {}}};
  int failures = 0;
  for (const auto& s : lines) {
    const Molecule m = parse_smiles(s, kDrug);
    const Molecule again = parse_smiles(write_smiles(m, kDrug), kDrug);
    if (!isomorphic(m, again)) ++failures;
    if (!isomorphic(replay(to_action_trace(m), &space), m)) ++failures;
  }
  CHECK(failures == 0);
}

TEST_CASE("every enumerated molecule is rebuilt by its trace") {
  const DesignSpace space{kCNO, Constraints{4, std::nullopt, {}, {}}};
  const auto e = enumerate_valid(space);
  int failures = 0;
  for (const auto& [key, m] : e.molecules) {
    const Molecule r = replay(to_action_trace(m), &space);
    if (canonical_key(r) != key) ++failures;
  }
  CHECK(failures == 0);
}

TEST_CASE("mutated corpus strings parse or fail cleanly") {
  const auto lines = corpus();
  const std::string alphabet_chars = "CNOcno()=#123456789[]@+-HSsPFl%./\\*";
  Rng rng(2024);
  int parsed = 0, rejected = 0;
  for (int i = 0; i < 5000; ++i) {
    std::string s = lines[rng.below(lines.size())];
    const int edits = 1 + static_cast<int>(rng.below(3));
    for (int e = 0; e < edits && !s.empty(); ++e) {
      const std::size_t at = rng.below(s.size());
      switch (rng.below(3)) {
        case 0: s.erase(at, 1); break;
        case 1: s.insert(s.begin() + static_cast<std::ptrdiff_t>(at), alphabet_chars[rng.below(alphabet_chars.size())]); break;
        default: s[at] = alphabet_chars[rng.below(alphabet_chars.size())];
      }
    }
    try {
      const Molecule m = parse_smiles(s, kDrug);
      CHECK(oracle::valence_ok(m, kDrug));
      CHECK(oracle::connected(m));
      ++parsed;
    } catch (const SmilesError& e) {
      CHECK(e.position() <= s.size());
      ++rejected;
    }
  }
  CHECK(parsed > 0);
  CHECK(rejected > 0);
}

TEST_CASE("read_corpus skips comments and blank lines") {
  CHECK_THROWS_AS(read_corpus("/nonexistent/corpus.smi"), Error);
  const auto lines = corpus();
  for (const auto& l : lines) {
    CHECK_FALSE(l.empty());
    CHECK(l[0] != '#');
  }
}
