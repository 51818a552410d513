#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "molbuild/canonical.hpp"
#include "molbuild/enumerate.hpp"
#include "molbuild/smiles.hpp"
#include "oracles.hpp"

using namespace molbuild;

namespace {

const Alphabet kCNO = Alphabet::solvent_cno();

std::vector<int> random_perm(int n, Rng& rng) {
  std::vector<int> p(static_cast<std::size_t>(n));
  std::iota(p.begin(), p.end(), 0);
  for (int i = n - 1; i > 0; --i) std::swap(p[static_cast<std::size_t>(i)], p[rng.below(static_cast<std::size_t>(i + 1))]);
  return p;
}

Molecule random_molecule(Rng& rng, int max_atoms) {
  const DesignSpace open{kCNO, Constraints{max_atoms, std::nullopt, {}, {}}};
  Molecule best = Molecule::single(static_cast<int>(rng.below(3)));
  // A few rollouts, keep the largest, so sizes spread out.
  for (int r = 0; r < 3; ++r) {
    auto s = oracle::random_rollout(Molecule::single(static_cast<int>(rng.below(3))), open, rng,
                                    [](const Molecule&, const Action&, const Molecule&) {});
    if (s.molecule().size() > best.size()) best = s.molecule();
  }
  return best;
}

DesignSpace space_of(const Alphabet& a, int max_atoms) { return {a, Constraints{max_atoms, std::nullopt, {}, {}}}; }

}  // namespace

TEST_CASE("formaldehyde built either way has one key") {
  Molecule a(std::vector<int>{0, 2});
  a.set_bond(0, 1, 2);
  Molecule b(std::vector<int>{2, 0});
  b.set_bond(0, 1, 2);
  CHECK(canonical_key(a) == canonical_key(b));
}

TEST_CASE("butane and isobutane differ") {
  const Molecule n = parse_smiles("CCCC", kCNO);
  const Molecule iso = parse_smiles("CC(C)C", kCNO);
  CHECK(canonical_key(n) != canonical_key(iso));
  CHECK_FALSE(oracle::brute_isomorphic(n, iso));
}

TEST_CASE("carbon and nitrogen atoms differ") {
  CHECK(canonical_key(Molecule::single(0)) != canonical_key(Molecule::single(1)));
}

TEST_CASE("bond orders are part of the key") {
  CHECK(canonical_key(parse_smiles("C=CC", kCNO)) != canonical_key(parse_smiles("CCC", kCNO)));
  CHECK(canonical_key(parse_smiles("C=CC=C", kCNO)) != canonical_key(parse_smiles("C=C=CC", kCNO)));
}

TEST_CASE("keys are invariant under relabelling") {
  Rng rng(42);
  for (int i = 0; i < 100; ++i) {
    const Molecule m = random_molecule(rng, 12);
    const std::string key = canonical_key(m);
    for (int p = 0; p < 10; ++p) CHECK(canonical_key(m.permuted(random_perm(m.size(), rng))) == key);
  }
}

TEST_CASE("canonical order relabels to an identical molecule") {
  Rng rng(7);
  for (int i = 0; i < 50; ++i) {
    const Molecule m = random_molecule(rng, 10);
    const Molecule q = m.permuted(random_perm(m.size(), rng));
    const auto fm = canonical_form(m), fq = canonical_form(q);
    std::vector<int> inv_m(fm.order.size()), inv_q(fq.order.size());
    for (std::size_t p = 0; p < fm.order.size(); ++p) inv_m[static_cast<std::size_t>(fm.order[p])] = static_cast<int>(p);
    for (std::size_t p = 0; p < fq.order.size(); ++p) inv_q[static_cast<std::size_t>(fq.order[p])] = static_cast<int>(p);
    CHECK(m.permuted(inv_m) == q.permuted(inv_q));
  }
}

TEST_CASE("key equality agrees with brute-force isomorphism") {
  Rng rng(17);
  std::vector<Molecule> pool;
  for (int i = 0; i < 150; ++i) pool.push_back(random_molecule(rng, 6));
  for (int i = 0; i < 30; ++i) {
    const Molecule& m = pool[rng.below(pool.size())];
    pool.push_back(m.permuted(random_perm(m.size(), rng)));
  }
  int mismatches = 0, equal_pairs = 0;
  for (std::size_t i = 0; i < pool.size(); ++i)
    for (std::size_t j = i + 1; j < pool.size(); ++j) {
      if (pool[i].size() != pool[j].size()) continue;
      const bool brute = oracle::brute_isomorphic(pool[i], pool[j]);
      equal_pairs += brute;
      if (brute != isomorphic(pool[i], pool[j])) ++mismatches;
    }
  CHECK(mismatches == 0);
  CHECK(equal_pairs >= 30);
}

TEST_CASE("highly symmetric graphs") {
  const Molecule cubane = parse_smiles("C12C3C4C1C5C2C3C45", kCNO);
  Rng rng(1);
  for (int p = 0; p < 20; ++p) CHECK(canonical_key(cubane.permuted(random_perm(8, rng))) == canonical_key(cubane));
  const Molecule ring8 = parse_smiles("C1CCCCCCC1", kCNO);
  const Molecule two4 = parse_smiles("C1CC2CCCC2C1", kCNO);
  CHECK(canonical_key(ring8) != canonical_key(two4));
}

TEST_CASE("enumeration examples") {
  CHECK(enumerate_valid(space_of(Alphabet::only({"C"}, 1), 1)).molecules.size() == 1);
  CHECK(enumerate_valid(space_of(Alphabet::only({"C"}, 3), 2)).molecules.size() == 4);
  // methane; ethane; propane, cyclopropane; butane, isobutane, cyclobutane,
  // methylcyclopropane, bicyclobutane, tetrahedrane
  CHECK(enumerate_valid(space_of(Alphabet::only({"C"}, 1), 4)).molecules.size() == 10);
}

TEST_CASE("enumeration matches the brute-force oracle") {
  for (int y = 1; y <= 3; ++y) {
    const Alphabet a = Alphabet::solvent_cno(y);
    for (int n = 1; n <= 3; ++n) {
      const auto e = enumerate_valid(space_of(a, n));
      std::set<std::string> keys;
      for (const auto& [key, m] : e.molecules) keys.insert(oracle::brute_key(m));
      CHECK(keys == oracle::brute_enumerate(a, n));
    }
  }
}

TEST_CASE("CNO up to four atoms has 571 molecules") {
  const auto e = enumerate_valid(space_of(kCNO, 4));
  CHECK(e.molecules.size() == 571);
}

TEST_CASE("enumeration refuses large sizes and honours the state cap") {
  CHECK_THROWS_AS(enumerate_valid(space_of(kCNO, 7)), Error);
  try {
    enumerate_valid(space_of(kCNO, 5), 100);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::BudgetExceeded);
  }
}
