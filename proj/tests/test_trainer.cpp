#include <doctest.h>

#include <sstream>

#include "checks.hpp"
#include "molbuild/smiles.hpp"
#include "molbuild/trainer.hpp"

using namespace molbuild;

namespace {

const Alphabet kCNO = Alphabet::solvent_cno();
const DesignSpace kOpen{kCNO, Constraints{25, std::nullopt, {}, {}}};

PolicyConfig tiny() {
  PolicyConfig c;
  c.d = 16;
  c.n_layers = 2;
  c.n_heads = 4;
  c.ff_dim = 32;
  c.dropout = 0.0;
  return c;
}

template <class T>
void zero_heads(Policy<T>& p) {
  for (const auto& t : p.layout().tensors())
    if (t.head())
      for (std::size_t i = 0; i < t.size(); ++i) p.params()[t.offset + i] = T(0);
}

std::vector<TrainItem> gradient_batch() {
  const Molecule m = parse_smiles("CC(=O)NC1CC1", kCNO);
  std::vector<TrainItem> b;
  b.push_back({m, {}, 0});
  ActionLevelState s1;
  s1.level = Level::L1;
  s1.first = FirstChoice{FirstChoice::Kind::NewAtom, 1};
  b.push_back({m, s1, 0});
  ActionLevelState s2;
  s2.level = Level::L2;
  s2.first = FirstChoice{FirstChoice::Kind::Existing, 4};
  s2.second = 0;
  b.push_back({m, s2, 0});
  b.push_back({m, {}, 3 + 1 + 5});
  return b;
}

std::vector<ActionTrace> copies(const char* smiles, int n) {
  return std::vector<ActionTrace>(static_cast<std::size_t>(n), to_action_trace(parse_smiles(smiles, kCNO)));
}

}  // namespace

TEST_CASE("uniform policy over four choices costs ln 4") {
  Policy<double> p(tiny(), 1);
  zero_heads(p);
  const std::vector<TrainItem> batch{{Molecule::single(0), {}, 2}};
  CHECK(p.loss(batch, kOpen) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  std::vector<double> grad;
  CHECK(p.loss_and_grad(batch, kOpen, grad) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("a forced choice costs nothing") {
  Policy<double> p(tiny(), 1);
  Rng rng(1);
  checks::perturb(p, rng, 0.5);
  ActionLevelState s;
  s.level = Level::L2;
  s.first = FirstChoice{FirstChoice::Kind::NewAtom, 0};
  s.second = 1;
  const std::vector<TrainItem> batch{{parse_smiles("C=N", kCNO), s, 0}};
  std::vector<double> grad;
  CHECK(p.loss_and_grad(batch, kOpen, grad) == 0.0);
  for (double g : grad) CHECK(g == 0.0);
}

TEST_CASE("masked logits receive no gradient") {
  Policy<double> p(tiny(), 1);
  Rng rng(2);
  checks::perturb(p, rng, 0.5);
  // On formaldehyde the new-atom head bias for DontChange and types is live,
  // but the oxygen's level-0 entry is masked.
  const std::vector<TrainItem> batch{{parse_smiles("C=O", kCNO), {}, 1}};
  std::vector<double> grad;
  p.loss_and_grad(batch, kOpen, grad);
  const auto& g0b = p.layout().at("g0.bias");
  for (std::size_t j = 0; j < 4; ++j) CHECK(grad[g0b.offset + j] != 0.0);
  ActionLevelState s;
  s.level = Level::L1;
  s.first = FirstChoice{FirstChoice::Kind::NewAtom, 0};
  const std::vector<TrainItem> one{{parse_smiles("C=O", kCNO), s, 0}};
  std::vector<double> g2;
  CHECK(p.loss_and_grad(one, kOpen, g2) == 0.0);
  for (double g : g2) CHECK(g == 0.0);
}

TEST_CASE("infeasible targets are refused") {
  Policy<double> p(tiny(), 1);
  std::vector<double> grad;
  try {
    p.loss_and_grad({{parse_smiles("C=O", kCNO), {}, 3 + 1 + 1}}, kOpen, grad);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::TargetMasked);
  }
}

TEST_CASE("analytic gradients match finite differences") {
  Policy<double> p(tiny(), 7);
  Rng rng(3);
  checks::perturb(p, rng, 0.3);
  CHECK(checks::gradient_check(p, gradient_batch(), kOpen, 200, rng) < 1e-3);
}

TEST_CASE("gradients with dropout match finite differences under a fixed mask") {
  PolicyConfig c = tiny();
  c.dropout = 0.2;
  Policy<double> p(c, 7);
  Rng rng(4);
  checks::perturb(p, rng, 0.3);
  const auto batch = gradient_batch();
  std::vector<double> grad;
  Rng d(9);
  p.loss_and_grad(batch, kOpen, grad, &d);
  double worst = 0.0;
  for (int t = 0; t < 60; ++t) {
    const std::size_t i = rng.below(grad.size());
    auto with = [&](double delta) {
      const double old = p.params()[i];
      p.params()[i] = old + delta;
      std::vector<double> unused;
      Rng same(9);
      const double l = p.loss_and_grad(batch, kOpen, unused, &same);
      p.params()[i] = old;
      return l;
    };
    const double numeric = (with(1e-5) - with(-1e-5)) / 2e-5;
    worst = std::max(worst, std::abs(numeric - grad[i]) / std::max({std::abs(numeric), std::abs(grad[i]), 1e-8}));
  }
  CHECK(worst < 1e-3);
}

TEST_CASE("Adam examples") {
  SUBCASE("zero gradient") {
    Adam<double> adam(3, {});
    std::vector<double> p{1.0, -2.0, 0.5};
    adam.step(p, {0.0, 0.0, 0.0});
    CHECK(p == std::vector<double>{1.0, -2.0, 0.5});
  }
  SUBCASE("first step moves by the learning rate") {
    AdamConfig c;
    c.lr = 0.1;
    Adam<double> adam(1, c);
    std::vector<double> p{0.0};
    CHECK(adam.step(p, {1.0}) == 1.0);
    CHECK(p[0] == doctest::Approx(-0.1).epsilon(1e-6));
  }
  SUBCASE("repeated gradients move monotonically") {
    AdamConfig c;
    c.lr = 0.01;
    Adam<double> adam(1, c);
    std::vector<double> p{0.0};
    double last = 0.0;
    for (int i = 0; i < 20; ++i) {
      adam.step(p, {0.5});
      CHECK(p[0] < last);
      last = p[0];
    }
  }
  SUBCASE("clipping bounds the first moment") {
    Adam<double> adam(2, {});
    std::vector<double> p{0.0, 0.0};
    CHECK(adam.step(p, {30.0, 40.0}) == doctest::Approx(50.0));
    CHECK(p[0] == doctest::Approx(-3e-4).epsilon(1e-4));
  }
  SUBCASE("frozen entries stay put") {
    Adam<double> adam(2, {});
    std::vector<double> p{1.0, 1.0};
    const std::vector<char> mask{0, 1};
    adam.step(p, {1.0, 1.0}, &mask);
    CHECK(p[0] == 1.0);
    CHECK(p[1] < 1.0);
  }
  SUBCASE("non-finite gradients leave everything untouched") {
    Adam<double> adam(2, {});
    std::vector<double> p{1.0, 1.0};
    try {
      adam.step(p, {1.0, std::nan("")});
      FAIL("expected throw");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::NonFiniteGradient);
    }
    CHECK(p == std::vector<double>{1.0, 1.0});
    CHECK(adam.steps() == 0);
  }
}

TEST_CASE("trainable mask covers exactly the heads") {
  const Policy<float> p(tiny(), 1);
  const auto heads = trainable_mask(p.layout(), false);
  const auto all = trainable_mask(p.layout(), true);
  std::size_t head_size = 0;
  for (const auto& name : {"g0.weight", "g0.bias", "h0.weight", "h0.bias", "h1.weight", "h1.bias", "g2.weight", "g2.bias"})
    head_size += p.layout().at(name).size();
  CHECK(static_cast<std::size_t>(std::count(heads.begin(), heads.end(), 1)) == head_size);
  CHECK(static_cast<std::size_t>(std::count(all.begin(), all.end(), 1)) == all.size());
}

TEST_CASE("trace items follow the sub-actions") {
  const ActionTrace t = to_action_trace(parse_smiles("CC=O", kCNO));
  const auto items = trace_items(t, 3);
  REQUIRE(items.size() == 7);
  CHECK(items[0].state.level == Level::L0);
  CHECK(items[1].state.level == Level::L1);
  CHECK(items[2].state.level == Level::L2);
  CHECK(items[6].target == kDontChangeIndex);
  CHECK(items[6].molecule.size() == 3);
}

TEST_CASE("an empty corpus is an error") {
  Policy<float> p(tiny(), 1);
  Rng rng(1);
  try {
    pretrain(p, {}, kOpen, PretrainConfig{}, rng);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::EmptyCorpus);
  }
}

PolicyConfig compact() {
  PolicyConfig c;
  c.d = 32;
  c.n_layers = 2;
  c.ff_dim = 64;
  return c;
}

// Formamide: every decision along its trace is distinguishable. In "CC=O"
// the two carbons of the intermediate ethane are symmetric, which caps the
// achievable loss at ln 2 per such decision.
TEST_CASE("memorising one trace") {
  Policy<float> p(compact(), 3);
  PretrainConfig cfg;
  cfg.epochs = 30;
  cfg.batches_per_epoch = 20;
  Rng rng(5);
  std::ostringstream log;
  const auto history = pretrain(p, copies("NC=O", 50), kOpen, cfg, rng, &log);
  REQUIRE(history.size() == 30);
  MESSAGE("final validation loss " << history.back().validation_loss);
  for (int e = 1; e < 5; ++e) CHECK(history[static_cast<std::size_t>(e)].validation_loss < history[static_cast<std::size_t>(e - 1)].validation_loss);
  CHECK(history.back().validation_loss < 0.05);
  CHECK(log.str().rfind("epoch,batch,loss,grad_norm,wall_ms\n", 0) == 0);
}

TEST_CASE("single-atom corpus teaches DontChange") {
  Policy<float> p(compact(), 3);
  PretrainConfig cfg;
  cfg.epochs = 10;
  cfg.batches_per_epoch = 20;
  Rng rng(6);
  std::vector<ActionTrace> corpus;
  for (int i = 0; i < 60; ++i) corpus.push_back(to_action_trace(Molecule::single(i % 3)));
  pretrain(p, corpus, kOpen, cfg, rng);
  for (int t = 0; t < 3; ++t) {
    const auto probs = masked_distribution(p.forward(Molecule::single(t), {}).level0, feasible_level0(Molecule::single(t), kOpen));
    CHECK(probs[0] > 0.99f);
  }
}

TEST_CASE("pretraining is reproducible in double precision") {
  auto run = [] {
    Policy<double> p(tiny(), 3);
    PretrainConfig cfg;
    cfg.epochs = 3;
    cfg.batch_size = 16;
    Rng rng(7);
    std::vector<ActionTrace> corpus;
    for (const char* s : {"CCO", "C1CCCCC1", "CC(=O)N", "N#CC", "OCCO", "CNC=O"}) corpus.push_back(to_action_trace(parse_smiles(s, kCNO)));
    const auto h = pretrain(p, corpus, kOpen, cfg, rng);
    return std::make_pair(h, p.params());
  };
  const auto a = run();
  const auto b = run();
  REQUIRE(a.first.size() == b.first.size());
  for (std::size_t i = 0; i < a.first.size(); ++i) {
    CHECK(a.first[i].train_loss == b.first[i].train_loss);
    CHECK(a.first[i].validation_loss == b.first[i].validation_loss);
  }
  CHECK(a.second == b.second);
}

TEST_CASE("pretrain config parsing") {
  const auto c = PretrainConfig::from_json({{"epochs", 3}, {"lr", 1e-3}, {"dropout", false}});
  CHECK(c.epochs == 3);
  CHECK(c.adam.lr == 1e-3);
  CHECK_FALSE(c.dropout);
  CHECK_THROWS_AS(PretrainConfig::from_json({{"epoch", 3}}), Error);
}
