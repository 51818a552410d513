#include "molbuild/learner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>

#include "molbuild/canonical.hpp"
#include "molbuild/error.hpp"

namespace molbuild {

namespace {

bool ranks_before(const ScoredMolecule& a, const ScoredMolecule& b) {
  if (a.objective != b.objective) return a.objective > b.objective;
  if (a.discovery != b.discovery) return a.discovery < b.discovery;
  return a.key < b.key;
}

}  // namespace

double Archive::best() const {
  return entries_.empty() ? -std::numeric_limits<double>::infinity() : entries_.front().objective;
}

double Archive::mean_top(std::size_t count) const {
  const std::size_t n = std::min(count, entries_.size());
  if (n == 0) return -std::numeric_limits<double>::infinity();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += entries_[i].objective;
  return total / static_cast<double>(n);
}

bool Archive::merge(std::vector<ScoredMolecule> scored) {
  std::vector<std::pair<std::string, std::size_t>> before;
  before.reserve(entries_.size());
  for (const auto& e : entries_) before.emplace_back(e.key, e.discovery);
  std::map<std::string, ScoredMolecule> by_key;
  for (auto& e : entries_) by_key.emplace(e.key, std::move(e));
  for (auto& e : scored) {
    if (!std::isfinite(e.objective)) continue;
    if (e.key.empty()) e.key = canonical_key(e.molecule);
    auto it = by_key.find(e.key);
    if (it == by_key.end()) {
      by_key.emplace(e.key, std::move(e));
    } else if (ranks_before(e, it->second)) {
      it->second = std::move(e);
    }
  }
  std::vector<ScoredMolecule> merged;
  merged.reserve(by_key.size());
  for (auto& [key, e] : by_key) merged.push_back(std::move(e));
  std::sort(merged.begin(), merged.end(), ranks_before);
  if (merged.size() > capacity_) merged.resize(capacity_);
  bool changed = merged.size() != before.size();
  for (std::size_t i = 0; !changed && i < merged.size(); ++i)
    changed = merged[i].key != before[i].first || merged[i].discovery != before[i].second;
  entries_ = std::move(merged);
  return changed;
}

Archive merge_archive(Archive archive, std::vector<ScoredMolecule> scored) {
  archive.merge(std::move(scored));
  return archive;
}

nlohmann::json LearnerConfig::to_json() const {
  return {{"archive_size", archive_size},
          {"beam", tasar.beam},
          {"sigma", tasar.sigma},
          {"budget", tasar.budget},
          {"epochs", epochs},
          {"batches_per_epoch", batches_per_epoch},
          {"batch_size", batch_size},
          {"lr", adam.lr},
          {"clip_norm", adam.clip_norm},
          {"patience", patience},
          {"wall_clock_limit_s", wall_clock_limit_s},
          {"train_all", train_all},
          {"dropout", dropout}};
}

LearnerConfig LearnerConfig::from_json(const nlohmann::json& j) {
  LearnerConfig c;
  if (j.is_null()) return c;
  if (!j.is_object()) throw Error(ErrorKind::ConfigError, "learner must be an object");
  for (const auto& [key, value] : j.items()) {
    if (key == "archive_size") c.archive_size = value.get<std::size_t>();
    else if (key == "beam") c.tasar.beam = value.get<std::size_t>();
    else if (key == "sigma") c.tasar.sigma = value.get<std::size_t>();
    else if (key == "budget") c.tasar.budget = value.get<std::size_t>();
    else if (key == "epochs") c.epochs = value.get<int>();
    else if (key == "batches_per_epoch") c.batches_per_epoch = value.get<int>();
    else if (key == "batch_size") c.batch_size = value.get<int>();
    else if (key == "lr") c.adam.lr = value.get<double>();
    else if (key == "clip_norm") c.adam.clip_norm = value.get<double>();
    else if (key == "patience") c.patience = value.get<int>();
    else if (key == "wall_clock_limit_s") c.wall_clock_limit_s = value.get<double>();
    else if (key == "train_all") c.train_all = value.get<bool>();
    else if (key == "dropout") c.dropout = value.get<bool>();
    else throw Error(ErrorKind::ConfigError, "unknown learner key '" + key + "'");
  }
  if (c.archive_size == 0 || c.tasar.beam == 0 || c.tasar.sigma == 0 || c.epochs < 0 || c.batches_per_epoch < 0 ||
      c.batch_size < 1 || !(c.adam.lr > 0.0) || c.patience < 0 || c.wall_clock_limit_s < 0.0)
    throw Error(ErrorKind::ConfigError, "learner values out of range");
  if (c.tasar.budget != 0 && c.tasar.budget < c.tasar.beam)
    throw Error(ErrorKind::ConfigError, "learner.budget must be at least the beam width");
  return c;
}

nlohmann::json EpochRecord::to_json() const {
  auto num = [](double v) -> nlohmann::json { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  nlohmann::json j = {{"epoch", epoch},   {"best", num(best)},       {"mean_top20", num(mean_top20)},
                      {"archive_size", archive_size}, {"sampled", sampled}, {"wall_ms", wall_ms}};
  if (aborted) j["aborted"] = true;
  return j;
}

template <class T>
LearnerResult run_learner(Policy<T>& policy, const Molecule& m0, Objective& objective, const DesignSpace& space,
                          const LearnerConfig& config, Rng& rng,
                          const std::function<void(const EpochRecord&)>& on_epoch) {
  const auto start = std::chrono::steady_clock::now();
  const std::size_t k = space.alphabet.size();
  LearnerResult result{Archive(config.archive_size), {}, "epochs"};
  std::size_t discovery = 0;

  {
    ScoredMolecule root;
    root.molecule = m0;
    root.objective = objective.evaluate(m0);
    root.choices = {kDontChangeIndex};
    root.actions = {DontChange{}};
    root.discovery = discovery++;
    result.archive.merge({root});
  }

  const BatchObjective batch_objective = [&objective](const std::vector<Molecule>& ms) { return objective.evaluate(ms); };
  const std::vector<char> trainable = trainable_mask(policy.layout(), config.train_all);
  Adam<T> adam(policy.params().size(), config.adam);
  std::map<std::string, std::vector<TrainItem>> item_cache;
  Rng sample_rng = rng.split(1);
  Rng batch_rng = rng.split(2);
  Rng dropout_rng = rng.split(3);
  double best = result.archive.best();
  int stale = 0;
  std::vector<T> grad;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    EpochRecord record;
    record.epoch = epoch;
    const TasarResult sampled = tasar_sample(policy, m0, space, config.tasar, batch_objective, sample_rng);
    record.sampled = sampled.traces.size();
    std::vector<ScoredMolecule> scored;
    scored.reserve(sampled.traces.size());
    for (const auto& t : sampled.traces)
      scored.push_back({t.molecule, t.objective, t.choices, t.actions, epoch, discovery++, {}});
    result.archive.merge(std::move(scored));

    std::vector<const std::vector<TrainItem>*> sources;
    std::vector<std::size_t> cumulative;
    std::size_t positions = 0;
    std::map<std::string, std::vector<TrainItem>> kept;
    for (const auto& e : result.archive.entries()) {
      const std::string id = e.key + '\x01' + std::to_string(e.discovery);
      auto& slot = kept[id];
      if (auto it = item_cache.find(id); it != item_cache.end()) {
        slot = std::move(it->second);
      } else {
        DesignState state(m0);
        for (int c : e.choices) {
          slot.push_back({state.molecule(), state.level_state(), c});
          state.step(c, k);
        }
      }
      positions += slot.size();
      sources.push_back(&slot);
      cumulative.push_back(positions);
    }
    item_cache = std::move(kept);

    if (positions > 0 && config.batches_per_epoch > 0) {
      const std::vector<T> params_before = policy.params();
      const Adam<T> adam_before = adam;
      try {
        for (int b = 0; b < config.batches_per_epoch; ++b) {
          std::vector<TrainItem> batch;
          batch.reserve(static_cast<std::size_t>(config.batch_size));
          for (int i = 0; i < config.batch_size; ++i) {
            const std::size_t pick = batch_rng.below(positions);
            const auto src = static_cast<std::size_t>(
                std::upper_bound(cumulative.begin(), cumulative.end(), pick) - cumulative.begin());
            const std::size_t offset = pick - (src == 0 ? 0 : cumulative[src - 1]);
            batch.push_back((*sources[src])[offset]);
          }
          grad.assign(policy.params().size(), T(0));
          policy.loss_and_grad(batch, space, grad, config.dropout ? &dropout_rng : nullptr);
          adam.step(policy.params(), grad, &trainable);
        }
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::NonFiniteGradient) throw;
        policy.params() = params_before;
        adam = adam_before;
        record.aborted = true;
      }
    }

    record.best = result.archive.best();
    record.mean_top20 = result.archive.mean_top(20);
    record.archive_size = result.archive.size();
    record.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count();
    result.history.push_back(record);
    if (on_epoch) on_epoch(record);

    if (record.best > best) {
      best = record.best;
      stale = 0;
    } else {
      ++stale;
    }
    if (config.patience > 0 && stale >= config.patience) {
      result.stop_reason = "patience";
      break;
    }
    if (config.wall_clock_limit_s > 0.0 && static_cast<double>(record.wall_ms) / 1000.0 >= config.wall_clock_limit_s) {
      result.stop_reason = "wall_clock";
      break;
    }
  }
  return result;
}

template LearnerResult run_learner(Policy<float>&, const Molecule&, Objective&, const DesignSpace&,
                                   const LearnerConfig&, Rng&, const std::function<void(const EpochRecord&)>&);
template LearnerResult run_learner(Policy<double>&, const Molecule&, Objective&, const DesignSpace&,
                                   const LearnerConfig&, Rng&, const std::function<void(const EpochRecord&)>&);

}  // namespace molbuild
