#include "molbuild/trainer.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

#include "molbuild/error.hpp"

namespace molbuild {

template <class T>
T Adam<T>::step(std::vector<T>& params, const std::vector<T>& grad, const std::vector<char>* trainable) {
  if (grad.size() != params.size() || m_.size() != params.size())
    throw Error(ErrorKind::ShapeMismatch, "optimizer state does not match the parameters");
  if (trainable && trainable->size() != params.size())
    throw Error(ErrorKind::ShapeMismatch, "trainable mask does not match the parameters");
  double sq = 0.0;
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (trainable && !(*trainable)[i]) continue;
    sq += static_cast<double>(grad[i]) * static_cast<double>(grad[i]);
  }
  if (!std::isfinite(sq)) throw Error(ErrorKind::NonFiniteGradient, "gradient contains NaN or infinity");
  const double norm = std::sqrt(sq);
  const double clip = config_.clip_norm > 0.0 && norm > config_.clip_norm ? config_.clip_norm / norm : 1.0;
  ++steps_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(steps_));
  const T b1 = static_cast<T>(config_.beta1);
  const T b2 = static_cast<T>(config_.beta2);
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (trainable && !(*trainable)[i]) continue;
    const T g = grad[i] * static_cast<T>(clip);
    m_[i] = b1 * m_[i] + (T(1) - b1) * g;
    v_[i] = b2 * v_[i] + (T(1) - b2) * g * g;
    const double mhat = static_cast<double>(m_[i]) / c1;
    const double vhat = static_cast<double>(v_[i]) / c2;
    params[i] -= static_cast<T>(config_.lr * mhat / (std::sqrt(vhat) + config_.eps));
  }
  return static_cast<T>(norm);
}

template class Adam<float>;
template class Adam<double>;

std::vector<char> trainable_mask(const ParamLayout& layout, bool all) {
  std::vector<char> mask(layout.total(), all ? 1 : 0);
  if (all) return mask;
  for (const auto& t : layout.tensors())
    if (t.head()) std::fill(mask.begin() + static_cast<std::ptrdiff_t>(t.offset),
                            mask.begin() + static_cast<std::ptrdiff_t>(t.offset + t.size()), 1);
  return mask;
}

std::vector<TrainItem> trace_items(const ActionTrace& trace, std::size_t alphabet_size) {
  std::vector<TrainItem> items;
  DesignState state(trace.initial);
  for (int choice : trace_choices(trace, alphabet_size)) {
    items.push_back({state.molecule(), state.level_state(), choice});
    state.step(choice, alphabet_size);
  }
  return items;
}

nlohmann::json PretrainConfig::to_json() const {
  return {{"epochs", epochs},
          {"batch_size", batch_size},
          {"batches_per_epoch", batches_per_epoch},
          {"validation_fraction", validation_fraction},
          {"dropout", dropout},
          {"lr", adam.lr},
          {"clip_norm", adam.clip_norm}};
}

PretrainConfig PretrainConfig::from_json(const nlohmann::json& j) {
  PretrainConfig c;
  if (j.is_null()) return c;
  if (!j.is_object()) throw Error(ErrorKind::ConfigError, "pretrain must be an object");
  for (const auto& [key, value] : j.items()) {
    if (key == "epochs") c.epochs = value.get<int>();
    else if (key == "batch_size") c.batch_size = value.get<int>();
    else if (key == "batches_per_epoch") c.batches_per_epoch = value.get<int>();
    else if (key == "validation_fraction") c.validation_fraction = value.get<double>();
    else if (key == "dropout") c.dropout = value.get<bool>();
    else if (key == "lr") c.adam.lr = value.get<double>();
    else if (key == "clip_norm") c.adam.clip_norm = value.get<double>();
    else throw Error(ErrorKind::ConfigError, "unknown pretrain key '" + key + "'");
  }
  if (c.epochs < 0 || c.batch_size < 1 || c.batches_per_epoch < 0 || c.validation_fraction < 0.0 ||
      c.validation_fraction >= 1.0 || c.adam.lr <= 0.0)
    throw Error(ErrorKind::ConfigError, "pretrain values out of range");
  return c;
}

namespace {

template <class T>
double mean_loss(const Policy<T>& policy, const std::vector<TrainItem>& items, const DesignSpace& space) {
  double total = 0.0;
  const std::size_t chunk = 256;
  for (std::size_t at = 0; at < items.size(); at += chunk) {
    const std::size_t end = std::min(items.size(), at + chunk);
    const std::vector<TrainItem> part(items.begin() + static_cast<std::ptrdiff_t>(at),
                                      items.begin() + static_cast<std::ptrdiff_t>(end));
    total += static_cast<double>(policy.loss(part, space)) * static_cast<double>(part.size());
  }
  return total / static_cast<double>(items.size());
}

}  // namespace

template <class T>
std::vector<EpochLoss> pretrain(Policy<T>& policy, const std::vector<ActionTrace>& corpus, const DesignSpace& space,
                                const PretrainConfig& config, Rng& rng, std::ostream* log_csv,
                                const std::function<void(const EpochLoss&)>& on_epoch) {
  if (corpus.empty()) throw Error(ErrorKind::EmptyCorpus, "no usable training molecules");
  const std::size_t k = space.alphabet.size();
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  const auto n_val = static_cast<std::size_t>(config.validation_fraction * static_cast<double>(corpus.size()));
  std::vector<TrainItem> train, validation;
  for (std::size_t i = 0; i < order.size(); ++i) {
    auto items = trace_items(corpus[order[i]], k);
    auto& dest = i < n_val ? validation : train;
    dest.insert(dest.end(), std::make_move_iterator(items.begin()), std::make_move_iterator(items.end()));
  }
  if (train.empty()) throw Error(ErrorKind::EmptyCorpus, "no training positions");
  const std::vector<TrainItem>& val = validation.empty() ? train : validation;

  Adam<T> adam(policy.params().size(), config.adam);
  const std::vector<char> all = trainable_mask(policy.layout(), true);
  const int per_epoch = config.batches_per_epoch > 0
                            ? config.batches_per_epoch
                            : static_cast<int>((train.size() + static_cast<std::size_t>(config.batch_size) - 1) /
                                               static_cast<std::size_t>(config.batch_size));
  Rng dropout_rng = rng.split(0xd40);
  const auto start = std::chrono::steady_clock::now();
  if (log_csv) *log_csv << "epoch,batch,loss,grad_norm,wall_ms\n";
  std::vector<EpochLoss> history;
  std::vector<T> grad;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    double epoch_loss = 0.0;
    for (int b = 0; b < per_epoch; ++b) {
      std::vector<TrainItem> batch;
      batch.reserve(static_cast<std::size_t>(config.batch_size));
      for (int i = 0; i < config.batch_size; ++i) batch.push_back(train[rng.below(train.size())]);
      grad.assign(policy.params().size(), T(0));
      const T loss = policy.loss_and_grad(batch, space, grad, config.dropout ? &dropout_rng : nullptr);
      const T norm = adam.step(policy.params(), grad, &all);
      epoch_loss += static_cast<double>(loss);
      if (log_csv) {
        const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
        *log_csv << epoch << ',' << b + 1 << ',' << static_cast<double>(loss) << ',' << static_cast<double>(norm)
                 << ',' << ms.count() << '\n';
      }
    }
    EpochLoss record{epoch, per_epoch > 0 ? epoch_loss / per_epoch : 0.0, mean_loss(policy, val, space)};
    history.push_back(record);
    if (on_epoch) on_epoch(record);
  }
  return history;
}

template std::vector<EpochLoss> pretrain(Policy<float>&, const std::vector<ActionTrace>&, const DesignSpace&,
                                         const PretrainConfig&, Rng&, std::ostream*,
                                         const std::function<void(const EpochLoss&)>&);
template std::vector<EpochLoss> pretrain(Policy<double>&, const std::vector<ActionTrace>&, const DesignSpace&,
                                         const PretrainConfig&, Rng&, std::ostream*,
                                         const std::function<void(const EpochLoss&)>&);

}  // namespace molbuild
