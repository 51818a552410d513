#pragma once

#include <functional>
#include <ostream>
#include <vector>

#include <json.hpp>

#include "molbuild/policy.hpp"
#include "molbuild/smiles.hpp"

namespace molbuild {

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// Global-norm clipping threshold; 0 disables clipping.
  double clip_norm = 1.0;
};

/// Adaptive-moment optimiser with bias correction over a flat parameter
/// vector. `trainable` (optional) freezes entries where it is 0.
template <class T>
class Adam {
 public:
  Adam() = default;
  Adam(std::size_t size, AdamConfig config) : config_(config), m_(size, T(0)), v_(size, T(0)) {}

  /// Applies one update and returns the gradient norm before clipping.
  /// Throws NonFiniteGradient without touching params or state.
  T step(std::vector<T>& params, const std::vector<T>& grad, const std::vector<char>* trainable = nullptr);

  long steps() const noexcept { return steps_; }
  const AdamConfig& config() const noexcept { return config_; }
  void set_lr(double lr) { config_.lr = lr; }

 private:
  AdamConfig config_;
  std::vector<T> m_;
  std::vector<T> v_;
  long steps_ = 0;
};

extern template class Adam<float>;
extern template class Adam<double>;

/// 1 for every parameter of the output heads, 0 elsewhere (or 1 everywhere
/// when `all` is set).
std::vector<char> trainable_mask(const ParamLayout& layout, bool all);

/// Every (state, next sub-action) decision along a trace.
std::vector<TrainItem> trace_items(const ActionTrace& trace, std::size_t alphabet_size);

struct PretrainConfig {
  int epochs = 10;
  int batch_size = 64;
  /// 0 means one pass over the training positions per epoch.
  int batches_per_epoch = 0;
  double validation_fraction = 0.1;
  bool dropout = true;
  AdamConfig adam;

  nlohmann::json to_json() const;
  static PretrainConfig from_json(const nlohmann::json& j);
};

struct EpochLoss {
  int epoch = 0;
  double train_loss = 0.0;
  double validation_loss = 0.0;
};

/// Next-action prediction over all trace positions, sampled uniformly.
/// Traces are split into train and validation parts by trace; if the split
/// leaves validation empty the training positions are used for it.
/// `log_csv` receives rows epoch,batch,loss,grad_norm,wall_ms.
template <class T>
std::vector<EpochLoss> pretrain(Policy<T>& policy, const std::vector<ActionTrace>& corpus, const DesignSpace& space,
                                const PretrainConfig& config, Rng& rng, std::ostream* log_csv = nullptr,
                                const std::function<void(const EpochLoss&)>& on_epoch = {});

}  // namespace molbuild
