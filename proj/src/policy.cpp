#include "molbuild/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "molbuild/error.hpp"

namespace molbuild {

namespace {

constexpr std::size_t kGlobalTensors = 5;
constexpr std::size_t kLayerTensors = 14;

enum LayerSlot : std::size_t { kBias, kWq, kBq, kWk, kBk, kWv, kBv, kWo, kBo, kW1, kB1, kW2, kB2, kGate };
enum HeadSlot : std::size_t { kG0w, kG0b, kH0w, kH0b, kH1w, kH1b, kG2w, kG2b };

}  // namespace

void PolicyConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw Error(ErrorKind::ConfigError, "policy: " + what);
  };
  require(d > 0 && n_layers >= 0 && n_heads > 0 && ff_dim > 0, "sizes must be positive");
  require(d % n_heads == 0, "d must be divisible by n_heads");
  require(k >= 1 && y >= 1 && max_degree >= 0, "alphabet-derived sizes must be positive");
  require(dropout >= 0.0 && dropout < 1.0, "dropout must lie in [0, 1)");
}

nlohmann::json PolicyConfig::to_json() const {
  return {{"d", d},         {"n_layers", n_layers}, {"n_heads", n_heads}, {"ff_dim", ff_dim},
          {"k", k},         {"y", y},               {"max_degree", max_degree}, {"dropout", dropout}};
}

PolicyConfig PolicyConfig::from_json(const nlohmann::json& j, int k, int y, int max_degree) {
  PolicyConfig c;
  c.k = k;
  c.y = y;
  c.max_degree = max_degree;
  if (j.is_null()) return c;
  if (!j.is_object()) throw Error(ErrorKind::ConfigError, "policy must be an object");
  if (j.contains("preset")) {
    const auto preset = j.at("preset").get<std::string>();
    if (preset == "large") {
      c = large(k, y, max_degree);
    } else if (preset != "desk") {
      throw Error(ErrorKind::ConfigError, "unknown policy preset '" + preset + "'");
    }
  }
  for (const auto& [key, value] : j.items()) {
    if (key == "preset") continue;
    if (key == "d") c.d = value.get<int>();
    else if (key == "n_layers") c.n_layers = value.get<int>();
    else if (key == "n_heads") c.n_heads = value.get<int>();
    else if (key == "ff_dim") c.ff_dim = value.get<int>();
    else if (key == "max_degree") c.max_degree = value.get<int>();
    else if (key == "dropout") c.dropout = value.get<double>();
    else if (key == "k" || key == "y") {
      if (value.get<int>() != (key == "k" ? k : y))
        throw Error(ErrorKind::ConfigError, "policy." + key + " disagrees with the alphabet");
    } else {
      throw Error(ErrorKind::ConfigError, "unknown policy key '" + key + "'");
    }
  }
  c.validate();
  return c;
}

PolicyConfig PolicyConfig::large(int k, int y, int max_degree) {
  PolicyConfig c;
  c.d = 512;
  c.n_layers = 10;
  c.n_heads = 8;
  c.ff_dim = 2048;
  c.k = k;
  c.y = y;
  c.max_degree = max_degree;
  return c;
}

bool TensorInfo::head() const {
  return name.rfind("g0.", 0) == 0 || name.rfind("h0.", 0) == 0 || name.rfind("h1.", 0) == 0 ||
         name.rfind("g2.", 0) == 0;
}

ParamLayout::ParamLayout(const PolicyConfig& c) {
  c.validate();
  const auto d = static_cast<std::size_t>(c.d);
  const auto ff = static_cast<std::size_t>(c.ff_dim);
  const auto k = static_cast<std::size_t>(c.k);
  const auto y = static_cast<std::size_t>(c.y);
  add("atom_embedding", k + 1, d);
  add("level_embedding", 3, d);
  add("selected_level0", 1, d);
  add("selected_level1", 1, d);
  add("degree_embedding", static_cast<std::size_t>(c.max_degree) + 1, d);
  for (int l = 0; l < c.n_layers; ++l) {
    const std::string p = "layers." + std::to_string(l) + ".";
    add(p + "attn_bias", static_cast<std::size_t>(c.n_heads), y + 2);
    add(p + "wq", d, d);
    add(p + "bq", 1, d);
    add(p + "wk", d, d);
    add(p + "bk", 1, d);
    add(p + "wv", d, d);
    add(p + "bv", 1, d);
    add(p + "wo", d, d);
    add(p + "bo", 1, d);
    add(p + "w1", d, ff);
    add(p + "b1", 1, ff);
    add(p + "w2", ff, d);
    add(p + "b2", 1, d);
    add(p + "gate", 1, 1);
  }
  add("g0.weight", d, k + 1);
  add("g0.bias", 1, k + 1);
  add("h0.weight", d, 1);
  add("h0.bias", 1, 1);
  add("h1.weight", d, 1);
  add("h1.bias", 1, 1);
  add("g2.weight", d, y);
  add("g2.bias", 1, y);
}

void ParamLayout::add(const std::string& name, std::size_t rows, std::size_t cols) {
  tensors_.push_back({name, total_, rows, cols});
  total_ += rows * cols;
}

const TensorInfo& ParamLayout::at(const std::string& name) const {
  for (const auto& t : tensors_)
    if (t.name == name) return t;
  throw Error(ErrorKind::ShapeMismatch, "no tensor named '" + name + "'");
}

template <class T>
std::vector<T> masked_log_distribution(const std::vector<T>& logits, const ChoiceMask& mask) {
  if (logits.size() != mask.size())
    throw Error(ErrorKind::ShapeMismatch, "mask has " + std::to_string(mask.size()) + " entries, logits " +
                                              std::to_string(logits.size()));
  T hi = -std::numeric_limits<T>::infinity();
  for (std::size_t i = 0; i < logits.size(); ++i)
    if (mask[i]) hi = std::max(hi, logits[i]);
  if (!std::isfinite(hi)) {
    if (!mask.any()) throw Error(ErrorKind::EmptyFeasibleSet, "no feasible choice at this level");
    throw Error(ErrorKind::NonFiniteGradient, "non-finite logits");
  }
  T total = 0;
  for (std::size_t i = 0; i < logits.size(); ++i)
    if (mask[i]) total += std::exp(logits[i] - hi);
  const T log_z = hi + std::log(total);
  std::vector<T> out(logits.size(), -std::numeric_limits<T>::infinity());
  for (std::size_t i = 0; i < logits.size(); ++i)
    if (mask[i]) out[i] = logits[i] - log_z;
  return out;
}

template <class T>
std::vector<T> masked_distribution(const std::vector<T>& logits, const ChoiceMask& mask) {
  std::vector<T> out = masked_log_distribution(logits, mask);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = mask[i] ? std::exp(out[i]) : T(0);
  return out;
}

template <class T>
struct Policy<T>::Cache {
  struct Layer {
    Mat<T> x, q, k, v, o, a, d1, x1, h, f, d2;
    std::vector<Mat<T>> p;
  };
  int n = 0;
  int width = 0;
  Level level = Level::L0;
  int virtual_type = -1;  // new atom type announced on the virtual token
  int selected0 = -1;
  int selected1 = -1;
  std::vector<int> types;
  std::vector<int> degrees;
  std::vector<int> codes;  // width x width bond codes
  std::vector<Layer> layers;
  Mat<T> e;
};

template <class T>
Policy<T>::Policy(const PolicyConfig& config, std::uint64_t seed) : config_(config), layout_(config) {
  params_.assign(layout_.total(), T(0));
  Rng rng(seed);
  const double d = config.d;
  for (const auto& t : layout_.tensors()) {
    double stddev = 0.0;
    const bool bias = t.rows == 1 && t.name.find("weight") == std::string::npos &&
                      t.name.find("selected") == std::string::npos;
    if (t.name.find("embedding") != std::string::npos || t.name.find("selected") != std::string::npos) {
      stddev = 1.0 / std::sqrt(d);
    } else if (t.name.find("attn_bias") != std::string::npos || t.name.find("gate") != std::string::npos ||
               bias) {
      stddev = 0.0;
    } else {
      stddev = 1.0 / std::sqrt(static_cast<double>(t.rows));
    }
    if (stddev == 0.0) continue;
    for (std::size_t i = 0; i < t.size(); ++i) params_[t.offset + i] = static_cast<T>(rng.normal(0.0, stddev));
  }
}

template <class T>
Policy<T>::Policy(const PolicyConfig& config, std::vector<T> params)
    : config_(config), layout_(config), params_(std::move(params)) {
  if (params_.size() != layout_.total())
    throw Error(ErrorKind::ShapeMismatch, "expected " + std::to_string(layout_.total()) + " parameters, got " +
                                              std::to_string(params_.size()));
}

template <class T>
LogitsBundle<T> Policy<T>::forward(const Molecule& m, const ActionLevelState& state, Rng* dropout_rng,
                                   int width) const {
  return run(m, state, dropout_rng, width, nullptr);
}

template <class T>
std::vector<LogitsBundle<T>> Policy<T>::forward_batch(const std::vector<PolicyInput>& batch,
                                                      Rng* dropout_rng) const {
  int width = 0;
  for (const auto& item : batch) width = std::max(width, item.molecule->size() + 1);
  std::vector<LogitsBundle<T>> out;
  out.reserve(batch.size());
  for (const auto& item : batch) out.push_back(run(*item.molecule, item.state, dropout_rng, width, nullptr));
  return out;
}

template <class T>
LogitsBundle<T> Policy<T>::run(const Molecule& m, const ActionLevelState& state, Rng* dropout_rng, int width,
                               Cache* cache) const {
  using CMap = Eigen::Map<const Mat<T>>;
  const auto& ts = layout_.tensors();
  auto P = [&](std::size_t idx) {
    const auto& t = ts[idx];
    return CMap(params_.data() + t.offset, static_cast<Eigen::Index>(t.rows), static_cast<Eigen::Index>(t.cols));
  };
  const int n = m.size();
  if (n == 0) throw Error(ErrorKind::ShapeMismatch, "empty molecule");
  const int W = width == 0 ? n + 1 : width;
  if (W < n + 1) throw Error(ErrorKind::ShapeMismatch, "padding width smaller than the molecule");
  const int d = config_.d;
  const int H = config_.n_heads;
  const int dh = d / H;
  const int y = config_.y;
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));
  const T keep = static_cast<T>(1.0 - config_.dropout);
  const bool dropout = dropout_rng != nullptr && config_.dropout > 0.0;

  Cache local;
  Cache& c = cache ? *cache : local;
  c.n = n;
  c.width = W;
  c.level = state.level;
  c.virtual_type = -1;
  c.selected0 = -1;
  c.selected1 = -1;
  if (state.first) {
    if (state.first->kind == FirstChoice::Kind::NewAtom) {
      c.virtual_type = state.first->index;
      if (c.virtual_type < 0 || c.virtual_type >= config_.k) throw Error(ErrorKind::ShapeMismatch, "atom type out of range");
    } else {
      c.selected0 = state.first->index;
    }
  }
  if (state.second) c.selected1 = *state.second;
  c.types.resize(static_cast<std::size_t>(n));
  c.degrees.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    if (m.atom(i) < 0 || m.atom(i) >= config_.k) throw Error(ErrorKind::ShapeMismatch, "atom type out of range");
    c.types[static_cast<std::size_t>(i)] = m.atom(i);
    c.degrees[static_cast<std::size_t>(i)] = std::min(m.bond_sum(i), config_.max_degree);
  }
  c.codes.assign(static_cast<std::size_t>(W) * static_cast<std::size_t>(W), 0);
  for (int i = 0; i <= n; ++i)
    for (int j = 0; j <= n; ++j) {
      int code = 0;
      if (i == 0 || j == 0) {
        code = y + 1;
      } else {
        code = std::min(m.bond(i - 1, j - 1), y);
      }
      c.codes[static_cast<std::size_t>(i * W + j)] = code;
    }

  // Input sequence.
  Mat<T> x = Mat<T>::Zero(W, d);
  const auto atom_emb = P(0);
  const auto level_emb = P(1);
  x.row(0) = atom_emb.row(0) + level_emb.row(static_cast<int>(state.level));
  if (c.virtual_type >= 0) x.row(0) += atom_emb.row(1 + c.virtual_type);
  const auto deg_emb = P(4);
  for (int i = 0; i < n; ++i) {
    x.row(i + 1) = atom_emb.row(1 + c.types[static_cast<std::size_t>(i)]) + deg_emb.row(c.degrees[static_cast<std::size_t>(i)]);
  }
  if (c.selected0 >= 0) x.row(c.selected0 + 1) += P(2).row(0);
  if (c.selected1 >= 0) x.row(c.selected1 + 1) += P(3).row(0);

  auto dropout_mask = [&](Mat<T>& mask) {
    mask.resize(W, d);
    if (!dropout) {
      mask.setOnes();
      return;
    }
    for (Eigen::Index r = 0; r < mask.rows(); ++r)
      for (Eigen::Index col = 0; col < mask.cols(); ++col)
        mask(r, col) = dropout_rng->uniform() < config_.dropout ? T(0) : T(1) / keep;
  };

  c.layers.resize(static_cast<std::size_t>(config_.n_layers));
  const T neg_inf = -std::numeric_limits<T>::infinity();
  for (int l = 0; l < config_.n_layers; ++l) {
    const std::size_t base = kGlobalTensors + static_cast<std::size_t>(l) * kLayerTensors;
    auto& L = c.layers[static_cast<std::size_t>(l)];
    const auto bias = P(base + kBias);
    const T gate = P(base + kGate)(0, 0);
    L.x = x;
    L.q = (x * P(base + kWq)).rowwise() + P(base + kBq).row(0);
    L.k = (x * P(base + kWk)).rowwise() + P(base + kBk).row(0);
    L.v = (x * P(base + kWv)).rowwise() + P(base + kBv).row(0);
    L.o.resize(W, d);
    L.p.resize(static_cast<std::size_t>(H));
    for (int h = 0; h < H; ++h) {
      Mat<T> s = (L.q.middleCols(h * dh, dh) * L.k.middleCols(h * dh, dh).transpose()) * scale;
      for (int i = 0; i < W; ++i) {
        for (int j = 0; j < W; ++j) {
          if (j > n) {
            s(i, j) = neg_inf;
          } else {
            s(i, j) += bias(h, c.codes[static_cast<std::size_t>(i * W + j)]);
          }
        }
        const T hi = s.row(i).maxCoeff();
        T total = 0;
        for (int j = 0; j < W; ++j) {
          s(i, j) = std::exp(s(i, j) - hi);
          total += s(i, j);
        }
        s.row(i) /= total;
      }
      L.o.middleCols(h * dh, dh) = s * L.v.middleCols(h * dh, dh);
      L.p[static_cast<std::size_t>(h)] = std::move(s);
    }
    L.a = (L.o * P(base + kWo)).rowwise() + P(base + kBo).row(0);
    dropout_mask(L.d1);
    L.x1 = x + gate * L.d1.cwiseProduct(L.a);
    L.h = (L.x1 * P(base + kW1)).rowwise() + P(base + kB1).row(0);
    const Mat<T> r = L.h.cwiseMax(T(0));
    L.f = (r * P(base + kW2)).rowwise() + P(base + kB2).row(0);
    dropout_mask(L.d2);
    x = L.x1 + gate * L.d2.cwiseProduct(L.f);
  }
  c.e = x;

  const std::size_t hb = kGlobalTensors + static_cast<std::size_t>(config_.n_layers) * kLayerTensors;
  LogitsBundle<T> out;
  out.level = state.level;
  const Mat<T> top = x.row(0) * P(hb + kG0w) + P(hb + kG0b);
  const Mat<T> atoms = x.middleRows(1, n);
  const Mat<T> q0 = atoms * P(hb + kH0w);
  const Mat<T> q1 = atoms * P(hb + kH1w);
  const Mat<T> bond = x.row(0) * P(hb + kG2w) + P(hb + kG2b);
  const T h0b = P(hb + kH0b)(0, 0);
  const T h1b = P(hb + kH1b)(0, 0);
  out.level0.resize(static_cast<std::size_t>(config_.k + 1 + n));
  for (int j = 0; j <= config_.k; ++j) out.level0[static_cast<std::size_t>(j)] = top(0, j);
  for (int i = 0; i < n; ++i) out.level0[static_cast<std::size_t>(config_.k + 1 + i)] = q0(i, 0) + h0b;
  out.level1.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out.level1[static_cast<std::size_t>(i)] = q1(i, 0) + h1b;
  out.level2.resize(static_cast<std::size_t>(y));
  for (int o = 0; o < y; ++o) out.level2[static_cast<std::size_t>(o)] = bond(0, o);
  return out;
}

template <class T>
void Policy<T>::backward(const Cache& c, const std::vector<T>& dlogits, std::vector<T>& grad) const {
  using CMap = Eigen::Map<const Mat<T>>;
  using GMap = Eigen::Map<Mat<T>>;
  const auto& ts = layout_.tensors();
  auto P = [&](std::size_t idx) {
    const auto& t = ts[idx];
    return CMap(params_.data() + t.offset, static_cast<Eigen::Index>(t.rows), static_cast<Eigen::Index>(t.cols));
  };
  auto G = [&](std::size_t idx) {
    const auto& t = ts[idx];
    return GMap(grad.data() + t.offset, static_cast<Eigen::Index>(t.rows), static_cast<Eigen::Index>(t.cols));
  };
  const int n = c.n;
  const int W = c.width;
  const int d = config_.d;
  const int H = config_.n_heads;
  const int dh = d / H;
  const int k = config_.k;
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));
  const std::size_t hb = kGlobalTensors + static_cast<std::size_t>(config_.n_layers) * kLayerTensors;

  Mat<T> dx = Mat<T>::Zero(W, d);
  if (c.level == Level::L0) {
    Eigen::Matrix<T, 1, Eigen::Dynamic> dtop(k + 1);
    for (int j = 0; j <= k; ++j) dtop(j) = dlogits[static_cast<std::size_t>(j)];
    G(hb + kG0w) += c.e.row(0).transpose() * dtop;
    G(hb + kG0b) += dtop;
    dx.row(0) += dtop * P(hb + kG0w).transpose();
    auto w = P(hb + kH0w);
    auto gw = G(hb + kH0w);
    for (int i = 0; i < n; ++i) {
      const T g = dlogits[static_cast<std::size_t>(k + 1 + i)];
      if (g == T(0)) continue;
      gw += g * c.e.row(i + 1).transpose();
      G(hb + kH0b)(0, 0) += g;
      dx.row(i + 1) += g * w.transpose();
    }
  } else if (c.level == Level::L1) {
    auto w = P(hb + kH1w);
    auto gw = G(hb + kH1w);
    for (int i = 0; i < n; ++i) {
      const T g = dlogits[static_cast<std::size_t>(i)];
      if (g == T(0)) continue;
      gw += g * c.e.row(i + 1).transpose();
      G(hb + kH1b)(0, 0) += g;
      dx.row(i + 1) += g * w.transpose();
    }
  } else {
    Eigen::Matrix<T, 1, Eigen::Dynamic> dbond(config_.y);
    for (int o = 0; o < config_.y; ++o) dbond(o) = dlogits[static_cast<std::size_t>(o)];
    G(hb + kG2w) += c.e.row(0).transpose() * dbond;
    G(hb + kG2b) += dbond;
    dx.row(0) += dbond * P(hb + kG2w).transpose();
  }

  for (int l = config_.n_layers - 1; l >= 0; --l) {
    const std::size_t base = kGlobalTensors + static_cast<std::size_t>(l) * kLayerTensors;
    const auto& L = c.layers[static_cast<std::size_t>(l)];
    const T gate = P(base + kGate)(0, 0);
    T dgate = 0;

    // Feed-forward sublayer.
    const Mat<T> ff_out = L.d2.cwiseProduct(L.f);
    dgate += dx.cwiseProduct(ff_out).sum();
    const Mat<T> df = gate * L.d2.cwiseProduct(dx);
    const Mat<T> r = L.h.cwiseMax(T(0));
    G(base + kW2) += r.transpose() * df;
    G(base + kB2) += df.colwise().sum();
    Mat<T> dh_ = df * P(base + kW2).transpose();
    dh_ = dh_.cwiseProduct((L.h.array() > T(0)).matrix().template cast<T>());
    G(base + kW1) += L.x1.transpose() * dh_;
    G(base + kB1) += dh_.colwise().sum();
    Mat<T> dx1 = dx + dh_ * P(base + kW1).transpose();

    // Attention sublayer.
    const Mat<T> attn_out = L.d1.cwiseProduct(L.a);
    dgate += dx1.cwiseProduct(attn_out).sum();
    const Mat<T> da = gate * L.d1.cwiseProduct(dx1);
    G(base + kWo) += L.o.transpose() * da;
    G(base + kBo) += da.colwise().sum();
    const Mat<T> dout = da * P(base + kWo).transpose();
    Mat<T> dq(W, d), dk(W, d), dv(W, d);
    auto gbias = G(base + kBias);
    for (int h = 0; h < H; ++h) {
      const Mat<T>& p = L.p[static_cast<std::size_t>(h)];
      const auto doh = dout.middleCols(h * dh, dh);
      const Mat<T> dp = doh * L.v.middleCols(h * dh, dh).transpose();
      dv.middleCols(h * dh, dh) = p.transpose() * doh;
      Mat<T> ds = p.cwiseProduct(dp);
      const Vec<T> rows = ds.rowwise().sum();
      ds -= p.cwiseProduct(rows.replicate(1, W));
      for (int i = 0; i < W; ++i)
        for (int j = 0; j <= n; ++j) gbias(h, c.codes[static_cast<std::size_t>(i * W + j)]) += ds(i, j);
      dq.middleCols(h * dh, dh) = (ds * L.k.middleCols(h * dh, dh)) * scale;
      dk.middleCols(h * dh, dh) = (ds.transpose() * L.q.middleCols(h * dh, dh)) * scale;
    }
    G(base + kWq) += L.x.transpose() * dq;
    G(base + kBq) += dq.colwise().sum();
    G(base + kWk) += L.x.transpose() * dk;
    G(base + kBk) += dk.colwise().sum();
    G(base + kWv) += L.x.transpose() * dv;
    G(base + kBv) += dv.colwise().sum();
    dx = dx1 + dq * P(base + kWq).transpose() + dk * P(base + kWk).transpose() + dv * P(base + kWv).transpose();
    G(base + kGate)(0, 0) += dgate;
  }

  auto gatom = G(0);
  gatom.row(0) += dx.row(0);
  G(1).row(static_cast<int>(c.level)) += dx.row(0);
  if (c.virtual_type >= 0) gatom.row(1 + c.virtual_type) += dx.row(0);
  auto gdeg = G(4);
  for (int i = 0; i < n; ++i) {
    gatom.row(1 + c.types[static_cast<std::size_t>(i)]) += dx.row(i + 1);
    gdeg.row(c.degrees[static_cast<std::size_t>(i)]) += dx.row(i + 1);
  }
  if (c.selected0 >= 0) G(2).row(0) += dx.row(c.selected0 + 1);
  if (c.selected1 >= 0) G(3).row(0) += dx.row(c.selected1 + 1);
}

template <class T>
T Policy<T>::loss_and_grad(const std::vector<TrainItem>& batch, const DesignSpace& space, std::vector<T>& grad,
                           Rng* dropout_rng) const {
  if (batch.empty()) throw Error(ErrorKind::InvalidArgument, "empty training batch");
  if (grad.size() != params_.size()) grad.assign(params_.size(), T(0));
  const T inv = T(1) / static_cast<T>(batch.size());
  T total = 0;
  Cache cache;
  for (const auto& item : batch) {
    const ChoiceMask mask = feasible(item.molecule, space, item.state);
    if (item.target < 0 || static_cast<std::size_t>(item.target) >= mask.size() ||
        !mask[static_cast<std::size_t>(item.target)])
      throw Error(ErrorKind::TargetMasked, "target " + std::to_string(item.target) + " is infeasible");
    const auto logits = run(item.molecule, item.state, dropout_rng, 0, &cache);
    const auto probs = masked_distribution(logits.active(), mask);
    total -= std::log(probs[static_cast<std::size_t>(item.target)]);
    std::vector<T> dlogits(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) dlogits[i] = probs[i] * inv;
    dlogits[static_cast<std::size_t>(item.target)] -= inv;
    backward(cache, dlogits, grad);
  }
  return total * inv;
}

template <class T>
T Policy<T>::loss(const std::vector<TrainItem>& batch, const DesignSpace& space) const {
  if (batch.empty()) throw Error(ErrorKind::InvalidArgument, "empty batch");
  T total = 0;
  for (const auto& item : batch) {
    const ChoiceMask mask = feasible(item.molecule, space, item.state);
    if (item.target < 0 || static_cast<std::size_t>(item.target) >= mask.size() ||
        !mask[static_cast<std::size_t>(item.target)])
      throw Error(ErrorKind::TargetMasked, "target " + std::to_string(item.target) + " is infeasible");
    const auto logp = masked_log_distribution(run(item.molecule, item.state, nullptr, 0, nullptr).active(), mask);
    total -= logp[static_cast<std::size_t>(item.target)];
  }
  return total / static_cast<T>(batch.size());
}

template class Policy<float>;
template class Policy<double>;
template std::vector<float> masked_distribution(const std::vector<float>&, const ChoiceMask&);
template std::vector<double> masked_distribution(const std::vector<double>&, const ChoiceMask&);
template std::vector<float> masked_log_distribution(const std::vector<float>&, const ChoiceMask&);
template std::vector<double> masked_log_distribution(const std::vector<double>&, const ChoiceMask&);

}  // namespace molbuild
