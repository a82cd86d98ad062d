#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace rfsynth {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Deterministic RNG (SplitMix64). Fixed across platforms and library versions,
// unlike <random> distributions, so seeded runs are bit-reproducible.
// ---------------------------------------------------------------------------
struct Rng {
  uint64_t state;
  explicit Rng(uint64_t seed) : state(seed) {}
  uint64_t next() {
    uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }  // [0,1)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  uint64_t below(uint64_t n) { return next() % n; }
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }
};

inline double softplus(double z) {
  return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
}
inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

// ---------------------------------------------------------------------------
// Model: input -> [Linear -> ReLU -> LayerNorm] x H -> Linear -> Softplus.
// LayerNorm follows the activation and normalizes over the feature axis.
// ---------------------------------------------------------------------------

constexpr double kLayerNormEps = 1e-5;

struct DenseLayer {
  Matrix w;      // (out, in)
  Vector b;      // (out)
  Vector gamma;  // (out) LayerNorm scale
  Vector beta;   // (out) LayerNorm shift
};

struct MLPModel {
  int input_dim = 0;
  std::vector<int> widths;          // hidden widths
  std::vector<DenseLayer> hidden;   // widths.size() layers
  Matrix w_out;                     // (1, widths.back())
  Vector b_out;                     // (1)

  static std::vector<int> default_widths() {
    return {256, 256, 256, 128, 128, 128, 64, 64, 64, 32};
  }

  static MLPModel create(int input_dim, const std::vector<int>& widths, uint64_t seed) {
    if (input_dim <= 0 || widths.empty()) throw ShapeError("model needs input_dim > 0 and >= 1 hidden layer");
    MLPModel m;
    m.input_dim = input_dim;
    m.widths = widths;
    Rng rng(seed);
    int fan_in = input_dim;
    for (int w : widths) {
      if (w <= 0) throw ShapeError("hidden width must be > 0");
      DenseLayer l;
      l.w.resize(w, fan_in);
      double bound = std::sqrt(6.0 / fan_in);  // Kaiming-uniform for ReLU stacks
      for (Eigen::Index j = 0; j < l.w.size(); ++j) l.w.data()[j] = rng.uniform(-bound, bound);
      l.b = Vector::Zero(w);
      l.gamma = Vector::Ones(w);
      l.beta = Vector::Zero(w);
      m.hidden.push_back(std::move(l));
      fan_in = w;
    }
    m.w_out.resize(1, fan_in);
    double bound = std::sqrt(6.0 / fan_in);
    for (Eigen::Index j = 0; j < m.w_out.size(); ++j) m.w_out.data()[j] = rng.uniform(-bound, bound);
    m.b_out = Vector::Zero(1);
    return m;
  }

  size_t parameter_count() const {
    size_t n = 0;
    for (const auto& l : hidden) n += static_cast<size_t>(l.w.size()) + 3 * l.b.size();
    return n + w_out.size() + 1;
  }

  uint64_t arch_hash() const {  // FNV-1a over (input_dim, widths)
    uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](uint64_t v) {
      for (int i = 0; i < 8; ++i) {
        h ^= (v >> (8 * i)) & 0xff;
        h *= 1099511628211ULL;
      }
    };
    mix(static_cast<uint64_t>(input_dim));
    for (int w : widths) mix(static_cast<uint64_t>(w));
    return h;
  }
};

// Per-feature standardization fitted on the training split only.
struct NormStats {
  Vector mu, sigma;

  static NormStats fit(const Matrix& x, const std::vector<int>& rows) {
    if (rows.empty()) throw ShapeError("cannot fit normalization on empty split");
    NormStats s;
    s.mu = Vector::Zero(x.cols());
    s.sigma = Vector::Zero(x.cols());
    for (int r : rows) s.mu += x.row(r).transpose();
    s.mu /= static_cast<double>(rows.size());
    for (int r : rows) s.sigma += (x.row(r).transpose() - s.mu).array().square().matrix();
    s.sigma = (s.sigma / static_cast<double>(rows.size())).array().sqrt();
    for (Eigen::Index i = 0; i < s.sigma.size(); ++i)
      if (s.sigma[i] < 1e-12) s.sigma[i] = 1.0;  // constant feature: pass through
    return s;
  }
};

// Reference single-feature LayerNorm (used directly by tests; the batched
// training path inlines the same computation).
inline Vector layer_norm(const Vector& x, const Vector& gamma, const Vector& beta,
                         double eps = kLayerNormEps) {
  if (x.size() != gamma.size() || x.size() != beta.size())
    throw ShapeError("layer_norm: size mismatch");
  double mean = x.mean();
  double var = (x.array() - mean).square().mean();
  double inv = 1.0 / std::sqrt(var + eps);
  return (((x.array() - mean) * inv) * gamma.array() + beta.array()).matrix();
}

// ---------------------------------------------------------------------------
// Forward / backward. All buffers live in a reusable workspace so the hot
// paths (training steps, inverse-design iterations) do not allocate.
// ---------------------------------------------------------------------------

struct LayerCache {
  Matrix z;      // pre-activation        (B, w)
  Matrix xhat;   // normalized activation (B, w)
  Matrix y;      // layer output          (B, w)
  Vector invsig; // 1/sqrt(var+eps) per row (B)
  Matrix dtmp;   // scratch for backward  (B, w)
};

struct ForwardCache {
  Matrix x0;                     // normalized input (B, d)
  std::vector<LayerCache> layers;
  Vector z_out;                  // pre-softplus (B)
  Vector pred;                   // (B)
  Vector row_m1, row_m2;         // LayerNorm backward row means (B)
  Matrix dx;                     // input gradient scratch (B, d)
};

struct LayerGrads {
  Matrix dw;
  Vector db, dgamma, dbeta;
};

struct ParamGrads {
  std::vector<LayerGrads> hidden;
  Matrix dw_out;
  Vector db_out;

  static ParamGrads zeros_like(const MLPModel& m) {
    ParamGrads g;
    for (const auto& l : m.hidden)
      g.hidden.push_back({Matrix::Zero(l.w.rows(), l.w.cols()), Vector::Zero(l.b.size()),
                          Vector::Zero(l.gamma.size()), Vector::Zero(l.beta.size())});
    g.dw_out = Matrix::Zero(1, m.w_out.cols());
    g.db_out = Vector::Zero(1);
    return g;
  }
};

// Forward pass over raw (unnormalized) inputs, one sample per row.
inline const Vector& forward(const MLPModel& m, const NormStats& stats, const Matrix& x_raw,
                             ForwardCache& c) {
  if (x_raw.cols() != m.input_dim) throw ShapeError("forward: input dim mismatch");
  const Eigen::Index B = x_raw.rows();
  c.layers.resize(m.hidden.size());

  c.x0 = (x_raw.rowwise() - stats.mu.transpose()).array().rowwise() /
         stats.sigma.transpose().array();

  const Matrix* in = &c.x0;
  for (size_t k = 0; k < m.hidden.size(); ++k) {
    const DenseLayer& l = m.hidden[k];
    LayerCache& lc = c.layers[k];
    lc.z.resize(B, l.w.rows());
    lc.z.noalias() = (*in) * l.w.transpose();
    lc.z.rowwise() += l.b.transpose();
    // ReLU into xhat slot first (xhat temporarily holds the activation).
    lc.xhat = lc.z.cwiseMax(0.0);
    // LayerNorm over the feature axis.
    const double n = static_cast<double>(l.w.rows());
    Vector mean = lc.xhat.rowwise().sum() / n;
    lc.xhat.colwise() -= mean;
    lc.invsig = (lc.xhat.array().square().rowwise().sum() / n + kLayerNormEps)
                    .sqrt()
                    .inverse()
                    .matrix();
    lc.xhat.array().colwise() *= lc.invsig.array();
    lc.y = lc.xhat;
    lc.y.array().rowwise() *= l.gamma.transpose().array();
    lc.y.rowwise() += l.beta.transpose();
    in = &lc.y;
  }
  c.z_out.resize(B);
  c.z_out.noalias() = (*in) * m.w_out.transpose().col(0);
  c.z_out.array() += m.b_out[0];
  c.pred = c.z_out.unaryExpr([](double z) { return softplus(z); });
  return c.pred;
}

inline double forward_one(const MLPModel& m, const NormStats& stats, const Vector& x_raw) {
  ForwardCache c;
  Matrix x(1, x_raw.size());
  x.row(0) = x_raw.transpose();
  return forward(m, stats, x, c)(0);
}

inline double mse_loss(const Vector& pred, const Vector& target) {
  if (pred.size() != target.size()) throw ShapeError("mse_loss: length mismatch");
  if (pred.size() == 0) throw ShapeError("mse_loss: empty");
  return (pred - target).squaredNorm() / static_cast<double>(pred.size());
}

namespace detail {

// Shared reverse sweep. `dy` enters as d(loss)/d(layer output) for the last
// hidden layer and is consumed. When `grads` is null only input gradients are
// accumulated, which skips every dW outer product (the inverse-design path).
inline void backward_sweep(const MLPModel& m, ForwardCache& c, Matrix& dy, ParamGrads* grads) {
  const Eigen::Index B = c.x0.rows();
  for (int k = static_cast<int>(m.hidden.size()) - 1; k >= 0; --k) {
    const DenseLayer& l = m.hidden[k];
    LayerCache& lc = c.layers[k];
    const double n = static_cast<double>(l.w.rows());

    if (grads) {
      grads->hidden[k].dgamma.noalias() = (dy.array() * lc.xhat.array()).colwise().sum().matrix().transpose();
      grads->hidden[k].dbeta.noalias() = dy.colwise().sum().transpose();
    }
    // d xhat
    dy.array().rowwise() *= l.gamma.transpose().array();
    // LayerNorm backward: dr = invsig * (dxhat - mean(dxhat) - xhat * mean(dxhat*xhat))
    c.row_m1 = dy.rowwise().sum() / n;
    c.row_m2 = (dy.array() * lc.xhat.array()).rowwise().sum() / n;
    dy.colwise() -= c.row_m1;
    dy.array() -= lc.xhat.array().colwise() * c.row_m2.array();
    dy.array().colwise() *= lc.invsig.array();
    // ReLU backward
    dy.array() *= (lc.z.array() > 0.0).cast<double>();
    // Linear backward
    const Matrix& in = k == 0 ? c.x0 : c.layers[k - 1].y;
    if (grads) {
      grads->hidden[k].dw.noalias() = dy.transpose() * in;
      grads->hidden[k].db.noalias() = dy.colwise().sum().transpose();
    }
    lc.dtmp.resize(B, l.w.cols());
    lc.dtmp.noalias() = dy * l.w;
    dy.swap(lc.dtmp);
  }
  c.dx = dy;
}

}  // namespace detail

// Parameter gradients of the mean-squared-error loss. Requires `c` to hold a
// forward pass of (x_raw rows). Returns the loss.
inline double backward_params(const MLPModel& m, ForwardCache& c, const Vector& target,
                              ParamGrads& grads) {
  const Eigen::Index B = c.pred.size();
  if (target.size() != B) throw ShapeError("backward_params: target length mismatch");
  Vector dpred = 2.0 * (c.pred - target) / static_cast<double>(B);
  Vector dz = dpred.array() * c.z_out.unaryExpr([](double z) { return sigmoid(z); }).array();
  const Matrix& last = m.hidden.empty() ? c.x0 : c.layers.back().y;
  grads.dw_out.noalias() = dz.transpose() * last;
  grads.db_out[0] = dz.sum();
  Matrix dy = dz * m.w_out;  // (B, w_last)
  detail::backward_sweep(m, c, dy, &grads);
  return mse_loss(c.pred, target);
}

// d(pred_i)/d(x_raw_i) for every row i of the cached forward pass.
// Seeds each row with 1 (rows are independent samples).
inline Matrix backward_inputs(const MLPModel& m, const NormStats& stats, ForwardCache& c) {
  Vector dz = c.z_out.unaryExpr([](double z) { return sigmoid(z); });
  Matrix dy = dz * m.w_out;
  detail::backward_sweep(m, c, dy, nullptr);
  // chain through x' = (x - mu) / sigma
  c.dx.array().rowwise() /= stats.sigma.transpose().array();
  return c.dx;
}

// Convenience wrapper running forward + both gradient passes.
struct Gradients {
  ParamGrads params;
  Matrix input_grads;  // d pred / d x_raw, per row
  double loss = 0.0;
};

inline Gradients backward(const MLPModel& m, const NormStats& stats, const Matrix& x_raw,
                          const Vector& target) {
  Gradients g;
  g.params = ParamGrads::zeros_like(m);
  ForwardCache c;
  forward(m, stats, x_raw, c);
  g.loss = backward_params(m, c, target, g.params);
  ForwardCache c2;
  forward(m, stats, x_raw, c2);
  g.input_grads = backward_inputs(m, stats, c2);
  return g;
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig cfg;
  int64_t t = 0;
  std::vector<LayerGrads> m, v;  // first/second moments, mirroring ParamGrads
  Matrix m_out, v_out;
  Vector mb_out, vb_out;

  static AdamState create(const MLPModel& model, const AdamConfig& cfg) {
    AdamState s;
    s.cfg = cfg;
    for (const auto& l : model.hidden) {
      LayerGrads z{Matrix::Zero(l.w.rows(), l.w.cols()), Vector::Zero(l.b.size()),
                   Vector::Zero(l.gamma.size()), Vector::Zero(l.beta.size())};
      s.m.push_back(z);
      s.v.push_back(z);
    }
    s.m_out = Matrix::Zero(1, model.w_out.cols());
    s.v_out = s.m_out;
    s.mb_out = Vector::Zero(1);
    s.vb_out = s.mb_out;
    return s;
  }
};

inline void adam_step(MLPModel& model, const ParamGrads& g, AdamState& s) {
  s.t += 1;
  const double bc1 = 1.0 - std::pow(s.cfg.beta1, static_cast<double>(s.t));
  const double bc2 = 1.0 - std::pow(s.cfg.beta2, static_cast<double>(s.t));
  auto upd = [&](auto& p, const auto& grad, auto& m, auto& v) {
    m = s.cfg.beta1 * m + (1.0 - s.cfg.beta1) * grad;
    v = (s.cfg.beta2 * v.array() + (1.0 - s.cfg.beta2) * grad.array().square()).matrix();
    p.array() -= s.cfg.lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + s.cfg.eps);
  };
  for (size_t k = 0; k < model.hidden.size(); ++k) {
    upd(model.hidden[k].w, g.hidden[k].dw, s.m[k].dw, s.v[k].dw);
    upd(model.hidden[k].b, g.hidden[k].db, s.m[k].db, s.v[k].db);
    upd(model.hidden[k].gamma, g.hidden[k].dgamma, s.m[k].dgamma, s.v[k].dgamma);
    upd(model.hidden[k].beta, g.hidden[k].dbeta, s.m[k].dbeta, s.v[k].dbeta);
  }
  upd(model.w_out, g.dw_out, s.m_out, s.v_out);
  upd(model.b_out, g.db_out, s.mb_out, s.vb_out);
}

// Reduce-on-plateau: when the monitored loss fails to improve by a relative
// threshold for `patience` consecutive observations, multiply lr by `factor`.
struct PlateauScheduler {
  double factor = 0.5;
  int patience = 10;
  double rel_threshold = 1e-4;
  double min_lr = 0.0;

  double best = std::numeric_limits<double>::infinity();
  int bad = 0;

  // Returns the (possibly reduced) learning rate.
  double step(double monitored, double lr) {
    if (monitored < best * (1.0 - rel_threshold)) {
      best = monitored;
      bad = 0;
    } else if (++bad > patience) {
      lr = std::max(min_lr, lr * factor);
      bad = 0;
    }
    return lr;
  }
};

// ---------------------------------------------------------------------------
// Dataset + training
// ---------------------------------------------------------------------------

struct Dataset {
  Matrix x;  // (N, d) raw features
  Vector y;  // (N)
  std::vector<int> train_idx, val_idx, test_idx;
};

// Deterministic shuffled 80/10/10 split.
inline void split_dataset(Dataset& d, uint64_t seed, double train_frac = 0.8,
                          double val_frac = 0.1) {
  const int n = static_cast<int>(d.x.rows());
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  rng.shuffle(idx);
  int n_train = static_cast<int>(n * train_frac);
  int n_val = static_cast<int>(n * val_frac);
  d.train_idx.assign(idx.begin(), idx.begin() + n_train);
  d.val_idx.assign(idx.begin() + n_train, idx.begin() + n_train + n_val);
  d.test_idx.assign(idx.begin() + n_train + n_val, idx.end());
}

struct TrainConfig {
  std::vector<int> widths = MLPModel::default_widths();
  int max_epochs = 300;
  int batch_size = 16384;
  AdamConfig adam;                 // lr 1e-3 initial
  PlateauScheduler plateau;        // factor 0.5, patience 10
  int early_stop_patience = 25;
  double early_stop_rel = 1e-4;
  uint64_t seed = 1;
  bool verbose = false;
};

struct TrainReport {
  std::vector<double> train_loss, val_loss, lr_trace;
  int best_epoch = -1;
  double best_val = std::numeric_limits<double>::infinity();
  double seconds = 0.0;
  bool early_stopped = false;
};

struct Metrics {
  double mae = 0, mse = 0, rmse = 0, r2 = 0, mape = 0;
};

inline Vector predict_rows(const MLPModel& m, const NormStats& stats, const Matrix& x,
                           const std::vector<int>& rows, int chunk = 16384) {
  Vector out(rows.size());
  ForwardCache c;
  Matrix buf;
  for (size_t at = 0; at < rows.size(); at += chunk) {
    size_t b = std::min(rows.size() - at, static_cast<size_t>(chunk));
    buf.resize(b, x.cols());
    for (size_t i = 0; i < b; ++i) buf.row(i) = x.row(rows[at + i]);
    const Vector& p = forward(m, stats, buf, c);
    out.segment(at, b) = p;
  }
  return out;
}

inline Metrics evaluate(const MLPModel& m, const NormStats& stats, const Matrix& x,
                        const Vector& y, const std::vector<int>& rows) {
  if (rows.empty()) throw ShapeError("evaluate: empty split");
  Vector pred = predict_rows(m, stats, x, rows);
  Vector truth(rows.size());
  for (size_t i = 0; i < rows.size(); ++i) truth[i] = y[rows[i]];
  Metrics mt;
  Vector err = pred - truth;
  mt.mae = err.array().abs().mean();
  mt.mse = err.squaredNorm() / err.size();
  mt.rmse = std::sqrt(mt.mse);
  double ybar = truth.mean();
  double ss_tot = (truth.array() - ybar).square().sum();
  mt.r2 = ss_tot > 0 ? 1.0 - err.squaredNorm() / ss_tot : 1.0;
  mt.mape = (err.array().abs() / truth.array().abs().max(1e-12)).mean() * 100.0;
  return mt;
}

struct TrainResult {
  MLPModel model;
  NormStats stats;
  TrainReport report;
};

inline TrainResult train(const Dataset& d, const TrainConfig& cfg) {
  if (d.train_idx.empty()) throw ShapeError("train: empty training split");
  TrainResult res;
  res.model = MLPModel::create(static_cast<int>(d.x.cols()), cfg.widths, cfg.seed);
  res.stats = NormStats::fit(d.x, d.train_idx);
  if (cfg.max_epochs <= 0) return res;  // initialized model, empty report

  auto t0 = std::chrono::steady_clock::now();
  AdamState adam = AdamState::create(res.model, cfg.adam);
  PlateauScheduler sched = cfg.plateau;
  double lr = cfg.adam.lr;

  MLPModel best_model = res.model;
  NormStats& stats = res.stats;
  double best_val = std::numeric_limits<double>::infinity();
  double es_best = best_val;
  int es_bad = 0;

  std::vector<int> order = d.train_idx;
  Rng rng(cfg.seed ^ 0x5DEECE66DULL);
  ForwardCache cache;
  ParamGrads grads = ParamGrads::zeros_like(res.model);
  Matrix xb;
  Vector yb;

  const bool has_val = !d.val_idx.empty();
  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    size_t seen = 0;
    for (size_t at = 0; at < order.size(); at += cfg.batch_size) {
      size_t b = std::min(order.size() - at, static_cast<size_t>(cfg.batch_size));
      xb.resize(b, d.x.cols());
      yb.resize(b);
      for (size_t i = 0; i < b; ++i) {
        xb.row(i) = d.x.row(order[at + i]);
        yb[i] = d.y[order[at + i]];
      }
      forward(res.model, stats, xb, cache);
      adam.cfg.lr = lr;
      double loss = backward_params(res.model, cache, yb, grads);
      adam_step(res.model, grads, adam);
      epoch_loss += loss * b;
      seen += b;
    }
    epoch_loss /= static_cast<double>(seen);
    res.report.train_loss.push_back(epoch_loss);

    double val = epoch_loss;
    if (has_val) {
      Vector pv = predict_rows(res.model, stats, d.x, d.val_idx);
      Vector tv(d.val_idx.size());
      for (size_t i = 0; i < d.val_idx.size(); ++i) tv[i] = d.y[d.val_idx[i]];
      val = mse_loss(pv, tv);
    }
    res.report.val_loss.push_back(val);
    res.report.lr_trace.push_back(lr);

    if (val < best_val) {
      best_val = val;
      best_model = res.model;
      res.report.best_epoch = epoch;
    }
    if (val < es_best * (1.0 - cfg.early_stop_rel)) {
      es_best = val;
      es_bad = 0;
    } else if (++es_bad >= cfg.early_stop_patience) {
      res.report.early_stopped = true;
      break;
    }
    lr = sched.step(val, lr);
  }

  res.model = std::move(best_model);
  res.report.best_val = best_val;
  res.report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

// ---------------------------------------------------------------------------
// Checkpoint io. Little-endian binary: magic, version, arch, params, stats.
// ---------------------------------------------------------------------------

namespace detail {

inline void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_u64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_f64(std::string& out, double d) {
  uint64_t v;
  std::memcpy(&v, &d, 8);
  put_u64(out, v);
}
struct ByteReader {
  const unsigned char* p;
  const unsigned char* end;
  uint32_t u32() {
    if (end - p < 4) throw IoError("checkpoint truncated");
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(p[i]) << (8 * i);
    p += 4;
    return v;
  }
  uint64_t u64() {
    if (end - p < 8) throw IoError("checkpoint truncated");
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(p[i]) << (8 * i);
    p += 8;
    return v;
  }
  double f64() {
    uint64_t v = u64();
    double d;
    std::memcpy(&d, &v, 8);
    return d;
  }
};

template <typename M>
inline void put_mat(std::string& out, const M& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) put_f64(out, m(r, c));
}
template <typename M>
inline void get_mat(ByteReader& br, M& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = br.f64();
}

}  // namespace detail

constexpr uint32_t kCheckpointMagic = 0x4E51'4652;  // "RFQN"
constexpr uint32_t kCheckpointVersion = 1;

inline std::string serialize_checkpoint(const MLPModel& m, const NormStats& stats) {
  std::string out;
  detail::put_u32(out, kCheckpointMagic);
  detail::put_u32(out, kCheckpointVersion);
  detail::put_u32(out, static_cast<uint32_t>(m.input_dim));
  detail::put_u32(out, static_cast<uint32_t>(m.widths.size()));
  for (int w : m.widths) detail::put_u32(out, static_cast<uint32_t>(w));
  detail::put_u64(out, m.arch_hash());
  for (const auto& l : m.hidden) {
    detail::put_mat(out, l.w);
    detail::put_mat(out, l.b);
    detail::put_mat(out, l.gamma);
    detail::put_mat(out, l.beta);
  }
  detail::put_mat(out, m.w_out);
  detail::put_mat(out, m.b_out);
  detail::put_mat(out, stats.mu);
  detail::put_mat(out, stats.sigma);
  return out;
}

inline void save_checkpoint(const std::string& path, const MLPModel& m, const NormStats& stats) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write checkpoint '" + path + "'");
  std::string bytes = serialize_checkpoint(m, stats);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("short write to '" + path + "'");
}

inline std::pair<MLPModel, NormStats> deserialize_checkpoint(const std::string& bytes) {
  detail::ByteReader br{reinterpret_cast<const unsigned char*>(bytes.data()),
                        reinterpret_cast<const unsigned char*>(bytes.data()) + bytes.size()};
  if (br.u32() != kCheckpointMagic) throw IoError("not a model checkpoint");
  if (br.u32() != kCheckpointVersion) throw IoError("unsupported checkpoint version");
  MLPModel m;
  m.input_dim = static_cast<int>(br.u32());
  uint32_t nh = br.u32();
  if (nh == 0 || nh > 1024) throw IoError("corrupt checkpoint header");
  m.widths.resize(nh);
  for (auto& w : m.widths) w = static_cast<int>(br.u32());
  uint64_t hash = br.u64();
  int fan_in = m.input_dim;
  for (int w : m.widths) {
    DenseLayer l;
    l.w.resize(w, fan_in);
    l.b.resize(w);
    l.gamma.resize(w);
    l.beta.resize(w);
    detail::get_mat(br, l.w);
    detail::get_mat(br, l.b);
    detail::get_mat(br, l.gamma);
    detail::get_mat(br, l.beta);
    m.hidden.push_back(std::move(l));
    fan_in = w;
  }
  m.w_out.resize(1, fan_in);
  m.b_out.resize(1);
  detail::get_mat(br, m.w_out);
  detail::get_mat(br, m.b_out);
  NormStats stats;
  stats.mu.resize(m.input_dim);
  stats.sigma.resize(m.input_dim);
  detail::get_mat(br, stats.mu);
  detail::get_mat(br, stats.sigma);
  if (hash != m.arch_hash()) throw IoError("checkpoint architecture hash mismatch");
  if (br.p != br.end) throw IoError("trailing bytes in checkpoint");
  return {std::move(m), std::move(stats)};
}

inline std::pair<MLPModel, NormStats> load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read checkpoint '" + path + "'");
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

}  // namespace rfsynth
