#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "rfsynth/device.hpp"
#include "rfsynth/geometry.hpp"
#include "rfsynth/nn.hpp"

namespace rfsynth {

struct InfeasibleBox : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Target specification for one inductor: operating frequency, trace width,
// inductance. Layout variables (Lv, Lh, Lcn) are what inverse design solves for.
struct InductorSpec {
  double f_ghz = 0, w_um = 0, l_ph = 0;

  void check() const {
    if (!(f_ghz > 0) || !(w_um > 0) || !(l_ph > 0) || !std::isfinite(f_ghz) ||
        !std::isfinite(w_um) || !std::isfinite(l_ph))
      throw DomainError("inductor spec values must be positive and finite");
    if (f_ghz < 1.0 || f_ghz > 100.0)
      throw DomainError("inductor frequency outside the 1-100 GHz sweep range");
  }
};

struct LayoutVars {
  double lv = 0, lh = 0, lcn = 0;
};

// Box constraints: W+2 <= Lv <= 100, 2W+4 <= Lh <= 100, 1 <= Lcn <= 50 (um).
constexpr double kLayoutMaxSide = 100.0;
constexpr double kLcnMin = 1.0, kLcnMax = 50.0;
inline double lv_min(double w) { return w + 2.0; }
inline double lh_min(double w) { return 2.0 * w + 4.0; }

inline LayoutVars clamp_to_constraints(const LayoutVars& v, double w) {
  if (!(w > 0)) throw DomainError("width must be positive");
  if (lv_min(w) > kLayoutMaxSide || lh_min(w) > kLayoutMaxSide)
    throw InfeasibleBox("width leaves no feasible layout box");
  LayoutVars out;
  out.lv = std::clamp(v.lv, lv_min(w), kLayoutMaxSide);
  out.lh = std::clamp(v.lh, lh_min(w), kLayoutMaxSide);
  out.lcn = std::clamp(v.lcn, kLcnMin, kLcnMax);
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic Q oracle. A documented closed-form stand-in for EM-simulated
// ground truth: a self-resonance band factor, a Gaussian in (Lv, Lh) around
// frequency-dependent optima, and a mild center-tap term. Values stay in
// (0, 48) over the sampled domain. The exact form is a fixture, not physics.
//
//   f_sr(W, L) = 16 * W^0.25 * (300/L)^0.125        [GHz]
//   s          = f / f_sr
//   v*(f)      = 30 + 40*exp(-f/30)                 [um]
//   h*(f)      = 35 + 45*exp(-f/40)                 [um]
//   Q = 80 * s/(s^2+1)
//        * exp(-((Lv-v*)^2 + (Lh-h*)^2) / 70^2)
//        * (1 + 0.2*tanh((Lcn-25)/10))
// ---------------------------------------------------------------------------

constexpr double kOracleQPeak = 80.0;
constexpr double kOracleSigma = 70.0;

inline double oracle_f_sr(double w_um, double l_ph) {
  return 16.0 * std::pow(w_um, 0.25) * std::pow(300.0 / l_ph, 0.125);
}
inline double oracle_v_star(double f_ghz) { return 30.0 + 40.0 * std::exp(-f_ghz / 30.0); }
inline double oracle_h_star(double f_ghz) { return 35.0 + 45.0 * std::exp(-f_ghz / 40.0); }

inline double synthetic_q_oracle(double f_ghz, double w_um, double l_ph, double lv, double lh,
                                 double lcn) {
  if (!(f_ghz > 0) || !(w_um > 0) || !(l_ph > 0) || !(lv > 0) || !(lh > 0) || !(lcn > 0))
    throw DomainError("oracle inputs must be positive");
  double s = f_ghz / oracle_f_sr(w_um, l_ph);
  double band = s / (s * s + 1.0);
  double dv = lv - oracle_v_star(f_ghz);
  double dh = lh - oracle_h_star(f_ghz);
  double shape = std::exp(-(dv * dv + dh * dh) / (kOracleSigma * kOracleSigma));
  double tap = 1.0 + 0.2 * std::tanh((lcn - 25.0) / 10.0);
  return kOracleQPeak * band * shape * tap;
}

inline double synthetic_q_oracle(const Vector& x) {
  if (x.size() != 6) throw DomainError("oracle expects a 6-vector (f,W,L,Lv,Lh,Lcn)");
  return synthetic_q_oracle(x[0], x[1], x[2], x[3], x[4], x[5]);
}

// ---------------------------------------------------------------------------
// Dataset generation
// ---------------------------------------------------------------------------

struct DatasetRanges {
  double f_lo = 1.0, f_hi = 100.0;
  double w_lo = 1.0, w_hi = 10.0;
  double l_lo = 50.0, l_hi = 1000.0;  // pH
};

// Uniform samples of (f, W, L, Lv, Lh, Lcn); layout variables respect the box
// constraints implied by the sampled W. Split 80:10:10 with the same seed.
inline Dataset generate_dataset(int n, const DatasetRanges& r, uint64_t seed) {
  if (n < 1) throw DomainError("dataset size must be >= 1");
  Dataset d;
  d.x.resize(n, 6);
  d.y.resize(n);
  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    double f = rng.uniform(r.f_lo, r.f_hi);
    double w = rng.uniform(r.w_lo, r.w_hi);
    double l = rng.uniform(r.l_lo, r.l_hi);
    double lv = rng.uniform(lv_min(w), kLayoutMaxSide);
    double lh = rng.uniform(lh_min(w), kLayoutMaxSide);
    double lcn = rng.uniform(kLcnMin, kLcnMax);
    d.x.row(i) << f, w, l, lv, lh, lcn;
    d.y[i] = synthetic_q_oracle(f, w, l, lv, lh, lcn);
  }
  split_dataset(d, seed);
  return d;
}

// ---------------------------------------------------------------------------
// Inverse design: gradient ascent on (Lv, Lh, Lcn) through the frozen model.
// ---------------------------------------------------------------------------

struct TracePoint {
  LayoutVars vars;
  double q = 0.0;
};

struct InverseConfig {
  double lr = 0.01;
  int max_steps = 3000;
  std::optional<double> q_target;
  LayoutVars init{40.0, 40.0, 20.0};
  bool record_trace = false;
};

struct InverseResult {
  LayoutVars vars;      // best-seen iterate
  double q_pred = 0.0;  // model prediction at `vars`
  int steps = 0;        // Adam updates performed
  double seconds = 0.0;
  std::vector<TracePoint> trace;  // per-evaluation predictions, if recorded
};

inline InverseResult inverse_design(const MLPModel& model, const NormStats& stats,
                                    const InductorSpec& spec, const InverseConfig& cfg = {}) {
  spec.check();
  if (!(cfg.lr > 0)) throw DomainError("inverse design lr must be > 0");
  if (cfg.max_steps < 0) throw DomainError("inverse design max_steps must be >= 0");
  auto t0 = std::chrono::steady_clock::now();

  LayoutVars v = clamp_to_constraints(cfg.init, spec.w_um);

  // Fresh Adam state over the three layout variables.
  AdamConfig ac;
  ac.lr = cfg.lr;
  double m[3] = {0, 0, 0}, s2[3] = {0, 0, 0};
  int64_t t = 0;

  InverseResult res;
  res.vars = v;
  res.q_pred = -1.0;

  ForwardCache cache;
  Matrix x(1, 6);
  x(0, 0) = spec.f_ghz;
  x(0, 1) = spec.w_um;
  x(0, 2) = spec.l_ph;

  for (int step = 0;; ++step) {
    x(0, 3) = v.lv;
    x(0, 4) = v.lh;
    x(0, 5) = v.lcn;
    forward(model, stats, x, cache);
    double q = cache.pred(0);
    if (cfg.record_trace) res.trace.push_back({v, q});
    if (q > res.q_pred) {
      res.q_pred = q;
      res.vars = v;
    }
    if (cfg.q_target && q >= *cfg.q_target) break;
    if (step >= cfg.max_steps) break;

    const Matrix& dx = backward_inputs(model, stats, cache);
    double g[3] = {-dx(0, 3), -dx(0, 4), -dx(0, 5)};  // ascend Q = descend -Q
    t += 1;
    double bc1 = 1.0 - std::pow(ac.beta1, static_cast<double>(t));
    double bc2 = 1.0 - std::pow(ac.beta2, static_cast<double>(t));
    double* vv = &v.lv;
    for (int i = 0; i < 3; ++i) {
      m[i] = ac.beta1 * m[i] + (1.0 - ac.beta1) * g[i];
      s2[i] = ac.beta2 * s2[i] + (1.0 - ac.beta2) * g[i] * g[i];
      vv[i] -= ac.lr * (m[i] / bc1) / (std::sqrt(s2[i] / bc2) + ac.eps);
    }
    v = clamp_to_constraints(v, spec.w_um);
    res.steps = step + 1;
  }

  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

using LayoutOracle = std::function<double(const InductorSpec&, const LayoutVars&)>;

inline double oracle_q(const InductorSpec& spec, const LayoutVars& v) {
  return synthetic_q_oracle(spec.f_ghz, spec.w_um, spec.l_ph, v.lv, v.lh, v.lcn);
}

// Percentage of specs whose inverse-designed layout clears `threshold` under
// the given ground-truth oracle.
inline double success_rate(const MLPModel& model, const NormStats& stats,
                           const std::vector<InductorSpec>& specs, double threshold = 10.0,
                           const LayoutOracle& oracle = oracle_q,
                           const InverseConfig& cfg = {}) {
  if (specs.empty()) throw DomainError("success_rate needs at least one spec");
  int ok = 0;
  for (const auto& s : specs) {
    InverseResult r = inverse_design(model, stats, s, cfg);
    if (oracle(s, r.vars) > threshold) ++ok;
  }
  return 100.0 * ok / static_cast<double>(specs.size());
}

// Dense grid maximum of the ground-truth oracle over the constraint box.
// Used as the reference for achievability and solution quality.
inline std::pair<LayoutVars, double> grid_search_max(const InductorSpec& spec, int n_lv = 50,
                                                     int n_lh = 50, int n_lcn = 20) {
  spec.check();
  double alv = lv_min(spec.w_um), alh = lh_min(spec.w_um);
  LayoutVars best{alv, alh, kLcnMin};
  double best_q = -1.0;
  for (int i = 0; i < n_lv; ++i) {
    double lv = alv + (kLayoutMaxSide - alv) * i / (n_lv - 1.0);
    for (int j = 0; j < n_lh; ++j) {
      double lh = alh + (kLayoutMaxSide - alh) * j / (n_lh - 1.0);
      for (int k = 0; k < n_lcn; ++k) {
        double lcn = kLcnMin + (kLcnMax - kLcnMin) * k / (n_lcn - 1.0);
        double q = synthetic_q_oracle(spec.f_ghz, spec.w_um, spec.l_ph, lv, lh, lcn);
        if (q > best_q) {
          best_q = q;
          best = {lv, lh, lcn};
        }
      }
    }
  }
  return {best, best_q};
}

// ---------------------------------------------------------------------------
// Geometry: single-turn rectangular loop on the top metal, outer extent
// Lh x Lv, trace width W, centered feed gap of width Lcn in the bottom edge.
// Decomposes into 5 rectangles (left bar, right bar, top bar, two bottom
// stubs); ports sit at the inner ends of the stubs, separated by exactly Lcn.
// ---------------------------------------------------------------------------

inline CellGeometry inductor_geometry(const InductorSpec& spec, const LayoutVars& v,
                                      const std::string& layer = "QB") {
  spec.check();
  const double w = spec.w_um;
  if (w >= v.lv / 2.0)
    throw GeometryError("trace width " + std::to_string(w) + " self-intersects: needs W < Lv/2");
  if (v.lcn >= v.lh - 2.0 * w)
    throw GeometryError("feed gap does not fit between the loop arms (Lcn >= Lh - 2W)");

  CellGeometry g;
  const double lh = v.lh, lv = v.lv, lcn = v.lcn;
  g.rects.push_back({layer, Rect(0, 0, w, lv)});             // left bar
  g.rects.push_back({layer, Rect(lh - w, 0, lh, lv)});       // right bar
  g.rects.push_back({layer, Rect(w, lv - w, lh - w, lv)});   // top bar
  double gap_l = (lh - lcn) / 2.0, gap_r = (lh + lcn) / 2.0;
  g.rects.push_back({layer, Rect(w, 0, gap_l, w)});          // bottom left stub
  g.rects.push_back({layer, Rect(gap_r, 0, lh - w, w)});     // bottom right stub
  g.pins.push_back({"P1", {gap_l, w / 2.0}, layer, EscapeDirs::of(EscapeDirs::kDown)});
  g.pins.push_back({"P2", {gap_r, w / 2.0}, layer, EscapeDirs::of(EscapeDirs::kDown)});
  return g;
}

}  // namespace rfsynth
