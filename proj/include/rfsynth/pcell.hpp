#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rfsynth/device.hpp"
#include "rfsynth/geometry.hpp"

namespace rfsynth {

struct Unsatisfiable : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shared tolerance predicate: every optimizer, oracle and test uses this exact
// floating-point expression, so "within tolerance" means one thing everywhere.
inline bool within_tol(double value, double target, double tol) {
  return std::abs(value - target) <= tol * target;
}

// Search grids run at 0.01 um; dimensions are handled as integer centi-um so
// enumeration is exact, and mapped to um by this one expression.
inline double grid_um(long long centi) { return static_cast<double>(centi) / 100.0; }
inline long long grid_lo_cell(double um) { return llround(std::ceil(um * 100.0 - 1e-6)); }
inline long long grid_hi_cell(double um) { return llround(std::floor(um * 100.0 + 1e-6)); }

// ---------------------------------------------------------------------------
// MOM capacitor
// ---------------------------------------------------------------------------

struct CapStack {
  std::string name;
  double rho_ff_um2 = 0.0;               // capacitance density
  std::vector<std::string> layer_span;   // >= 3 metal layers, bottom-up

  void check() const {
    if (!(rho_ff_um2 > 0)) throw DomainError("cap stack density must be > 0");
    if (layer_span.size() < 3) throw DomainError("cap stack must span >= 3 layers");
  }
};

struct CapBounds {
  double w_lo = 1.0, w_hi = 330.0;
  double l_lo = 1.0, l_hi = 60.0;
};

struct CapDesign {
  CapStack stack;
  double w_um = 0.0, l_um = 0.0;
  double area_um2 = 0.0;
  double c_pf = 0.0;
};

inline double cap_value(const CapStack& stack, double w_um, double l_um) {
  if (!(w_um > 0) || !(l_um > 0)) throw DomainError("cap dimensions must be positive");
  return stack.rho_ff_um2 * w_um * l_um * 1e-3;
}

// Strict-weak order for capacitor candidates: smaller area, then denser stack,
// then aspect ratio nearest square, then smaller W, then stack name.
inline bool cap_better(const CapDesign& a, const CapDesign& b) {
  if (a.area_um2 != b.area_um2) return a.area_um2 < b.area_um2;
  if (a.stack.rho_ff_um2 != b.stack.rho_ff_um2) return a.stack.rho_ff_um2 > b.stack.rho_ff_um2;
  double ra = std::max(a.w_um, a.l_um) / std::min(a.w_um, a.l_um);
  double rb = std::max(b.w_um, b.l_um) / std::min(b.w_um, b.l_um);
  if (ra != rb) return ra < rb;
  if (a.w_um != b.w_um) return a.w_um < b.w_um;
  return a.stack.name < b.stack.name;
}

// Minimum-area design within +/-0.5% of the target over the 0.01 um grid.
// For fixed (stack, W) the capacitance is strictly increasing in L, so the
// feasible L cells form one contiguous window and the smallest feasible L
// minimizes area for that W; enumerating every W therefore visits every
// candidate an exhaustive scan could return, including all area ties.
inline CapDesign optimize_capacitor(double c_target_pf, const std::vector<CapStack>& stacks,
                                    double tol = 0.005, const CapBounds& bounds = {}) {
  if (!(c_target_pf > 0)) throw DomainError("capacitor target must be > 0");
  if (stacks.empty()) throw DomainError("need at least one cap stack");
  std::optional<CapDesign> best;
  const long long wl = grid_lo_cell(bounds.w_lo), wh = grid_hi_cell(bounds.w_hi);
  const long long ll = grid_lo_cell(bounds.l_lo), lh = grid_hi_cell(bounds.l_hi);
  for (const auto& stack : stacks) {
    stack.check();
    for (long long wc = wl; wc <= wh; ++wc) {
      double w = grid_um(wc);
      // Real-arithmetic window bounds, then verify cells with the exact predicate.
      double l_first = (1.0 - tol) * c_target_pf * 1e3 / (stack.rho_ff_um2 * w);
      double l_last = (1.0 + tol) * c_target_pf * 1e3 / (stack.rho_ff_um2 * w);
      long long lc = std::max(ll, llround(std::floor(l_first * 100.0)) - 2);
      long long lstop = std::min(lh, llround(std::ceil(l_last * 100.0)) + 2);
      for (; lc <= lstop; ++lc) {
        if (within_tol(cap_value(stack, w, grid_um(lc)), c_target_pf, tol)) {
          CapDesign cand{stack, w, grid_um(lc), w * grid_um(lc),
                         cap_value(stack, w, grid_um(lc))};
          if (!best || cap_better(cand, *best)) best = cand;
          break;  // smallest feasible L for this W
        }
      }
    }
  }
  if (!best)
    throw Unsatisfiable("no capacitor on the grid is within tolerance of " +
                        std::to_string(c_target_pf) + " pF");
  return *best;
}

// ---------------------------------------------------------------------------
// Poly resistor
// ---------------------------------------------------------------------------

struct ResTech {
  double rs_ohm_sq = 50.0;     // sheet resistance
  double r_end_ohm_um = 5.0;   // per-contact end resistance
  double pitch_x_um = 0.5;     // stripe-to-stripe horizontal overhead
  double pitch_y_um = 1.0;     // stripe-to-stripe vertical overhead

  void check() const {
    if (!(rs_ohm_sq > 0) || !(r_end_ohm_um > 0)) throw DomainError("resistor constants must be > 0");
  }
};

struct ResBounds {
  double w_lo = 0.36, w_hi = 3.72;
  double l_lo = 0.40, l_hi = 50.0;
  int n_max = 64;  // Ns, Np upper bound
};

struct ResDesign {
  double w_um = 0.0, l_um = 0.0;
  int ns = 1, np = 1;
  double r_ohm = 0.0;
  double area_um2 = 0.0;  // Ns*Np * (W+pitch_x)*(L+pitch_y)
};

inline double resistor_stripe(const ResTech& t, double w_um, double l_um) {
  if (!(w_um > 0) || !(l_um > 0)) throw DomainError("resistor dimensions must be positive");
  return t.rs_ohm_sq * l_um / w_um + 2.0 * t.r_end_ohm_um / w_um;
}

inline double resistor_total(const ResTech& t, double w_um, double l_um, int ns, int np) {
  return (static_cast<double>(ns) / np) * resistor_stripe(t, w_um, l_um);
}

inline double resistor_area(const ResTech& t, double w_um, double l_um, int ns, int np) {
  return (static_cast<double>(ns) * np) * ((w_um + t.pitch_x_um) * (l_um + t.pitch_y_um));
}

// Strict-weak order for resistor candidates: smaller area, then fewer stripes,
// then fewer series rows, then smaller W, then smaller L.
inline bool res_better(const ResDesign& a, const ResDesign& b) {
  if (a.area_um2 != b.area_um2) return a.area_um2 < b.area_um2;
  if (a.ns * a.np != b.ns * b.np) return a.ns * a.np < b.ns * b.np;
  if (a.ns != b.ns) return a.ns < b.ns;
  if (a.w_um != b.w_um) return a.w_um < b.w_um;
  return a.l_um < b.l_um;
}

// Minimum-area series/parallel stripe array within tolerance of the target.
// Same exhaustiveness argument as the capacitor: for fixed (Ns, Np, W) the
// total resistance is strictly increasing in L, so feasible L cells form one
// window whose smallest member minimizes area; every (Ns, Np, W) is visited.
// (Ns, Np) pairs are processed in increasing stripe count so the exact
// area lower bound Ns*Np*min_cell can prune dominated pairs.
inline ResDesign optimize_resistor(double r_target_ohm, const ResTech& tech, double tol = 0.005,
                                   const ResBounds& bounds = {}) {
  if (!(r_target_ohm > 0)) throw DomainError("resistor target must be > 0");
  tech.check();
  std::vector<std::pair<int, int>> pairs;
  for (int ns = 1; ns <= bounds.n_max; ++ns)
    for (int np = 1; np <= bounds.n_max; ++np) pairs.push_back({ns, np});
  std::sort(pairs.begin(), pairs.end(), [](auto& a, auto& b) {
    if (a.first * a.second != b.first * b.second) return a.first * a.second < b.first * b.second;
    return a < b;
  });
  const double min_cell = (bounds.w_lo + tech.pitch_x_um) * (bounds.l_lo + tech.pitch_y_um);
  const long long wl = grid_lo_cell(bounds.w_lo), wh = grid_hi_cell(bounds.w_hi);
  const long long ll = grid_lo_cell(bounds.l_lo), lh = grid_hi_cell(bounds.l_hi);

  std::optional<ResDesign> best;
  for (auto [ns, np] : pairs) {
    if (best && static_cast<double>(ns) * np * min_cell > best->area_um2) continue;
    const double k = static_cast<double>(ns) / np;
    for (long long wc = wl; wc <= wh; ++wc) {
      double w = grid_um(wc);
      // Invert R = k*(Rs*L + 2*R_end)/W for the tolerance window in L.
      double l_first = ((1.0 - tol) * r_target_ohm * w / k - 2.0 * tech.r_end_ohm_um) /
                       tech.rs_ohm_sq;
      double l_last = ((1.0 + tol) * r_target_ohm * w / k - 2.0 * tech.r_end_ohm_um) /
                      tech.rs_ohm_sq;
      if (l_last < bounds.l_lo - 0.02 || l_first > bounds.l_hi + 0.02) continue;
      long long lc = std::max(ll, llround(std::floor(l_first * 100.0)) - 2);
      long long lstop = std::min(lh, llround(std::ceil(l_last * 100.0)) + 2);
      for (; lc <= lstop; ++lc) {
        double r = resistor_total(tech, w, grid_um(lc), ns, np);
        if (within_tol(r, r_target_ohm, tol)) {
          ResDesign cand{w, grid_um(lc), ns, np, r, resistor_area(tech, w, grid_um(lc), ns, np)};
          if (!best || res_better(cand, *best)) best = cand;
          break;
        }
      }
    }
  }
  if (!best)
    throw Unsatisfiable("no resistor array on the grid is within tolerance of " +
                        std::to_string(r_target_ohm) + " ohm");
  return *best;
}

// ---------------------------------------------------------------------------
// Geometry
// ---------------------------------------------------------------------------

// One W x L plate per layer of the stack, alternating terminal A/B bottom-up.
// Port A exits left on the first layer, port B right on the second.
inline CellGeometry cap_geometry(const CapDesign& d) {
  d.stack.check();
  if (!(d.w_um > 0) || !(d.l_um > 0)) throw DomainError("cap design dimensions must be positive");
  CellGeometry g;
  for (const auto& layer : d.stack.layer_span)
    g.rects.push_back({layer, Rect(0, 0, d.w_um, d.l_um)});
  g.pins.push_back({"A", {0.0, d.l_um / 2.0}, d.stack.layer_span[0],
                    EscapeDirs::of(EscapeDirs::kLeft)});
  g.pins.push_back({"B", {d.w_um, d.l_um / 2.0}, d.stack.layer_span[1],
                    EscapeDirs::of(EscapeDirs::kRight)});
  return g;
}

// Ns rows x Np columns of W x L stripes at fixed pitch, end contacts as small
// squares on M1. Ports at the bottom of the first stripe and the top of the
// last stripe; the serpentine series path between them is implied.
inline CellGeometry res_geometry(const ResDesign& d, const ResTech& tech,
                                 const std::string& body_layer = "RES",
                                 const std::string& contact_layer = "M1") {
  if (!(d.w_um > 0) || !(d.l_um > 0) || d.ns < 1 || d.np < 1)
    throw DomainError("resistor design is degenerate");
  CellGeometry g;
  const double px = d.w_um + tech.pitch_x_um, py = d.l_um + tech.pitch_y_um;
  const double cs = std::min(d.w_um, 0.4);  // contact square side
  for (int r = 0; r < d.ns; ++r) {
    for (int c = 0; c < d.np; ++c) {
      double x = c * px, y = r * py;
      g.rects.push_back({body_layer, Rect(x, y, x + d.w_um, y + d.l_um)});
      double cx = x + d.w_um / 2.0;
      g.rects.push_back({contact_layer, Rect(cx - cs / 2, y, cx + cs / 2, y + cs)});
      g.rects.push_back(
          {contact_layer, Rect(cx - cs / 2, y + d.l_um - cs, cx + cs / 2, y + d.l_um)});
    }
  }
  double last_x = (d.np - 1) * px + d.w_um / 2.0;
  double top_y = (d.ns - 1) * py + d.l_um;
  g.pins.push_back({"A", {d.w_um / 2.0, 0.0}, contact_layer, EscapeDirs::of(EscapeDirs::kDown)});
  g.pins.push_back({"B", {last_x, top_y}, contact_layer, EscapeDirs::of(EscapeDirs::kUp)});
  return g;
}

}  // namespace rfsynth
