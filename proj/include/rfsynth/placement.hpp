#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <unordered_map>
#include <vector>

#include "rfsynth/device.hpp"
#include "rfsynth/geometry.hpp"
#include "rfsynth/netlist.hpp"
#include "rfsynth/nn.hpp"  // Rng
#include "rfsynth/tech.hpp"

namespace rfsynth {

struct PlacementError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// EM keep-apart distance at frequency f, guard band included.
inline double min_spacing(double f_ghz, const EmRules& r) {
  double base;
  if (f_ghz < r.f_low_ghz) base = r.spacing_low_um;
  else if (f_ghz > r.f_high_ghz) base = r.spacing_high_um;
  else
    base = r.spacing_low_um + (r.spacing_high_um - r.spacing_low_um) *
                                  (f_ghz - r.f_low_ghz) / (r.f_high_ghz - r.f_low_ghz);
  return base * (1.0 + r.guard_fraction);
}

struct DevicePlace {
  double x = 0.0, y = 0.0;
  Rotation theta = Rotation::R0;
};

struct Placement {
  std::vector<DevicePlace> at;  // index-aligned with the footprint list
};

inline Rect placed_bbox(const DeviceFootprint& f, const DevicePlace& p) {
  double rw, rh;
  rotated_dims(f.w, f.h, p.theta, rw, rh);
  return Rect(p.x, p.y, p.x + rw, p.y + rh);
}

inline Point world_pin(const DeviceFootprint& f, const DevicePlace& p, size_t pin_idx) {
  const Point local = rotate_in_bbox(f.pins.at(pin_idx).offset, f.w, f.h, p.theta);
  return {p.x + local.x, p.y + local.y};
}

inline std::unordered_map<std::string, int> footprint_index(
    const std::vector<DeviceFootprint>& fps) {
  std::unordered_map<std::string, int> m;
  for (size_t i = 0; i < fps.size(); ++i) m[fps[i].id] = static_cast<int>(i);
  return m;
}

// Number of distinct nets touching the device.
inline int connectivity_degree(const std::string& device_id, const Netlist& nl) {
  int d = 0;
  for (const auto& n : nl.nets)
    for (const auto& p : n.pins)
      if (p.component == device_id) {
        ++d;
        break;
      }
  return d;
}

// Processing order shared by initial placement and the rotation pass:
// descending connectivity, then id for determinism.
inline std::vector<int> placement_order(const std::vector<DeviceFootprint>& fps,
                                        const Netlist& nl) {
  std::vector<int> order(fps.size());
  std::vector<int> deg(fps.size());
  for (size_t i = 0; i < fps.size(); ++i) {
    order[i] = static_cast<int>(i);
    deg[i] = connectivity_degree(fps[i].id, nl);
  }
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (deg[a] != deg[b]) return deg[a] > deg[b];
    return fps[a].id < fps[b].id;
  });
  return order;
}

struct InitialPlacementConfig {
  double row_width = 0.0;  // 0 = derive from total device extent
};

// Row placement in connectivity order with gaps of exactly the EM spacing;
// overlap-free and spacing-penalty-free by construction.
inline Placement initial_placement(const std::vector<DeviceFootprint>& fps, const Netlist& nl,
                                   double spacing_um, const InitialPlacementConfig& cfg = {}) {
  if (fps.empty()) throw PlacementError("nothing to place");
  std::vector<int> order = placement_order(fps, nl);
  double row_width = cfg.row_width;
  if (row_width <= 0) {
    double total = 0, widest = 0;
    for (const auto& f : fps) {
      total += (f.w + spacing_um) * (f.h + spacing_um);
      widest = std::max(widest, f.w);
    }
    row_width = std::max(widest, 1.5 * std::sqrt(total));
  }
  Placement pl;
  pl.at.resize(fps.size());
  double x = 0, y = 0, row_h = 0;
  for (int idx : order) {
    const auto& f = fps[idx];
    if (x > 0 && x + f.w > row_width) {  // start a new row
      x = 0;
      y += row_h + spacing_um;
      row_h = 0;
    }
    pl.at[idx] = {x, y, Rotation::R0};
    x += f.w + spacing_um;
    row_h = std::max(row_h, f.h);
  }
  return pl;
}

// ---------------------------------------------------------------------------
// Cost: weighted HPWL + K * total pairwise overlap + soft spacing penalty.
// ---------------------------------------------------------------------------

inline double hpwl(const std::vector<DeviceFootprint>& fps, const Placement& pl,
                   const Netlist& nl) {
  auto index = footprint_index(fps);
  double total = 0;
  for (const auto& net : nl.nets) {
    double x_lo = std::numeric_limits<double>::infinity(), x_hi = -x_lo;
    double y_lo = x_lo, y_hi = -x_lo;
    bool any = false;
    for (const auto& pin : net.pins) {
      auto it = index.find(pin.component);
      if (it == index.end()) continue;
      const auto& f = fps[it->second];
      if (pin.terminal < 0 || pin.terminal >= static_cast<int>(f.pins.size())) continue;
      Point p = world_pin(f, pl.at[it->second], pin.terminal);
      x_lo = std::min(x_lo, p.x);
      x_hi = std::max(x_hi, p.x);
      y_lo = std::min(y_lo, p.y);
      y_hi = std::max(y_hi, p.y);
      any = true;
    }
    if (any) total += net.weight * ((x_hi - x_lo) + (y_hi - y_lo));
  }
  return total;
}

struct CostBreakdown {
  double hpwl = 0;
  double overlap_area = 0;
  double spacing_penalty = 0;  // sum of squared clearance deficits
  double k_overlap = 1e4;
  double spacing_weight = 1.0;
  double total() const { return hpwl + k_overlap * overlap_area + spacing_weight * spacing_penalty; }
};

inline CostBreakdown placement_cost(const std::vector<DeviceFootprint>& fps, const Placement& pl,
                                    const Netlist& nl, double spacing_um, double k_overlap = 1e4,
                                    double spacing_weight = 1.0) {
  CostBreakdown c;
  c.k_overlap = k_overlap;
  c.spacing_weight = spacing_weight;
  c.hpwl = hpwl(fps, pl, nl);
  for (size_t i = 0; i < fps.size(); ++i) {
    Rect bi = placed_bbox(fps[i], pl.at[i]);
    for (size_t j = i + 1; j < fps.size(); ++j) {
      Rect bj = placed_bbox(fps[j], pl.at[j]);
      c.overlap_area += overlap_area(bi, bj);
      double deficit = spacing_um - rect_gap(bi, bj);
      if (deficit > 0) c.spacing_penalty += deficit * deficit;
    }
  }
  return c;
}

inline double total_overlap(const std::vector<DeviceFootprint>& fps, const Placement& pl) {
  double a = 0;
  for (size_t i = 0; i < fps.size(); ++i)
    for (size_t j = i + 1; j < fps.size(); ++j)
      a += overlap_area(placed_bbox(fps[i], pl.at[i]), placed_bbox(fps[j], pl.at[j]));
  return a;
}

// ---------------------------------------------------------------------------
// Local search: accept-if-improve over swap and bounded-translate moves.
// ---------------------------------------------------------------------------

struct LocalSearchConfig {
  long long t_max = -1;        // -1 = 10 * N^2
  double translate_max = 5.0;  // um, per axis
  uint64_t seed = 1;
  double k_overlap = 1e4;
  double spacing_weight = 1.0;
};

struct LocalSearchResult {
  Placement placement;
  std::vector<double> cost_trace;  // initial cost followed by every accepted move
  long long proposed = 0, accepted = 0;
};

// The move generator never proposes a placement with overlapping devices:
// starting from an overlap-free placement this keeps overlap at zero
// structurally, and since the initial row placement also has zero spacing
// penalty, the non-increasing cost trace bounds the final weighted HPWL by the
// initial one.
inline LocalSearchResult local_search(const std::vector<DeviceFootprint>& fps, const Netlist& nl,
                                      const Placement& start, double spacing_um,
                                      const LocalSearchConfig& cfg = {}) {
  const int n = static_cast<int>(fps.size());
  LocalSearchResult res;
  res.placement = start;
  double cost = placement_cost(fps, res.placement, nl, spacing_um, cfg.k_overlap,
                               cfg.spacing_weight)
                    .total();
  res.cost_trace.push_back(cost);
  if (n == 0) return res;
  const long long t_max = cfg.t_max >= 0 ? cfg.t_max : 10LL * n * n;
  std::vector<int> order = placement_order(fps, nl);
  Rng rng(cfg.seed);

  for (long long t = 0; t < t_max; ++t) {
    Placement cand = res.placement;
    bool is_swap = (t % 2 == 0) && n >= 2;
    if (is_swap) {
      int k = static_cast<int>((t / 2) % (n - 1));
      int a = order[k], b = order[k + 1];
      std::swap(cand.at[a].x, cand.at[b].x);
      std::swap(cand.at[a].y, cand.at[b].y);
    } else {
      int a = order[static_cast<int>((t / 2) % n)];
      cand.at[a].x += rng.uniform(-cfg.translate_max, cfg.translate_max);
      cand.at[a].y += rng.uniform(-cfg.translate_max, cfg.translate_max);
    }
    ++res.proposed;
    if (total_overlap(fps, cand) > 0.0) continue;  // generator filters overlap
    double c_new =
        placement_cost(fps, cand, nl, spacing_um, cfg.k_overlap, cfg.spacing_weight).total();
    if (c_new < cost) {
      cost = c_new;
      res.placement = std::move(cand);
      res.cost_trace.push_back(cost);
      ++res.accepted;
    }
  }
  return res;
}

// ---------------------------------------------------------------------------
// Rotation selection by escape-space scoring.
// ---------------------------------------------------------------------------

// S_theta = min over pins of max over the pin's escape directions of
// (L_free - L_need): L_free is the clear run from the pin to the nearest
// neighboring bbox or region edge (capped at a horizon so wide-open space
// compares equal), L_need the distance to the device's own boundary plus the
// escape margin.
inline double rotation_score(const std::vector<DeviceFootprint>& fps, const Placement& pl,
                             int idx, Rotation theta, double spacing_um, double m_margin,
                             const Rect& region) {
  const DeviceFootprint& f = fps[idx];
  DevicePlace p = pl.at[idx];
  p.theta = theta;
  Rect own = placed_bbox(f, p);
  const double horizon = 2.0 * spacing_um;

  // A rotation that collides with a neighbor is infeasible.
  for (size_t j = 0; j < fps.size(); ++j) {
    if (static_cast<int>(j) == idx) continue;
    if (overlap_area(own, placed_bbox(fps[j], pl.at[j])) > 0.0)
      return -std::numeric_limits<double>::infinity();
  }

  double score = std::numeric_limits<double>::infinity();
  for (size_t pi = 0; pi < f.pins.size(); ++pi) {
    Point pin = world_pin(f, p, pi);
    EscapeDirs dirs = rotate_dirs(f.pins[pi].dirs, theta);
    double best_dir = -std::numeric_limits<double>::infinity();
    struct Dir {
      bool on;
      double dx, dy;
      double need;
      double edge;
    };
    const Dir cand[4] = {
        {dirs.left(), -1, 0, pin.x - own.x1, pin.x - region.x1},
        {dirs.right(), 1, 0, own.x2 - pin.x, region.x2 - pin.x},
        {dirs.up(), 0, 1, own.y2 - pin.y, region.y2 - pin.y},
        {dirs.down(), 0, -1, pin.y - own.y1, pin.y - region.y1},
    };
    for (const auto& d : cand) {
      if (!d.on) continue;
      double l_free = std::max(0.0, d.edge);
      for (size_t j = 0; j < fps.size(); ++j) {
        if (static_cast<int>(j) == idx) continue;
        Rect b = placed_bbox(fps[j], pl.at[j]);
        double dist;
        if (d.dx > 0) {
          if (pin.y < b.y1 || pin.y > b.y2 || b.x2 < pin.x) continue;
          dist = std::max(0.0, b.x1 - pin.x);
        } else if (d.dx < 0) {
          if (pin.y < b.y1 || pin.y > b.y2 || b.x1 > pin.x) continue;
          dist = std::max(0.0, pin.x - b.x2);
        } else if (d.dy > 0) {
          if (pin.x < b.x1 || pin.x > b.x2 || b.y2 < pin.y) continue;
          dist = std::max(0.0, b.y1 - pin.y);
        } else {
          if (pin.x < b.x1 || pin.x > b.x2 || b.y1 > pin.y) continue;
          dist = std::max(0.0, pin.y - b.y2);
        }
        l_free = std::min(l_free, dist);
      }
      l_free = std::min(l_free, horizon);
      best_dir = std::max(best_dir, l_free - (d.need + m_margin));
    }
    score = std::min(score, best_dir);
  }
  return score;
}

// One pass in connectivity order; ties resolve toward 0 degrees then ascending.
inline Placement select_rotations(const std::vector<DeviceFootprint>& fps, const Netlist& nl,
                                  const Placement& start, double spacing_um, double m_margin) {
  Placement pl = start;
  if (fps.empty()) return pl;
  Rect region = placed_bbox(fps[0], pl.at[0]);
  for (size_t i = 1; i < fps.size(); ++i)
    region = bounding_box(region, placed_bbox(fps[i], pl.at[i]));
  region = region.inflated(2.0 * (spacing_um + m_margin));

  for (int idx : placement_order(fps, nl)) {
    Rotation best = Rotation::R0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (Rotation r : {Rotation::R0, Rotation::R90, Rotation::R180, Rotation::R270}) {
      double s = rotation_score(fps, pl, idx, r, spacing_um, m_margin, region);
      if (s > best_score) {  // strict: ties keep the earlier (smaller) angle
        best_score = s;
        best = r;
      }
    }
    pl.at[idx].theta = best;
  }
  return pl;
}

}  // namespace rfsynth
