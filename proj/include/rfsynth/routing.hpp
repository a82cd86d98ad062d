#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <queue>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "rfsynth/device.hpp"
#include "rfsynth/geometry.hpp"
#include "rfsynth/netlist.hpp"
#include "rfsynth/placement.hpp"
#include "rfsynth/tech.hpp"

namespace rfsynth {

struct RoutingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct Unroutable : RoutingError {
  using RoutingError::RoutingError;
};
struct EscapeFailure : RoutingError {
  using RoutingError::RoutingError;
};
struct EmptyPlacement : RoutingError {
  using RoutingError::RoutingError;
};

constexpr double kRoutePitch = 0.1;  // um per grid cell
// Saturation ceiling for the proportional via rule (11x per via compounds).
constexpr uint64_t kCostSat = 1000000000000000ULL;

inline uint64_t sat_add(uint64_t a, uint64_t b) {
  return a > kCostSat - b ? kCostSat : a + b;
}

// Clearance policy in effect for one routing run. The two clearances are
// fractions of the EM device spacing: full device-to-device separation at the
// wire level would be geometrically impossible next to device pins.
struct SpacingPolicy {
  double s_dev_um = 1.0;   // route-to-foreign-device clearance
  double s_same_um = 0.5;  // inter-net same-layer clearance
  double width_um = 0.5;   // route width
  ViaCostMode via_mode = ViaCostMode::Proportional;
  double via_fixed_um = 5.0;

  static SpacingPolicy derive(const TechRules& t, double f_ghz) {
    double s = min_spacing(f_ghz, t.em);
    return {t.route.dev_scale * s, t.route.net_scale * s, t.route.width_um, t.route.via_mode,
            t.route.via_fixed_cost_um};
  }

  // Cell centers within this L-inf distance of a device bbox are blocked.
  // The half-width and half-pitch terms make the discrete halo a superset of
  // the exact Euclidean clearance the checker enforces.
  double dev_halo_um() const { return s_dev_um + width_um / 2.0 + kRoutePitch / 2.0; }
  // Cell centers within this L-inf distance of a committed centerline are
  // blocked for other nets.
  double net_halo_um() const { return s_same_um + width_um + kRoutePitch / 2.0; }

  uint64_t via_fixed_units() const {
    return static_cast<uint64_t>(llround(via_fixed_um / kRoutePitch));
  }
};

struct GridIndex {
  int x = 0, y = 0, layer = 0;
};
inline bool operator==(const GridIndex& a, const GridIndex& b) {
  return a.x == b.x && a.y == b.y && a.layer == b.layer;
}
inline bool operator!=(const GridIndex& a, const GridIndex& b) { return !(a == b); }

struct RoutePath {
  std::string net;
  int net_id = -1;
  double width_um = 0.5;
  std::vector<GridIndex> points;  // unit-step cells; layer change = via
  uint64_t cost_units = 0;
};

// Maximal straight single-layer run of a path (via points split runs).
struct Run {
  int layer = 0;
  int x1 = 0, y1 = 0, x2 = 0, y2 = 0;  // cell coords, unordered
};

inline std::vector<Run> path_runs(const RoutePath& p) {
  std::vector<Run> runs;
  if (p.points.empty()) return runs;
  Run cur{p.points[0].layer, p.points[0].x, p.points[0].y, p.points[0].x, p.points[0].y};
  int dx = 0, dy = 0;
  for (size_t i = 1; i < p.points.size(); ++i) {
    const GridIndex& a = p.points[i - 1];
    const GridIndex& b = p.points[i];
    if (b.layer != a.layer) {  // via: close run, start new on other layer
      runs.push_back(cur);
      cur = {b.layer, b.x, b.y, b.x, b.y};
      dx = dy = 0;
      continue;
    }
    int sx = b.x - a.x, sy = b.y - a.y;
    if ((dx != 0 || dy != 0) && (sx != dx || sy != dy)) {  // corner
      runs.push_back(cur);
      cur = {a.layer, a.x, a.y, a.x, a.y};
    }
    dx = sx;
    dy = sy;
    cur.x2 = b.x;
    cur.y2 = b.y;
  }
  runs.push_back(cur);
  return runs;
}

// ---------------------------------------------------------------------------
// Routing grid: shared device plane + per-layer committed-route halos, with
// per-pin corridor carve-outs through the owning device's halo.
// ---------------------------------------------------------------------------

class RoutingGrid {
 public:
  double xmin = 0, ymin = 0;       // world um of cell (0,0)
  int nx = 0, ny = 0, nlayers = 3;
  std::vector<std::string> layer_names{"M1", "QA", "QB"};

  std::vector<uint8_t> dev_block;    // nx*ny, all layers
  std::vector<int16_t> halo_net;     // nlayers*nx*ny, -1 = none
  std::vector<uint8_t> halo_multi;   // nlayers*nx*ny, >=2 distinct nets
  std::vector<int16_t> wire_net;     // nlayers*nx*ny, committed centerline cells
  std::unordered_map<uint64_t, std::vector<int16_t>> corridors;  // (x,y) -> allowed nets

  void init(double xmin_um, double ymin_um, int nx_, int ny_, int nlayers_ = 3) {
    xmin = snap(xmin_um);
    ymin = snap(ymin_um);
    nx = nx_;
    ny = ny_;
    nlayers = nlayers_;
    dev_block.assign(static_cast<size_t>(nx) * ny, 0);
    halo_net.assign(static_cast<size_t>(nlayers) * nx * ny, -1);
    halo_multi.assign(static_cast<size_t>(nlayers) * nx * ny, 0);
    wire_net.assign(static_cast<size_t>(nlayers) * nx * ny, -1);
    corridors.clear();
  }

  static double snap(double um) { return std::round(um / kRoutePitch) * kRoutePitch; }

  bool in_bounds(int x, int y, int l) const {
    return x >= 0 && x < nx && y >= 0 && y < ny && l >= 0 && l < nlayers;
  }
  size_t cell(int x, int y) const { return static_cast<size_t>(y) * nx + x; }
  size_t lcell(int l, int x, int y) const {
    return (static_cast<size_t>(l) * ny + y) * static_cast<size_t>(nx) + x;
  }
  static uint64_t xykey(int x, int y) {
    return (static_cast<uint64_t>(static_cast<uint32_t>(y)) << 22) |
           static_cast<uint32_t>(x);
  }

  double wx(int x) const { return xmin + x * kRoutePitch; }
  double wy(int y) const { return ymin + y * kRoutePitch; }
  int ix(double x_um) const { return static_cast<int>(llround((x_um - xmin) / kRoutePitch)); }
  int iy(double y_um) const { return static_cast<int>(llround((y_um - ymin) / kRoutePitch)); }

  // Cell range covering centers inside [a, b] (world um) on the x axis.
  int lo_cell_x(double a) const {
    return static_cast<int>(std::ceil((a - xmin) / kRoutePitch - 1e-9));
  }
  int hi_cell_x(double b) const {
    return static_cast<int>(std::floor((b - xmin) / kRoutePitch + 1e-9));
  }
  int lo_cell_y(double a) const {
    return static_cast<int>(std::ceil((a - ymin) / kRoutePitch - 1e-9));
  }
  int hi_cell_y(double b) const {
    return static_cast<int>(std::floor((b - ymin) / kRoutePitch + 1e-9));
  }

  int layer_index(const std::string& name) const {
    for (size_t i = 0; i < layer_names.size(); ++i)
      if (layer_names[i] == name) return static_cast<int>(i);
    throw RoutingError("'" + name + "' is not a routing layer");
  }

  // A committed wire cell is hard-blocked for every other net (a short).
  // Committed-route halos are soft: they block foreign nets except inside
  // that net's own pin-access corridor, where clearance to the pins of a
  // device smaller than the clearance itself is geometrically impossible.
  bool blocked_for(int16_t net, int x, int y, int l) const {
    if (!in_bounds(x, y, l)) return true;
    size_t c = cell(x, y);
    bool corridor_ok = false;
    auto it = corridors.find(xykey(x, y));
    if (it != corridors.end())
      for (int16_t n : it->second)
        if (n == net) {
          corridor_ok = true;
          break;
        }
    if (dev_block[c] && !corridor_ok) return true;
    size_t lc = lcell(l, x, y);
    int16_t wn = wire_net[lc];
    if (wn != -1 && wn != net) return true;
    if (corridor_ok) return false;
    if (halo_multi[lc]) return true;
    int16_t hn = halo_net[lc];
    return hn != -1 && hn != net;
  }

  // Marks the committed-route halo of one path for its net, and its exact
  // centerline cells as hard wire occupancy.
  void commit(const RoutePath& p, const SpacingPolicy& policy) {
    const int r = static_cast<int>(std::floor(policy.net_halo_um() / kRoutePitch + 1e-9));
    for (const Run& run : path_runs(p)) {
      int x1 = std::max(0, std::min(run.x1, run.x2) - r);
      int x2 = std::min(nx - 1, std::max(run.x1, run.x2) + r);
      int y1 = std::max(0, std::min(run.y1, run.y2) - r);
      int y2 = std::min(ny - 1, std::max(run.y1, run.y2) + r);
      for (int y = y1; y <= y2; ++y)
        for (int x = x1; x <= x2; ++x) {
          size_t lc = lcell(run.layer, x, y);
          if (halo_net[lc] == -1) halo_net[lc] = static_cast<int16_t>(p.net_id);
          else if (halo_net[lc] != p.net_id) halo_multi[lc] = 1;
        }
      for (int y = std::min(run.y1, run.y2); y <= std::max(run.y1, run.y2); ++y)
        for (int x = std::min(run.x1, run.x2); x <= std::max(run.x1, run.x2); ++x)
          wire_net[lcell(run.layer, x, y)] = static_cast<int16_t>(p.net_id);
    }
  }
};

// Builds the grid for a placement: device bboxes dilated by the device halo
// block every layer, except corridor lanes carved along each pin's escape
// directions (only through the pin's own device halo, never a foreign one).
inline RoutingGrid build_grid(const std::vector<DeviceFootprint>& fps, const Placement& pl,
                              const std::vector<std::vector<int16_t>>& pin_nets,
                              const SpacingPolicy& policy) {
  if (fps.empty()) throw EmptyPlacement("cannot build a routing grid without devices");
  RoutingGrid g;
  Rect extent = placed_bbox(fps[0], pl.at[0]);
  for (size_t i = 1; i < fps.size(); ++i)
    extent = bounding_box(extent, placed_bbox(fps[i], pl.at[i]));
  const double margin =
      std::max(20.0 * kRoutePitch, policy.s_dev_um + policy.s_same_um + 1.0);
  extent = extent.inflated(margin);
  int nx = static_cast<int>(std::ceil(extent.width() / kRoutePitch)) + 1;
  int ny = static_cast<int>(std::ceil(extent.height() / kRoutePitch)) + 1;
  g.init(extent.x1, extent.y1, nx, ny);

  // Temporary per-cell attribution: how many device halos cover the cell and
  // which device, so corridors can be restricted to single-owner cells.
  std::vector<uint8_t> count(static_cast<size_t>(nx) * ny, 0);
  std::vector<int16_t> owner(static_cast<size_t>(nx) * ny, -1);
  const double halo = policy.dev_halo_um();
  for (size_t i = 0; i < fps.size(); ++i) {
    Rect r = placed_bbox(fps[i], pl.at[i]).inflated(halo);
    int x1 = std::max(0, g.lo_cell_x(r.x1)), x2 = std::min(nx - 1, g.hi_cell_x(r.x2));
    int y1 = std::max(0, g.lo_cell_y(r.y1)), y2 = std::min(ny - 1, g.hi_cell_y(r.y2));
    for (int y = y1; y <= y2; ++y)
      for (int x = x1; x <= x2; ++x) {
        size_t c = g.cell(x, y);
        if (count[c] < 255) ++count[c];
        owner[c] = static_cast<int16_t>(i);
      }
  }
  for (size_t c = 0; c < count.size(); ++c) g.dev_block[c] = count[c] > 0;

  const double hw = (policy.width_um + policy.s_same_um) / 2.0;  // corridor half-width
  for (size_t i = 0; i < fps.size(); ++i) {
    Rect halo_rect = placed_bbox(fps[i], pl.at[i]).inflated(halo);
    for (size_t pi = 0; pi < fps[i].pins.size(); ++pi) {
      int16_t net = pin_nets[i][pi];
      if (net < 0) continue;
      Point pin = world_pin(fps[i], pl.at[i], pi);
      EscapeDirs dirs = rotate_dirs(fps[i].pins[pi].dirs, pl.at[i].theta);
      // Lanes are carved in cell space anchored at the pin's grid node -- the
      // same nearest-cell node pin_escape starts from -- so an off-pitch pin
      // coordinate cannot round the node out of its own corridor.
      const int px = g.ix(pin.x), py = g.iy(pin.y);
      const int cx1 = std::min(px, g.lo_cell_x(pin.x - hw));
      const int cx2 = std::max(px, g.hi_cell_x(pin.x + hw));
      const int cy1 = std::min(py, g.lo_cell_y(pin.y - hw));
      const int cy2 = std::max(py, g.hi_cell_y(pin.y + hw));
      struct Lane {
        bool on;
        int x1, y1, x2, y2;
      };
      const int ext = 1;  // one cell beyond the halo edge
      const Lane lanes[4] = {
          {dirs.right(), px, cy1, g.hi_cell_x(halo_rect.x2) + ext, cy2},
          {dirs.left(), g.lo_cell_x(halo_rect.x1) - ext, cy1, px, cy2},
          {dirs.up(), cx1, py, cx2, g.hi_cell_y(halo_rect.y2) + ext},
          {dirs.down(), cx1, g.lo_cell_y(halo_rect.y1) - ext, cx2, py},
      };
      for (const Lane& lane : lanes) {
        if (!lane.on) continue;
        int x1 = std::max(0, lane.x1), x2 = std::min(nx - 1, lane.x2);
        int y1 = std::max(0, lane.y1), y2 = std::min(ny - 1, lane.y2);
        for (int y = y1; y <= y2; ++y)
          for (int x = x1; x <= x2; ++x) {
            size_t c = g.cell(x, y);
            if (!g.dev_block[c]) continue;
            if (count[c] != 1 || owner[c] != static_cast<int16_t>(i)) continue;
            auto& nets = g.corridors[RoutingGrid::xykey(x, y)];
            if (std::find(nets.begin(), nets.end(), net) == nets.end()) nets.push_back(net);
          }
      }
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// A* on the grid. Integer cost units of one pitch: in-plane step = 1; a via
// either multiplies (g' = g + 10*g, the proportional rule) or adds a fixed
// charge. h = in-plane Manhattan distance, admissible and consistent under
// both via rules, so the first pop of the goal is optimal. The goal test is
// exact node identity (coordinates and layer).
// ---------------------------------------------------------------------------

inline uint64_t via_cost(uint64_t g, const SpacingPolicy& policy) {
  if (policy.via_mode == ViaCostMode::Fixed) return sat_add(g, policy.via_fixed_units());
  uint64_t extra = g > kCostSat / 10 ? kCostSat : 10 * g;
  return sat_add(g, extra);
}

namespace detail {

struct OpenEntry {
  uint64_t f;
  uint64_t seq;
  uint64_t key;
  bool operator<(const OpenEntry& o) const {  // inverted for min-heap
    if (f != o.f) return f > o.f;
    return seq > o.seq;
  }
};

struct NodeRec {
  uint64_t g = 0;
  uint64_t parent = UINT64_MAX;
  bool closed = false;
};

inline uint64_t node_key(const GridIndex& n) {
  return (static_cast<uint64_t>(static_cast<uint32_t>(n.layer)) << 44) |
         (static_cast<uint64_t>(static_cast<uint32_t>(n.y)) << 22) |
         static_cast<uint32_t>(n.x);
}
inline GridIndex key_node(uint64_t k) {
  return {static_cast<int>(k & 0x3FFFFF), static_cast<int>((k >> 22) & 0x3FFFFF),
          static_cast<int>(k >> 44)};
}

}  // namespace detail

constexpr uint64_t kAstarExpansionCap = 50000000;  // safety valve, not a tuning knob

inline RoutePath astar_route(const RoutingGrid& grid, const GridIndex& s, const GridIndex& t,
                             int16_t net, const SpacingPolicy& policy,
                             const std::string& net_name = "") {
  RoutePath out;
  out.net = net_name;
  out.net_id = net;
  out.width_um = policy.width_um;
  if (s == t) return out;  // empty path, cost 0

  if (grid.blocked_for(net, s.x, s.y, s.layer))
    throw Unroutable("net '" + net_name + "': start node is blocked");
  if (grid.blocked_for(net, t.x, t.y, t.layer))
    throw Unroutable("net '" + net_name + "': target node is blocked");

  auto h = [&](uint64_t key) -> uint64_t {
    GridIndex n = detail::key_node(key);
    return static_cast<uint64_t>(std::abs(n.x - t.x)) +
           static_cast<uint64_t>(std::abs(n.y - t.y));
  };

  std::unordered_map<uint64_t, detail::NodeRec> rec;
  rec.reserve(1 << 16);
  std::priority_queue<detail::OpenEntry> open;
  const uint64_t skey = detail::node_key(s), tkey = detail::node_key(t);
  rec[skey] = {0, UINT64_MAX, false};
  uint64_t seq = 0;
  open.push({h(skey), seq++, skey});
  uint64_t expanded = 0;

  while (!open.empty()) {
    uint64_t key = open.top().key;
    open.pop();
    detail::NodeRec& r = rec[key];
    if (r.closed) continue;
    r.closed = true;
    if (key == tkey) {  // reconstruct
      std::vector<GridIndex> pts;
      for (uint64_t k = key; k != UINT64_MAX; k = rec[k].parent)
        pts.push_back(detail::key_node(k));
      std::reverse(pts.begin(), pts.end());
      out.points = std::move(pts);
      out.cost_units = r.g;
      return out;
    }
    if (++expanded > kAstarExpansionCap)
      throw Unroutable("net '" + net_name + "': search exceeded the expansion cap");

    GridIndex n = detail::key_node(key);
    const uint64_t g = r.g;
    auto consider = [&](int x, int y, int l, uint64_t g_new) {
      if (grid.blocked_for(net, x, y, l)) return;
      uint64_t k2 = detail::node_key({x, y, l});
      auto it = rec.find(k2);
      if (it != rec.end() && (it->second.closed || it->second.g <= g_new)) return;
      rec[k2] = {g_new, key, false};
      open.push({sat_add(g_new, h(k2)), seq++, k2});
    };
    // Direction order fixed for determinism: R, L, U, D, then vias by layer.
    consider(n.x + 1, n.y, n.layer, sat_add(g, 1));
    consider(n.x - 1, n.y, n.layer, sat_add(g, 1));
    consider(n.x, n.y + 1, n.layer, sat_add(g, 1));
    consider(n.x, n.y - 1, n.layer, sat_add(g, 1));
    for (int l = 0; l < grid.nlayers; ++l)
      if (l != n.layer) consider(n.x, n.y, l, via_cost(g, policy));
  }
  throw Unroutable("net '" + net_name + "': no route exists");
}

// ---------------------------------------------------------------------------
// MST over escape nodes, Manhattan in the routing plane.
// ---------------------------------------------------------------------------

struct MstEdge {
  int a = 0, b = 0;
  long long len = 0;
};

inline std::vector<MstEdge> mst(const std::vector<GridIndex>& pins) {
  std::vector<MstEdge> edges;
  const int n = static_cast<int>(pins.size());
  if (n <= 1) return edges;
  std::vector<MstEdge> all;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      all.push_back({i, j,
                     std::abs(static_cast<long long>(pins[i].x) - pins[j].x) +
                         std::abs(static_cast<long long>(pins[i].y) - pins[j].y)});
  std::sort(all.begin(), all.end(), [](const MstEdge& a, const MstEdge& b) {
    if (a.len != b.len) return a.len < b.len;
    if (a.a != b.a) return a.a < b.a;
    return a.b < b.b;
  });
  std::vector<int> uf(n);
  for (int i = 0; i < n; ++i) uf[i] = i;
  auto find = [&](int x) {
    while (uf[x] != x) x = uf[x] = uf[uf[x]];
    return x;
  };
  for (const MstEdge& e : all) {
    int ra = find(e.a), rb = find(e.b);
    if (ra == rb) continue;
    uf[ra] = rb;
    edges.push_back(e);
    if (static_cast<int>(edges.size()) == n - 1) break;
  }
  return edges;
}

// ---------------------------------------------------------------------------
// Pin escape: phase 1 tries straight stubs along the pin's allowed directions
// and keeps the one with the longest clear run; phase 2 doglegs sideways
// within the corridor, then out. The stub ends one cell beyond the device
// halo; that end is the net's escape node.
// ---------------------------------------------------------------------------

struct Escape {
  RoutePath stub;      // pin cell .. escape cell (possibly single point)
  GridIndex node;      // escape node
};

inline Escape pin_escape(const RoutingGrid& grid, const DeviceFootprint& fp,
                         const DevicePlace& place, size_t pin_idx, int16_t net,
                         const SpacingPolicy& policy, const std::string& net_name = "") {
  const Point pin = world_pin(fp, place, pin_idx);
  const EscapeDirs dirs = rotate_dirs(fp.pins[pin_idx].dirs, place.theta);
  const int layer = grid.layer_index(fp.pins[pin_idx].layer);
  const GridIndex p{grid.ix(pin.x), grid.iy(pin.y), layer};
  const Rect halo = placed_bbox(fp, place).inflated(policy.dev_halo_um());

  struct Dir {
    bool on;
    int dx, dy;
    int exit;  // cell count from p to one past the halo edge
  };
  const Dir cand[4] = {
      {dirs.right(), 1, 0, grid.hi_cell_x(halo.x2) + 1 - p.x},
      {dirs.left(), -1, 0, p.x - (grid.lo_cell_x(halo.x1) - 1)},
      {dirs.up(), 0, 1, grid.hi_cell_y(halo.y2) + 1 - p.y},
      {dirs.down(), 0, -1, p.y - (grid.lo_cell_y(halo.y1) - 1)},
  };

  auto make_path = [&](const std::vector<GridIndex>& pts) {
    RoutePath path;
    path.net = net_name;
    path.net_id = net;
    path.width_um = policy.width_um;
    path.points = pts;
    path.cost_units = pts.empty() ? 0 : pts.size() - 1;
    return path;
  };

  if (grid.blocked_for(net, p.x, p.y, p.layer))
    throw EscapeFailure("pin '" + fp.pins[pin_idx].name + "' of '" + fp.id +
                        "' sits on a blocked cell");

  // Phase 1: straight escape along the clearest direction.
  int best = -1;
  long long best_free = -1;
  for (int d = 0; d < 4; ++d) {
    if (!cand[d].on || cand[d].exit <= 0) continue;
    bool feasible = true;
    long long free_run = 0;
    const int look = cand[d].exit + static_cast<int>(policy.s_same_um / kRoutePitch) + 10;
    for (int k = 1; k <= look; ++k) {
      int x = p.x + cand[d].dx * k, y = p.y + cand[d].dy * k;
      if (grid.blocked_for(net, x, y, layer)) {
        if (k <= cand[d].exit) feasible = false;
        break;
      }
      free_run = k;
    }
    if (feasible && free_run > best_free) {
      best_free = free_run;
      best = d;
    }
  }
  if (best >= 0) {
    std::vector<GridIndex> pts;
    for (int k = 0; k <= cand[best].exit; ++k)
      pts.push_back({p.x + cand[best].dx * k, p.y + cand[best].dy * k, layer});
    return {make_path(pts), pts.back()};
  }

  // Phase 2: dogleg — step sideways within the corridor, then out.
  const int max_off = std::max(1, static_cast<int>(std::floor(
                                      (policy.width_um + policy.s_same_um) / 2.0 / kRoutePitch)));
  for (int d = 0; d < 4; ++d) {
    if (!cand[d].on || cand[d].exit <= 0) continue;
    const int ox = cand[d].dy != 0 ? 1 : 0;  // orthogonal axis
    const int oy = cand[d].dx != 0 ? 1 : 0;
    for (int side : {1, -1}) {
      for (int off = 1; off <= max_off; ++off) {
        std::vector<GridIndex> pts{p};
        bool ok = true;
        for (int k = 1; k <= off && ok; ++k) {
          GridIndex q{p.x + side * ox * k, p.y + side * oy * k, layer};
          if (grid.blocked_for(net, q.x, q.y, layer)) ok = false;
          else pts.push_back(q);
        }
        for (int k = 1; k <= cand[d].exit && ok; ++k) {
          GridIndex q{p.x + side * ox * off + cand[d].dx * k,
                      p.y + side * oy * off + cand[d].dy * k, layer};
          if (grid.blocked_for(net, q.x, q.y, layer)) ok = false;
          else pts.push_back(q);
        }
        if (ok) return {make_path(pts), pts.back()};
      }
    }
  }
  throw EscapeFailure("pin '" + fp.pins[pin_idx].name + "' of '" + fp.id +
                      "' has no clear escape in any allowed direction");
}

// ---------------------------------------------------------------------------
// Net routing and the full-design driver.
// ---------------------------------------------------------------------------

struct UnroutedNet {
  std::string net;
  std::string reason;
};

struct SpacingViolation {
  std::string kind;  // "device" or "net"
  std::string a, b;
  double gap_um = 0, required_um = 0;
};

struct RoutedDesign {
  std::vector<RoutePath> paths;  // stubs and MST segments, commit order
  std::vector<UnroutedNet> unrouted;
  std::vector<SpacingViolation> violations;
};

// Routes one net whose pins have already escaped; commits each segment's halo
// before routing the next so later segments keep inter-net spacing. Escape
// stubs must already be committed by the caller.
inline std::vector<RoutePath> route_net(RoutingGrid& grid, const std::vector<GridIndex>& escapes,
                                        int16_t net, const SpacingPolicy& policy,
                                        const std::string& net_name = "") {
  std::vector<RoutePath> out;
  for (const MstEdge& e : mst(escapes)) {
    RoutePath p = astar_route(grid, escapes[e.a], escapes[e.b], net, policy, net_name);
    if (!p.points.empty()) {
      grid.commit(p, policy);
      out.push_back(std::move(p));
    }
  }
  return out;
}

// World-space rectangles of a path (segment body, half-width each side).
inline std::vector<std::pair<int, Rect>> path_rects(const RoutingGrid& grid, const RoutePath& p) {
  std::vector<std::pair<int, Rect>> out;
  const double hw = p.width_um / 2.0;
  for (const Run& r : path_runs(p)) {
    double x1 = grid.wx(std::min(r.x1, r.x2)) - hw, x2 = grid.wx(std::max(r.x1, r.x2)) + hw;
    double y1 = grid.wy(std::min(r.y1, r.y2)) - hw, y2 = grid.wy(std::max(r.y1, r.y2)) + hw;
    out.push_back({r.layer, Rect(x1, y1, x2, y2)});
  }
  return out;
}

// Exact-geometry audit, independent of the grid: every (segment, device) pair
// needs s_dev clearance unless the segment's net pins onto that device; every
// same-layer pair of different-net segments needs s_same, except pin access --
// two nets terminating on one shared device may both enter that device's halo
// region, where a device smaller than the clearance makes s_same unsatisfiable.
inline std::vector<SpacingViolation> check_spacing(const RoutedDesign& design,
                                                   const RoutingGrid& grid,
                                                   const std::vector<DeviceFootprint>& fps,
                                                   const Placement& pl,
                                                   const std::vector<std::vector<int16_t>>& pin_nets,
                                                   const SpacingPolicy& policy) {
  std::vector<SpacingViolation> out;
  struct Seg {
    int layer;
    Rect r;
    int16_t net;
    const std::string* name;
  };
  std::vector<Seg> segs;
  for (const RoutePath& p : design.paths)
    for (const auto& [layer, rect] : path_rects(grid, p))
      segs.push_back({layer, rect, static_cast<int16_t>(p.net_id), &p.net});

  const double eps = 1e-9;
  auto pins_net = [&](size_t dev, int16_t net) {
    for (int16_t n : pin_nets[dev])
      if (n == net) return true;
    return false;
  };
  for (size_t i = 0; i < fps.size(); ++i) {
    Rect dev = placed_bbox(fps[i], pl.at[i]);
    for (const Seg& s : segs) {
      if (pins_net(i, s.net)) continue;
      double gap = rect_gap(s.r, dev);
      if (gap < policy.s_dev_um - eps)
        out.push_back({"device", *s.name, fps[i].id, gap, policy.s_dev_um});
    }
  }
  std::vector<Rect> access;  // pin-access region per device
  for (size_t i = 0; i < fps.size(); ++i)
    access.push_back(
        placed_bbox(fps[i], pl.at[i]).inflated(policy.dev_halo_um() + policy.width_um));
  auto shared_access = [&](const Seg& a, const Seg& b) {
    for (size_t d = 0; d < fps.size(); ++d)
      if (pins_net(d, a.net) && pins_net(d, b.net) && rects_overlap(a.r, access[d]) &&
          rects_overlap(b.r, access[d]))
        return true;
    return false;
  };
  for (size_t i = 0; i < segs.size(); ++i)
    for (size_t j = i + 1; j < segs.size(); ++j) {
      if (segs[i].layer != segs[j].layer || segs[i].net == segs[j].net) continue;
      double gap = rect_gap(segs[i].r, segs[j].r);
      if (gap < policy.s_same_um - eps && !shared_access(segs[i], segs[j]))
        out.push_back({"net", *segs[i].name, *segs[j].name, gap, policy.s_same_um});
    }
  return out;
}

// Pin-to-net binding per footprint: pin i of device d carries the net id of
// terminal i of the matching netlist component (-1 when unbound).
inline std::vector<std::vector<int16_t>> bind_pin_nets(const std::vector<DeviceFootprint>& fps,
                                                       const Netlist& nl,
                                                       std::vector<std::string>* net_names_out =
                                                           nullptr) {
  std::unordered_map<std::string, int16_t> net_id;
  std::vector<std::string> names;
  for (const auto& n : nl.nets) {
    net_id[n.name] = static_cast<int16_t>(names.size());
    names.push_back(n.name);
  }
  std::vector<std::vector<int16_t>> out(fps.size());
  for (size_t i = 0; i < fps.size(); ++i) {
    const ComponentInstance* c = nl.find_component(fps[i].id);
    out[i].assign(fps[i].pins.size(), -1);
    if (!c) continue;
    for (size_t t = 0; t < fps[i].pins.size() && t < c->terminals.size(); ++t) {
      auto it = net_id.find(c->terminals[t]);
      if (it != net_id.end()) out[i][t] = it->second;
    }
  }
  if (net_names_out) *net_names_out = std::move(names);
  return out;
}

struct RouteAllResult {
  RoutedDesign design;
  RoutingGrid grid;
};

// Full-design driver: nets in descending (weight, pin count, name) order; each
// committed stub and segment becomes an obstacle for everything after it.
inline RouteAllResult route_all(const Netlist& nl, const std::vector<DeviceFootprint>& fps,
                                const Placement& pl, const SpacingPolicy& policy) {
  RouteAllResult res;
  if (fps.empty()) return res;
  std::vector<std::string> net_names;
  auto pin_nets = bind_pin_nets(fps, nl, &net_names);
  res.grid = build_grid(fps, pl, pin_nets, policy);
  RoutingGrid& grid = res.grid;

  struct PinRef {
    int dev;
    int pin;
  };
  std::vector<std::vector<PinRef>> net_pins(net_names.size());
  for (size_t i = 0; i < fps.size(); ++i)
    for (size_t t = 0; t < pin_nets[i].size(); ++t)
      if (pin_nets[i][t] >= 0) net_pins[pin_nets[i][t]].push_back({(int)i, (int)t});

  std::vector<int> order;
  for (size_t n = 0; n < net_names.size(); ++n)
    if (net_pins[n].size() >= 2) order.push_back(static_cast<int>(n));
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    double wa = nl.nets[a].weight, wb = nl.nets[b].weight;
    if (wa != wb) return wa > wb;
    if (net_pins[a].size() != net_pins[b].size()) return net_pins[a].size() > net_pins[b].size();
    return net_names[a] < net_names[b];
  });

  // Phase A: escape every pin of every net before any segment routing, so a
  // pin's only access can never be smothered by an earlier net's route halo.
  // Stubs are short (one device halo) and devices sit >= one EM spacing
  // apart, so stub-vs-stub conflicts cannot occur across devices.
  std::vector<std::vector<GridIndex>> escapes(net_names.size());
  std::vector<bool> esc_failed(net_names.size(), false);
  for (int n : order) {
    try {
      std::vector<Escape> es;
      for (const PinRef& pr : net_pins[n])
        es.push_back(pin_escape(grid, fps[pr.dev], pl.at[pr.dev], pr.pin,
                                static_cast<int16_t>(n), policy, net_names[n]));
      for (Escape& e : es) {
        grid.commit(e.stub, policy);
        escapes[n].push_back(e.node);
        res.design.paths.push_back(std::move(e.stub));
      }
    } catch (const RoutingError& err) {
      esc_failed[n] = true;
      res.design.unrouted.push_back({net_names[n], err.what()});
    }
  }

  // Phase B: MST segments in priority order; each committed segment is an
  // obstacle for everything after it.
  for (int n : order) {
    if (esc_failed[n]) continue;
    try {
      for (auto& p : route_net(grid, escapes[n], static_cast<int16_t>(n), policy, net_names[n]))
        res.design.paths.push_back(std::move(p));
    } catch (const RoutingError& err) {
      res.design.unrouted.push_back({net_names[n], err.what()});
    }
  }
  res.design.violations = check_spacing(res.design, grid, fps, pl, pin_nets, policy);
  return res;
}

// CSV dump: net, layer, x0, y0, x1, y1, width (world um, one line per run).
inline std::string routes_csv(const RoutingGrid& grid, const RoutedDesign& d) {
  std::string out = "net,layer,x0,y0,x1,y1,width\n";
  for (const RoutePath& p : d.paths)
    for (const Run& r : path_runs(p)) {
      out += p.net + "," + grid.layer_names[r.layer] + "," +
             detail::format_number(grid.wx(r.x1)) + "," + detail::format_number(grid.wy(r.y1)) +
             "," + detail::format_number(grid.wx(r.x2)) + "," +
             detail::format_number(grid.wy(r.y2)) + "," + detail::format_number(p.width_um) +
             "\n";
    }
  return out;
}

}  // namespace rfsynth
