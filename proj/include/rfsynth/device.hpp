#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "rfsynth/geometry.hpp"
#include "rfsynth/netlist.hpp"

namespace rfsynth {

// Preferred escape directions for a pin, in the cell's local frame.
struct EscapeDirs {
  uint8_t mask = 0;  // bit 0=Left, 1=Right, 2=Up, 3=Down

  static constexpr uint8_t kLeft = 1, kRight = 2, kUp = 4, kDown = 8;
  static EscapeDirs all() { return {kLeft | kRight | kUp | kDown}; }
  static EscapeDirs of(uint8_t m) { return {m}; }
  bool left() const { return mask & kLeft; }
  bool right() const { return mask & kRight; }
  bool up() const { return mask & kUp; }
  bool down() const { return mask & kDown; }
  bool empty() const { return mask == 0; }
};

// Rotates an escape set together with its cell (counter-clockwise).
inline EscapeDirs rotate_dirs(EscapeDirs d, Rotation r) {
  auto rot1 = [](uint8_t m) {  // 90 deg ccw: R->U, U->L, L->D, D->R
    uint8_t out = 0;
    if (m & EscapeDirs::kRight) out |= EscapeDirs::kUp;
    if (m & EscapeDirs::kUp) out |= EscapeDirs::kLeft;
    if (m & EscapeDirs::kLeft) out |= EscapeDirs::kDown;
    if (m & EscapeDirs::kDown) out |= EscapeDirs::kRight;
    return out;
  };
  int turns = rotation_degrees(r) / 90;
  for (int i = 0; i < turns; ++i) d.mask = rot1(d.mask);
  return d;
}

struct PinShape {
  std::string name;
  Point offset;       // in the cell frame, bbox lower-left at (0,0)
  std::string layer;  // symbolic layer name; resolved by the layer map
  EscapeDirs dirs = EscapeDirs::all();
};

// Layer-tagged rectangles plus pins, in a local frame whose bounding box has
// its lower-left corner at the origin.
struct CellGeometry {
  std::vector<std::pair<std::string, Rect>> rects;
  std::vector<PinShape> pins;

  Rect bbox() const {
    if (rects.empty()) return Rect();
    Rect b = rects[0].second;
    for (size_t i = 1; i < rects.size(); ++i) b = bounding_box(b, rects[i].second);
    return b;
  }
};

// Placement-facing abstraction of a device: bounding box + pins. Pins appear
// in component terminal order, so pin i binds to terminals[i] of the instance.
struct DeviceFootprint {
  std::string id;
  ComponentKind kind = ComponentKind::Resistor;
  double w = 0.0, h = 0.0;
  std::vector<PinShape> pins;
};

struct FootprintError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline DeviceFootprint footprint_from_geometry(const std::string& id, ComponentKind kind,
                                               const CellGeometry& g) {
  Rect b = g.bbox();
  if (b.width() <= 0.0 || b.height() <= 0.0)
    throw FootprintError("footprint '" + id + "' has a degenerate bounding box");
  DeviceFootprint f;
  f.id = id;
  f.kind = kind;
  f.w = b.width();
  f.h = b.height();
  for (const auto& p : g.pins) {
    PinShape q = p;
    q.offset = {p.offset.x - b.x1, p.offset.y - b.y1};
    if (q.offset.x < -1e-9 || q.offset.x > f.w + 1e-9 || q.offset.y < -1e-9 ||
        q.offset.y > f.h + 1e-9)
      throw FootprintError("pin '" + p.name + "' of '" + id + "' lies outside the bounding box");
    f.pins.push_back(std::move(q));
  }
  return f;
}

// Transistors are simplified three-pin boxes: an outline plus gate/drain/source
// pins, with source/drain preferring vertical escapes.
inline CellGeometry nmos_geometry(double w_um = 10.0, double h_um = 8.0) {
  if (w_um <= 0 || h_um <= 0) throw FootprintError("nmos box dimensions must be positive");
  CellGeometry g;
  g.rects.push_back({"OUTLINE", Rect(0, 0, w_um, h_um)});
  g.pins.push_back({"G", {0.0, h_um / 2.0}, "M1", EscapeDirs::of(EscapeDirs::kLeft)});
  g.pins.push_back({"D", {w_um / 2.0, h_um}, "M1", EscapeDirs::of(EscapeDirs::kUp)});
  g.pins.push_back({"S", {w_um / 2.0, 0.0}, "M1", EscapeDirs::of(EscapeDirs::kDown)});
  return g;
}

}  // namespace rfsynth
