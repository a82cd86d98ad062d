#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <stdexcept>

namespace rfsynth {

struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct GeometryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Point {
  double x = 0.0;
  double y = 0.0;
};

inline bool operator==(const Point& a, const Point& b) { return a.x == b.x && a.y == b.y; }
inline Point operator+(const Point& a, const Point& b) { return {a.x + b.x, a.y + b.y}; }
inline Point operator-(const Point& a, const Point& b) { return {a.x - b.x, a.y - b.y}; }
inline std::ostream& operator<<(std::ostream& os, const Point& p) {
  return os << "(" << p.x << "," << p.y << ")";
}

inline double manhattan(const Point& a, const Point& b) {
  return std::abs(a.x - b.x) + std::abs(a.y - b.y);
}

// Axis-aligned rectangle kept in normalized form (x1 <= x2, y1 <= y2).
struct Rect {
  double x1 = 0.0, y1 = 0.0, x2 = 0.0, y2 = 0.0;

  Rect() = default;
  Rect(double ax1, double ay1, double ax2, double ay2)
      : x1(std::min(ax1, ax2)), y1(std::min(ay1, ay2)),
        x2(std::max(ax1, ax2)), y2(std::max(ay1, ay2)) {}

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
  Point center() const { return {(x1 + x2) / 2.0, (y1 + y2) / 2.0}; }
  bool contains(const Point& p) const {
    return p.x >= x1 && p.x <= x2 && p.y >= y1 && p.y <= y2;
  }
  bool contains_strict(const Point& p) const {
    return p.x > x1 && p.x < x2 && p.y > y1 && p.y < y2;
  }
  Rect inflated(double d) const { return Rect(x1 - d, y1 - d, x2 + d, y2 + d); }
  Rect translated(double dx, double dy) const { return Rect(x1 + dx, y1 + dy, x2 + dx, y2 + dy); }
};

inline bool operator==(const Rect& a, const Rect& b) {
  return a.x1 == b.x1 && a.y1 == b.y1 && a.x2 == b.x2 && a.y2 == b.y2;
}
inline std::ostream& operator<<(std::ostream& os, const Rect& r) {
  return os << "[" << r.x1 << "," << r.y1 << " .. " << r.x2 << "," << r.y2 << "]";
}

inline Rect bounding_box(const Rect& a, const Rect& b) {
  Rect r;
  r.x1 = std::min(a.x1, b.x1);
  r.y1 = std::min(a.y1, b.y1);
  r.x2 = std::max(a.x2, b.x2);
  r.y2 = std::max(a.y2, b.y2);
  return r;
}

// Area of intersection; 0 for disjoint or merely touching rectangles.
inline double overlap_area(const Rect& a, const Rect& b) {
  double w = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  double h = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (w <= 0.0 || h <= 0.0) return 0.0;
  return w * h;
}

inline bool rects_overlap(const Rect& a, const Rect& b) {
  return std::min(a.x2, b.x2) > std::max(a.x1, b.x1) &&
         std::min(a.y2, b.y2) > std::max(a.y1, b.y1);
}

// Euclidean edge-to-edge gap between two rectangles; 0 when they touch or overlap.
inline double rect_gap(const Rect& a, const Rect& b) {
  double dx = std::max({a.x1 - b.x2, b.x1 - a.x2, 0.0});
  double dy = std::max({a.y1 - b.y2, b.y1 - a.y2, 0.0});
  return std::hypot(dx, dy);
}

// Euclidean gap from a point to a rectangle edge; 0 when inside.
inline double point_rect_gap(const Point& p, const Rect& r) {
  double dx = std::max({r.x1 - p.x, p.x - r.x2, 0.0});
  double dy = std::max({r.y1 - p.y, p.y - r.y2, 0.0});
  return std::hypot(dx, dy);
}

enum class Rotation : int { R0 = 0, R90 = 90, R180 = 180, R270 = 270 };

inline int rotation_degrees(Rotation r) { return static_cast<int>(r); }

inline Rotation rotation_from_degrees(int deg) {
  switch (((deg % 360) + 360) % 360) {
    case 0: return Rotation::R0;
    case 90: return Rotation::R90;
    case 180: return Rotation::R180;
    case 270: return Rotation::R270;
    default: throw DomainError("rotation must be a multiple of 90 degrees");
  }
}

// Dimensions of a w x h bounding box after rotation.
inline void rotated_dims(double w, double h, Rotation r, double& rw, double& rh) {
  if (r == Rotation::R90 || r == Rotation::R270) {
    rw = h;
    rh = w;
  } else {
    rw = w;
    rh = h;
  }
}

// Maps a point given in the local frame of a w x h cell (origin at the cell's
// lower-left corner) into the frame of the rotated cell, re-anchored so the
// rotated bounding box again has its lower-left corner at the origin.
inline Point rotate_in_bbox(const Point& p, double w, double h, Rotation r) {
  switch (r) {
    case Rotation::R90: return {h - p.y, p.x};
    case Rotation::R180: return {w - p.x, h - p.y};
    case Rotation::R270: return {p.y, w - p.x};
    default: return p;
  }
}

}  // namespace rfsynth
