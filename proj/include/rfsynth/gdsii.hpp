#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "rfsynth/device.hpp"
#include "rfsynth/geometry.hpp"
#include "rfsynth/routing.hpp"
#include "rfsynth/tech.hpp"

namespace rfsynth {

struct GdsError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct CoordinateOverflow : GdsError {
  using GdsError::GdsError;
};

// Database unit: 1 nm. User unit: 1 um (so UNITS = 1e-3 user units per db
// unit, 1e-9 meters per db unit).
constexpr double kDbPerUm = 1000.0;
constexpr double kGdsUserUnits = 1e-3;
constexpr double kGdsMeters = 1e-9;

struct GdsPoint {
  int32_t x = 0, y = 0;
};
inline bool operator==(const GdsPoint& a, const GdsPoint& b) { return a.x == b.x && a.y == b.y; }

struct GdsBoundary {
  int16_t layer = 0, datatype = 0;
  std::vector<GdsPoint> pts;  // open form; the writer repeats the first point
};

struct GdsPath {
  int16_t layer = 0, datatype = 0;
  int32_t width = 0;
  std::vector<GdsPoint> pts;
};

struct GdsSref {
  std::string sname;
  GdsPoint origin;
  double angle_deg = 0;  // counterclockwise, multiples of 90 in this library
};

struct GdsStructure {
  std::string name;
  std::vector<GdsBoundary> boundaries;
  std::vector<GdsPath> paths;
  std::vector<GdsSref> srefs;
};

struct GdsLibrary {
  std::string name = "RFSYNTH";
  std::vector<GdsStructure> structures;  // file order; top conventionally last
};

inline int32_t to_db(double um) {
  double v = um * kDbPerUm;
  double r = std::round(v);
  if (r > 2147483647.0 || r < -2147483648.0)
    throw CoordinateOverflow("coordinate " + detail::format_number(um) +
                             " um exceeds the 32-bit database range");
  return static_cast<int32_t>(r);
}

// ---------------------------------------------------------------------------
// 8-byte excess-64 base-16 float. Sign bit, 7-bit exponent biased by 64,
// 56-bit mantissa in [1/16, 1). 1.0 encodes as 41 10 00 00 00 00 00 00.
// ---------------------------------------------------------------------------

inline void encode_real8(double v, uint8_t out[8]) {
  for (int i = 0; i < 8; ++i) out[i] = 0;
  if (v == 0.0) return;
  uint8_t sign = 0;
  if (v < 0) {
    sign = 0x80;
    v = -v;
  }
  int e = 64;
  while (v >= 1.0) {
    v /= 16.0;
    ++e;
  }
  while (v < 1.0 / 16.0) {
    v *= 16.0;
    --e;
  }
  uint64_t mant = static_cast<uint64_t>(std::llround(std::ldexp(v, 56)));
  if (mant >= (1ULL << 56)) {  // rounding pushed past the top
    mant >>= 4;
    ++e;
  }
  if (e < 0 || e > 127) throw GdsError("real8 exponent out of range");
  out[0] = sign | static_cast<uint8_t>(e);
  for (int i = 0; i < 7; ++i) out[1 + i] = static_cast<uint8_t>(mant >> (8 * (6 - i)));
}

inline double decode_real8(const uint8_t in[8]) {
  uint64_t mant = 0;
  for (int i = 0; i < 7; ++i) mant = (mant << 8) | in[1 + i];
  if (mant == 0) return 0.0;
  int e = in[0] & 0x7F;
  double v = std::ldexp(static_cast<double>(mant), -56) * std::pow(16.0, e - 64);
  return (in[0] & 0x80) ? -v : v;
}

// ---------------------------------------------------------------------------
// Record-level writer.
// ---------------------------------------------------------------------------

namespace gdsdetail {

enum RecordType : uint16_t {
  kHeader = 0x0002,
  kBgnLib = 0x0102,
  kLibName = 0x0206,
  kUnits = 0x0305,
  kEndLib = 0x0400,
  kBgnStr = 0x0502,
  kStrName = 0x0606,
  kEndStr = 0x0700,
  kBoundary = 0x0800,
  kPath = 0x0900,
  kSref = 0x0A00,
  kLayer = 0x0D02,
  kDatatype = 0x0E02,
  kWidth = 0x0F03,
  kXy = 0x1003,
  kEndEl = 0x1100,
  kSname = 0x1206,
  kStrans = 0x1A01,
  kAngle = 0x1B05,
};

inline void record(std::vector<uint8_t>& out, uint16_t rtype, const std::vector<uint8_t>& payload) {
  size_t len = 4 + payload.size();
  if (len > 65534) throw GdsError("record exceeds the 16-bit length limit");
  out.push_back(static_cast<uint8_t>(len >> 8));
  out.push_back(static_cast<uint8_t>(len & 0xFF));
  out.push_back(static_cast<uint8_t>(rtype >> 8));
  out.push_back(static_cast<uint8_t>(rtype & 0xFF));
  out.insert(out.end(), payload.begin(), payload.end());
}

inline void put_i16(std::vector<uint8_t>& p, int16_t v) {
  p.push_back(static_cast<uint8_t>((v >> 8) & 0xFF));
  p.push_back(static_cast<uint8_t>(v & 0xFF));
}
inline void put_i32(std::vector<uint8_t>& p, int32_t v) {
  uint32_t u = static_cast<uint32_t>(v);
  p.push_back(static_cast<uint8_t>(u >> 24));
  p.push_back(static_cast<uint8_t>((u >> 16) & 0xFF));
  p.push_back(static_cast<uint8_t>((u >> 8) & 0xFF));
  p.push_back(static_cast<uint8_t>(u & 0xFF));
}

inline std::vector<uint8_t> str_payload(const std::string& s) {
  std::vector<uint8_t> p(s.begin(), s.end());
  if (p.size() % 2) p.push_back(0);
  return p;
}

// Fixed epoch timestamp so identical designs produce identical bytes.
inline std::vector<uint8_t> epoch_payload() {
  std::vector<uint8_t> p;
  for (int rep = 0; rep < 2; ++rep) {
    put_i16(p, 1970);
    put_i16(p, 1);
    put_i16(p, 1);
    put_i16(p, 0);
    put_i16(p, 0);
    put_i16(p, 0);
  }
  return p;
}

inline void check_name(const std::string& s) {
  if (s.empty() || s.size() > 32) throw GdsError("structure name '" + s + "' must be 1..32 chars");
  for (char c : s)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '?' && c != '$')
      throw GdsError("structure name '" + s + "' has an invalid character");
}

}  // namespace gdsdetail

inline std::vector<uint8_t> write_gds(const GdsLibrary& lib) {
  using namespace gdsdetail;
  std::vector<uint8_t> out;
  {
    std::vector<uint8_t> p;
    put_i16(p, 600);
    record(out, kHeader, p);
  }
  record(out, kBgnLib, epoch_payload());
  check_name(lib.name);
  record(out, kLibName, str_payload(lib.name));
  {
    std::vector<uint8_t> p(16);
    encode_real8(kGdsUserUnits, p.data());
    encode_real8(kGdsMeters, p.data() + 8);
    record(out, kUnits, p);
  }
  for (const GdsStructure& st : lib.structures) {
    check_name(st.name);
    record(out, kBgnStr, epoch_payload());
    record(out, kStrName, str_payload(st.name));
    for (const GdsBoundary& b : st.boundaries) {
      if (b.pts.size() < 3) throw GdsError("boundary in '" + st.name + "' has fewer than 3 points");
      record(out, kBoundary, {});
      std::vector<uint8_t> p;
      put_i16(p, b.layer);
      record(out, kLayer, p);
      p.clear();
      put_i16(p, b.datatype);
      record(out, kDatatype, p);
      p.clear();
      for (const GdsPoint& q : b.pts) {
        put_i32(p, q.x);
        put_i32(p, q.y);
      }
      put_i32(p, b.pts[0].x);  // explicit closure
      put_i32(p, b.pts[0].y);
      record(out, kXy, p);
      record(out, kEndEl, {});
    }
    for (const GdsPath& pa : st.paths) {
      if (pa.pts.size() < 2) throw GdsError("path in '" + st.name + "' has fewer than 2 points");
      record(out, kPath, {});
      std::vector<uint8_t> p;
      put_i16(p, pa.layer);
      record(out, kLayer, p);
      p.clear();
      put_i16(p, pa.datatype);
      record(out, kDatatype, p);
      p.clear();
      put_i32(p, pa.width);
      record(out, kWidth, p);
      p.clear();
      for (const GdsPoint& q : pa.pts) {
        put_i32(p, q.x);
        put_i32(p, q.y);
      }
      record(out, kXy, p);
      record(out, kEndEl, {});
    }
    for (const GdsSref& sr : st.srefs) {
      check_name(sr.sname);
      record(out, kSref, {});
      record(out, kSname, str_payload(sr.sname));
      if (sr.angle_deg != 0.0) {
        std::vector<uint8_t> p;
        put_i16(p, 0);  // no mirror, absolute angle
        record(out, kStrans, p);
        p.clear();
        p.resize(8);
        encode_real8(sr.angle_deg, p.data());
        record(out, kAngle, p);
      }
      std::vector<uint8_t> p;
      put_i32(p, sr.origin.x);
      put_i32(p, sr.origin.y);
      record(out, kXy, p);
      record(out, kEndEl, {});
    }
    record(out, kEndStr, {});
  }
  record(out, kEndLib, {});
  return out;
}

inline void save_gds(const GdsLibrary& lib, const std::string& path) {
  std::vector<uint8_t> bytes = write_gds(lib);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw GdsError("cannot open '" + path + "' for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw GdsError("write to '" + path + "' failed");
}

// ---------------------------------------------------------------------------
// Reader for the same subset the writer emits.
// ---------------------------------------------------------------------------

namespace gdsdetail {

struct RawRecord {
  uint16_t rtype = 0;
  const uint8_t* data = nullptr;
  size_t len = 0;
};

class RecordCursor {
 public:
  RecordCursor(const uint8_t* p, size_t n) : p_(p), n_(n) {}
  bool next(RawRecord& r) {
    while (pos_ + 4 <= n_) {
      uint16_t len = static_cast<uint16_t>((p_[pos_] << 8) | p_[pos_ + 1]);
      if (len == 0) {  // trailing pad
        ++pos_;
        continue;
      }
      if (len < 4 || pos_ + len > n_) throw GdsError("truncated record");
      r.rtype = static_cast<uint16_t>((p_[pos_ + 2] << 8) | p_[pos_ + 3]);
      r.data = p_ + pos_ + 4;
      r.len = len - 4u;
      pos_ += len;
      return true;
    }
    return false;
  }

 private:
  const uint8_t* p_;
  size_t n_;
  size_t pos_ = 0;
};

inline int16_t get_i16(const uint8_t* p) {
  return static_cast<int16_t>((p[0] << 8) | p[1]);
}
inline int32_t get_i32(const uint8_t* p) {
  return static_cast<int32_t>((static_cast<uint32_t>(p[0]) << 24) |
                              (static_cast<uint32_t>(p[1]) << 16) |
                              (static_cast<uint32_t>(p[2]) << 8) | p[3]);
}
inline std::string get_str(const RawRecord& r) {
  std::string s(reinterpret_cast<const char*>(r.data), r.len);
  while (!s.empty() && s.back() == '\0') s.pop_back();
  return s;
}
inline std::vector<GdsPoint> get_xy(const RawRecord& r) {
  if (r.len % 8) throw GdsError("XY record length is not a multiple of 8");
  std::vector<GdsPoint> pts(r.len / 8);
  for (size_t i = 0; i < pts.size(); ++i)
    pts[i] = {get_i32(r.data + 8 * i), get_i32(r.data + 8 * i + 4)};
  return pts;
}

}  // namespace gdsdetail

inline GdsLibrary read_gds(const std::vector<uint8_t>& bytes) {
  using namespace gdsdetail;
  RecordCursor cur(bytes.data(), bytes.size());
  RawRecord r;
  auto expect = [&](uint16_t want, const char* what) {
    if (!cur.next(r) || r.rtype != want) throw GdsError(std::string("expected ") + what);
  };
  expect(kHeader, "HEADER");
  expect(kBgnLib, "BGNLIB");
  expect(kLibName, "LIBNAME");
  GdsLibrary lib;
  lib.name = get_str(r);
  expect(kUnits, "UNITS");
  if (r.len != 16) throw GdsError("UNITS record must hold two real8 values");

  while (cur.next(r)) {
    if (r.rtype == kEndLib) {
      while (cur.next(r)) throw GdsError("records after ENDLIB");
      return lib;
    }
    if (r.rtype != kBgnStr) throw GdsError("expected BGNSTR or ENDLIB");
    expect(kStrName, "STRNAME");
    GdsStructure st;
    st.name = get_str(r);
    for (;;) {
      if (!cur.next(r)) throw GdsError("unterminated structure '" + st.name + "'");
      if (r.rtype == kEndStr) break;
      if (r.rtype == kBoundary) {
        GdsBoundary b;
        expect(kLayer, "LAYER");
        b.layer = get_i16(r.data);
        expect(kDatatype, "DATATYPE");
        b.datatype = get_i16(r.data);
        expect(kXy, "XY");
        b.pts = get_xy(r);
        if (b.pts.size() >= 2 && b.pts.front() == b.pts.back()) b.pts.pop_back();
        if (b.pts.size() < 3) throw GdsError("boundary with fewer than 3 distinct points");
        expect(kEndEl, "ENDEL");
        st.boundaries.push_back(std::move(b));
      } else if (r.rtype == kPath) {
        GdsPath pa;
        expect(kLayer, "LAYER");
        pa.layer = get_i16(r.data);
        expect(kDatatype, "DATATYPE");
        pa.datatype = get_i16(r.data);
        if (!cur.next(r)) throw GdsError("unterminated path");
        if (r.rtype == kWidth) {
          pa.width = get_i32(r.data);
          if (!cur.next(r)) throw GdsError("unterminated path");
        }
        if (r.rtype != kXy) throw GdsError("expected XY in path");
        pa.pts = get_xy(r);
        expect(kEndEl, "ENDEL");
        st.paths.push_back(std::move(pa));
      } else if (r.rtype == kSref) {
        GdsSref sr;
        expect(kSname, "SNAME");
        sr.sname = get_str(r);
        if (!cur.next(r)) throw GdsError("unterminated SREF");
        if (r.rtype == kStrans) {
          if (r.len >= 2 && (r.data[0] & 0x80))
            throw GdsError("mirrored references are not supported");
          if (!cur.next(r)) throw GdsError("unterminated SREF");
          if (r.rtype == kAngle) {
            sr.angle_deg = decode_real8(r.data);
            if (!cur.next(r)) throw GdsError("unterminated SREF");
          }
        }
        if (r.rtype != kXy) throw GdsError("expected XY in SREF");
        std::vector<GdsPoint> pts = get_xy(r);
        if (pts.size() != 1) throw GdsError("SREF XY must hold one point");
        sr.origin = pts[0];
        expect(kEndEl, "ENDEL");
        st.srefs.push_back(std::move(sr));
      } else {
        throw GdsError("unsupported record inside structure '" + st.name + "'");
      }
    }
    lib.structures.push_back(std::move(st));
  }
  throw GdsError("missing ENDLIB");
}

inline GdsLibrary load_gds(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw GdsError("cannot open '" + path + "'");
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                             std::istreambuf_iterator<char>());
  return read_gds(bytes);
}

// ---------------------------------------------------------------------------
// Flatten: resolve references into plain polygons. Rotations are exact
// integer transforms; only multiples of 90 degrees exist in this library.
// ---------------------------------------------------------------------------

struct FlatShape {
  int16_t layer = 0, datatype = 0;
  std::vector<std::pair<int64_t, int64_t>> pts;  // open polygon
};

namespace gdsdetail {

struct Xform {
  int rot = 0;  // quarter turns ccw
  int64_t dx = 0, dy = 0;
};

inline std::pair<int64_t, int64_t> apply(const Xform& t, int64_t x, int64_t y) {
  switch (t.rot & 3) {
    case 1: {
      int64_t tx = -y, ty = x;
      x = tx;
      y = ty;
      break;
    }
    case 2:
      x = -x;
      y = -y;
      break;
    case 3: {
      int64_t tx = y, ty = -x;
      x = tx;
      y = ty;
      break;
    }
    default:
      break;
  }
  return {x + t.dx, y + t.dy};
}

inline Xform compose(const Xform& outer, const Xform& inner) {
  auto [ox, oy] = apply(outer, inner.dx, inner.dy);
  return {(outer.rot + inner.rot) & 3, ox, oy};
}

inline int quarter_turns(double angle_deg) {
  double a = std::fmod(angle_deg, 360.0);
  if (a < 0) a += 360.0;
  int q = static_cast<int>(std::llround(a / 90.0));
  if (std::abs(a - q * 90.0) > 1e-6)
    throw GdsError("flatten supports only multiples of 90 degrees");
  return q & 3;
}

inline void flatten_into(const std::unordered_map<std::string, const GdsStructure*>& index,
                         const GdsStructure& st, const Xform& t, int depth,
                         std::vector<FlatShape>& out) {
  if (depth > 64) throw GdsError("reference nesting too deep (cycle?)");
  for (const GdsBoundary& b : st.boundaries) {
    FlatShape s{b.layer, b.datatype, {}};
    s.pts.reserve(b.pts.size());
    for (const GdsPoint& q : b.pts) s.pts.push_back(apply(t, q.x, q.y));
    out.push_back(std::move(s));
  }
  for (const GdsPath& pa : st.paths) {
    const int64_t hw = pa.width / 2;
    for (size_t i = 1; i < pa.pts.size(); ++i) {
      int64_t x1 = pa.pts[i - 1].x, y1 = pa.pts[i - 1].y;
      int64_t x2 = pa.pts[i].x, y2 = pa.pts[i].y;
      if (x1 != x2 && y1 != y2) throw GdsError("flatten supports only axis-parallel paths");
      if (x1 == x2 && y1 == y2) continue;
      int64_t rx1 = std::min(x1, x2), rx2 = std::max(x1, x2);
      int64_t ry1 = std::min(y1, y2), ry2 = std::max(y1, y2);
      if (y1 == y2) {
        ry1 -= hw;
        ry2 += hw;
      } else {
        rx1 -= hw;
        rx2 += hw;
      }
      FlatShape s{pa.layer, pa.datatype, {}};
      for (auto [px, py] : {std::pair<int64_t, int64_t>{rx1, ry1},
                            {rx2, ry1},
                            {rx2, ry2},
                            {rx1, ry2}})
        s.pts.push_back(apply(t, px, py));
      out.push_back(std::move(s));
    }
  }
  for (const GdsSref& sr : st.srefs) {
    auto it = index.find(sr.sname);
    if (it == index.end()) throw GdsError("SREF to unknown structure '" + sr.sname + "'");
    Xform child{quarter_turns(sr.angle_deg), sr.origin.x, sr.origin.y};
    flatten_into(index, *it->second, compose(t, child), depth + 1, out);
  }
}

}  // namespace gdsdetail

inline std::vector<FlatShape> flatten(const GdsLibrary& lib, const std::string& top) {
  std::unordered_map<std::string, const GdsStructure*> index;
  for (const GdsStructure& st : lib.structures) {
    if (index.count(st.name)) throw GdsError("duplicate structure '" + st.name + "'");
    index[st.name] = &st;
  }
  auto it = index.find(top);
  if (it == index.end()) throw GdsError("no structure named '" + top + "'");
  std::vector<FlatShape> out;
  gdsdetail::flatten_into(index, *it->second, {}, 0, out);
  return out;
}

// ---------------------------------------------------------------------------
// Design assembly: one structure per distinct device geometry, SREF'd from a
// top structure that also carries the routing as PATH elements. Identical
// geometries share a structure named after the device kind and the first
// instance that used it.
// ---------------------------------------------------------------------------

struct DesignCell {
  DeviceFootprint fp;
  CellGeometry geo;  // local, unrotated coordinates
};

namespace gdsdetail {

inline char kind_prefix(ComponentKind k) {
  switch (k) {
    case ComponentKind::Resistor: return 'R';
    case ComponentKind::Capacitor: return 'C';
    case ComponentKind::Inductor: return 'L';
    case ComponentKind::Nmos: return 'M';
  }
  return 'X';
}

inline std::string geometry_key(const DesignCell& c) {
  std::string k;
  k += kind_prefix(c.fp.kind);
  for (const auto& [layer, r] : c.geo.rects) {
    k += "|" + layer + ";" + detail::format_number(r.x1) + "," + detail::format_number(r.y1) +
         "," + detail::format_number(r.x2) + "," + detail::format_number(r.y2);
  }
  for (const PinShape& p : c.geo.pins)
    k += "|P" + p.name + ";" + p.layer + ";" + detail::format_number(p.offset.x) + "," +
         detail::format_number(p.offset.y);
  return k;
}

}  // namespace gdsdetail

constexpr double kPinMarkerSide = 0.2;  // um

inline GdsLibrary assemble_design(const std::vector<DesignCell>& cells, const Placement& pl,
                                  const RoutedDesign& routed, const RoutingGrid& grid,
                                  const TechRules& tech, const std::string& top_name = "TOP",
                                  const std::string& lib_name = "RFSYNTH") {
  GdsLibrary lib;
  lib.name = lib_name;
  GdsStructure top;
  top.name = top_name;

  auto add_rect = [&](GdsStructure& st, const LayerKey& lk, const Rect& r) {
    GdsBoundary b;
    b.layer = static_cast<int16_t>(lk.layer);
    b.datatype = static_cast<int16_t>(lk.datatype);
    b.pts = {{to_db(r.x1), to_db(r.y1)},
             {to_db(r.x2), to_db(r.y1)},
             {to_db(r.x2), to_db(r.y2)},
             {to_db(r.x1), to_db(r.y2)}};
    st.boundaries.push_back(std::move(b));
  };

  std::map<std::string, std::string> dedup;  // geometry key -> structure name
  std::map<std::string, GdsStructure> children;
  for (size_t i = 0; i < cells.size(); ++i) {
    const DesignCell& c = cells[i];
    std::string key = gdsdetail::geometry_key(c);
    auto it = dedup.find(key);
    std::string sname;
    if (it == dedup.end()) {
      sname = std::string(1, gdsdetail::kind_prefix(c.fp.kind)) + "_" + c.fp.id;
      dedup[key] = sname;
      GdsStructure st;
      st.name = sname;
      Rect bb = c.geo.bbox();
      for (const auto& [layer, r] : c.geo.rects)
        add_rect(st, tech.layers.lookup(layer), r.translated(-bb.x1, -bb.y1));
      const LayerKey pin_lk = tech.layers.lookup("PIN");
      for (const PinShape& p : c.geo.pins) {
        double px = p.offset.x - bb.x1, py = p.offset.y - bb.y1;
        add_rect(st, pin_lk,
                 Rect(px - kPinMarkerSide / 2, py - kPinMarkerSide / 2, px + kPinMarkerSide / 2,
                      py + kPinMarkerSide / 2));
      }
      children[sname] = std::move(st);
    } else {
      sname = it->second;
    }

    const DevicePlace& place = pl.at[i];
    double w = 0, h = 0;
    rotated_dims(c.fp.w, c.fp.h, place.theta, w, h);
    GdsSref sr;
    sr.sname = sname;
    sr.angle_deg = rotation_degrees(place.theta);
    switch (place.theta) {
      case Rotation::R0: sr.origin = {to_db(place.x), to_db(place.y)}; break;
      case Rotation::R90: sr.origin = {to_db(place.x + w), to_db(place.y)}; break;
      case Rotation::R180: sr.origin = {to_db(place.x + w), to_db(place.y + h)}; break;
      case Rotation::R270: sr.origin = {to_db(place.x), to_db(place.y + h)}; break;
    }
    top.srefs.push_back(std::move(sr));
  }

  // Routing: one PATH per maximal single-layer stretch, corner points only.
  for (const RoutePath& p : routed.paths) {
    std::vector<Run> runs = path_runs(p);
    size_t i = 0;
    while (i < runs.size()) {
      size_t j = i;
      while (j + 1 < runs.size() && runs[j + 1].layer == runs[i].layer) ++j;
      GdsPath gp;
      const LayerKey lk = tech.layers.lookup(grid.layer_names[runs[i].layer]);
      gp.layer = static_cast<int16_t>(lk.layer);
      gp.datatype = static_cast<int16_t>(lk.datatype);
      gp.width = to_db(p.width_um);
      gp.pts.push_back({to_db(grid.wx(runs[i].x1)), to_db(grid.wy(runs[i].y1))});
      for (size_t k = i; k <= j; ++k)
        gp.pts.push_back({to_db(grid.wx(runs[k].x2)), to_db(grid.wy(runs[k].y2))});
      if (gp.pts.size() >= 2 && !(gp.pts.size() == 2 && gp.pts[0] == gp.pts[1]))
        top.paths.push_back(std::move(gp));
      i = j + 1;
    }
  }

  for (auto& [name, st] : children) lib.structures.push_back(std::move(st));
  lib.structures.push_back(std::move(top));
  return lib;
}

}  // namespace rfsynth
