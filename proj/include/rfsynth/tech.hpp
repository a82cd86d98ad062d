#pragma once

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rfsynth/netlist.hpp"  // detail::tokenize / parse helpers
#include "rfsynth/pcell.hpp"

namespace rfsynth {

struct TechError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Frequency-dependent EM keep-apart rule: ~10 um below 5 GHz, ~30 um above
// 40 GHz, linear in between, inflated by a DRC guard band.
struct EmRules {
  double spacing_low_um = 10.0;
  double spacing_high_um = 30.0;
  double f_low_ghz = 5.0;
  double f_high_ghz = 40.0;
  double guard_fraction = 0.15;  // within [0.10, 0.20]

  void check() const {
    if (!(spacing_low_um > 0) || spacing_high_um < spacing_low_um)
      throw TechError("em spacing bounds must satisfy high >= low > 0");
    if (guard_fraction < 0.10 || guard_fraction > 0.20)
      throw TechError("guard_fraction must lie in [0.10, 0.20]");
    if (!(f_low_ghz > 0) || f_high_ghz <= f_low_ghz) throw TechError("bad em frequency corners");
  }
};

// 0 <= (x,y); resolved GDS layer/datatype pair.
struct LayerKey {
  int layer = 0;
  int datatype = 0;
};
inline bool operator<(const LayerKey& a, const LayerKey& b) {
  return a.layer != b.layer ? a.layer < b.layer : a.datatype < b.datatype;
}
inline bool operator==(const LayerKey& a, const LayerKey& b) {
  return a.layer == b.layer && a.datatype == b.datatype;
}

struct LayerMap {
  std::map<std::string, LayerKey> names;

  LayerKey lookup(const std::string& name) const {
    auto it = names.find(name);
    if (it == names.end()) throw TechError("layer '" + name + "' not in layer map");
    return it->second;
  }
  bool has(const std::string& name) const { return names.count(name) != 0; }

  void check_injective() const {
    std::set<LayerKey> seen;
    for (const auto& [name, key] : names)
      if (!seen.insert(key).second)
        throw TechError("layer map not injective: duplicate (layer,datatype) for '" + name + "'");
  }
};

enum class ViaCostMode { Proportional, Fixed };

struct RouteRules {
  double width_um = 0.5;       // default route width, all layers
  double dev_scale = 0.10;     // s_dev = dev_scale * min_spacing(f) * (1+guard)
  double net_scale = 0.05;     // s_same = net_scale * min_spacing(f) * (1+guard)
  ViaCostMode via_mode = ViaCostMode::Proportional;
  double via_fixed_cost_um = 5.0;  // used only in Fixed mode

  void check() const {
    if (!(width_um > 0) || !(dev_scale > 0) || !(net_scale > 0) || !(via_fixed_cost_um > 0))
      throw TechError("route rule values must be positive");
  }
};

struct TechRules {
  EmRules em;
  RouteRules route;
  std::vector<CapStack> cap_stacks;
  ResTech res;
  LayerMap layers;
  double m_margin_um = 2.0;          // escape margin in rotation scoring
  double nmos_w_um = 10.0, nmos_h_um = 8.0;
  double default_inductor_w_um = 5.0;

  static TechRules defaults() {
    TechRules t;
    t.cap_stacks = {
        {"STK3A", 1.10, {"M1", "QA", "QB"}},
        {"STK3B", 1.60, {"M1", "QA", "QB"}},
    };
    t.layers.names = {
        {"M1", {10, 0}}, {"QA", {11, 0}}, {"QB", {12, 0}},
        {"RES", {20, 0}}, {"PIN", {63, 0}}, {"OUTLINE", {0, 0}},
    };
    return t;
  }

  void check() const {
    em.check();
    route.check();
    res.check();
    layers.check_injective();
    if (cap_stacks.empty()) throw TechError("tech file defines no cap stacks");
    for (const auto& s : cap_stacks) {
      s.check();
      for (const auto& l : s.layer_span)
        if (!layers.has(l)) throw TechError("cap stack '" + s.name + "' references unknown layer '" + l + "'");
    }
    for (const char* l : {"M1", "QA", "QB", "RES", "PIN", "OUTLINE"})
      if (!layers.has(l)) throw TechError(std::string("layer map missing '") + l + "'");
    if (!(m_margin_um > 0) || !(nmos_w_um > 0) || !(nmos_h_um > 0) ||
        !(default_inductor_w_um > 0))
      throw TechError("tech margins and device defaults must be positive");
  }
};

// ---------------------------------------------------------------------------
// Flat INI-style tech file:  [section] then "key = value" lines, '#' comments.
// ---------------------------------------------------------------------------

inline TechRules parse_tech(const std::string& text) {
  TechRules t = TechRules::defaults();
  t.cap_stacks.clear();
  t.layers.names.clear();
  bool saw_stack = false, saw_layer = false;

  std::string section;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  auto fail = [&](const std::string& msg) {
    throw TechError("tech file line " + std::to_string(line_no) + ": " + msg);
  };
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = raw.substr(0, std::min(raw.find('#'), raw.find(';')));
    auto toks = detail::tokenize(line);
    if (toks.empty()) continue;
    if (toks[0].front() == '[') {
      if (toks.size() != 1 || toks[0].back() != ']') fail("malformed section header");
      section = toks[0].substr(1, toks[0].size() - 2);
      continue;
    }
    if (toks.size() < 3 || toks[1] != "=") fail("expected 'key = value'");
    const std::string& key = toks[0];
    auto num = [&](size_t i = 2) { return detail::parse_number(toks[i], line_no, key.c_str()); };
    auto integer = [&](size_t i) { return static_cast<int>(num(i)); };

    if (section == "em") {
      if (key == "spacing_low") t.em.spacing_low_um = num();
      else if (key == "spacing_high") t.em.spacing_high_um = num();
      else if (key == "freq_low") t.em.f_low_ghz = num();
      else if (key == "freq_high") t.em.f_high_ghz = num();
      else if (key == "guard_fraction") t.em.guard_fraction = num();
      else fail("unknown [em] key '" + key + "'");
    } else if (section == "route") {
      if (key == "width") t.route.width_um = num();
      else if (key == "dev_scale") t.route.dev_scale = num();
      else if (key == "net_scale") t.route.net_scale = num();
      else if (key == "via_fixed_cost") t.route.via_fixed_cost_um = num();
      else if (key == "via_cost_mode") {
        if (toks[2] == "proportional") t.route.via_mode = ViaCostMode::Proportional;
        else if (toks[2] == "fixed") t.route.via_mode = ViaCostMode::Fixed;
        else fail("via_cost_mode must be 'proportional' or 'fixed'");
      } else fail("unknown [route] key '" + key + "'");
    } else if (section == "pcell") {
      if (key == "cap_stack") {
        // cap_stack = <name> <rho> <layer> <layer> <layer> [...]
        if (toks.size() < 7) fail("cap_stack needs a name, a density and >= 3 layers");
        CapStack s;
        s.name = toks[2];
        s.rho_ff_um2 = num(3);
        for (size_t i = 4; i < toks.size(); ++i) s.layer_span.push_back(toks[i]);
        t.cap_stacks.push_back(std::move(s));
        saw_stack = true;
      } else if (key == "res_rs") t.res.rs_ohm_sq = num();
      else if (key == "res_rend") t.res.r_end_ohm_um = num();
      else if (key == "res_pitch_x") t.res.pitch_x_um = num();
      else if (key == "res_pitch_y") t.res.pitch_y_um = num();
      else fail("unknown [pcell] key '" + key + "'");
    } else if (section == "layers") {
      if (toks.size() != 4) fail("layer line must be '<name> = <layer> <datatype>'");
      t.layers.names[key] = LayerKey{integer(2), integer(3)};
      saw_layer = true;
    } else if (section == "place") {
      if (key == "m_margin") t.m_margin_um = num();
      else if (key == "nmos_w") t.nmos_w_um = num();
      else if (key == "nmos_h") t.nmos_h_um = num();
      else if (key == "default_inductor_w") t.default_inductor_w_um = num();
      else fail("unknown [place] key '" + key + "'");
    } else if (section.empty()) {
      fail("key outside any [section]");
    } else {
      fail("unknown section [" + section + "]");
    }
  }
  if (!saw_stack) t.cap_stacks = TechRules::defaults().cap_stacks;
  if (!saw_layer) t.layers = TechRules::defaults().layers;
  t.check();
  return t;
}

inline TechRules load_tech(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw TechError("cannot open tech file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_tech(ss.str());
}

inline std::string serialize_tech(const TechRules& t) {
  std::ostringstream os;
  auto n = [](double v) { return detail::format_number(v); };
  os << "# technology rules (placeholder values, not foundry data)\n";
  os << "[em]\n";
  os << "spacing_low = " << n(t.em.spacing_low_um) << "\n";
  os << "spacing_high = " << n(t.em.spacing_high_um) << "\n";
  os << "freq_low = " << n(t.em.f_low_ghz) << "\n";
  os << "freq_high = " << n(t.em.f_high_ghz) << "\n";
  os << "guard_fraction = " << n(t.em.guard_fraction) << "\n\n";
  os << "[route]\n";
  os << "width = " << n(t.route.width_um) << "\n";
  os << "dev_scale = " << n(t.route.dev_scale) << "\n";
  os << "net_scale = " << n(t.route.net_scale) << "\n";
  os << "via_cost_mode = "
     << (t.route.via_mode == ViaCostMode::Proportional ? "proportional" : "fixed") << "\n";
  os << "via_fixed_cost = " << n(t.route.via_fixed_cost_um) << "\n\n";
  os << "[pcell]\n";
  for (const auto& s : t.cap_stacks) {
    os << "cap_stack = " << s.name << " " << n(s.rho_ff_um2);
    for (const auto& l : s.layer_span) os << " " << l;
    os << "\n";
  }
  os << "res_rs = " << n(t.res.rs_ohm_sq) << "\n";
  os << "res_rend = " << n(t.res.r_end_ohm_um) << "\n";
  os << "res_pitch_x = " << n(t.res.pitch_x_um) << "\n";
  os << "res_pitch_y = " << n(t.res.pitch_y_um) << "\n\n";
  os << "[layers]\n";
  for (const auto& [name, key] : t.layers.names)
    os << name << " = " << key.layer << " " << key.datatype << "\n";
  os << "\n[place]\n";
  os << "m_margin = " << n(t.m_margin_um) << "\n";
  os << "nmos_w = " << n(t.nmos_w_um) << "\n";
  os << "nmos_h = " << n(t.nmos_h_um) << "\n";
  os << "default_inductor_w = " << n(t.default_inductor_w_um) << "\n";
  return os.str();
}

}  // namespace rfsynth
