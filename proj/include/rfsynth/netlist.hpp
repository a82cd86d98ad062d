#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace rfsynth {

// ---------------------------------------------------------------------------
// Netlist model. A small SPICE-like deck:
//
//   * comment
//   .TITLE <free text>
//   .FREQ <ghz>
//   .NET <name> W=<weight>
//   R<id> <n1> <n2> <ohms>
//   C<id> <n1> <n2> <pF>
//   L<id> <n1> <n2> <pH> [F=<ghz>] [W=<um>]
//   M<id> <gate> <drain> <source>
// ---------------------------------------------------------------------------

struct NetlistError : std::runtime_error {
  int line;
  NetlistError(int line_, const std::string& msg)
      : std::runtime_error("line " + std::to_string(line_) + ": " + msg), line(line_) {}
};
struct SyntaxError : NetlistError {
  using NetlistError::NetlistError;
};
struct DuplicateIdError : NetlistError {
  using NetlistError::NetlistError;
};
struct ArityError : NetlistError {
  using NetlistError::NetlistError;
};

enum class ComponentKind { Resistor, Capacitor, Inductor, Nmos };

inline const char* kind_name(ComponentKind k) {
  switch (k) {
    case ComponentKind::Resistor: return "resistor";
    case ComponentKind::Capacitor: return "capacitor";
    case ComponentKind::Inductor: return "inductor";
    default: return "nmos";
  }
}

inline int terminal_count(ComponentKind k) { return k == ComponentKind::Nmos ? 3 : 2; }

// Terminal names in declaration order: R/C -> {A,B}, L -> {P1,P2}, M -> {G,D,S}.
inline const char* terminal_name(ComponentKind k, int t) {
  static const char* rc[] = {"A", "B"};
  static const char* l[] = {"P1", "P2"};
  static const char* m[] = {"G", "D", "S"};
  if (k == ComponentKind::Nmos) return m[t];
  if (k == ComponentKind::Inductor) return l[t];
  return rc[t];
}

struct ComponentInstance {
  std::string id;
  ComponentKind kind = ComponentKind::Resistor;
  std::vector<std::string> terminals;          // net names, in terminal order
  double value = 0.0;                          // ohms / pF / pH; unused for nmos
  std::optional<double> freq_hint_ghz;         // L only
  std::optional<double> width_hint_um;         // L only
  int line = 0;
};

struct NetPin {
  std::string component;
  int terminal = 0;
};
inline bool operator==(const NetPin& a, const NetPin& b) {
  return a.component == b.component && a.terminal == b.terminal;
}

struct Net {
  std::string name;
  std::vector<NetPin> pins;
  double weight = 1.0;
  bool declared = false;  // appeared in a .NET directive
  int line = 0;           // first reference
};

struct Netlist {
  std::string title;
  std::optional<double> global_freq_ghz;
  std::vector<ComponentInstance> components;
  std::vector<Net> nets;

  const ComponentInstance* find_component(std::string_view id) const {
    for (const auto& c : components)
      if (c.id == id) return &c;
    return nullptr;
  }
  const Net* find_net(std::string_view name) const {
    for (const auto& n : nets)
      if (n.name == name) return &n;
    return nullptr;
  }
  Net& net_for(const std::string& name, int line) {
    for (auto& n : nets)
      if (n.name == name) return n;
    nets.push_back(Net{name, {}, 1.0, false, line});
    return nets.back();
  }
};

namespace detail {

inline std::vector<std::string> tokenize(std::string_view s) {
  std::vector<std::string> out;
  size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.emplace_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

inline std::string upper(std::string s) {
  for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

inline double parse_number(const std::string& tok, int line, const char* what) {
  double v = 0.0;
  const char* b = tok.data();
  const char* e = b + tok.size();
  auto [p, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || p != e)
    throw SyntaxError(line, std::string("bad ") + what + " '" + tok + "'");
  return v;
}

inline std::string format_number(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, p);
}

}  // namespace detail

// Parses a netlist deck. Throws SyntaxError / DuplicateIdError / ArityError,
// each carrying the 1-based source line.
inline Netlist parse_netlist(std::string_view text) {
  Netlist nl;
  std::unordered_set<std::string> seen_ids;
  std::unordered_set<std::string> declared_nets;

  int line_no = 0;
  size_t pos = 0;
  while (pos <= text.size()) {
    size_t eol = text.find('\n', pos);
    std::string_view line = text.substr(pos, eol == std::string_view::npos ? text.size() - pos
                                                                           : eol - pos);
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    auto toks = detail::tokenize(line);
    if (toks.empty()) continue;
    if (toks[0][0] == '*') continue;  // comment

    if (toks[0][0] == '.') {
      std::string dir = detail::upper(toks[0]);
      if (dir == ".TITLE") {
        size_t at = line.find(toks[0]);
        std::string rest(line.substr(at + toks[0].size()));
        size_t b = rest.find_first_not_of(" \t");
        nl.title = b == std::string::npos ? "" : rest.substr(b);
        size_t e2 = nl.title.find_last_not_of(" \t");
        if (e2 != std::string::npos) nl.title.resize(e2 + 1);
      } else if (dir == ".FREQ") {
        if (toks.size() != 2) throw SyntaxError(line_no, ".FREQ expects one value");
        if (nl.global_freq_ghz) throw SyntaxError(line_no, "duplicate .FREQ");
        nl.global_freq_ghz = detail::parse_number(toks[1], line_no, "frequency");
      } else if (dir == ".NET") {
        if (toks.size() != 3) throw SyntaxError(line_no, ".NET expects <name> W=<weight>");
        std::string key = detail::upper(toks[2]);
        if (key.rfind("W=", 0) != 0)
          throw SyntaxError(line_no, ".NET expects W=<weight>, got '" + toks[2] + "'");
        double w = detail::parse_number(toks[2].substr(2), line_no, "net weight");
        if (!declared_nets.insert(toks[1]).second)
          throw SyntaxError(line_no, "duplicate .NET for '" + toks[1] + "'");
        Net& n = nl.net_for(toks[1], line_no);
        n.weight = w;
        n.declared = true;
      } else {
        throw SyntaxError(line_no, "unknown directive '" + toks[0] + "'");
      }
      continue;
    }

    // Component card.
    char k0 = static_cast<char>(std::toupper(static_cast<unsigned char>(toks[0][0])));
    ComponentKind kind;
    switch (k0) {
      case 'R': kind = ComponentKind::Resistor; break;
      case 'C': kind = ComponentKind::Capacitor; break;
      case 'L': kind = ComponentKind::Inductor; break;
      case 'M': kind = ComponentKind::Nmos; break;
      default:
        throw SyntaxError(line_no, "unknown card '" + toks[0] + "'");
    }

    ComponentInstance c;
    c.id = toks[0];
    c.kind = kind;
    c.line = line_no;
    int nt = terminal_count(kind);
    size_t need = static_cast<size_t>(1 + nt + (kind == ComponentKind::Nmos ? 0 : 1));
    if (toks.size() < need)
      throw ArityError(line_no, std::string(kind_name(kind)) + " '" + c.id + "' expects " +
                                    std::to_string(nt) + " terminals" +
                                    (kind == ComponentKind::Nmos ? "" : " and a value"));
    for (int t = 0; t < nt; ++t) c.terminals.push_back(toks[1 + t]);
    size_t next = 1 + nt;
    if (kind != ComponentKind::Nmos) {
      c.value = detail::parse_number(toks[next], line_no, "value");
      if (!(c.value > 0.0)) throw SyntaxError(line_no, "value must be > 0");
      ++next;
    }
    for (; next < toks.size(); ++next) {
      std::string key = detail::upper(toks[next]);
      if (kind == ComponentKind::Inductor && key.rfind("F=", 0) == 0) {
        c.freq_hint_ghz = detail::parse_number(toks[next].substr(2), line_no, "frequency hint");
      } else if (kind == ComponentKind::Inductor && key.rfind("W=", 0) == 0) {
        c.width_hint_um = detail::parse_number(toks[next].substr(2), line_no, "width hint");
      } else {
        throw SyntaxError(line_no, "unexpected token '" + toks[next] + "'");
      }
    }

    if (!seen_ids.insert(c.id).second)
      throw DuplicateIdError(line_no, "duplicate component id '" + c.id + "'");
    for (int t = 0; t < nt; ++t) {
      Net& n = nl.net_for(c.terminals[t], line_no);
      n.pins.push_back(NetPin{c.id, t});
    }
    nl.components.push_back(std::move(c));
  }
  return nl;
}

// Serializes back to deck text. parse(serialize(parse(x))) is graph-identical
// to parse(x): components keep order, nets are re-created in first-reference
// order because .NET lines are emitted after the component cards.
inline std::string serialize_netlist(const Netlist& nl) {
  std::ostringstream os;
  if (!nl.title.empty()) os << ".TITLE " << nl.title << "\n";
  if (nl.global_freq_ghz) os << ".FREQ " << detail::format_number(*nl.global_freq_ghz) << "\n";
  for (const auto& c : nl.components) {
    os << c.id;
    for (const auto& t : c.terminals) os << " " << t;
    if (c.kind != ComponentKind::Nmos) os << " " << detail::format_number(c.value);
    if (c.freq_hint_ghz) os << " F=" << detail::format_number(*c.freq_hint_ghz);
    if (c.width_hint_um) os << " W=" << detail::format_number(*c.width_hint_um);
    os << "\n";
  }
  for (const auto& n : nl.nets) {
    if (n.declared || n.weight != 1.0)
      os << ".NET " << n.name << " W=" << detail::format_number(n.weight) << "\n";
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

struct Violation {
  enum class Severity { Warning, Error };
  Severity severity = Severity::Error;
  std::string code;
  std::string message;
  int line = 0;
};

struct ValidateOptions {
  bool strict_nets = false;        // every referenced net must be declared via .NET
  double default_inductor_w = 5.0; // used when an L card has no W= hint
};

inline std::string render(const Violation& v) {
  std::string s = v.severity == Violation::Severity::Error ? "error" : "warning";
  s += ":" + std::to_string(v.line) + ": [" + v.code + "] " + v.message;
  return s;
}

// Structural and semantic checks. Parser-produced netlists already satisfy the
// structural ones; programmatically built ones may not.
inline std::vector<Violation> validate(const Netlist& nl, const ValidateOptions& opts = {}) {
  std::vector<Violation> out;
  auto err = [&](const std::string& code, const std::string& msg, int line) {
    out.push_back({Violation::Severity::Error, code, msg, line});
  };
  auto warn = [&](const std::string& code, const std::string& msg, int line) {
    out.push_back({Violation::Severity::Warning, code, msg, line});
  };

  std::unordered_map<std::string, const Net*> net_by_name;
  for (const auto& n : nl.nets) {
    if (!net_by_name.emplace(n.name, &n).second)
      err("DuplicateNet", "net '" + n.name + "' defined twice", n.line);
  }
  std::unordered_map<std::string, const ComponentInstance*> comp_by_id;
  for (const auto& c : nl.components) {
    if (!comp_by_id.emplace(c.id, &c).second)
      err("DuplicateId", "component '" + c.id + "' defined twice", c.line);
  }

  for (const auto& c : nl.components) {
    if (static_cast<int>(c.terminals.size()) != terminal_count(c.kind))
      err("ArityViolation",
          "component '" + c.id + "' has " + std::to_string(c.terminals.size()) +
              " terminals, expected " + std::to_string(terminal_count(c.kind)),
          c.line);
    if (c.kind != ComponentKind::Nmos && !(c.value > 0.0))
      err("NonPositiveValue", "component '" + c.id + "' value must be > 0", c.line);
    for (size_t t = 0; t < c.terminals.size(); ++t) {
      auto it = net_by_name.find(c.terminals[t]);
      if (it == net_by_name.end()) {
        err("DanglingTerminal",
            "component '" + c.id + "' terminal " + std::to_string(t) +
                " references missing net '" + c.terminals[t] + "'",
            c.line);
        continue;
      }
      const Net* n = it->second;
      int hits = 0;
      for (const auto& p : n->pins)
        if (p.component == c.id && p.terminal == static_cast<int>(t)) ++hits;
      if (hits != 1)
        err("PinMismatch",
            "net '" + n->name + "' lists (" + c.id + "," + std::to_string(t) + ") " +
                std::to_string(hits) + " times, expected 1",
            c.line);
    }
    if (c.kind == ComponentKind::Inductor) {
      double w = c.width_hint_um ? *c.width_hint_um : opts.default_inductor_w;
      if (!(w > 0.0))
        err("BadWidth", "inductor '" + c.id + "' trace width must be > 0", c.line);
    }
  }

  for (const auto& n : nl.nets) {
    if (!(n.weight >= 1.0))
      err("BadWeight", "net '" + n.name + "' weight must be >= 1", n.line);
    if (opts.strict_nets && !n.declared && !n.pins.empty())
      err("UndeclaredNet", "net '" + n.name + "' is not declared with .NET (strict mode)",
          n.line);
    for (const auto& p : n.pins) {
      auto it = comp_by_id.find(p.component);
      if (it == comp_by_id.end()) {
        err("DanglingPin", "net '" + n.name + "' references missing component '" + p.component + "'",
            n.line);
      } else if (p.terminal < 0 || p.terminal >= terminal_count(it->second->kind)) {
        err("DanglingPin",
            "net '" + n.name + "' references terminal " + std::to_string(p.terminal) + " of '" +
                p.component + "'",
            n.line);
      }
    }
    if (n.pins.empty())
      warn("UnusedNet", "net '" + n.name + "' has no pins", n.line);
    else if (n.pins.size() == 1)
      warn("FloatingTerminal",
           "net '" + n.name + "' connects only (" + n.pins[0].component + "," +
               terminal_name(comp_by_id.count(n.pins[0].component)
                                 ? comp_by_id[n.pins[0].component]->kind
                                 : ComponentKind::Resistor,
                             std::min(n.pins[0].terminal, 2)) +
               ")",
           n.line);
  }

  // Layout spacing is frequency-dependent, so a deck with devices needs .FREQ
  // even when every inductor carries its own F= hint.
  if (!nl.components.empty() && !nl.global_freq_ghz)
    err("MissingFrequency", "netlist has components but no .FREQ directive", 0);
  if (nl.global_freq_ghz && (*nl.global_freq_ghz < 1.0 || *nl.global_freq_ghz > 100.0))
    err("FrequencyRange",
        ".FREQ " + detail::format_number(*nl.global_freq_ghz) + " outside [1,100] GHz", 0);

  return out;
}

inline bool has_errors(const std::vector<Violation>& vs) {
  return std::any_of(vs.begin(), vs.end(),
                     [](const Violation& v) { return v.severity == Violation::Severity::Error; });
}

}  // namespace rfsynth
