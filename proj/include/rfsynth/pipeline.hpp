#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "rfsynth/gdsii.hpp"
#include "rfsynth/inductor.hpp"
#include "rfsynth/netlist.hpp"
#include "rfsynth/nn.hpp"
#include "rfsynth/pcell.hpp"
#include "rfsynth/placement.hpp"
#include "rfsynth/routing.hpp"
#include "rfsynth/tech.hpp"

namespace rfsynth {

struct PipelineError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Exit codes shared by the driver functions and the command-line tool.
constexpr int kExitOk = 0;
constexpr int kExitViolations = 1;
constexpr int kExitUsage = 2;
constexpr int kExitInternal = 3;

struct AutoTrainOpts {
  int n = 6000;
  int max_epochs = 12;
  int batch = 512;
  uint64_t seed = 12345;
};

struct SynthOptions {
  std::string tech_path;    // empty -> built-in defaults
  std::string model_path;   // empty -> qmodel.bin next to the tech file (or cwd)
  std::string out_gds = "out.gds";
  std::string routes_csv_path;  // optional dump
  bool allow_auto_train = true;
  AutoTrainOpts auto_train;
  int invdesign_steps = 3000;
  double invdesign_lr = 0.01;
  bool strict_nets = false;
  std::string top_name = "TOP";
  std::string lib_name = "RFSYNTH";
  uint64_t place_seed = 1;
  long long place_iters = -1;  // -1 = 10 * N^2
};

struct QSurrogate {
  MLPModel model;
  NormStats stats;
  bool trained_now = false;
  std::string path;
};

inline std::string default_model_path(const std::string& tech_path) {
  if (tech_path.empty()) return "qmodel.bin";
  std::filesystem::path p = std::filesystem::path(tech_path).parent_path();
  return p.empty() ? "qmodel.bin" : (p / "qmodel.bin").string();
}

// Loads the Q-model checkpoint, or trains a quick surrogate when none exists
// (enough for layout work; serious accuracy comes from the `train` command).
inline QSurrogate ensure_model(const SynthOptions& o, std::ostream& log) {
  std::string path = o.model_path.empty() ? default_model_path(o.tech_path) : o.model_path;
  if (std::filesystem::exists(path)) {
    auto [m, s] = load_checkpoint(path);
    return {std::move(m), std::move(s), false, path};
  }
  if (!o.allow_auto_train)
    throw PipelineError("no model checkpoint at '" + path + "' and auto-training is disabled");
  log << "note: no Q-model at '" << path << "'; training a quick surrogate ("
      << o.auto_train.n << " samples, " << o.auto_train.max_epochs << " epochs)\n";
  Dataset d = generate_dataset(o.auto_train.n, {}, o.auto_train.seed);
  TrainConfig cfg;
  cfg.max_epochs = o.auto_train.max_epochs;
  cfg.batch_size = o.auto_train.batch;
  cfg.seed = o.auto_train.seed;
  TrainResult r = train(d, cfg);
  save_checkpoint(path, r.model, r.stats);
  log << "note: surrogate saved to '" << path << "' (best val MSE "
      << detail::format_number(r.report.best_val) << ")\n";
  return {std::move(r.model), std::move(r.stats), true, path};
}

struct ComponentBuild {
  DesignCell cell;
  std::optional<CapDesign> cap;
  std::optional<ResDesign> res;
  std::optional<InverseResult> inductor;
  std::optional<InductorSpec> inductor_spec;
};

// Builds the footprint and local geometry for one netlist component. For
// inductors this runs the gradient-based layout search against the surrogate,
// then clamps the result into the geometric validity region (the model's box
// allows corners the drawn spiral cannot realize).
inline ComponentBuild build_component(const ComponentInstance& c, const Netlist& nl,
                                      const TechRules& tech, const QSurrogate& q,
                                      const SynthOptions& o) {
  ComponentBuild out;
  switch (c.kind) {
    case ComponentKind::Resistor: {
      ResDesign d = optimize_resistor(c.value, tech.res);
      CellGeometry g = res_geometry(d, tech.res);
      out.cell = {footprint_from_geometry(c.id, c.kind, g), g};
      out.res = d;
      break;
    }
    case ComponentKind::Capacitor: {
      CapDesign d = optimize_capacitor(c.value, tech.cap_stacks);
      CellGeometry g = cap_geometry(d);
      out.cell = {footprint_from_geometry(c.id, c.kind, g), g};
      out.cap = d;
      break;
    }
    case ComponentKind::Inductor: {
      double f = c.freq_hint_ghz ? *c.freq_hint_ghz : nl.global_freq_ghz.value();
      double w = c.width_hint_um ? *c.width_hint_um : tech.default_inductor_w_um;
      InductorSpec spec{f, w, c.value};
      spec.check();
      InverseConfig cfg;
      cfg.lr = o.invdesign_lr;
      cfg.max_steps = o.invdesign_steps;
      InverseResult r = inverse_design(q.model, q.stats, spec, cfg);
      LayoutVars v = r.vars;
      v.lv = std::max(v.lv, 2.0 * w + 0.5);          // drawn ring needs W < Lv/2
      v.lcn = std::min(v.lcn, v.lh - 2.0 * w - 0.5); // tap gap must fit between stubs
      CellGeometry g = inductor_geometry(spec, v);
      out.cell = {footprint_from_geometry(c.id, c.kind, g), g};
      out.inductor = r;
      out.inductor_spec = spec;
      break;
    }
    case ComponentKind::Nmos: {
      CellGeometry g = nmos_geometry(tech.nmos_w_um, tech.nmos_h_um);
      out.cell = {footprint_from_geometry(c.id, c.kind, g), g};
      break;
    }
  }
  return out;
}

struct SynthReport {
  std::vector<Violation> issues;          // from validation
  std::vector<ComponentBuild> components; // netlist order
  double spacing_um = 0;
  double initial_cost = 0, final_cost = 0;
  CostBreakdown final_breakdown;
  long long proposed = 0, accepted = 0;
  size_t path_count = 0;
  std::vector<UnroutedNet> unrouted;
  std::vector<SpacingViolation> spacing_violations;
  std::string gds_path;
  double seconds = 0;
};

// Full flow: validate -> device design -> placement -> routing -> GDSII.
// Returns the process exit code; `report` carries the details.
inline int run_synth(const Netlist& nl, const SynthOptions& o, SynthReport& report,
                     std::ostream& log) {
  auto t0 = std::chrono::steady_clock::now();
  TechRules tech = o.tech_path.empty() ? TechRules::defaults() : load_tech(o.tech_path);
  tech.check();

  ValidateOptions vo;
  vo.strict_nets = o.strict_nets;
  vo.default_inductor_w = tech.default_inductor_w_um;
  report.issues = validate(nl, vo);
  for (const Violation& v : report.issues) log << render(v) << "\n";
  if (has_errors(report.issues)) {
    log << "error: netlist validation failed\n";
    return kExitViolations;
  }

  if (nl.components.empty()) {  // an empty design is still a valid library
    GdsLibrary lib;
    lib.name = o.lib_name;
    lib.structures.push_back({o.top_name, {}, {}, {}});
    save_gds(lib, o.out_gds);
    report.gds_path = o.out_gds;
    log << "wrote " << o.out_gds << " (empty design)\n";
    return kExitOk;
  }

  const double f = nl.global_freq_ghz.value();
  bool needs_model = false;
  for (const ComponentInstance& c : nl.components)
    if (c.kind == ComponentKind::Inductor) needs_model = true;
  QSurrogate q;
  if (needs_model) q = ensure_model(o, log);

  std::vector<DeviceFootprint> fps;
  for (const ComponentInstance& c : nl.components) {
    report.components.push_back(build_component(c, nl, tech, q, o));
    const ComponentBuild& b = report.components.back();
    fps.push_back(b.cell.fp);
    if (b.inductor)
      log << c.id << ": Lv=" << detail::format_number(b.inductor->vars.lv)
          << " Lh=" << detail::format_number(b.inductor->vars.lh)
          << " Lcn=" << detail::format_number(b.inductor->vars.lcn)
          << " predicted Q=" << detail::format_number(b.inductor->q_pred) << "\n";
  }

  const double spacing = min_spacing(f, tech.em);
  report.spacing_um = spacing;
  Placement init = initial_placement(fps, nl, spacing);
  LocalSearchConfig lsc;
  lsc.seed = o.place_seed;
  lsc.t_max = o.place_iters;
  LocalSearchResult ls = local_search(fps, nl, init, spacing, lsc);
  Placement placed = select_rotations(fps, nl, ls.placement, spacing, tech.m_margin_um);
  report.initial_cost = ls.cost_trace.empty() ? 0 : ls.cost_trace.front();
  report.final_breakdown = placement_cost(fps, placed, nl, spacing);
  report.final_cost = report.final_breakdown.total();
  report.proposed = ls.proposed;
  report.accepted = ls.accepted;
  log << "placement: cost " << detail::format_number(report.initial_cost) << " -> "
      << detail::format_number(report.final_cost) << " (" << ls.accepted << "/" << ls.proposed
      << " moves)\n";

  SpacingPolicy policy = SpacingPolicy::derive(tech, f);
  policy.width_um = tech.route.width_um;
  RouteAllResult routed = route_all(nl, fps, placed, policy);
  report.path_count = routed.design.paths.size();
  report.unrouted = routed.design.unrouted;
  report.spacing_violations = routed.design.violations;
  for (const UnroutedNet& u : routed.design.unrouted)
    log << "unrouted: " << u.net << " (" << u.reason << ")\n";
  for (const SpacingViolation& v : routed.design.violations)
    log << "spacing: " << v.kind << " " << v.a << " / " << v.b << " gap "
        << detail::format_number(v.gap_um) << " < " << detail::format_number(v.required_um)
        << "\n";

  if (!o.routes_csv_path.empty()) {
    std::ofstream csv(o.routes_csv_path);
    if (!csv) throw PipelineError("cannot write '" + o.routes_csv_path + "'");
    csv << routes_csv(routed.grid, routed.design);
  }

  std::vector<DesignCell> cells;
  for (const ComponentBuild& b : report.components) cells.push_back(b.cell);
  GdsLibrary lib =
      assemble_design(cells, placed, routed.design, routed.grid, tech, o.top_name, o.lib_name);
  save_gds(lib, o.out_gds);
  report.gds_path = o.out_gds;

  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  log << "wrote " << o.out_gds << " (" << lib.structures.size() << " structures, "
      << report.path_count << " route paths, " << detail::format_number(report.seconds)
      << " s)\n";
  return (report.unrouted.empty() && report.spacing_violations.empty()) ? kExitOk
                                                                        : kExitViolations;
}

inline int run_synth_file(const std::string& netlist_path, const SynthOptions& o,
                          SynthReport& report, std::ostream& log) {
  std::ifstream f(netlist_path);
  if (!f) throw PipelineError("cannot open netlist '" + netlist_path + "'");
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  Netlist nl = parse_netlist(text);
  return run_synth(nl, o, report, log);
}

}  // namespace rfsynth
