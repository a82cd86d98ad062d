#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "rfsynth/pipeline.hpp"

namespace {

using namespace rfsynth;

std::string read_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw PipelineError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::vector<int> parse_widths(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    out.push_back(std::stoi(tok));
  }
  if (out.empty()) throw PipelineError("widths list is empty");
  return out;
}

int cmd_synth(const std::string& netlist_path, const SynthOptions& opts) {
  SynthReport report;
  return run_synth_file(netlist_path, opts, report, std::cout);
}

int cmd_train(const std::string& out_path, int n, int epochs, int batch, uint64_t seed,
              const std::string& widths, double lr, bool verbose) {
  TrainConfig cfg;
  if (!widths.empty()) cfg.widths = parse_widths(widths);
  cfg.max_epochs = epochs;
  cfg.batch_size = batch;
  cfg.seed = seed;
  cfg.adam.lr = lr;
  cfg.verbose = verbose;
  std::cout << "generating " << n << " samples...\n";
  Dataset d = generate_dataset(n, {}, seed);
  TrainResult r = train(d, cfg);
  save_checkpoint(out_path, r.model, r.stats);

  Metrics m = evaluate(r.model, r.stats, d.x, d.y, d.test_idx);
  std::cout << "trained " << r.report.train_loss.size() << " epochs in "
            << detail::format_number(r.report.seconds) << " s (best epoch "
            << r.report.best_epoch << ")\n"
            << "test R2 " << detail::format_number(m.r2) << ", MAPE "
            << detail::format_number(m.mape) << "%, RMSE " << detail::format_number(m.rmse)
            << "\n"
            << "checkpoint saved to " << out_path << "\n";
  return kExitOk;
}

int cmd_invdesign(const std::string& model_path, double f, double w, double l, int steps,
                  double lr, double q_target, bool has_target, const std::string& trace_path) {
  auto [model, stats] = load_checkpoint(model_path);
  InductorSpec spec{f, w, l};
  spec.check();
  InverseConfig cfg;
  cfg.lr = lr;
  cfg.max_steps = steps;
  cfg.record_trace = !trace_path.empty();
  if (has_target) cfg.q_target = q_target;
  InverseResult r = inverse_design(model, stats, spec, cfg);
  std::cout << "Lv=" << detail::format_number(r.vars.lv)
            << " Lh=" << detail::format_number(r.vars.lh)
            << " Lcn=" << detail::format_number(r.vars.lcn) << "\n"
            << "predicted Q=" << detail::format_number(r.q_pred) << " after " << r.steps
            << " steps (" << detail::format_number(r.seconds) << " s)\n";
  if (!trace_path.empty()) {
    std::ofstream tf(trace_path);
    if (!tf) throw PipelineError("cannot write '" + trace_path + "'");
    tf << "step,lv,lh,lcn,q\n";
    for (size_t i = 0; i < r.trace.size(); ++i)
      tf << i << "," << detail::format_number(r.trace[i].vars.lv) << ","
         << detail::format_number(r.trace[i].vars.lh) << ","
         << detail::format_number(r.trace[i].vars.lcn) << ","
         << detail::format_number(r.trace[i].q) << "\n";
  }
  return kExitOk;
}

// Shared by `place` and `route`: build all device footprints.
struct BuiltDesign {
  Netlist nl;
  TechRules tech;
  std::vector<DeviceFootprint> fps;
  std::vector<DesignCell> cells;
  double f_ghz = 0;
};

BuiltDesign build_design(const std::string& netlist_path, const SynthOptions& opts) {
  BuiltDesign b;
  b.nl = parse_netlist(read_file(netlist_path));
  b.tech = opts.tech_path.empty() ? TechRules::defaults() : load_tech(opts.tech_path);
  b.tech.check();
  ValidateOptions vo;
  vo.strict_nets = opts.strict_nets;
  vo.default_inductor_w = b.tech.default_inductor_w_um;
  auto issues = validate(b.nl, vo);
  for (const Violation& v : issues) std::cout << render(v) << "\n";
  if (has_errors(issues)) throw PipelineError("netlist validation failed");
  if (b.nl.components.empty()) throw PipelineError("netlist has no components");
  b.f_ghz = b.nl.global_freq_ghz.value();
  bool needs_model = false;
  for (const auto& c : b.nl.components)
    if (c.kind == ComponentKind::Inductor) needs_model = true;
  QSurrogate q;
  if (needs_model) q = ensure_model(opts, std::cout);
  for (const auto& c : b.nl.components) {
    ComponentBuild cb = build_component(c, b.nl, b.tech, q, opts);
    b.fps.push_back(cb.cell.fp);
    b.cells.push_back(cb.cell);
  }
  return b;
}

int cmd_place(const std::string& netlist_path, const SynthOptions& opts,
              const std::string& csv_path) {
  BuiltDesign b = build_design(netlist_path, opts);
  double spacing = min_spacing(b.f_ghz, b.tech.em);
  Placement init = initial_placement(b.fps, b.nl, spacing);
  LocalSearchConfig lsc;
  lsc.seed = opts.place_seed;
  lsc.t_max = opts.place_iters;
  LocalSearchResult ls = local_search(b.fps, b.nl, init, spacing, lsc);
  Placement placed = select_rotations(b.fps, b.nl, ls.placement, spacing, b.tech.m_margin_um);
  CostBreakdown cb = placement_cost(b.fps, placed, b.nl, spacing);
  std::cout << "spacing " << detail::format_number(spacing) << " um, cost "
            << detail::format_number(ls.cost_trace.front()) << " -> "
            << detail::format_number(cb.total()) << " (hpwl "
            << detail::format_number(cb.hpwl) << ", overlap "
            << detail::format_number(cb.overlap_area) << ")\n";
  for (size_t i = 0; i < b.fps.size(); ++i)
    std::cout << b.fps[i].id << " at (" << detail::format_number(placed.at[i].x) << ", "
              << detail::format_number(placed.at[i].y) << ") theta "
              << rotation_degrees(placed.at[i].theta) << "\n";
  if (!csv_path.empty()) {
    std::ofstream cf(csv_path);
    if (!cf) throw PipelineError("cannot write '" + csv_path + "'");
    cf << "id,x,y,theta,w,h\n";
    for (size_t i = 0; i < b.fps.size(); ++i) {
      double w = 0, h = 0;
      rotated_dims(b.fps[i].w, b.fps[i].h, placed.at[i].theta, w, h);
      cf << b.fps[i].id << "," << detail::format_number(placed.at[i].x) << ","
         << detail::format_number(placed.at[i].y) << ","
         << rotation_degrees(placed.at[i].theta) << "," << detail::format_number(w) << ","
         << detail::format_number(h) << "\n";
    }
  }
  return kExitOk;
}

int cmd_route(const std::string& netlist_path, const SynthOptions& opts,
              const std::string& csv_path) {
  BuiltDesign b = build_design(netlist_path, opts);
  double spacing = min_spacing(b.f_ghz, b.tech.em);
  Placement init = initial_placement(b.fps, b.nl, spacing);
  LocalSearchConfig lsc;
  lsc.seed = opts.place_seed;
  lsc.t_max = opts.place_iters;
  LocalSearchResult ls = local_search(b.fps, b.nl, init, spacing, lsc);
  Placement placed = select_rotations(b.fps, b.nl, ls.placement, spacing, b.tech.m_margin_um);
  SpacingPolicy policy = SpacingPolicy::derive(b.tech, b.f_ghz);
  RouteAllResult res = route_all(b.nl, b.fps, placed, policy);
  std::cout << res.design.paths.size() << " paths";
  uint64_t total = 0;
  for (const auto& p : res.design.paths) total += p.cost_units;
  std::cout << ", total cost " << total << " units\n";
  for (const auto& u : res.design.unrouted)
    std::cout << "unrouted: " << u.net << " (" << u.reason << ")\n";
  for (const auto& v : res.design.violations)
    std::cout << "spacing: " << v.kind << " " << v.a << " / " << v.b << " gap "
              << detail::format_number(v.gap_um) << " < "
              << detail::format_number(v.required_um) << "\n";
  if (!csv_path.empty()) {
    std::ofstream cf(csv_path);
    if (!cf) throw PipelineError("cannot write '" + csv_path + "'");
    cf << routes_csv(res.grid, res.design);
  }
  if (res.design.unrouted.empty() && res.design.violations.empty()) {
    std::cout << "all nets routed, no spacing violations\n";
    return kExitOk;
  }
  return kExitViolations;
}

int cmd_check(const std::string& netlist_path, bool strict) {
  Netlist nl = parse_netlist(read_file(netlist_path));
  ValidateOptions vo;
  vo.strict_nets = strict;
  auto issues = validate(nl, vo);
  for (const Violation& v : issues) std::cout << render(v) << "\n";
  if (has_errors(issues)) return kExitViolations;
  std::cout << "ok: " << nl.components.size() << " components, " << nl.nets.size()
            << " nets\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RF physical synthesis: netlist to placed-and-routed GDSII"};
  app.require_subcommand(1);

  SynthOptions opts;
  std::string netlist_path, csv_path, widths;
  std::string model_out = "qmodel.bin", trace_path;
  int train_n = 100000, train_epochs = 300, train_batch = 16384;
  uint64_t train_seed = 1;
  double lr = 1e-3;
  bool verbose = false, strict = false;
  double f = 0, w = 5.0, l = 0, q_target = 0;

  auto add_tech = [&](CLI::App* c) {
    c->add_option("-t,--tech", opts.tech_path, "tech file (defaults built in)");
  };
  auto add_model = [&](CLI::App* c) {
    c->add_option("-m,--model", opts.model_path, "Q-model checkpoint path");
    c->add_flag_callback(
        "--no-auto-train", [&] { opts.allow_auto_train = false; },
        "fail instead of training a surrogate when the checkpoint is missing");
    c->add_option("--train-n", opts.auto_train.n, "auto-train sample count");
    c->add_option("--train-epochs", opts.auto_train.max_epochs, "auto-train epochs");
  };
  auto add_place = [&](CLI::App* c) {
    c->add_option("--place-seed", opts.place_seed, "placement search seed");
    c->add_option("--place-iters", opts.place_iters, "placement iterations (-1 = 10*N^2)");
  };

  CLI::App* synth = app.add_subcommand("synth", "full netlist-to-GDSII flow");
  synth->add_option("netlist", netlist_path, "netlist file")->required();
  synth->add_option("-o,--out", opts.out_gds, "output GDSII path");
  synth->add_option("--routes-csv", opts.routes_csv_path, "dump route segments as CSV");
  synth->add_option("--steps", opts.invdesign_steps, "inverse-design steps per inductor");
  synth->add_option("--top", opts.top_name, "top structure name");
  synth->add_option("--lib", opts.lib_name, "library name");
  synth->add_flag("--strict-nets", opts.strict_nets, "require .NET for every net");
  add_tech(synth);
  add_model(synth);
  add_place(synth);

  CLI::App* train_cmd = app.add_subcommand("train", "train the inductor Q surrogate");
  train_cmd->add_option("-o,--out", model_out, "checkpoint output path")->required();
  train_cmd->add_option("-n,--samples", train_n, "dataset size");
  train_cmd->add_option("--epochs", train_epochs, "max epochs");
  train_cmd->add_option("--batch", train_batch, "minibatch size");
  train_cmd->add_option("--seed", train_seed, "dataset and init seed");
  train_cmd->add_option("--widths", widths, "hidden widths, comma separated");
  train_cmd->add_option("--lr", lr, "initial learning rate");
  train_cmd->add_flag("-v,--verbose", verbose, "per-epoch progress");

  CLI::App* inv = app.add_subcommand("invdesign", "layout search for one inductor spec");
  inv->add_option("-m,--model", opts.model_path, "Q-model checkpoint")->required();
  inv->add_option("--f", f, "frequency, GHz")->required();
  inv->add_option("--w", w, "trace width, um");
  inv->add_option("--l", l, "target inductance, pH")->required();
  inv->add_option("--steps", opts.invdesign_steps, "max optimizer steps");
  inv->add_option("--lr", opts.invdesign_lr, "optimizer learning rate");
  CLI::Option* qt = inv->add_option("--q-target", q_target, "stop once predicted Q reaches this");
  inv->add_option("--trace", trace_path, "write per-step trace CSV");

  CLI::App* place = app.add_subcommand("place", "device design and placement only");
  place->add_option("netlist", netlist_path, "netlist file")->required();
  place->add_option("--csv", csv_path, "write placement table CSV");
  add_tech(place);
  add_model(place);
  add_place(place);

  CLI::App* route = app.add_subcommand("route", "place and route, report violations");
  route->add_option("netlist", netlist_path, "netlist file")->required();
  route->add_option("--csv", csv_path, "write route segments CSV");
  add_tech(route);
  add_model(route);
  add_place(route);

  CLI::App* check = app.add_subcommand("check", "parse and validate a netlist");
  check->add_option("netlist", netlist_path, "netlist file")->required();
  check->add_flag("--strict", strict, "require .NET for every net");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : rfsynth::kExitUsage;
  }

  try {
    if (synth->parsed()) return cmd_synth(netlist_path, opts);
    if (train_cmd->parsed())
      return cmd_train(model_out, train_n, train_epochs, train_batch, train_seed, widths, lr,
                       verbose);
    if (inv->parsed())
      return cmd_invdesign(opts.model_path, f, w, l, opts.invdesign_steps, opts.invdesign_lr,
                           q_target, qt->count() > 0, trace_path);
    if (place->parsed()) return cmd_place(netlist_path, opts, csv_path);
    if (route->parsed()) return cmd_route(netlist_path, opts, csv_path);
    if (check->parsed()) return cmd_check(netlist_path, strict);
  } catch (const rfsynth::NetlistError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return rfsynth::kExitViolations;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return rfsynth::kExitInternal;
  }
  return rfsynth::kExitUsage;
}
