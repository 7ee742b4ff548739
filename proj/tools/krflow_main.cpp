// Command-line front end: series/model/evolve data emission and the
// verification experiments, all driven by one flat key=value config.
// Exit codes: 0 all gates passed, 1 some gate failed, 2 error.

#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "krflow/experiments.hpp"
#include "krflow/report.hpp"

namespace {

using namespace krflow;

struct Override {
  std::string key;
  std::string value;
  CLI::Option* opt = nullptr;
};

// Per-subcommand state. Override strings live in a preallocated vector so
// the addresses handed to CLI11 stay stable.
struct SubCtx {
  CLI::App* cmd = nullptr;
  std::string config_path;
  std::string out_dir;
  bool quiet = false;
  bool print_config = false;
  CLI::Option* config_opt = nullptr;
  std::vector<Override> overrides;
};

const std::vector<std::string>& override_keys() {
  static const std::vector<std::string> keys = {
      "b",      "a",        "k",          "delta",           "mode",
      "T",      "t_end",    "nodes",      "dt_kappa",        "newton_tol",
      "eta_max", "lambda",  "levels",     "rho_floor_scale", "pair_budget",
      "tail_budget", "seed"};
  return keys;
}

void attach_common(CLI::App* cmd, SubCtx& ctx) {
  ctx.cmd = cmd;
  ctx.config_opt = cmd->add_option("--config", ctx.config_path,
                                   "key=value config file; flags override it");
  cmd->add_option("--out", ctx.out_dir, "directory for CSV/JSON reports");
  cmd->add_flag("--quiet", ctx.quiet, "suppress console lines");
  cmd->add_flag("--print-config", ctx.print_config,
                "print the effective config and exit");
  ctx.overrides.reserve(override_keys().size());
  for (const std::string& key : override_keys()) {
    std::string flag = "--" + key;
    for (char& c : flag) {
      if (c == '_') c = '-';
    }
    ctx.overrides.push_back(Override{key, "", nullptr});
    Override& ov = ctx.overrides.back();
    ov.opt = cmd->add_option(flag, ov.value, "override config key " + key);
  }
}

RunConfig effective_config(const SubCtx& ctx) {
  RunConfig cfg;
  if (ctx.config_opt->count() > 0) cfg = parse_run_config(ctx.config_path);
  for (const Override& ov : ctx.overrides) {
    if (ov.opt->count() > 0) cfg.set(ov.key, ov.value);
  }
  return cfg;
}

void emit(const SubCtx& ctx, const std::string& name, const std::string& text) {
  if (ctx.out_dir.empty()) return;
  std::filesystem::create_directories(ctx.out_dir);
  write_text_file((std::filesystem::path(ctx.out_dir) / name).string(), text);
}

void say_metrics(const SubCtx& ctx, const ExperimentResult& res) {
  if (ctx.quiet) return;
  for (const auto& [key, value] : res.metrics) {
    std::printf("  %-18s %s\n", key.c_str(), format_double(value).c_str());
  }
  for (const auto& [gate, ok] : res.passes) {
    std::printf("[%s] %s.%s\n", ok ? "PASS" : "FAIL", res.name.c_str(),
                gate.c_str());
  }
}

int finish(const SubCtx& ctx, const RunConfig& cfg, const ExperimentResult& res) {
  emit(ctx, res.name + ".json", summary_json(cfg, res.metrics, res.passes));
  say_metrics(ctx, res);
  return res.all_pass() ? 0 : 1;
}

GluedModelSpec model_spec(const RunConfig& cfg, const CorrectionSeries& series) {
  BackgroundMode mode = (cfg.mode == "quartic") ? BackgroundMode::quartic
                                                : BackgroundMode::hyperbolic;
  GluedModelSpec spec{&series, cfg.k, cfg.a, cfg.delta, mode};
  spec.validate();
  return spec;
}

int run_series(const RunConfig& cfg, const SubCtx& ctx) {
  cfg.validate();
  auto series = build_correction_series(cfg.b, cfg.k, cfg.eta_max);
  ExperimentResult res;
  res.name = "series";
  for (int j = 1; j <= std::min(3, series.order()); ++j) {
    res.metric("coeff_" + std::to_string(j), asymptotic_coefficient(series, j));
  }
  emit(ctx, "series.csv", series_csv(series));
  return finish(ctx, cfg, res);
}

int run_model(const RunConfig& cfg, const SubCtx& ctx) {
  cfg.validate();
  auto series = build_correction_series(cfg.b, std::max(cfg.k, 1), cfg.eta_max);
  auto spec = model_spec(cfg, series);
  ExperimentResult res;
  res.name = "model";
  double f_sup = 0.0, phi_min = 0.0, psi_min = 0.0;
  const int points = 400;
  for (int i = 0; i <= points; ++i) {
    double rho = 1e-6 * std::pow(cfg.delta * cfg.delta / 1e-6, double(i) / points);
    auto g = glued_model(spec, cfg.T, rho);
    f_sup = std::max(f_sup, std::abs(g.f));
    phi_min = (i == 0) ? g.phi : std::min(phi_min, g.phi);
    psi_min = (i == 0) ? g.psi : std::min(psi_min, g.psi);
  }
  res.metric("f_sup", f_sup);
  res.metric("phi_min", phi_min);
  res.metric("psi_min", psi_min);
  emit(ctx, "model.csv", model_csv(spec, cfg.T));
  return finish(ctx, cfg, res);
}

int run_evolve(const RunConfig& cfg, const SubCtx& ctx) {
  cfg.validate();
  auto series = build_correction_series(cfg.b, std::max(cfg.k, 1), cfg.eta_max);
  auto spec = model_spec(cfg, series);
  FlowProblem problem(spec);
  auto grid = make_flow_grid(cfg.rho_floor_scale / cfg.t_end,
                             cfg.delta * cfg.delta, std::size_t(cfg.nodes));
  SolverConfig scfg;
  scfg.dt_kappa = cfg.dt_kappa;
  scfg.newton_tol = cfg.newton_tol;
  auto trace = evolve(cfg.T, cfg.t_end, problem, scfg, grid);
  ExperimentResult res;
  res.name = "evolve";
  res.metric("K_end", trace.bilip.back());
  res.metric("sup_v_end", trace.sup_v.back());
  res.metric("sup_f_end", trace.sup_f.back());
  res.metric("area_end", trace.area.back());
  res.metric("samples", double(trace.times.size()));
  res.metric("steps", double(trace.dense_t.size()));
  emit(ctx, "trace.csv", trace_csv(trace));
  return finish(ctx, cfg, res);
}

int run_verify(const std::string& which, const RunConfig& cfg, const SubCtx& ctx) {
  if (which == "lemma1") return finish(ctx, cfg, lemma1_experiment(cfg));
  if (which == "lemma2") return finish(ctx, cfg, lemma2_experiment(cfg));
  if (which == "lemma3") return finish(ctx, cfg, lemma3_experiment(cfg));
  WeightedSweepRun run =
      (which == "lemma4") ? lemma4_experiment(cfg) : lemma6_experiment(cfg);
  emit(ctx, which + "_sweep.csv",
       weighted_sweep_csv(run.t, run.weighted_sup, run.weighted_holder));
  return finish(ctx, cfg, run.result);
}

int run_theorem1(const RunConfig& cfg, const SubCtx& ctx) {
  auto run = theorem1_experiment(cfg);
  emit(ctx, "trace.csv", trace_csv(run.trace));
  return finish(ctx, cfg, run.result);
}

int run_theorem2(const RunConfig& cfg, const SubCtx& ctx) {
  auto run = theorem2_experiment(cfg);
  emit(ctx, "trace.csv", trace_csv(run.main.trace));
  return finish(ctx, cfg, run.result);
}

int run_corollary1(const RunConfig& cfg, const SubCtx& ctx) {
  auto run = corollary1_experiment(cfg);
  emit(ctx, "deviation.csv", column_csv({"t", "deviation"}, {&run.t, &run.deviation}));
  return finish(ctx, cfg, run.result);
}

int run_stability(const RunConfig& cfg, const SubCtx& ctx) {
  auto run = stability_experiment(cfg);
  emit(ctx, "trace.csv", trace_csv(run.trace));
  emit(ctx, "margins.csv",
       column_csv({"t", "margin", "integral"},
                  {&run.trace.times, &run.report.margin, &run.report.integral}));
  return finish(ctx, cfg, run.result);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical laboratory for a U(2)-symmetric radial Ricci flow"};
  app.require_subcommand(0, 1);
  bool root_print = false;
  app.add_flag("--print-config", root_print, "print the default config and exit");

  SubCtx ctx[8];
  attach_common(app.add_subcommand("series", "correction series tables"), ctx[0]);
  attach_common(app.add_subcommand("model", "glued model slice at t = T"), ctx[1]);
  attach_common(app.add_subcommand("evolve", "run the flow, emit the trace"), ctx[2]);
  std::string lemma;
  CLI::App* verify = app.add_subcommand("verify", "lemma-level checks");
  verify->add_option("lemma", lemma, "which check")
      ->required()
      ->check(CLI::IsMember({"lemma1", "lemma2", "lemma3", "lemma4", "lemma6"}));
  attach_common(verify, ctx[3]);
  attach_common(app.add_subcommand("theorem1", "first decay experiment"), ctx[4]);
  attach_common(app.add_subcommand("theorem2", "refined decay + separation"), ctx[5]);
  attach_common(app.add_subcommand("corollary1", "rescaled pullback decay"), ctx[6]);
  attach_common(app.add_subcommand("stability", "sup-norm bound along a run"), ctx[7]);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (app.get_subcommands().empty()) {
      if (root_print) {
        print_run_config(RunConfig{}, std::cout);
      } else {
        std::cout << app.help();
      }
      return 0;
    }
    const std::function<int(const RunConfig&, const SubCtx&)> runners[8] = {
        run_series,
        run_model,
        run_evolve,
        [&lemma](const RunConfig& c, const SubCtx& x) { return run_verify(lemma, c, x); },
        run_theorem1,
        run_theorem2,
        run_corollary1,
        run_stability};
    for (int i = 0; i < 8; ++i) {
      if (!ctx[i].cmd->parsed()) continue;
      RunConfig cfg = effective_config(ctx[i]);
      if (ctx[i].print_config) {
        print_run_config(cfg, std::cout);
        return 0;
      }
      return runners[i](cfg, ctx[i]);
    }
    return 2;  // unreachable
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
