// cdo_lab: command-line laboratory for concentrating Dirac operators.
// Each subcommand runs one experiment from a flat config file, writes a JSON
// report that embeds the resolved config and seed, plus (for the decay
// family) a CSV with the frozen plotting schema. Exit codes are a stable
// contract: 0 = pass, 1 = a report threshold failed, 2 = solver or
// infrastructure failure (malformed config, non-convergence, I/O).

#include <cstdio>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "cdo/config.hpp"
#include "cdo/experiments.hpp"
#include "cdo/identity_checks.hpp"
#include "cdo/matrix_market.hpp"
#include "cdo/reports.hpp"

using namespace cdo;

namespace {

// ---------- shared flags ----------

struct CommonArgs {
  std::string config_path;
  std::string out;
  uint64_t seed = 0;
  bool seed_set = false;
  int jobs = 0;
};

void add_common(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("--config", a.config_path, "flat sectioned key = value config file");
  cmd->add_option("--out", a.out, "output directory for reports");
  cmd->add_option("--seed", a.seed, "override the experiment seed")
      ->each([&a](const std::string&) { a.seed_set = true; });
  cmd->add_option("--jobs", a.jobs, "worker threads for operator applies");
}

ExperimentConfig resolve(const CommonArgs& a, const std::string& kind) {
  RawConfig raw;
  if (!a.config_path.empty()) raw = load_config_file(a.config_path);
  ExperimentConfig cfg = make_experiment_config(raw);
  cfg.experiment = kind;
  if (a.seed_set) cfg.seed = a.seed;
  if (!a.out.empty()) cfg.out_dir = a.out;
  if (a.jobs > 0) cfg.jobs = a.jobs;
  cfg.decay.seed = cfg.seed;
  cfg.decay.jobs = cfg.jobs;
  cfg.collapse.decay.seed = cfg.seed;
  cfg.collapse.decay.jobs = cfg.jobs;
  std::filesystem::create_directories(cfg.out_dir);
  return cfg;
}

std::string out_path(const ExperimentConfig& cfg, const std::string& name) {
  return (std::filesystem::path(cfg.out_dir) / name).string();
}

GridDomain experiment_domain(const ExperimentConfig& cfg, bool needs_singular) {
  if (needs_singular && cfg.domain.singular == SingularKind::none)
    throw ConfigError("this experiment measures decay away from a singular set; "
                      "set domain.singular = tube or point");
  return make_domain(cfg.domain);
}

// ---------- verify-algebra ----------

int cmd_verify_algebra(const ExperimentConfig& cfg, bool inject) {
  std::vector<IdentityDefect> defects = identity_suite(cfg.cases, cfg.fibers, cfg.seed, inject);

  bool pass = true;
  Json entries = Json::array();
  for (const IdentityDefect& idf : defects) {
    bool ok = idf.defect <= cfg.identity_tol;
    pass = pass && ok;
    std::printf("%-24s case %-3s defect %.3e  %s\n", idf.identity.c_str(), idf.case_id.c_str(),
                idf.defect, ok ? "ok" : "FAIL");
    entries.push_back(Json{{"identity", idf.identity},
                           {"case", idf.case_id},
                           {"defect", idf.defect},
                           {"pass", ok}});
  }
  Json j = config_to_json(cfg);
  j["checks"] = entries;
  j["injected_corruption"] = inject;
  j["pass"] = pass;
  write_json_report(out_path(cfg, "verify-algebra.json"), j);
  std::printf("verify-algebra: %zu checks, %s\n", defects.size(), pass ? "pass" : "FAIL");
  return pass ? 0 : 1;
}

// ---------- decay family ----------

bool deep_regime(const DecayReport& rep, double eps) {
  return rep.lambda_k / eps * rep.window_hi >= 5.0;
}

int cmd_decay(const ExperimentConfig& cfg) {
  GridDomain dom = experiment_domain(cfg, true);
  SWCaseData data = make_case(cfg.case_id);
  bool pass = true;
  std::vector<CsvRow> rows;
  Json runs = Json::array();
  Vec inv_eps, slopes;
  for (double eps : cfg.eps) {
    DecayReport rep = run_linear_decay(dom, data, cfg.profile, eps, cfg.mode, cfg.decay);
    append_decay_rows(rows, rep);
    Json jr = decay_report_to_json(rep, cfg.mode);
    bool slope_ok = !deep_regime(rep, eps) || rep.fit.slope < 0.0;
    bool cap_ok = rep.lambda_cap_ok;
    jr["slope_ok"] = slope_ok;
    pass = pass && slope_ok && cap_ok;
    runs.push_back(jr);
    inv_eps.push_back(1.0 / eps);
    slopes.push_back(rep.fit.slope);
    std::printf("decay eps=%-6g slope=%+.5f r2=%.5f shells=%d %s\n", eps, rep.fit.slope,
                rep.fit.r2, rep.shells_used, slope_ok && cap_ok ? "ok" : "FAIL");
  }
  Json j = config_to_json(cfg);
  j["runs"] = runs;
  if (cfg.eps.size() >= 3) {
    LineFit sweep = linefit(inv_eps, slopes);
    j["sweep"] = fit_to_json(sweep);
    bool sweep_ok = sweep.slope < 0.0 && sweep.r2 > cfg.sweep_r2_min;
    j["sweep_ok"] = sweep_ok;
    pass = pass && sweep_ok;
    std::printf("decay sweep slope=%+.5f r2=%.5f %s\n", sweep.slope, sweep.r2,
                sweep_ok ? "ok" : "FAIL");
  }
  j["pass"] = pass;
  write_json_report(out_path(cfg, "decay.json"), j);
  write_text_file(out_path(cfg, "decay.csv"), csv_text(rows));
  return pass ? 0 : 1;
}

int cmd_nonlinear(const ExperimentConfig& cfg) {
  GridDomain dom = experiment_domain(cfg, true);
  SWCaseData data = make_case(cfg.case_id);
  bool pass = true;
  std::vector<CsvRow> rows;
  Json runs = Json::array();
  for (double eps : cfg.eps) {
    DecayReport rep = run_nonlinear_decay(dom, data, cfg.profile, eps, cfg.coupling, cfg.decay);
    append_decay_rows(rows, rep);
    bool ok = rep.picard_converged && !rep.diverged && rep.condition_ok &&
              (!deep_regime(rep, eps) || rep.fit.slope < 0.0);
    pass = pass && ok;
    Json jr = nonlinear_report_to_json(rep);
    jr["coupling"] = cfg.coupling;
    runs.push_back(jr);
    std::printf("nonlinear eps=%-6g coupling=%g slope=%+.5f picard=%d cond=%s %s\n", eps,
                cfg.coupling, rep.fit.slope, rep.picard_iters, rep.condition_ok ? "ok" : "violated",
                ok ? "ok" : "FAIL");
    if (!rep.diagnosis.empty()) std::printf("  diagnosis: %s\n", rep.diagnosis.c_str());
  }
  Json j = config_to_json(cfg);
  j["runs"] = runs;
  j["pass"] = pass;
  write_json_report(out_path(cfg, "nonlinear-decay.json"), j);
  write_text_file(out_path(cfg, "nonlinear-decay.csv"), csv_text(rows));
  return pass ? 0 : 1;
}

int cmd_collapse(const ExperimentConfig& cfg) {
  if (cfg.eps.size() < 2) throw ConfigError("scale-collapse needs at least two epsilon values");
  GridDomain dom = experiment_domain(cfg, true);
  SWCaseData data = make_case(cfg.case_id);
  CollapseOptions co = cfg.collapse;
  CollapseReport rep = run_scale_collapse(dom, data, cfg.eps, co);
  bool collapse_ok = rep.max_pair_dist <= cfg.collapse_tol;
  bool control_ok = rep.control_max_pair_dist > cfg.control_min;
  bool pass = collapse_ok && control_ok;
  std::printf("collapse dist=%.4f (tol %.2f) control=%.4f (min %.2f) %s\n", rep.max_pair_dist,
              cfg.collapse_tol, rep.control_max_pair_dist, cfg.control_min,
              pass ? "ok" : "FAIL");
  Json j = config_to_json(cfg);
  j["report"] = collapse_report_to_json(rep);
  j["collapse_ok"] = collapse_ok;
  j["control_ok"] = control_ok;
  j["pass"] = pass;
  write_json_report(out_path(cfg, "scale-collapse.json"), j);
  std::vector<CsvRow> rows;
  append_collapse_rows(rows, rep);
  write_text_file(out_path(cfg, "scale-collapse.csv"), csv_text(rows));
  return pass ? 0 : 1;
}

// ---------- screened Green kernels ----------

int cmd_green(const ExperimentConfig& cfg) {
  bool pass = true;
  Json entries = Json::array();
  for (double kappa : cfg.kappas)
    for (double mass : cfg.masses) {
      GreenCompareReport rep = run_green_comparison(cfg.green_r0, mass, kappa, cfg.green);
      // the half-mass comparison rests on an absorption inequality that
      // needs the screening length well inside the ball
      bool regime_ok = mass * cfg.green_r0 >= 3.0;
      bool bound_ok = !regime_ok || rep.max_bound_ratio <= cfg.ratio_margin;
      bool cross_ok = rep.cross_max_dev <= cfg.cross_tol;
      pass = pass && bound_ok && cross_ok;
      Json je = green_report_to_json(rep, cfg.green_r0, mass, kappa);
      je["regime_ok"] = regime_ok;
      je["bound_ok"] = bound_ok;
      je["cross_ok"] = cross_ok;
      entries.push_back(je);
      std::printf("green kappa=%-4g m=%-4g bound=%.4f%s cross=%.4f %s\n", kappa, mass,
                  rep.max_bound_ratio, regime_ok ? "" : " (regime flagged, not asserted)",
                  rep.cross_max_dev, bound_ok && cross_ok ? "ok" : "FAIL");
    }
  Json j = config_to_json(cfg);
  j["entries"] = entries;
  j["pass"] = pass;
  write_json_report(out_path(cfg, "green.json"), j);
  return pass ? 0 : 1;
}

int cmd_harnack(const ExperimentConfig& cfg) {
  DomainSpec spec = cfg.domain;
  if (spec.boundary != Boundary::dirichlet_ball)
    throw ConfigError("harnack runs on a ball domain; set domain.boundary = ball");
  GridDomain dom = make_domain(spec);
  int64_t src = dom.index(spec.N[0] / 2, spec.N[1] / 2, spec.N[2] / 2);
  bool pass = true;
  double lo = 1e300, hi = 0;
  Json entries = Json::array();
  for (double mass : cfg.masses) {
    GreenResult gr = green_solve(dom, mass, src, cfg.green.cg_tol, cfg.green.cg_max_iter);
    auto radii = dyadic_annuli(cfg.annuli_start, mass, cfg.annuli_floor_cells * dom.h[0]);
    HarnackReport rep = harnack_ratio(dom, gr.u, radii);
    bool ge1 = true;
    for (double rt : rep.annulus_ratio) ge1 = ge1 && rt >= 1.0;
    pass = pass && ge1;
    lo = std::min(lo, rep.max_ratio);
    hi = std::max(hi, rep.max_ratio);
    Json je = harnack_report_to_json(rep, mass);
    je["annuli"] = radii;
    entries.push_back(je);
    std::printf("harnack m=%-4g annuli=%zu max_ratio=%.4f sectors=%d skipped=%d\n", mass,
                radii.size() - 1, rep.max_ratio, rep.sectors_used, rep.sectors_skipped);
  }
  bool uniform = hi <= cfg.harnack_vary * lo;
  pass = pass && uniform;
  std::printf("harnack spread %.4f..%.4f (vary <= %gx) %s\n", lo, hi, cfg.harnack_vary,
              pass ? "ok" : "FAIL");
  Json j = config_to_json(cfg);
  j["entries"] = entries;
  j["uniform"] = uniform;
  j["pass"] = pass;
  write_json_report(out_path(cfg, "harnack.json"), j);
  return pass ? 0 : 1;
}

// ---------- matrix export ----------

int cmd_export_matrix(const ExperimentConfig& cfg) {
  GridDomain dom = make_domain(cfg.domain);
  SWCaseData data = make_case(cfg.case_id);
  SpinorField phi0 = sample_phi0(dom, cfg.profile, data);
  CliffordModel model = full_symbol_model(data);
  SparseOperator D = assemble_D(dom, model);
  bool with_interaction = cfg.include_interaction && cfg.raw.kv.count("experiment.eps") > 0;
  SparseOperator op;
  std::map<std::string, std::string> meta;
  char buf[64];
  if (with_interaction) {
    SparseOperator A = assemble_A(dom, data, phi0);
    op = assemble_Deps(D, A, cfg.eps[0]);
    std::snprintf(buf, sizeof buf, "%.17g", cfg.eps[0]);
    meta["eps"] = buf;
  } else {
    op = D;
    meta["eps"] = "none (differential part only)";
  }
  std::snprintf(buf, sizeof buf, "%.17g", dom.h[0]);
  meta["h"] = buf;
  meta["case"] = case_name(cfg.case_id);
  meta["profile"] = cfg.profile.kind == ProfileKind::constant_gap ? "constant_gap"
                    : cfg.profile.kind == ProfileKind::sqrt_dist  ? "sqrt_dist"
                                                                  : "smooth_bump";
  std::snprintf(buf, sizeof buf, "%d,%d,%d", dom.spec.N[0], dom.spec.N[1], dom.spec.N[2]);
  meta["n"] = buf;

  std::string path = out_path(cfg, "operator.mtx");
  write_matrix_market(path, op, meta);
  SparseOperator back = read_matrix_market(path);
  double diff = sp_max_diff(op, back);
  if (diff != 0.0) {
    std::fprintf(stderr, "matrix export round-trip mismatch: %g\n", diff);
    return 2;
  }
  std::printf("export-matrix: %lld rows, %lld entries, round-trip exact -> %s\n",
              (long long)op.n, (long long)op.nnz(), path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"numerical laboratory for concentrating Dirac operators"};
  app.require_subcommand(1);

  CommonArgs args;
  bool inject = false;

  CLI::App* verify = app.add_subcommand("verify-algebra", "algebraic identity suite, cases I-IV");
  add_common(verify, args);
  verify->add_flag("--inject-corruption", inject, "negative control: sign-flip one frame block");
  CLI::App* decay = app.add_subcommand("decay", "linear decay profiles across an epsilon sweep");
  add_common(decay, args);
  CLI::App* nonlinear =
      app.add_subcommand("nonlinear-decay", "quadratic extension via Picard iteration");
  add_common(nonlinear, args);
  CLI::App* collapse =
      app.add_subcommand("scale-collapse", "profile collapse in the rescaled variable");
  add_common(collapse, args);
  CLI::App* green = app.add_subcommand("green", "screened kernel comparison against oracles");
  add_common(green, args);
  CLI::App* harnack = app.add_subcommand("harnack", "sector ratios on dyadic annuli");
  add_common(harnack, args);
  CLI::App* exportm = app.add_subcommand("export-matrix", "assembled operator as Matrix Market");
  add_common(exportm, args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (verify->parsed()) return cmd_verify_algebra(resolve(args, "verify-algebra"), inject);
    if (decay->parsed()) return cmd_decay(resolve(args, "decay"));
    if (nonlinear->parsed()) return cmd_nonlinear(resolve(args, "nonlinear-decay"));
    if (collapse->parsed()) return cmd_collapse(resolve(args, "scale-collapse"));
    if (green->parsed()) return cmd_green(resolve(args, "green"));
    if (harnack->parsed()) return cmd_harnack(resolve(args, "harnack"));
    if (exportm->parsed()) return cmd_export_matrix(resolve(args, "export-matrix"));
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "solver failure: %s\n", e.what());
    return 2;
  }
  return 2;  // unreachable: a subcommand is required
}
