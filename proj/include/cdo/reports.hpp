#pragma once
// Report serialization. Two outputs per experiment: a JSON document that
// embeds the full resolved config and seed (a run is reproducible from its
// own report), and a flat CSV with a frozen, versioned schema for plotting.
// All numbers print with %.17g so identical runs are byte-identical.

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "cdo/config.hpp"
#include "cdo/experiments.hpp"

namespace cdo {

// ---------- frozen CSV schema ----------

inline constexpr const char* kCsvSchemaLine = "# cdo-csv schema 1";
inline constexpr const char* kCsvHeader = "eps,R,shell_sup,fit_slope,fit_r2";

struct CsvRow {
  double eps = 0, r = 0, shell_sup = 0, fit_slope = 0, fit_r2 = 0;
};

inline void append_decay_rows(std::vector<CsvRow>& rows, const DecayReport& rep) {
  for (size_t i = 0; i < rep.shell_radii.size(); ++i)
    rows.push_back({rep.eps, rep.shell_radii[i], rep.shell_sup[i], rep.fit.slope, rep.fit.r2});
}

// collapse profiles plot against the rescaled variable, so that is the R
// column; the slope/r2 columns carry the per-profile line fit in s
inline void append_collapse_rows(std::vector<CsvRow>& rows, const CollapseReport& rep) {
  for (const CollapseProfile& p : rep.profiles) {
    LineFit fit = linefit(p.s, p.ln_sup);
    for (size_t i = 0; i < p.s.size(); ++i)
      rows.push_back({p.eps, p.s[i], std::exp(p.ln_sup[i]), fit.slope, fit.r2});
  }
}

inline std::string csv_text(const std::vector<CsvRow>& rows) {
  std::string out;
  out += kCsvSchemaLine;
  out += "\n";
  out += kCsvHeader;
  out += "\n";
  char buf[160];
  for (const CsvRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g\n", r.eps, r.r, r.shell_sup,
                  r.fit_slope, r.fit_r2);
    out += buf;
  }
  return out;
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);  // binary keeps bytes identical across platforms
  if (!f) throw std::runtime_error("cannot open output file " + path);
  f << text;
  if (!f) throw std::runtime_error("write failed for " + path);
}

// ---------- JSON reports ----------

using Json = nlohmann::ordered_json;

inline Json config_to_json(const ExperimentConfig& cfg) {
  Json j;
  j["experiment"] = cfg.experiment;
  Json keys = Json::object();
  for (auto& kv : cfg.raw.kv) keys[kv.first] = kv.second;
  j["config"] = keys;  // the resolved key/value record the run was built from
  j["seed"] = cfg.seed;
  j["jobs"] = cfg.jobs;
  return j;
}

inline Json fit_to_json(const LineFit& f) {
  return Json{{"slope", f.slope}, {"intercept", f.intercept}, {"r2", f.r2}};
}

inline Json decay_report_to_json(const DecayReport& rep, DecayMode mode) {
  Json j;
  j["eps"] = rep.eps;
  j["mode"] = mode == DecayMode::kernel ? "kernel" : "inhomogeneous";
  j["shell_radii"] = rep.shell_radii;
  j["shell_sup"] = rep.shell_sup;
  j["norm_l12"] = rep.norm_l12;
  j["lambda_k"] = rep.lambda_k;
  j["r_k"] = rep.r_k;
  j["fit"] = fit_to_json(rep.fit);
  j["window"] = {rep.window_lo, rep.window_hi};
  j["floor_value"] = rep.floor_value;
  j["shells_used"] = rep.shells_used;
  if (mode == DecayMode::kernel) {
    j["lambda_min"] = rep.lambda_min;
    j["eig_resid"] = rep.eig_resid;
    j["eig_outers"] = rep.eig_outers;
    j["lambda_cap_ok"] = rep.lambda_cap_ok;
  } else {
    j["solve_iters"] = rep.solve.iters;
    j["solve_resid"] = rep.solve.resid;
  }
  return j;
}

inline Json nonlinear_report_to_json(const DecayReport& rep) {
  Json j = decay_report_to_json(rep, DecayMode::inhomogeneous);
  j["picard_iters"] = rep.picard_iters;
  j["picard_converged"] = rep.picard_converged;
  j["diverged"] = rep.diverged;
  j["condition_ok"] = rep.condition_ok;
  j["update_rel"] = rep.update_rel;
  j["q1_sup"] = rep.q1_sup;
  j["q1_l1n"] = rep.q1_l1n;
  if (!rep.diagnosis.empty()) j["diagnosis"] = rep.diagnosis;
  return j;
}

inline Json collapse_report_to_json(const CollapseReport& rep) {
  Json j;
  j["max_pair_dist"] = rep.max_pair_dist;
  j["control_max_pair_dist"] = rep.control_max_pair_dist;
  j["range"] = rep.range;
  j["control_range"] = rep.control_range;
  Json profs = Json::array();
  for (const CollapseProfile& p : rep.profiles)
    profs.push_back(Json{{"eps", p.eps}, {"s", p.s}, {"ln_sup", p.ln_sup}});
  j["profiles"] = profs;
  return j;
}

inline Json green_report_to_json(const GreenCompareReport& rep, double r0, double mass,
                                 double kappa) {
  Json j;
  j["r0"] = r0;
  j["mass"] = mass;
  j["kappa"] = kappa;
  j["max_bound_ratio"] = rep.max_bound_ratio;
  j["bound_r_at_max"] = rep.bound_r_at_max;
  j["cross_max_dev"] = rep.cross_max_dev;
  j["cross_bins_used"] = rep.cross_bins_used;
  j["nodes_checked"] = rep.nodes_checked;
  j["solve_iters"] = rep.solve.iters;
  return j;
}

inline Json harnack_report_to_json(const HarnackReport& rep, double mass) {
  Json j;
  j["mass"] = mass;
  j["max_ratio"] = rep.max_ratio;
  j["annulus_ratio"] = rep.annulus_ratio;
  j["sectors_used"] = rep.sectors_used;
  j["sectors_skipped"] = rep.sectors_skipped;
  return j;
}

inline void write_json_report(const std::string& path, const Json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

}  // namespace cdo
