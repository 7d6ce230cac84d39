#pragma once
// Flat sectioned key = value experiment configs: one nesting level
// ([section] then keys), # comments, strict unknown-key detection so typos
// fail loudly, and line numbers in every parse error. The raw text survives
// into the resolved record so reports can embed exactly what they ran from.

#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cdo/domain.hpp"
#include "cdo/experiments.hpp"
#include "cdo/sw_algebra.hpp"

namespace cdo {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------- raw key/value layer ----------

struct RawConfig {
  std::map<std::string, std::string> kv;  // keys are "section.key"
  std::map<std::string, int> line_of;
  std::string source = "<memory>";
};

namespace detail {

inline std::string cfg_trim(const std::string& s) {
  size_t a = 0, b = s.size();
  while (a < b && std::isspace((unsigned char)s[a])) ++a;
  while (b > a && std::isspace((unsigned char)s[b - 1])) --b;
  return s.substr(a, b - a);
}

[[noreturn]] inline void cfg_fail(const RawConfig& raw, int line, const std::string& msg) {
  std::ostringstream os;
  os << raw.source << ":" << line << ": " << msg;
  throw ConfigError(os.str());
}

}  // namespace detail

inline RawConfig parse_config_text(const std::string& text, const std::string& source = "<memory>") {
  RawConfig raw;
  raw.source = source;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::cfg_trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3)
        detail::cfg_fail(raw, lineno, "malformed section header '" + line + "'");
      section = detail::cfg_trim(line.substr(1, line.size() - 2));
      if (section.empty() || section.find('.') != std::string::npos)
        detail::cfg_fail(raw, lineno, "bad section name '" + section + "'");
      continue;
    }
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      detail::cfg_fail(raw, lineno, "expected 'key = value', got '" + line + "'");
    std::string key = detail::cfg_trim(line.substr(0, eq));
    std::string val = detail::cfg_trim(line.substr(eq + 1));
    if (key.empty()) detail::cfg_fail(raw, lineno, "empty key");
    if (section.empty()) detail::cfg_fail(raw, lineno, "key '" + key + "' outside any section");
    std::string full = section + "." + key;
    auto prev = raw.line_of.find(full);
    if (prev != raw.line_of.end())
      detail::cfg_fail(raw, lineno,
                       "duplicate key '" + full + "' (first set on line " +
                           std::to_string(prev->second) + ")");
    raw.kv[full] = val;
    raw.line_of[full] = lineno;
  }
  return raw;
}

inline RawConfig load_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file " + path);
  std::ostringstream os;
  os << f.rdbuf();
  return parse_config_text(os.str(), path);
}

// ---------- typed reader with strict key accounting ----------

struct ConfigReader {
  const RawConfig* raw;
  mutable std::set<std::string> used;

  bool has(const std::string& key) const {
    used.insert(key);
    return raw->kv.count(key) > 0;
  }
  std::string str(const std::string& key, const std::string& def) const {
    return has(key) ? raw->kv.at(key) : def;
  }
  double num(const std::string& key, double def) const {
    if (!has(key)) return def;
    const std::string& v = raw->kv.at(key);
    size_t pos = 0;
    double out;
    try {
      out = std::stod(v, &pos);
    } catch (const std::exception&) {
      fail(key, "expected a number, got '" + v + "'");
    }
    if (pos != v.size()) fail(key, "trailing characters in number '" + v + "'");
    return out;
  }
  int integer(const std::string& key, int def) const {
    double v = num(key, def);
    if (v != (double)(int)v) fail(key, "expected an integer");
    return (int)v;
  }
  uint64_t u64(const std::string& key, uint64_t def) const {
    if (!has(key)) return def;
    const std::string& v = raw->kv.at(key);
    try {
      size_t pos = 0;
      uint64_t out = std::stoull(v, &pos);
      if (pos != v.size()) throw std::invalid_argument("trailing");
      return out;
    } catch (const std::exception&) {
      fail(key, "expected an unsigned integer, got '" + v + "'");
    }
  }
  bool flag(const std::string& key, bool def) const {
    if (!has(key)) return def;
    const std::string& v = raw->kv.at(key);
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    fail(key, "expected true/false, got '" + v + "'");
  }
  std::vector<double> list(const std::string& key, std::vector<double> def) const {
    if (!has(key)) return def;
    std::vector<double> out;
    std::istringstream ss(raw->kv.at(key));
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = detail::cfg_trim(item);
      if (item.empty()) fail(key, "empty list entry");
      try {
        size_t pos = 0;
        out.push_back(std::stod(item, &pos));
        if (pos != item.size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        fail(key, "bad list entry '" + item + "'");
      }
    }
    if (out.empty()) fail(key, "empty list");
    return out;
  }

  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    auto it = raw->line_of.find(key);
    detail::cfg_fail(*raw, it == raw->line_of.end() ? 0 : it->second, key + ": " + msg);
  }

  // every provided key must have been consumed by the schema
  void finish() const {
    for (auto& kv : raw->kv)
      if (!used.count(kv.first))
        detail::cfg_fail(*raw, raw->line_of.at(kv.first), "unknown key '" + kv.first + "'");
  }
};

// ---------- resolved experiment record ----------

struct ExperimentConfig {
  std::string experiment;  // subcommand; CLI overrides what the file says
  DomainSpec domain;
  CaseId case_id = CaseId::I;
  BaseSpinorProfile profile;
  std::vector<double> eps{0.1};
  DecayMode mode = DecayMode::inhomogeneous;
  double coupling = 0.01;
  DecayOptions decay;
  CollapseOptions collapse;
  // green comparison / harnack
  double green_r0 = 0.8;
  std::vector<double> masses{10.0};
  std::vector<double> kappas{0.0};
  GreenCompareOptions green;
  double annuli_start = 0.8;
  double annuli_floor_cells = 6.0;
  // matrix export
  bool include_interaction = true;
  // report pass/fail thresholds
  double sweep_r2_min = 0.99;    // slope-vs-1/eps regression quality
  double collapse_tol = 0.10;    // rescaled profiles must agree this well
  double control_min = 0.25;     // ... and the wrong variable must not
  double ratio_margin = 1.0;     // screened kernel vs half-mass comparison
  double cross_tol = 0.03;       // grid vs radial-oracle deviation
  double harnack_vary = 2.0;     // ratio spread across the mass sweep
  double identity_tol = 1e-12;   // algebraic identity defects
  int fibers = 1000;             // random fibers per identity check
  std::vector<CaseId> cases{CaseId::I, CaseId::II, CaseId::III, CaseId::IV};
  uint64_t seed = 7;
  int jobs = 1;
  std::string out_dir = ".";
  RawConfig raw;
};

namespace detail {

inline CaseId parse_case_id(const ConfigReader& r, const std::string& key) {
  std::string v = r.str(key, "I");
  if (v == "I" || v == "1") return CaseId::I;
  if (v == "II" || v == "2") return CaseId::II;
  if (v == "III" || v == "3") return CaseId::III;
  if (v == "IV" || v == "4") return CaseId::IV;
  r.fail(key, "unknown case '" + v + "'");
}

inline ProfileKind parse_profile_kind(const ConfigReader& r, const std::string& key) {
  std::string v = r.str(key, "constant_gap");
  if (v == "constant_gap") return ProfileKind::constant_gap;
  if (v == "sqrt_dist") return ProfileKind::sqrt_dist;
  if (v == "smooth_bump") return ProfileKind::smooth_bump;
  r.fail(key, "unknown profile kind '" + v + "'");
}

}  // namespace detail

inline ExperimentConfig make_experiment_config(const RawConfig& raw) {
  ConfigReader r{&raw};
  ExperimentConfig c;
  c.raw = raw;

  // [domain]
  {
    std::vector<double> n = r.list("domain.n", {16, 16, 16});
    if (n.size() == 1) n = {n[0], n[0], n[0]};
    if (n.size() != 3) r.fail("domain.n", "need 1 or 3 entries");
    for (int a = 0; a < 3; ++a) {
      if (n[a] != (double)(int)n[a] || n[a] < 1) r.fail("domain.n", "entries must be positive integers");
      c.domain.N[a] = (int)n[a];
    }
    std::vector<double> l = r.list("domain.l", {2, 2, 2});
    if (l.size() == 1) l = {l[0], l[0], l[0]};
    if (l.size() != 3) r.fail("domain.l", "need 1 or 3 entries");
    for (int a = 0; a < 3; ++a) {
      if (l[a] <= 0) r.fail("domain.l", "edge lengths must be positive");
      c.domain.L[a] = l[a];
    }
    std::string b = r.str("domain.boundary", "periodic");
    if (b == "periodic")
      c.domain.boundary = Boundary::periodic;
    else if (b == "ball")
      c.domain.boundary = Boundary::dirichlet_ball;
    else
      r.fail("domain.boundary", "expected periodic or ball");
    c.domain.ball_radius = r.num("domain.ball_radius", 1.0);
    c.domain.metric_kappa = r.num("domain.kappa", 0.0);
    std::string sg = r.str("domain.singular", "none");
    if (sg == "none")
      c.domain.singular = SingularKind::none;
    else if (sg == "tube")
      c.domain.singular = SingularKind::tube;
    else if (sg == "point")
      c.domain.singular = SingularKind::point;
    else
      r.fail("domain.singular", "expected none, tube, or point");
    c.domain.tube_axis = r.integer("domain.tube_axis", 2);
    if (c.domain.tube_axis < 0 || c.domain.tube_axis > 2)
      r.fail("domain.tube_axis", "axis must be 0, 1, or 2");
  }

  // [case] and [profile]
  c.case_id = detail::parse_case_id(r, "case.id");
  c.profile.kind = detail::parse_profile_kind(r, "profile.kind");
  c.profile.amplitude = r.num("profile.amplitude", 1.0);

  // [experiment]
  {
    c.experiment = r.str("experiment.kind", "");
    c.eps = r.list("experiment.eps", c.eps);
    for (double e : c.eps)
      if (e <= 0) r.fail("experiment.eps", "epsilon values must be positive");
    for (size_t i = 0; i < c.eps.size(); ++i)
      for (size_t j = i + 1; j < c.eps.size(); ++j)
        if (c.eps[i] == c.eps[j]) r.fail("experiment.eps", "epsilon values must be distinct");
    std::string m = r.str("experiment.mode", "inhomogeneous");
    if (m == "kernel")
      c.mode = DecayMode::kernel;
    else if (m == "inhomogeneous")
      c.mode = DecayMode::inhomogeneous;
    else
      r.fail("experiment.mode", "expected kernel or inhomogeneous");
    c.coupling = r.num("experiment.coupling", c.coupling);
    c.seed = r.u64("experiment.seed", c.seed);
    c.jobs = r.integer("experiment.jobs", c.jobs);
    if (c.jobs < 1) r.fail("experiment.jobs", "jobs must be >= 1");
    c.out_dir = r.str("experiment.out", c.out_dir);

    c.collapse.s_lo = r.num("experiment.s_lo", c.collapse.s_lo);
    c.collapse.s_hi = r.num("experiment.s_hi", c.collapse.s_hi);
    c.collapse.samples = r.integer("experiment.samples", c.collapse.samples);
    c.collapse.control_lo = r.num("experiment.control_lo", c.collapse.control_lo);
    c.collapse.control_hi = r.num("experiment.control_hi", c.collapse.control_hi);
    if (c.collapse.s_lo >= c.collapse.s_hi) r.fail("experiment.s_lo", "window must be ordered");
    if (c.collapse.control_lo >= c.collapse.control_hi)
      r.fail("experiment.control_lo", "window must be ordered");
    if (c.collapse.samples < 2) r.fail("experiment.samples", "need at least 2 samples");

    c.green_r0 = r.num("experiment.r0", c.green_r0);
    if (c.green_r0 <= 0) r.fail("experiment.r0", "radius must be positive");
    c.masses = r.list("experiment.masses", c.masses);
    for (double m2 : c.masses)
      if (m2 < 0) r.fail("experiment.masses", "masses must be nonnegative");
    c.kappas = r.list("experiment.kappas", c.kappas);
    c.green.n_cells = r.integer("experiment.n_cells", c.green.n_cells);
    if (c.green.n_cells < 8) r.fail("experiment.n_cells", "need at least 8 cells");
    c.green.box_factor = r.num("experiment.box_factor", c.green.box_factor);
    c.green.cross_lo = r.num("experiment.cross_lo", c.green.cross_lo);
    c.green.cross_hi = r.num("experiment.cross_hi", c.green.cross_hi);
    c.green.cross_bins = r.integer("experiment.cross_bins", c.green.cross_bins);
    c.annuli_start = r.num("experiment.annuli_start", c.annuli_start);
    c.annuli_floor_cells = r.num("experiment.annuli_floor_cells", c.annuli_floor_cells);
    if (c.annuli_start <= 0) r.fail("experiment.annuli_start", "radius must be positive");

    c.include_interaction = r.flag("experiment.include_interaction", c.include_interaction);

    auto threshold = [&](const char* key, double def) {
      double v = r.num(key, def);
      if (v <= 0) r.fail(key, "thresholds must be positive");
      return v;
    };
    c.sweep_r2_min = threshold("experiment.sweep_r2_min", c.sweep_r2_min);
    c.collapse_tol = threshold("experiment.collapse_tol", c.collapse_tol);
    c.control_min = threshold("experiment.control_min", c.control_min);
    c.ratio_margin = threshold("experiment.ratio_margin", c.ratio_margin);
    c.cross_tol = threshold("experiment.cross_tol", c.cross_tol);
    c.harnack_vary = threshold("experiment.harnack_vary", c.harnack_vary);
    c.identity_tol = threshold("experiment.identity_tol", c.identity_tol);
    c.fibers = r.integer("experiment.fibers", c.fibers);
    if (c.fibers < 1) r.fail("experiment.fibers", "need at least one fiber");
    if (r.has("experiment.cases")) {
      c.cases.clear();
      std::istringstream ss(raw.kv.at("experiment.cases"));
      std::string item;
      while (std::getline(ss, item, ',')) {
        item = detail::cfg_trim(item);
        if (item == "none") continue;  // explicit empty list
        if (item == "I" || item == "1")
          c.cases.push_back(CaseId::I);
        else if (item == "II" || item == "2")
          c.cases.push_back(CaseId::II);
        else if (item == "III" || item == "3")
          c.cases.push_back(CaseId::III);
        else if (item == "IV" || item == "4")
          c.cases.push_back(CaseId::IV);
        else
          r.fail("experiment.cases", "unknown case '" + item + "'");
      }
    }
  }

  // [solver] tolerances; the collapse sub-runs keep their own fit-window
  // defaults but inherit the solve tolerances
  {
    auto positive = [&](const char* key, double v) {
      if (v <= 0) r.fail(key, "tolerance must be positive");
      return v;
    };
    c.decay.cg_tol = positive("solver.cg_tol", r.num("solver.cg_tol", c.decay.cg_tol));
    c.decay.cg_max_iter = r.integer("solver.cg_max_iter", c.decay.cg_max_iter);
    c.decay.eig_tol = positive("solver.eig_tol", r.num("solver.eig_tol", c.decay.eig_tol));
    c.decay.eig_shift = r.num("solver.eig_shift", c.decay.eig_shift);
    c.decay.eig_max_outer = r.integer("solver.eig_max_outer", c.decay.eig_max_outer);
    c.decay.inner_cg_tol =
        positive("solver.inner_cg_tol", r.num("solver.inner_cg_tol", c.decay.inner_cg_tol));
    c.decay.inner_cg_max_iter = r.integer("solver.inner_cg_max_iter", c.decay.inner_cg_max_iter);
    c.decay.r_k_cells = r.num("solver.r_k_cells", c.decay.r_k_cells);
    c.decay.src_radius_cells = r.num("solver.src_radius_cells", c.decay.src_radius_cells);
    c.decay.shell_stride = r.integer("solver.shell_stride", c.decay.shell_stride);
    if (c.decay.shell_stride < 1) r.fail("solver.shell_stride", "stride must be >= 1");
    c.decay.fit_pad_cells = r.num("solver.fit_pad_cells", c.decay.fit_pad_cells);
    c.decay.outer_trim = r.num("solver.outer_trim", c.decay.outer_trim);
    if (c.decay.outer_trim < 0 || c.decay.outer_trim >= 1)
      r.fail("solver.outer_trim", "trim fraction must lie in [0, 1)");
    c.decay.floor_coeff = positive("solver.floor_coeff", r.num("solver.floor_coeff", c.decay.floor_coeff));
    c.decay.kprime_factor = r.num("solver.kprime_factor", c.decay.kprime_factor);
    c.decay.lambda_cap = r.num("solver.lambda_cap", c.decay.lambda_cap);
    c.decay.picard_tol = positive("solver.picard_tol", r.num("solver.picard_tol", c.decay.picard_tol));
    c.decay.picard_max = r.integer("solver.picard_max", c.decay.picard_max);
    if (c.decay.picard_max < 1) r.fail("solver.picard_max", "need at least one iteration");
    c.decay.condition_threshold =
        r.num("solver.condition_threshold", c.decay.condition_threshold);
    // the quadratic-smallness bound must sit strictly below 1/8
    if (c.decay.condition_threshold <= 0 || c.decay.condition_threshold >= 0.125)
      r.fail("solver.condition_threshold", "threshold must lie in (0, 1/8)");
    c.green.cg_tol = positive("solver.green_cg_tol", r.num("solver.green_cg_tol", c.green.cg_tol));
    c.green.cg_max_iter = r.integer("solver.green_cg_max_iter", c.green.cg_max_iter);

    c.decay.jobs = c.jobs;
    c.decay.seed = c.seed;
    c.collapse.profile = c.profile;
    c.collapse.decay.cg_tol = c.decay.cg_tol;
    c.collapse.decay.cg_max_iter = c.decay.cg_max_iter;
    c.collapse.decay.eig_tol = c.decay.eig_tol;
    c.collapse.decay.eig_shift = c.decay.eig_shift;
    c.collapse.decay.eig_max_outer = c.decay.eig_max_outer;
    c.collapse.decay.inner_cg_tol = c.decay.inner_cg_tol;
    c.collapse.decay.inner_cg_max_iter = c.decay.inner_cg_max_iter;
    c.collapse.decay.jobs = c.jobs;
    c.collapse.decay.seed = c.seed;
  }

  r.finish();
  return c;
}

}  // namespace cdo
