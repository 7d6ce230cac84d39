#pragma once
// Quantitative experiments on the concentrating operators:
//
//   * exponential decay of the pi_H components away from the degeneracy locus
//     (near-kernel modes and localized-source solves, with ln shell-sup fits)
//   * the nonlinear extension through Picard iteration, using the linearity
//     of the interaction assembly in the base spinor
//   * the characteristic-scale collapse of rescaled profiles against
//     s = dist^{3/2} / eps, with a wrong-variable control
//   * the curved-vs-flat Green function comparison bound and Harnack ratios
//     on dyadic annuli
//   * the abelian gauge-theory residual triple on explicit configurations
//   * a 1-d two-branch ODE oracle integrated with RK4
//
// Conventions: shells are bands of width (stride*h) centered at multiples of
// stride*h of the distance field; fits are of ln(shell sup) against shell
// radius over a window that drops the collar near the inner compact-set
// radius, the outer 10% of radii, and any shell whose sup sits below the
// rounding floor. The L^{1,2} and L^{1,n} norms use forward differences.

#include <array>
#include <cmath>
#include <cstring>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "cdo/assembly.hpp"
#include "cdo/domain.hpp"
#include "cdo/linalg.hpp"
#include "cdo/solvers.hpp"
#include "cdo/sw_algebra.hpp"

namespace cdo {

// ---------- field helpers ----------

// product of the active-axis spacings (the discrete volume element)
inline double active_measure(const GridDomain& d) {
  double m = 1.0;
  for (int a = 0; a < 3; ++a)
    if (d.active[a]) m *= d.h[a];
  return m;
}

// spacing used for shell widths and cell-based radii (grids are built with
// cubic cells; the first active axis is the reference)
inline double grid_h(const GridDomain& d) {
  for (int a = 0; a < 3; ++a)
    if (d.active[a]) return d.h[a];
  throw std::runtime_error("grid_h: no active axis");
}

inline double fiber_norm(const double* p, int fd) {
  double s = 0;
  for (int c = 0; c < fd; ++c) s += p[c] * p[c];
  return std::sqrt(s);
}

inline double sup_fiber_norm(const Vec& q, int fd) {
  int64_t nodes = (int64_t)q.size() / fd;
  double m = 0;
  for (int64_t i = 0; i < nodes; ++i) m = std::max(m, fiber_norm(q.data() + i * fd, fd));
  return m;
}

inline Vec project_fiber_copy(const Vec& q, const Mat& P, int fd) {
  Vec out = q;
  detail::apply_fiber_projector(P, fd, out);
  return out;
}

// discrete W^{1,2} norm over {dist >= R}: sqrt( sum h^n (|q|^2 + |d_h q|^2) ),
// forward differences, periodic wrap, differences into masked-out nodes skipped
inline double norm_l12_over(const GridDomain& dom, const Vec& q, int fd, double R) {
  if (dom.dist.empty()) throw std::runtime_error("norm_l12_over: no singular set");
  double meas = active_measure(dom), acc = 0;
  for (int64_t n = 0; n < dom.n_nodes; ++n) {
    if (dom.dist[n] < R || !dom.interior(n)) continue;
    const double* p = q.data() + n * fd;
    double s = 0;
    for (int c = 0; c < fd; ++c) s += p[c] * p[c];
    for (int ax = 0; ax < 3; ++ax) {
      if (!dom.active[ax]) continue;
      int64_t nb = dom.neighbor(n, ax, +1);
      if (!dom.interior(nb)) continue;
      const double* pn = q.data() + nb * fd;
      double d2 = 0;
      for (int c = 0; c < fd; ++c) {
        double d = (pn[c] - p[c]) / dom.h[ax];
        d2 += d * d;
      }
      s += d2;
    }
    acc += meas * s;
  }
  return std::sqrt(acc);
}

// discrete W^{1,p} norm of a scalar node field over {dist >= R}
inline double norm_l1p_over(const GridDomain& dom, const Vec& g, double R, double p) {
  if (dom.dist.empty()) throw std::runtime_error("norm_l1p_over: no singular set");
  double meas = active_measure(dom), acc = 0;
  for (int64_t n = 0; n < dom.n_nodes; ++n) {
    if (dom.dist[n] < R || !dom.interior(n)) continue;
    double s = std::pow(std::fabs(g[n]), p);
    for (int ax = 0; ax < 3; ++ax) {
      if (!dom.active[ax]) continue;
      int64_t nb = dom.neighbor(n, ax, +1);
      if (!dom.interior(nb)) continue;
      s += std::pow(std::fabs(g[nb] - g[n]) / dom.h[ax], p);
    }
    acc += meas * s;
  }
  return std::pow(acc, 1.0 / p);
}

// ---------- shell statistics ----------

struct ShellProfile {
  Vec radii;  // multiples of stride*h with at least one node
  Vec sups;   // sup over the band of the projected fiber norm
};

// sup of |pi_H q| per distance band; q1 must already be the projected field
inline ShellProfile shell_profile(const GridDomain& dom, const Vec& q1, int fd, int stride = 2) {
  if (dom.dist.empty()) throw std::runtime_error("shell_profile: no singular set");
  double w = stride * grid_h(dom);
  std::vector<double> sups;
  for (int64_t n = 0; n < dom.n_nodes; ++n) {
    if (!dom.interior(n)) continue;
    int k = (int)std::floor(dom.dist[n] / w + 0.5);
    if (k < 0) continue;
    if ((int)sups.size() <= k) sups.resize(k + 1, -1.0);
    sups[k] = std::max(sups[k], fiber_norm(q1.data() + n * fd, fd));
  }
  ShellProfile sp;
  for (int k = 0; k < (int)sups.size(); ++k) {
    if (sups[k] < 0) continue;  // empty band
    sp.radii.push_back(k * w);
    sp.sups.push_back(sups[k]);
  }
  return sp;
}

// ---------- decay runs ----------

enum class DecayMode { kernel, inhomogeneous };

struct DecayOptions {
  double r_k_cells = 6;        // inner compact-set radius R_K in cells
  double src_radius_cells = 2.5;  // localized-source support {dist <= c*h}
  int shell_stride = 2;        // shell width in cells
  double fit_pad_cells = 4;    // fit window starts at R_K + pad*h
  double outer_trim = 0.10;    // drop the outer fraction of shell radii
  double floor_coeff = 1e3;    // usable shells: sup > coeff * eps_mach * sup|q|
  double kprime_factor = 0.5;  // K' = {dist >= factor * R_K}
  double lambda_cap = 0.0;     // kernel mode: require sqrt(lambda) <= cap/eps when > 0
  // nonlinear (Picard) controls
  double picard_tol = 1e-6;
  int picard_max = 30;
  double condition_threshold = 0.12;  // bound on the eps*|Q1| surrogates, below the 1/8 line
  // solver controls
  double cg_tol = 1e-10;
  int cg_max_iter = 50000;
  double eig_tol = 1e-7;
  double eig_shift = 1e-8;
  int eig_max_outer = 120;
  double inner_cg_tol = 1e-9;
  int inner_cg_max_iter = 20000;
  int jobs = 1;
  uint64_t seed = 7;
};

struct DecayReport {
  double eps = 0;
  Vec shell_radii, shell_sup;
  double norm_l12 = 0;   // W^{1,2} norm of q over K'
  double lambda_k = 0;   // min fiber gap over K = {dist >= r_k}
  double r_k = 0;
  LineFit fit;           // ln(shell sup) against radius over the window
  double window_lo = 0, window_hi = 0;
  double floor_value = 0;
  int shells_used = 0;
  // kernel mode
  double lambda_min = 0;
  double eig_resid = 0;
  int eig_outers = 0;
  bool lambda_cap_ok = true;
  // inhomogeneous mode
  SolveReport solve;
  // nonlinear extras
  int picard_iters = 0;
  bool picard_converged = true;
  bool diverged = false;
  bool condition_ok = true;
  Vec update_rel;   // per-iterate relative update norms
  Vec q1_sup;       // per-iterate eps * sup_{K'} |Q1|
  Vec q1_l1n;       // per-iterate eps * W^{1,n}(K') norm of |Q1|
  std::string diagnosis;
  // solution field (fiber layout, n_nodes * fiber_dim)
  Vec q;
};

namespace detail {

// fit ln(sup) over the window, dropping floored shells; fills report fit fields
inline void fit_decay(const GridDomain& dom, DecayReport& rep, const DecayOptions& opt) {
  double h = grid_h(dom);
  double lo = rep.r_k + opt.fit_pad_cells * h;
  double rmax = rep.shell_radii.empty() ? 0.0 : rep.shell_radii.back();
  double hi = (1.0 - opt.outer_trim) * rmax;
  rep.floor_value = opt.floor_coeff * std::numeric_limits<double>::epsilon() *
                    sup_fiber_norm(rep.q, (int)(rep.q.size() / dom.n_nodes));
  Vec xs, ys;
  for (size_t i = 0; i < rep.shell_radii.size(); ++i) {
    double r = rep.shell_radii[i], s = rep.shell_sup[i];
    if (r < lo || r > hi) continue;
    if (s <= rep.floor_value) continue;
    xs.push_back(r);
    ys.push_back(std::log(s));
  }
  if ((int)xs.size() < 3)
    throw std::runtime_error("decay fit: fewer than 3 usable shells between the inner collar "
                             "and the rounding floor");
  rep.fit = linefit(xs, ys);
  rep.window_lo = lo;
  rep.window_hi = hi;
  rep.shells_used = (int)xs.size();
}

// unit fiber direction inside ran(P): the first projected coordinate axis
inline Vec sector_direction(const Mat& P) {
  int fd = P.rows;
  for (int c = 0; c < fd; ++c) {
    Vec u(fd, 0.0);
    double n2 = 0;
    for (int r = 0; r < fd; ++r) {
      u[r] = P(r, c);
      n2 += u[r] * u[r];
    }
    if (n2 > 1e-12) {
      double inv = 1.0 / std::sqrt(n2);
      for (auto& v : u) v *= inv;
      return u;
    }
  }
  throw std::runtime_error("sector_direction: projector has vanishing range");
}

// localized source with values in the sector direction, supported on
// {dist <= radius}; amplitude 1 at each carrying node
inline Vec localized_source(const GridDomain& dom, const Vec& dir, int fd, double radius) {
  if (dom.dist.empty()) throw std::runtime_error("localized_source: no singular set");
  Vec f(dom.n_nodes * fd, 0.0);
  int64_t hits = 0;
  for (int64_t n = 0; n < dom.n_nodes; ++n) {
    if (!dom.interior(n) || dom.dist[n] > radius) continue;
    for (int c = 0; c < fd; ++c) f[n * fd + c] = dir[c];
    ++hits;
  }
  if (hits == 0) throw std::runtime_error("localized_source: no nodes within the source radius");
  return f;
}

// min fiber gap over {dist >= R}. The base spinor direction is constant, so
// the gap scales with the profile magnitude: lambda(y) = lambda(ref) |phi0(y)|.
inline double lambda_min_k(const GridDomain& dom, const SWCaseData& data,
                           const SpinorField& phi0, double R) {
  double lam_ref = lambda_at(data, reference_phi0(data));
  double mmin = -1.0;
  for (int64_t n = 0; n < dom.n_nodes; ++n) {
    if (dom.dist.empty() || dom.dist[n] < R || !dom.interior(n)) continue;
    double m = fiber_norm(phi0.node(n), phi0.comps);
    if (mmin < 0 || m < mmin) mmin = m;
  }
  if (mmin < 0) throw std::runtime_error("lambda_min_k: the set {dist >= R} has no nodes");
  return lam_ref * mmin;
}

// common post-processing: shells, fit, Sobolev norm, gap
inline void finish_decay_report(const GridDomain& dom, const SWCaseData& data,
                                const SpinorField& phi0, const Mat& proj_H, double eps,
                                DecayReport& rep, const DecayOptions& opt) {
  int fd = data.fiber_dim;
  rep.eps = eps;
  rep.r_k = opt.r_k_cells * grid_h(dom);
  Vec q1 = project_fiber_copy(rep.q, proj_H, fd);
  ShellProfile sp = shell_profile(dom, q1, fd, opt.shell_stride);
  rep.shell_radii = sp.radii;
  rep.shell_sup = sp.sups;
  rep.norm_l12 = norm_l12_over(dom, rep.q, fd, opt.kprime_factor * rep.r_k);
  rep.lambda_k = lambda_min_k(dom, data, phi0, rep.r_k);
  fit_decay(dom, rep, opt);
}

}  // namespace detail

// run_linear_decay: solve with the concentrating operator and fit the decay
// of the pi_H components against distance. Kernel mode takes the smallest
// sector-confined eigenpair of Deps^2 (the near-kernel mode); inhomogeneous
// mode solves Deps q = f for a source localized at the degeneracy locus with
// values in the non-degenerate sector, so the fitted slope measures the decay
// rate of the sector Green function.
inline DecayReport run_linear_decay(const GridDomain& dom, const SWCaseData& data,
                                    const BaseSpinorProfile& profile, double eps,
                                    DecayMode mode, const DecayOptions& opt = {}) {
  if (eps <= 0) throw std::invalid_argument("run_linear_decay: eps must be positive");
  SpinorField phi0 = sample_phi0(dom, profile, data);
  FiberSplitting split = splitting_at(data, reference_phi0(data));
  int fd = data.fiber_dim;
  DepsOperator op = make_deps_operator(dom, data, phi0, eps, opt.jobs);
  DecayReport rep;

  if (mode == DecayMode::kernel) {
    Vec tmp;
    ApplyFn m2 = [&](const Vec& x, Vec& y) {
      op.apply(x, tmp);
      op.apply(tmp, y);
    };
    EigOptions eo;
    eo.shift = opt.eig_shift;
    eo.tol = opt.eig_tol;
    eo.max_outer = opt.eig_max_outer;
    eo.measure = active_measure(dom);
    eo.sector = &split.proj_H;
    eo.fiber_dim = fd;
    eo.seed = opt.seed;
    eo.inner.tol = opt.inner_cg_tol;
    eo.inner.max_iter = opt.inner_cg_max_iter;
    EigReport er = kernel_approx(m2, op.size(), eo);
    if (!er.converged)
      throw std::runtime_error("run_linear_decay: near-kernel iteration did not converge");
    rep.lambda_min = er.lambda;
    rep.eig_resid = er.resid;
    rep.eig_outers = er.outer_iters;
    rep.q = std::move(er.mode);
    if (opt.lambda_cap > 0)
      rep.lambda_cap_ok = std::sqrt(std::max(0.0, er.lambda)) <= opt.lambda_cap / eps;
  } else {
    Vec dir = detail::sector_direction(split.proj_H);
    Vec f = detail::localized_source(dom, dir, fd, opt.src_radius_cells * grid_h(dom));
    ApplyFn ap = [&](const Vec& x, Vec& y) { op.apply(x, y); };
    Vec x(op.size(), 0.0);
    CgOptions co;
    co.tol = opt.cg_tol;
    co.max_iter = opt.cg_max_iter;
    rep.solve = cgnr_solve(ap, ap, f, x, co);
    if (!rep.solve.converged)
      throw std::runtime_error("run_linear_decay: least-squares solve did not converge");
    rep.q = std::move(x);
  }

  detail::finish_decay_report(dom, data, phi0, split.proj_H, eps, rep, opt);
  return rep;
}

// run_nonlinear_decay: Picard iteration for the quadratic extension. The
// nonlinearity enters as an eps-scaled update of the base spinor: since the
// interaction assembly is linear in the spinor argument,
//   A(phi0) + coupling * eps * A(q_S) = A(phi0 + coupling * eps * q_S),
// each iterate solves a bona fide concentrating operator (the commutation
// identity holds for every base spinor by construction). coupling = 0 never
// touches the base field, so the output matches the linear run bitwise.
inline DecayReport run_nonlinear_decay(const GridDomain& dom, const SWCaseData& data,
                                       const BaseSpinorProfile& profile, double eps,
                                       double coupling, const DecayOptions& opt = {}) {
  if (eps <= 0) throw std::invalid_argument("run_nonlinear_decay: eps must be positive");
  if (opt.picard_max < 1) throw std::invalid_argument("run_nonlinear_decay: picard_max >= 1");
  if (data.n != 3)
    throw std::invalid_argument("run_nonlinear_decay: grid experiments are 3-dimensional");
  SpinorField phi0 = sample_phi0(dom, profile, data);
  FiberSplitting split = splitting_at(data, reference_phi0(data));
  int fd = data.fiber_dim, sd = phi0.comps;
  double meas = active_measure(dom);
  double h = grid_h(dom);
  double kprime = opt.kprime_factor * opt.r_k_cells * h;

  Vec dir = detail::sector_direction(split.proj_H);
  Vec f = detail::localized_source(dom, dir, fd, opt.src_radius_cells * h);

  DecayReport rep;
  Vec q(dom.n_nodes * (int64_t)fd, 0.0);
  SpinorField phi_eff = phi0;
  int grew = 0;
  double prev_update = -1.0;

  for (int it = 0; it < opt.picard_max; ++it) {
    if (coupling != 0.0) {
      phi_eff.v = phi0.v;
      for (int64_t n = 0; n < dom.n_nodes; ++n)
        for (int c = 0; c < sd; ++c)
          phi_eff.v[n * sd + c] += coupling * eps * q[n * fd + c];
    }
    DepsOperator op = make_deps_operator(dom, data, phi_eff, eps, opt.jobs);
    ApplyFn ap = [&](const Vec& x, Vec& y) { op.apply(x, y); };
    Vec qn(op.size(), 0.0);
    CgOptions co;
    co.tol = opt.cg_tol;
    co.max_iter = opt.cg_max_iter;
    rep.solve = cgnr_solve(ap, ap, f, qn, co);
    if (!rep.solve.converged)
      throw std::runtime_error("run_nonlinear_decay: least-squares solve did not converge");
    rep.picard_iters = it + 1;

    double un = 0, qn2 = 0;
    for (size_t i = 0; i < qn.size(); ++i) {
      double d = qn[i] - q[i];
      un += d * d;
      qn2 += qn[i] * qn[i];
    }
    un = std::sqrt(meas * un);
    qn2 = std::sqrt(meas * qn2);
    double rel = (qn2 > 0) ? un / qn2 : un;
    rep.update_rel.push_back(rel);

    // eps |Q1| surrogates over K': |Q1(y)| = coupling |q_S(y)| for the
    // quaternionic interaction (operator norm of the spinor-linear block)
    Vec g(dom.n_nodes, 0.0);
    for (int64_t n = 0; n < dom.n_nodes; ++n)
      g[n] = std::fabs(coupling) * fiber_norm(qn.data() + n * fd, sd);
    double gsup = 0;
    for (int64_t n = 0; n < dom.n_nodes; ++n)
      if (!dom.dist.empty() && dom.dist[n] >= kprime && dom.interior(n))
        gsup = std::max(gsup, g[n]);
    rep.q1_sup.push_back(eps * gsup);
    rep.q1_l1n.push_back(eps * norm_l1p_over(dom, g, kprime, (double)dom.n_active));

    q = std::move(qn);
    if (rel <= opt.picard_tol) break;
    if (prev_update >= 0 && rel > prev_update) {
      if (++grew >= 3) {
        rep.diverged = true;
        rep.diagnosis = "relative update grew for 3 consecutive iterations";
        break;
      }
    } else {
      grew = 0;
    }
    prev_update = rel;
  }
  rep.picard_converged = !rep.diverged && rep.update_rel.back() <= opt.picard_tol;
  if (!rep.picard_converged && !rep.diverged)
    rep.diagnosis = "iteration budget exhausted before the update tolerance";
  for (double v : rep.q1_sup) rep.condition_ok = rep.condition_ok && v <= opt.condition_threshold;
  for (double v : rep.q1_l1n) rep.condition_ok = rep.condition_ok && v <= opt.condition_threshold;

  rep.q = std::move(q);
  detail::finish_decay_report(dom, data, phi0, split.proj_H, eps, rep, opt);
  return rep;
}

// ---------- characteristic-scale collapse ----------

// collapse runs use the shells directly, so the ln-fit window can hug the
// locus: a tight inner radius and single-cell shells keep enough usable
// bands on coarse grids
inline DecayOptions collapse_decay_defaults() {
  DecayOptions d;
  d.r_k_cells = 2;
  d.fit_pad_cells = 0;
  d.shell_stride = 1;
  return d;
}

struct CollapseOptions {
  double s_lo = 1.0, s_hi = 4.0;  // common window in the rescaled variable
  int samples = 61;
  double exponent = 1.5;          // s = dist^exponent / eps
  double control_exponent = 1.0;  // wrong-variable control
  // the control variable needs its own window: u = dist/eps reaches the
  // first shell at a larger value than s does, so the common coverage
  // interval across an eps sweep sits further out (first shell at 2h with
  // eps = 0.05 lands at u = 2.5 on a 1/16 grid)
  double control_lo = 2.6, control_hi = 5.5;
  BaseSpinorProfile profile{ProfileKind::sqrt_dist, 1.0};
  DecayOptions decay = collapse_decay_defaults();
};

struct CollapseProfile {
  double eps = 0;
  Vec s, ln_sup;  // transformed, un-normalized samples at the raw shells
};

struct CollapseReport {
  std::vector<CollapseProfile> profiles;
  double max_pair_dist = 0;          // worst pairwise profile distance / range
  double control_max_pair_dist = 0;  // same against the control variable
  double range = 0;                  // mean |F(s_hi) - F(s_lo)| over profiles
  double control_range = 0;
};

namespace detail {

// ln-profile sampled on a uniform s-grid by linear interpolation
inline Vec resample_profile(const Vec& s, const Vec& lnv, double s_lo, double s_hi, int m) {
  if (s.size() < 2) throw std::runtime_error("scale collapse: fewer than 2 usable shells");
  if (s.front() > s_lo || s.back() < s_hi)
    throw std::runtime_error("scale collapse: shells do not cover the rescaled window");
  auto interp = [&](double sq) {
    size_t i = 1;
    while (i + 1 < s.size() && s[i] < sq) ++i;
    double t = (sq - s[i - 1]) / (s[i] - s[i - 1]);
    return lnv[i - 1] + t * (lnv[i] - lnv[i - 1]);
  };
  Vec out(m);
  for (int k = 0; k < m; ++k) out[k] = interp(s_lo + (s_hi - s_lo) * k / (m - 1));
  return out;
}

// Worst pairwise profile distance relative to the mean ln-range over the
// window. Each profile carries an arbitrary additive constant (the mode
// normalization), so the distance between two profiles is the sup-norm
// modulo constants: half the oscillation of their difference, which is the
// minimum over vertical alignments of the aligned sup distance.
inline double pair_distance(const std::vector<Vec>& fs, double& range_out) {
  double range = 0;
  for (const Vec& f : fs) range += std::fabs(f.back() - f.front());
  range /= (double)fs.size();
  range_out = range;
  double worst = 0;
  for (size_t a = 0; a < fs.size(); ++a)
    for (size_t b = a + 1; b < fs.size(); ++b) {
      double dmax = -std::numeric_limits<double>::infinity(), dmin = -dmax;
      for (size_t k = 0; k < fs[a].size(); ++k) {
        double d = fs[a][k] - fs[b][k];
        dmax = std::max(dmax, d);
        dmin = std::min(dmin, d);
      }
      worst = std::max(worst, 0.5 * (dmax - dmin));
    }
  return (range > 0) ? worst / range : worst;
}

}  // namespace detail

// run_scale_collapse: near-kernel profiles for each eps, replotted against
// s = dist^{3/2}/eps (collapse) and s = dist/eps (control) and compared in
// the constant-aligned sup distance relative to the profile range.
inline CollapseReport run_scale_collapse(const GridDomain& dom, const SWCaseData& data,
                                         const std::vector<double>& eps_list,
                                         const CollapseOptions& opt = {}) {
  if (eps_list.size() < 2) throw std::invalid_argument("run_scale_collapse: need >= 2 eps values");
  CollapseReport out;
  std::vector<Vec> rescaled, control;
  for (double eps : eps_list) {
    DecayReport rep = run_linear_decay(dom, data, opt.profile, eps, DecayMode::kernel, opt.decay);
    CollapseProfile cp;
    cp.eps = eps;
    Vec sc, sctl, lnv;
    for (size_t i = 0; i < rep.shell_radii.size(); ++i) {
      double r = rep.shell_radii[i], v = rep.shell_sup[i];
      if (r <= 0 || v <= rep.floor_value) continue;
      sc.push_back(std::pow(r, opt.exponent) / eps);
      sctl.push_back(std::pow(r, opt.control_exponent) / eps);
      lnv.push_back(std::log(v));
    }
    cp.s = sc;
    cp.ln_sup = lnv;
    out.profiles.push_back(cp);
    rescaled.push_back(detail::resample_profile(sc, lnv, opt.s_lo, opt.s_hi, opt.samples));
    control.push_back(
        detail::resample_profile(sctl, lnv, opt.control_lo, opt.control_hi, opt.samples));
  }
  out.max_pair_dist = detail::pair_distance(rescaled, out.range);
  out.control_max_pair_dist = detail::pair_distance(control, out.control_range);
  return out;
}

// ---------- Green comparison ----------

struct GreenCompareOptions {
  int n_cells = 64;          // nodes per axis of the bounding cube
  double box_factor = 2.2;   // cube edge = factor * R0
  double inner_cells = 3.0;  // bound window starts at inner_cells * h
  double bound_outer = 0.9;  // ... and ends at bound_outer * R0
  double cross_lo = 0.1, cross_hi = 0.8;  // oracle window, * R0
  int cross_bins = 8;
  double cg_tol = 1e-11;
  int cg_max_iter = 60000;
  double ode_rmin_factor = 0.005;  // oracle flux normalization radius, * R0
  int ode_steps = 60000;
};

struct GreenCompareReport {
  double max_bound_ratio = 0;  // sup of G_g / G0^{m/2} over the bound window
  double bound_r_at_max = 0;
  double cross_max_dev = 0;    // shell-averaged |grid / oracle - 1|
  int cross_bins_used = 0;
  int64_t nodes_checked = 0;
  SolveReport solve;
};

// flat Yukawa profile on the Dirichlet ball
inline double yukawa_ball(double r, double mass, double R0) {
  if (r <= 0) throw std::invalid_argument("yukawa_ball: r must be positive");
  if (mass == 0.0) return (1.0 / r - 1.0 / R0) / (4.0 * M_PI);
  return std::sinh(mass * (R0 - r)) / (4.0 * M_PI * r * std::sinh(mass * R0));
}

// run_green_comparison: solve the conformal screened problem on the ball and
// check the pointwise comparison bound G_g <= G0^{m/2} away from the source,
// plus a shell-averaged agreement check against the radial shooting oracle.
inline GreenCompareReport run_green_comparison(double R0, double mass, double kappa,
                                               const GreenCompareOptions& opt = {}) {
  DomainSpec spec;
  spec.N = {opt.n_cells, opt.n_cells, opt.n_cells};
  double L = opt.box_factor * R0;
  spec.L = {L, L, L};
  spec.boundary = Boundary::dirichlet_ball;
  spec.ball_radius = R0;
  spec.metric_kappa = kappa;
  GridDomain dom = make_domain(spec);
  int64_t src = dom.index(opt.n_cells / 2, opt.n_cells / 2, opt.n_cells / 2);
  GreenResult gr = green_solve(dom, mass, src, opt.cg_tol, opt.cg_max_iter);

  GreenCompareReport rep;
  rep.solve = gr.rep;
  auto sx = dom.node_xyz(src);
  RadialGreen oracle =
      radial_green_ode(R0, mass, kappa, opt.ode_rmin_factor * R0, opt.ode_steps);

  double rlo = opt.inner_cells * grid_h(dom), rhi = opt.bound_outer * R0;
  double clo = opt.cross_lo * R0, chi = opt.cross_hi * R0;
  Vec bin_g(opt.cross_bins, 0.0), bin_o(opt.cross_bins, 0.0);
  std::vector<int64_t> bin_n(opt.cross_bins, 0);

  for (int64_t n = 0; n < dom.n_nodes; ++n) {
    if (!dom.interior(n) || n == src) continue;
    auto x = dom.node_xyz(n);
    double r2 = 0;
    for (int a = 0; a < 3; ++a) {
      double d = x[a] - sx[a];
      r2 += d * d;
    }
    double r = std::sqrt(r2);
    if (r >= rlo && r <= rhi) {
      double ratio = gr.u[n] / yukawa_ball(r, 0.5 * mass, R0);
      ++rep.nodes_checked;
      if (ratio > rep.max_bound_ratio) {
        rep.max_bound_ratio = ratio;
        rep.bound_r_at_max = r;
      }
    }
    if (r >= clo && r <= chi) {
      int b = std::min(opt.cross_bins - 1,
                       (int)std::floor((r - clo) / (chi - clo) * opt.cross_bins));
      bin_g[b] += gr.u[n];
      bin_o[b] += oracle.at(r);
      ++bin_n[b];
    }
  }
  for (int b = 0; b < opt.cross_bins; ++b) {
    if (bin_n[b] == 0) continue;
    ++rep.cross_bins_used;
    rep.cross_max_dev = std::max(rep.cross_max_dev, std::fabs(bin_g[b] / bin_o[b] - 1.0));
  }
  if (rep.nodes_checked == 0 || rep.cross_bins_used == 0)
    throw std::runtime_error("run_green_comparison: empty comparison window");
  return rep;
}

// ---------- dyadic annuli and Harnack ratios ----------

// radii r0 > r1 > ... with widths min(r/5, 1/M), stopping at the floor
inline std::vector<double> dyadic_annuli(double r0, double M, double floor_r) {
  if (r0 <= 0 || M <= 0) throw std::invalid_argument("dyadic_annuli: need r0 > 0 and M > 0");
  std::vector<double> radii{r0};
  while (true) {
    double w = std::min(radii.back() / 5.0, 1.0 / M);
    double nx = radii.back() - w;
    if (nx < floor_r) break;
    radii.push_back(nx);
    if (radii.size() > 100000) throw std::runtime_error("dyadic_annuli: floor unreachable");
  }
  if (radii.size() < 2) throw std::runtime_error("dyadic_annuli: no annulus above the floor");
  return radii;
}

struct HarnackReport {
  std::vector<double> annulus_ratio;  // max sector sup/inf per annulus
  double max_ratio = 1.0;
  int sectors_used = 0;
  int sectors_skipped = 0;  // empty angular sectors (grid too coarse)
};

// harnack_ratio: per-annulus angular sectors with diameter at most the
// annulus width; reports sup/inf of the field over each populated sector.
inline HarnackReport harnack_ratio(const GridDomain& dom, const Vec& G,
                                   const std::vector<double>& radii,
                                   const std::array<double, 3>& center = {0, 0, 0}) {
  if ((int64_t)G.size() != dom.n_nodes)
    throw std::invalid_argument("harnack_ratio: field size mismatch");
  HarnackReport rep;
  for (size_t a = 0; a + 1 < radii.size(); ++a) {
    double rhi = radii[a], rlo = radii[a + 1];
    double w = rhi - rlo, rbar = 0.5 * (rhi + rlo);
    // per-direction angular extent w/sqrt(2) keeps the patch diameter  <= w
    double ext = w / (rbar * std::sqrt(2.0));
    int kth = std::max(1, (int)std::ceil(M_PI / ext));
    std::vector<int> kph(kth);
    std::vector<int> base(kth + 1, 0);
    for (int t = 0; t < kth; ++t) {
      double theta_mid = M_PI * (t + 0.5) / kth;
      kph[t] = std::max(1, (int)std::ceil(2.0 * M_PI * std::sin(theta_mid) / ext));
      base[t + 1] = base[t] + kph[t];
    }
    std::vector<double> smin(base[kth], 0.0), smax(base[kth], 0.0);
    std::vector<int64_t> cnt(base[kth], 0);
    for (int64_t n = 0; n < dom.n_nodes; ++n) {
      if (!dom.interior(n)) continue;
      auto x = dom.node_xyz(n);
      double dx = x[0] - center[0], dy = x[1] - center[1], dz = x[2] - center[2];
      double r = std::sqrt(dx * dx + dy * dy + dz * dz);
      if (r < rlo || r >= rhi) continue;
      double theta = std::acos(std::min(1.0, std::max(-1.0, dz / (r > 0 ? r : 1.0))));
      double phi = std::atan2(dy, dx);
      if (phi < 0) phi += 2.0 * M_PI;
      int t = std::min(kth - 1, (int)(theta / M_PI * kth));
      int p = std::min(kph[t] - 1, (int)(phi / (2.0 * M_PI) * kph[t]));
      int sec = base[t] + p;
      double v = G[n];
      if (cnt[sec] == 0) {
        smin[sec] = smax[sec] = v;
      } else {
        smin[sec] = std::min(smin[sec], v);
        smax[sec] = std::max(smax[sec], v);
      }
      ++cnt[sec];
    }
    double worst = 1.0;
    for (int s = 0; s < base[kth]; ++s) {
      if (cnt[s] == 0) {
        ++rep.sectors_skipped;
        continue;
      }
      ++rep.sectors_used;
      if (smin[s] <= 0) {
        ++rep.sectors_skipped;  // field not positive here; sup/inf undefined
        continue;
      }
      worst = std::max(worst, smax[s] / smin[s]);
    }
    rep.annulus_ratio.push_back(worst);
    rep.max_ratio = std::max(rep.max_ratio, worst);
  }
  return rep;
}

// ---------- abelian gauge residuals ----------

struct SwResidual {
  double dirac = 0;        // L2 norm of the covariant Dirac residual
  double curvature = 0;    // L2 norm of eps^2 *F + 1/2 mu(Phi, Phi)
  double norm_defect = 0;  // | ||Phi||_{L2} - 1 |
};

// sw_residual_case1: residual triple of the blown-up abelian equations for an
// explicit configuration (Phi, A). The connection acts by right quaternion
// multiplication, A enters the curvature through the centered-difference
// curl, and the dual pairing uses the cyclic convention (*F)_a = F_{a+1,a+2}
// matched to the moment slots 1..3.
inline SwResidual sw_residual_case1(const GridDomain& dom, const SpinorField& Phi,
                                    const Vec& A, double eps) {
  SWCaseData data = make_case(CaseId::I);
  if (Phi.comps != spinor_half_dim(data))
    throw std::invalid_argument("sw_residual_case1: spinor component mismatch");
  if ((int64_t)A.size() != dom.n_nodes * 3)
    throw std::invalid_argument("sw_residual_case1: connection needs 3 components per node");
  if (eps <= 0) throw std::invalid_argument("sw_residual_case1: eps must be positive");

  int sd = Phi.comps, nqc = sd / 4;
  double meas = active_measure(dom);
  double acc1 = 0, acc2 = 0, accn = 0;

  // right multiplication by i per quaternion block
  auto right_i = [&](const double* p, double* out) {
    for (int c = 0; c < nqc; ++c) {
      out[4 * c + 0] = -p[4 * c + 1];
      out[4 * c + 1] = p[4 * c + 0];
      out[4 * c + 2] = p[4 * c + 3];
      out[4 * c + 3] = -p[4 * c + 2];
    }
  };
  // left multiplication by the frame quaternion of axis ax, negated (the
  // spinor Clifford action)
  auto sigma = [&](int ax, const double* p, double* out) {
    Quat j = kFrameJ[ax];
    for (int c = 0; c < nqc; ++c) {
      Quat v(p[4 * c + 0], p[4 * c + 1], p[4 * c + 2], p[4 * c + 3]);
      Quat r = qmul(j, v);
      out[4 * c + 0] = -r.w;
      out[4 * c + 1] = -r.x;
      out[4 * c + 2] = -r.y;
      out[4 * c + 3] = -r.z;
    }
  };

  std::vector<double> cov(sd), cl(sd), res(sd), phii(sd);
  Vec tmp(sd);
  for (int64_t n = 0; n < dom.n_nodes; ++n) {
    if (!dom.interior(n)) continue;
    // covariant Dirac residual
    for (int c = 0; c < sd; ++c) res[c] = 0;
    right_i(Phi.node(n), phii.data());
    for (int ax = 0; ax < 3; ++ax) {
      if (!dom.active[ax]) continue;
      int64_t np = dom.neighbor(n, ax, +1), nm = dom.neighbor(n, ax, -1);
      const double* pp = Phi.node(np);
      const double* pm = Phi.node(nm);
      double wgt = 1.0 / (2.0 * dom.h[ax]);
      for (int c = 0; c < sd; ++c)
        cov[c] = wgt * (dom.interior(np) ? pp[c] : 0.0) - wgt * (dom.interior(nm) ? pm[c] : 0.0) +
                 A[n * 3 + ax] * phii[c];
      sigma(ax, cov.data(), cl.data());
      for (int c = 0; c < sd; ++c) res[c] += cl[c];
    }
    double s1 = 0;
    for (int c = 0; c < sd; ++c) s1 += res[c] * res[c];
    acc1 += meas * s1;

    // curvature residual: centered curl against the moment map
    double F[3];
    for (int a = 0; a < 3; ++a) {
      int b = (a + 1) % 3, c = (a + 2) % 3;
      auto dpart = [&](int axd, int comp) -> double {
        if (!dom.active[axd]) return 0.0;
        int64_t np = dom.neighbor(n, axd, +1), nm = dom.neighbor(n, axd, -1);
        double vp = dom.interior(np) ? A[np * 3 + comp] : 0.0;
        double vm = dom.interior(nm) ? A[nm * 3 + comp] : 0.0;
        return (vp - vm) / (2.0 * dom.h[axd]);
      };
      F[a] = dpart(b, c) - dpart(c, b);
    }
    for (int c = 0; c < sd; ++c) tmp[c] = Phi.node(n)[c];
    Vec mu = moment_map(data, tmp);  // already carries the 1/2 of the quadratic map
    double s2 = 0;
    for (int a = 0; a < 3; ++a) {
      double v = eps * eps * F[a] + mu[a + 1];
      s2 += v * v;
    }
    acc2 += meas * s2;

    double sn = 0;
    for (int c = 0; c < sd; ++c) sn += tmp[c] * tmp[c];
    accn += meas * sn;
  }

  SwResidual out;
  out.dirac = std::sqrt(acc1);
  out.curvature = std::sqrt(acc2);
  out.norm_defect = std::fabs(std::sqrt(accn) - 1.0);
  return out;
}

// ---------- 1-d two-branch oracle ----------

struct OdeProfile {
  Vec r, ln_u;
  // fitted slope of ln u over [lo, hi]
  double slope(double lo, double hi) const {
    Vec xs, ys;
    for (size_t i = 0; i < r.size(); ++i)
      if (r[i] >= lo && r[i] <= hi) {
        xs.push_back(r[i]);
        ys.push_back(ln_u[i]);
      }
    if (xs.size() < 3) throw std::runtime_error("OdeProfile::slope: window too narrow");
    return linefit(xs, ys).slope;
  }
};

// ode_decay_profile: the reduced two-branch model u' = -(Lambda(r)/eps) u,
// v' = +(Lambda(r)/eps) v. Shooting selects the decaying branch (v = 0);
// it is integrated backward from r1 (the stable direction) with RK4 and
// normalized to u(r0) = 1.
inline OdeProfile ode_decay_profile(const std::function<double(double)>& lambda_of_r, double eps,
                                    double r0, double r1, int steps = 20000) {
  if (!(eps > 0) || !(r1 > r0) || steps < 2)
    throw std::invalid_argument("ode_decay_profile: bad arguments");
  double h = (r1 - r0) / steps;
  OdeProfile out;
  out.r.resize(steps + 1);
  out.ln_u.resize(steps + 1);
  // integrate w(r) = ln u backward: dw/dr = -lambda/eps, so stepping from r1
  // to r0 accumulates +lambda/eps (the decaying branch grows backward)
  double w = 0.0;
  out.r[steps] = r1;
  out.ln_u[steps] = 0.0;
  auto rate = [&](double r) { return lambda_of_r(r) / eps; };
  for (int i = steps; i > 0; --i) {
    double r = r0 + i * h;
    double k1 = rate(r);
    double k2 = rate(r - 0.5 * h);
    double k3 = rate(r - 0.5 * h);
    double k4 = rate(r - h);
    w += h * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0;
    out.r[i - 1] = r - h;
    out.ln_u[i - 1] = w;
  }
  // normalize to u(r0) = 1
  double base = out.ln_u[0];
  for (auto& v : out.ln_u) v -= base;
  return out;
}

// ---------- pointwise defect measures ----------

// discrete Kato defect: max over nodes and axes of |d_h |q1|| - |d_h q1|
// (forward differences). The triangle inequality makes this nonpositive up
// to rounding; the return value measures how close to sharp the grid sits.
inline double kato_defect(const GridDomain& dom, const Vec& q1, int fd) {
  Vec m(dom.n_nodes);
  for (int64_t n = 0; n < dom.n_nodes; ++n) m[n] = fiber_norm(q1.data() + n * fd, fd);
  double worst = -std::numeric_limits<double>::infinity();
  for (int64_t n = 0; n < dom.n_nodes; ++n) {
    if (!dom.interior(n)) continue;
    for (int ax = 0; ax < 3; ++ax) {
      if (!dom.active[ax]) continue;
      int64_t nb = dom.neighbor(n, ax, +1);
      if (!dom.interior(nb)) continue;
      double a = std::fabs(m[nb] - m[n]) / dom.h[ax];
      double d2 = 0;
      for (int c = 0; c < fd; ++c) {
        double d = (q1[nb * fd + c] - q1[n * fd + c]) / dom.h[ax];
        d2 += d * d;
      }
      worst = std::max(worst, a - std::sqrt(d2));
    }
  }
  return worst;
}

// discrete differential-inequality defect on K = {dist >= r_k}:
//   tau = max over K of  Lap_h |q1|^2 + eps^-2 |A q1|^2
// with the positive-definite Laplacian convention. For a resolved
// near-kernel mode every term is exponentially small on K and the maximum
// shrinks under h-refinement at fixed eps.
inline double diff_ineq_tau(const GridDomain& dom, const SWCaseData& data,
                            const SpinorField& phi0, double eps, const Vec& q,
                            const Mat& proj_H, double r_k) {
  if (dom.dist.empty()) throw std::runtime_error("diff_ineq_tau: no singular set");
  int fd = data.fiber_dim;
  Vec q1 = project_fiber_copy(q, proj_H, fd);
  NodeBlocks blocks = make_node_blocks(dom, data, phi0);
  Vec w(dom.n_nodes);
  for (int64_t n = 0; n < dom.n_nodes; ++n) {
    double s = fiber_norm(q1.data() + n * fd, fd);
    w[n] = s * s;
  }
  double tau = -std::numeric_limits<double>::infinity();
  Vec av(fd);
  bool any = false;
  for (int64_t n = 0; n < dom.n_nodes; ++n) {
    if (dom.dist[n] < r_k || !dom.interior(n)) continue;
    double lap = 0;
    bool ok = true;
    for (int ax = 0; ax < 3; ++ax) {
      if (!dom.active[ax]) continue;
      int64_t np = dom.neighbor(n, ax, +1), nm = dom.neighbor(n, ax, -1);
      if (!dom.interior(np) || !dom.interior(nm)) {
        ok = false;
        break;
      }
      lap += (2.0 * w[n] - w[np] - w[nm]) / (dom.h[ax] * dom.h[ax]);
    }
    if (!ok) continue;
    for (int c = 0; c < fd; ++c) av[c] = 0;
    blocks.accumulate(n, q1.data() + n * fd, av.data(), 1.0);
    double a2 = 0;
    for (int c = 0; c < fd; ++c) a2 += av[c] * av[c];
    tau = std::max(tau, lap + a2 / (eps * eps));
    any = true;
  }
  if (!any) throw std::runtime_error("diff_ineq_tau: the set {dist >= r_k} has no usable nodes");
  return tau;
}

}  // namespace cdo
