#pragma once
// Iterative solvers used by the experiments: conjugate gradients (optionally
// Jacobi-preconditioned), least squares through the normal equations, shifted
// inverse iteration for near-kernel modes (optionally confined to a fiber
// sector), and the conformal Green solver on the Dirichlet ball together with
// its radial ODE oracle. Everything is matrix-free through std::function.

#include <functional>

#include "cdo/assembly.hpp"
#include "cdo/domain.hpp"
#include "cdo/linalg.hpp"

namespace cdo {

using ApplyFn = std::function<void(const Vec&, Vec&)>;

// ---------- conjugate gradients ----------

struct SolveReport {
  int iters = 0;
  double resid = 0.0;  // final |r| / |b|
  bool converged = false;
};

struct CgOptions {
  double tol = 1e-10;  // relative residual target
  int max_iter = 20000;
  const Vec* jacobi = nullptr;   // optional diagonal preconditioner
  bool check_symmetry = false;   // sampled <Ax,y> = <x,Ay> guard
  uint64_t seed = 0x5eedull;
};

namespace detail {

inline double dot_v(const Vec& a, const Vec& b) {
  double s = 0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline void sampled_symmetry_check(const ApplyFn& apply, int64_t n, uint64_t seed) {
  Rng rng(seed);
  Vec x(n), y(n), Ax, Ay;
  for (auto& v : x) v = rng.sym();
  for (auto& v : y) v = rng.sym();
  apply(x, Ax);
  apply(y, Ay);
  double lhs = dot_v(Ax, y), rhs = dot_v(x, Ay);
  double scale = std::sqrt(dot_v(Ax, Ax) * dot_v(y, y)) + std::sqrt(dot_v(x, x) * dot_v(Ay, Ay));
  if (std::fabs(lhs - rhs) > 1e-10 * (scale + 1.0))
    throw std::runtime_error("cg_solve: operator failed the sampled symmetry check");
}

}  // namespace detail

// solves A x = b for symmetric positive (semi)definite A; x may carry an
// initial guess (resized to b if it does not match)
inline SolveReport cg_solve(const ApplyFn& apply, const Vec& b, Vec& x,
                            const CgOptions& opt = {}) {
  const int64_t n = (int64_t)b.size();
  if ((int64_t)x.size() != n) x.assign(n, 0.0);
  if (opt.check_symmetry) detail::sampled_symmetry_check(apply, n, opt.seed);

  double bnorm = std::sqrt(detail::dot_v(b, b));
  SolveReport rep;
  if (bnorm == 0.0) {
    x.assign(n, 0.0);
    rep.converged = true;
    return rep;
  }

  Vec r(n), z(n), p(n), Ap;
  apply(x, Ap);
  for (int64_t i = 0; i < n; ++i) r[i] = b[i] - Ap[i];
  auto precond = [&](const Vec& rr, Vec& zz) {
    if (!opt.jacobi) {
      zz = rr;
      return;
    }
    zz.resize(n);
    for (int64_t i = 0; i < n; ++i) zz[i] = rr[i] / (*opt.jacobi)[i];
  };
  precond(r, z);
  p = z;
  double rz = detail::dot_v(r, z);
  for (int it = 0; it < opt.max_iter; ++it) {
    double rnorm = std::sqrt(detail::dot_v(r, r));
    rep.iters = it;
    rep.resid = rnorm / bnorm;
    if (rnorm <= opt.tol * bnorm) {
      rep.converged = true;
      return rep;
    }
    apply(p, Ap);
    double pAp = detail::dot_v(p, Ap);
    if (pAp <= 0.0) return rep;  // indefinite breakdown; caller decides
    double alpha = rz / pAp;
    for (int64_t i = 0; i < n; ++i) x[i] += alpha * p[i];
    for (int64_t i = 0; i < n; ++i) r[i] -= alpha * Ap[i];
    precond(r, z);
    double rz2 = detail::dot_v(r, z);
    double beta = rz2 / rz;
    rz = rz2;
    for (int64_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  double rnorm = std::sqrt(detail::dot_v(r, r));
  rep.resid = rnorm / bnorm;
  rep.converged = rep.resid <= opt.tol;
  return rep;
}

// least squares min |M x - b| via CG on the normal equations M^T M x = M^T b;
// pass apply_t = apply for symmetric M
inline SolveReport cgnr_solve(const ApplyFn& apply, const ApplyFn& apply_t, const Vec& b, Vec& x,
                              const CgOptions& opt = {}) {
  Vec rhs;
  apply_t(b, rhs);
  Vec tmp;
  ApplyFn normal = [&](const Vec& v, Vec& y) {
    apply(v, tmp);
    apply_t(tmp, y);
  };
  CgOptions o2 = opt;
  o2.check_symmetry = false;  // normal equations are symmetric by construction
  return cg_solve(normal, rhs, x, o2);
}

namespace detail {

// nodewise fiber projection x_node <- P x_node
inline void apply_fiber_projector(const Mat& P, int fd, Vec& x) {
  int64_t nodes = (int64_t)x.size() / fd;
  Vec tmp(fd);
  for (int64_t nidx = 0; nidx < nodes; ++nidx) {
    double* p = x.data() + nidx * fd;
    for (int r = 0; r < fd; ++r) {
      double acc = 0;
      for (int c = 0; c < fd; ++c) acc += P(r, c) * p[c];
      tmp[r] = acc;
    }
    for (int r = 0; r < fd; ++r) p[r] = tmp[r];
  }
}

}  // namespace detail

// solve_inhomogeneous: least-squares solve of a symmetric fiber operator
// against a source constrained to the degenerate sector. When null_sector is
// given the right-hand side is first projected through the node splittings
// (pi_H f = 0 by construction); pass nullptr to solve against f as given.
inline SolveReport solve_inhomogeneous(const ApplyFn& apply, const Vec& f, Vec& x,
                                       const CgOptions& opt = {},
                                       const Mat* null_sector = nullptr, int fiber_dim = 0) {
  if (null_sector && fiber_dim <= 0)
    throw std::invalid_argument("solve_inhomogeneous: sector projection needs fiber_dim");
  if (!null_sector) return cgnr_solve(apply, apply, f, x, opt);
  Vec fn = f;
  detail::apply_fiber_projector(*null_sector, fiber_dim, fn);
  return cgnr_solve(apply, apply, fn, x, opt);
}

// ---------- near-kernel modes ----------

struct EigOptions {
  double shift = 1e-8;     // inverse iteration solves (M + shift) y = x
  double tol = 1e-7;       // residual target |M q - lambda q| <= tol |q|
  int max_outer = 80;
  double measure = 1.0;    // volume element for normalization (h^n)
  const Mat* sector = nullptr;     // optional fiber projector applied nodewise
  double sector_penalty = 1.0;     // pushes the complement spectrum up
  int fiber_dim = 0;               // required with sector
  std::vector<const Vec*> deflate; // directions to project out
  uint64_t seed = 7;
  CgOptions inner;
};

struct EigReport {
  double lambda = 0.0;
  int outer_iters = 0;
  double resid = 0.0;
  bool converged = false;
  Vec mode;
};

// smallest eigenpair of a symmetric positive semidefinite operator by shifted
// inverse iteration with Rayleigh quotients. With a sector projector P the
// operator is replaced by P M P + penalty (I - P), confining the mode to the
// sector while keeping symmetry.
inline EigReport kernel_approx(const ApplyFn& apply_M, int64_t n, const EigOptions& opt = {}) {
  if (opt.sector && opt.fiber_dim <= 0)
    throw std::invalid_argument("kernel_approx: sector projector needs fiber_dim");

  Vec mt1, mt2;
  ApplyFn eff = [&](const Vec& x, Vec& y) {
    if (!opt.sector) {
      apply_M(x, y);
      return;
    }
    mt1 = x;
    detail::apply_fiber_projector(*opt.sector, opt.fiber_dim, mt1);
    apply_M(mt1, mt2);
    detail::apply_fiber_projector(*opt.sector, opt.fiber_dim, mt2);
    y.resize(n);
    for (int64_t i = 0; i < n; ++i) y[i] = mt2[i] + opt.sector_penalty * (x[i] - mt1[i]);
  };

  ApplyFn shifted = [&](const Vec& x, Vec& y) {
    eff(x, y);
    for (int64_t i = 0; i < n; ++i) y[i] += opt.shift * x[i];
  };

  auto constrain = [&](Vec& v) {
    if (opt.sector) detail::apply_fiber_projector(*opt.sector, opt.fiber_dim, v);
    for (const Vec* d : opt.deflate) {
      double c = detail::dot_v(v, *d) / detail::dot_v(*d, *d);
      for (int64_t i = 0; i < n; ++i) v[i] -= c * (*d)[i];
    }
  };

  Rng rng(opt.seed);
  Vec q(n);
  for (auto& v : q) v = rng.sym();
  constrain(q);

  EigReport rep;
  Vec y, Mq;
  for (int outer = 0; outer < opt.max_outer; ++outer) {
    rep.outer_iters = outer + 1;
    // normalize in the L2 measure
    double nrm = std::sqrt(opt.measure * detail::dot_v(q, q));
    if (nrm == 0.0) throw std::runtime_error("kernel_approx: iterate vanished");
    for (auto& v : q) v /= nrm;

    eff(q, Mq);
    double lam = detail::dot_v(q, Mq) / detail::dot_v(q, q);
    double rn = 0, qn = 0;
    for (int64_t i = 0; i < n; ++i) {
      double r = Mq[i] - lam * q[i];
      rn += r * r;
      qn += q[i] * q[i];
    }
    rep.lambda = lam;
    rep.resid = std::sqrt(rn / qn);
    if (rep.resid <= opt.tol) {
      rep.converged = true;
      break;
    }

    y.assign(n, 0.0);
    CgOptions ic = opt.inner;
    SolveReport srep = cg_solve(shifted, q, y, ic);
    if (!srep.converged && srep.resid > 1e-2)
      throw std::runtime_error("kernel_approx: inner solve stalled");
    constrain(y);
    q = y;
  }
  double nrm = std::sqrt(opt.measure * detail::dot_v(q, q));
  for (auto& v : q) v /= nrm;
  rep.mode = std::move(q);
  return rep;
}

// ---------- conformal Green solver on the Dirichlet ball ----------

// L u = -div(lambda^{n/2-1} grad u) + mass^2 lambda^{n/2} u  on the ball,
// u = 0 outside; 7-point stencil with face-midpoint weights; the source is a
// discrete delta h^-n at one node. n = n_active spatial dimensions.
struct GreenResult {
  Vec u;  // one scalar per node (exterior entries zero)
  SolveReport rep;
};

inline SparseOperator assemble_conformal_laplacian(const GridDomain& dom, double mass) {
  int n_sp = dom.n_active;
  double pf = 0.5 * n_sp - 1.0;  // face exponent n/2 - 1
  double pc = 0.5 * n_sp;        // center exponent n/2
  std::vector<std::tuple<int64_t, int64_t, double>> t;
  for (int64_t idx = 0; idx < dom.n_nodes; ++idx) {
    if (!dom.interior(idx)) continue;
    auto xc = dom.node_xyz(idx);
    double diag = mass * mass * std::pow(metric_lambda(dom, xc), pc);
    for (int ax = 0; ax < 3; ++ax) {
      if (!dom.active[ax]) continue;
      double inv_h2 = 1.0 / (dom.h[ax] * dom.h[ax]);
      for (int s = -1; s <= 1; s += 2) {
        int64_t nb = dom.neighbor(idx, ax, s);
        auto xn = dom.node_xyz(nb);
        std::array<double, 3> mid = {0.5 * (xc[0] + xn[0]), 0.5 * (xc[1] + xn[1]),
                                     0.5 * (xc[2] + xn[2])};
        double w = std::pow(metric_lambda(dom, mid), pf) * inv_h2;
        diag += w;
        if (dom.interior(nb)) t.emplace_back(idx, nb, -w);
      }
    }
    t.emplace_back(idx, idx, diag);
  }
  return SparseOperator::from_triplets(dom.n_nodes, t);
}

inline GreenResult green_solve(const GridDomain& dom, double mass, int64_t source_node,
                               double cg_tol = 1e-11, int max_iter = 50000) {
  if (!dom.interior(source_node))
    throw std::invalid_argument("green_solve: source must be an interior node");
  SparseOperator L = assemble_conformal_laplacian(dom, mass);
  double hn = 1.0;
  for (int a = 0; a < 3; ++a)
    if (dom.active[a]) hn *= dom.h[a];
  Vec b(dom.n_nodes, 0.0);
  b[source_node] = 1.0 / hn;

  // Jacobi diagonal (exterior rows are empty: give them 1 so the solve is inert)
  Vec diag(dom.n_nodes, 1.0);
  for (int64_t r = 0; r < L.n; ++r)
    for (int64_t k = L.rowptr[r]; k < L.rowptr[r + 1]; ++k)
      if (L.col[k] == r) diag[r] = L.val[k];

  GreenResult res;
  CgOptions opt;
  opt.tol = cg_tol;
  opt.max_iter = max_iter;
  opt.jacobi = &diag;
  ApplyFn apply = [&](const Vec& x, Vec& y) { L.apply(x, y); };
  res.u.assign(dom.n_nodes, 0.0);
  res.rep = cg_solve(apply, b, res.u, opt);
  return res;
}

// ---------- radial oracle ----------

// Solves u'' + [(n-1)/r + (n/2-1) lambda'/lambda] u' = mass^2 lambda u on
// [r_min, R0] backward from u(R0) = 0, u'(R0) = -1, then normalizes by the
// inward flux through the sphere at r_min, giving the Green function of the
// conformal operator with a unit source at the origin. n = 3. The flux is
// only asymptotically unit as r -> 0, so the normalization carries an
// O((mass * r_min)^2) relative bias: choose r_min well inside the radii of
// interest.
struct RadialGreen {
  Vec r, g;  // ascending radii and values

  double at(double rq) const {
    if (r.empty()) throw std::runtime_error("RadialGreen: empty table");
    if (rq <= r.front()) return g.front();
    if (rq >= r.back()) return g.back();
    size_t lo = (size_t)((rq - r.front()) / (r[1] - r[0]));
    if (lo >= r.size() - 1) lo = r.size() - 2;
    while (r[lo + 1] < rq) ++lo;
    while (r[lo] > rq && lo > 0) --lo;
    double t = (rq - r[lo]) / (r[lo + 1] - r[lo]);
    return (1.0 - t) * g[lo] + t * g[lo + 1];
  }
};

inline RadialGreen radial_green_ode(double R0, double mass, double kappa, double r_min,
                                    int steps = 40000) {
  if (!(R0 > 0) || !(r_min > 0) || r_min >= R0)
    throw std::invalid_argument("radial_green_ode: need 0 < r_min < R0");
  auto lambda = [&](double r) { return 1.0 + kappa * r * r; };
  auto rhs = [&](double r, double u, double v, double& du, double& dv) {
    double lam = lambda(r);
    double dlam = 2.0 * kappa * r;
    du = v;
    dv = -(2.0 / r + 0.5 * dlam / lam) * v + mass * mass * lam * u;
  };

  int n = steps;
  double hstep = (R0 - r_min) / n;
  RadialGreen out;
  out.r.resize(n + 1);
  out.g.resize(n + 1);
  double u = 0.0, v = -1.0, r = R0;
  out.r[n] = R0;
  out.g[n] = 0.0;
  for (int i = n - 1; i >= 0; --i) {
    double hs = -hstep;  // integrate inward
    double k1u, k1v, k2u, k2v, k3u, k3v, k4u, k4v;
    rhs(r, u, v, k1u, k1v);
    rhs(r + 0.5 * hs, u + 0.5 * hs * k1u, v + 0.5 * hs * k1v, k2u, k2v);
    rhs(r + 0.5 * hs, u + 0.5 * hs * k2u, v + 0.5 * hs * k2v, k3u, k3v);
    rhs(r + hs, u + hs * k3u, v + hs * k3v, k4u, k4v);
    u += hs / 6.0 * (k1u + 2 * k2u + 2 * k3u + k4u);
    v += hs / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v);
    r += hs;
    out.r[i] = r;
    out.g[i] = u;
  }
  // unit inward flux of -lambda^{1/2} grad u through the sphere at r_min
  double flux = -4.0 * M_PI * r * r * std::sqrt(lambda(r)) * v;
  if (flux <= 0) throw std::runtime_error("radial_green_ode: nonpositive flux at r_min");
  for (auto& x : out.g) x /= flux;
  return out;
}

}  // namespace cdo
