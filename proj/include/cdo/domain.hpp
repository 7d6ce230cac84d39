#pragma once
// Discretized model geometries: periodic boxes (flat 3-tori, optionally with
// collapsed axes for dimensional reduction) and Dirichlet balls with a radial
// conformal metric. Nodes sit at cell centers, offset half a spacing from the
// box walls, so no node ever lies on the singular set.

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cdo/linalg.hpp"
#include "cdo/sw_algebra.hpp"

namespace cdo {

enum class Boundary { periodic, dirichlet_ball };
enum class SingularKind { none, tube, point };

struct DomainSpec {
  int dim = 3;
  std::array<int, 3> N = {16, 16, 16};
  std::array<double, 3> L = {2.0, 2.0, 2.0};
  Boundary boundary = Boundary::periodic;
  double ball_radius = 1.0;  // dirichlet_ball only; the box is the bounding cube
  double metric_kappa = 0.0; // conformal factor 1 + kappa r^2 (dirichlet_ball)
  SingularKind singular = SingularKind::none;
  int tube_axis = 2;         // the axis the tube runs along
};

struct GridDomain {
  DomainSpec spec;
  std::array<double, 3> h = {0, 0, 0};
  int64_t n_nodes = 0;
  std::array<bool, 3> active = {true, true, true};  // axes with N > 1
  int n_active = 3;

  Vec dist;                   // distance to the singular set (empty if none)
  std::vector<uint8_t> mask;  // dirichlet_ball: 1 = interior node

  int64_t index(int i, int j, int k) const {
    return (int64_t(k) * spec.N[1] + j) * spec.N[0] + i;
  }
  void coords_of(int64_t idx, int& i, int& j, int& k) const {
    i = int(idx % spec.N[0]);
    j = int((idx / spec.N[0]) % spec.N[1]);
    k = int(idx / (int64_t(spec.N[0]) * spec.N[1]));
  }
  double coord(int axis, int i) const { return -0.5 * spec.L[axis] + (i + 0.5) * h[axis]; }
  std::array<double, 3> node_xyz(int64_t idx) const {
    int i, j, k;
    coords_of(idx, i, j, k);
    return {coord(0, i), coord(1, j), coord(2, k)};
  }
  // periodic displacement of x from 0 on one axis
  double periodic_delta(int axis, double x) const {
    double L = spec.L[axis];
    double d = std::fabs(x);
    return std::min(d, L - d);
  }
  // neighbor index with periodic wrap on one axis
  int64_t neighbor(int64_t idx, int axis, int step) const {
    int c[3];
    coords_of(idx, c[0], c[1], c[2]);
    int n = spec.N[axis];
    c[axis] = (c[axis] + step % n + n) % n;
    return index(c[0], c[1], c[2]);
  }
  bool interior(int64_t idx) const { return mask.empty() ? true : mask[idx] != 0; }
};

inline GridDomain make_domain(const DomainSpec& spec) {
  if (spec.dim != 3)
    throw std::invalid_argument("make_domain: only 3-dimensional grids are supported");
  GridDomain d;
  d.spec = spec;
  d.n_active = 0;
  for (int a = 0; a < 3; ++a) {
    if (spec.N[a] <= 0 || spec.L[a] <= 0.0)
      throw std::invalid_argument("make_domain: sizes must be positive");
    if (spec.N[a] != 1 && spec.N[a] < 8)
      throw std::invalid_argument("make_domain: each axis needs N = 1 (collapsed) or N >= 8");
    d.h[a] = spec.L[a] / spec.N[a];
    d.active[a] = spec.N[a] > 1;
    if (d.active[a]) ++d.n_active;
  }
  d.n_nodes = int64_t(spec.N[0]) * spec.N[1] * spec.N[2];

  if (spec.boundary == Boundary::dirichlet_ball) {
    if (spec.ball_radius <= 0) throw std::invalid_argument("make_domain: ball radius must be positive");
    d.mask.assign(d.n_nodes, 0);
    for (int64_t idx = 0; idx < d.n_nodes; ++idx) {
      auto p = d.node_xyz(idx);
      double r2 = 0;
      for (int a = 0; a < 3; ++a)
        if (d.active[a]) r2 += p[a] * p[a];
      if (std::sqrt(r2) < spec.ball_radius) d.mask[idx] = 1;
    }
  }

  if (spec.singular != SingularKind::none) {
    d.dist.resize(d.n_nodes);
    for (int64_t idx = 0; idx < d.n_nodes; ++idx) {
      auto p = d.node_xyz(idx);
      double r2 = 0;
      if (spec.singular == SingularKind::tube) {
        for (int a = 0; a < 3; ++a) {
          if (a == spec.tube_axis || !d.active[a]) continue;
          double del = (spec.boundary == Boundary::periodic) ? d.periodic_delta(a, p[a]) : std::fabs(p[a]);
          r2 += del * del;
        }
      } else {
        for (int a = 0; a < 3; ++a) {
          if (!d.active[a]) continue;
          double del = (spec.boundary == Boundary::periodic) ? d.periodic_delta(a, p[a]) : std::fabs(p[a]);
          r2 += del * del;
        }
      }
      d.dist[idx] = std::sqrt(r2);
    }
  }
  return d;
}

// conformal factor of the radial metric (dirichlet_ball)
inline double metric_lambda(const GridDomain& d, const std::array<double, 3>& p) {
  double r2 = 0;
  for (int a = 0; a < 3; ++a)
    if (d.active[a]) r2 += p[a] * p[a];
  return 1.0 + d.spec.metric_kappa * r2;
}

// ---------- base spinor profiles ----------

enum class ProfileKind { constant_gap, sqrt_dist, smooth_bump };

struct BaseSpinorProfile {
  ProfileKind kind = ProfileKind::constant_gap;
  double amplitude = 1.0;  // constant_gap: |phi0|; sqrt_dist: c in c*sqrt(dist)
};

// per-node spinor field: n_nodes x spinor_half_dim(data), flattened
struct SpinorField {
  int comps = 0;
  Vec v;
  double* node(int64_t idx) { return v.data() + idx * comps; }
  const double* node(int64_t idx) const { return v.data() + idx * comps; }
};

inline double profile_magnitude(const GridDomain& d, const BaseSpinorProfile& p, int64_t idx) {
  switch (p.kind) {
    case ProfileKind::constant_gap:
      return p.amplitude;
    case ProfileKind::sqrt_dist: {
      if (d.dist.empty()) throw std::runtime_error("sqrt_dist profile needs a singular set");
      return p.amplitude * std::sqrt(d.dist[idx]);
    }
    default: {  // smooth_bump: smooth, periodic, bounded away from zero
      auto x = d.node_xyz(idx);
      double f = 1.0;
      for (int a = 0; a < 3; ++a)
        if (d.active[a]) f *= std::cos(2.0 * M_PI * x[a] / d.spec.L[a]);
      return p.amplitude * (1.0 + 0.5 * f);
    }
  }
}

// sample_phi0: the reference zero-locus spinor scaled by the profile
// magnitude, so the moment map vanishes pointwise and |phi0| follows the
// requested profile exactly.
inline SpinorField sample_phi0(const GridDomain& d, const BaseSpinorProfile& p, const SWCaseData& data) {
  SpinorField f;
  f.comps = spinor_half_dim(data);
  f.v.assign(d.n_nodes * f.comps, 0.0);
  Vec ref = reference_phi0(data);
  for (int64_t idx = 0; idx < d.n_nodes; ++idx) {
    double mag = profile_magnitude(d, p, idx);
    double* out = f.node(idx);
    for (int c = 0; c < f.comps; ++c) out[c] = mag * ref[c];
  }
  return f;
}

// gap field Lambda(y): smallest nonzero singular value of the interaction
// block at each node (equals |phi0(y)| for Case I)
inline Vec lambda_field(const GridDomain& d, const SWCaseData& data, const SpinorField& phi0) {
  Vec lam(d.n_nodes, 0.0);
  Vec tmp(phi0.comps);
  for (int64_t idx = 0; idx < d.n_nodes; ++idx) {
    const double* p = phi0.node(idx);
    for (int c = 0; c < phi0.comps; ++c) tmp[c] = p[c];
    double n = nrm2(tmp);
    lam[idx] = (n < 1e-300) ? 0.0 : lambda_at(data, tmp);
  }
  return lam;
}

// minimum of the gap field over the compact set {dist >= R}
inline double lambda_min_over(const GridDomain& d, const Vec& lam, double R) {
  double m = -1.0;
  for (int64_t idx = 0; idx < d.n_nodes; ++idx) {
    if (!d.dist.empty() && d.dist[idx] < R) continue;
    if (m < 0 || lam[idx] < m) m = lam[idx];
  }
  if (m < 0) throw std::runtime_error("lambda_min_over: the set {dist >= R} has no nodes");
  return m;
}

// smallest node distance inside {dist >= R} (reported R_K)
inline double min_dist_over(const GridDomain& d, double R) {
  if (d.dist.empty()) throw std::runtime_error("min_dist_over: no singular set");
  double m = -1.0;
  for (double v : d.dist)
    if (v >= R && (m < 0 || v < m)) m = v;
  if (m < 0) throw std::runtime_error("min_dist_over: the set {dist >= R} has no nodes");
  return m;
}

}  // namespace cdo
