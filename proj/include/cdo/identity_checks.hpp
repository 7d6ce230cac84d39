#pragma once
// Randomized defect measurements for the algebraic identities behind the
// operator construction: Clifford relations, symbol/interaction
// anticommutation, moment duality, the null/range fiber splitting, and the
// reference spinor. Each returns the worst defect found, scaled so a healthy
// construction sits at rounding level. One Rng threads through a whole suite
// run, so results are deterministic for a fixed seed.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "cdo/sw_algebra.hpp"

namespace cdo {

struct IdentityDefect {
  std::string identity;
  std::string case_id;
  double defect = 0;
};

// gamma_i gamma_j + gamma_j gamma_i = -2 delta_ij on the full fiber
inline double clifford_defect(const SWCaseData& d) {
  CliffordModel model = full_symbol_model(d);
  int n = (int)model.gamma.size();
  double worst = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      Mat s = model.gamma[i] * model.gamma[j] + model.gamma[j] * model.gamma[i];
      if (i == j)
        for (int r = 0; r < s.rows; ++r) s(r, r) += 2.0;
      worst = std::max(worst, s.max_abs_entry());
    }
  return worst;
}

// the principal symbol anticommutes with the interaction of every fiber
inline double anticommutation_defect(const SWCaseData& d, int fibers, Rng& rng) {
  double worst = 0;
  int hs = spinor_half_dim(d);
  for (int t = 0; t < fibers; ++t) {
    Vec phi(hs);
    for (auto& v : phi) v = rng.sym();
    Mat A = build_A(d, phi);
    for (int j = 0; j < d.n; ++j) {
      Vec e(d.n, 0.0);
      e[j] = 1.0;
      Mat s = full_symbol(d, e);
      worst = std::max(worst, (s * A + A * s).max_abs_entry() / (1.0 + A.max_abs_entry()));
    }
  }
  return worst;
}

// polar moment = 2 * moment, and each slot is half the frame-action pairing
inline double moment_duality_defect(const SWCaseData& d, int fibers, Rng& rng) {
  double worst = 0;
  int hs = spinor_half_dim(d);
  for (int t = 0; t < fibers; ++t) {
    Vec psi(hs);
    for (auto& v : psi) v = rng.sym();
    Vec m = moment_map(d, psi);
    Vec p = moment_polar(d, psi, psi);
    double scale = 1.0;
    for (double v : psi) scale += v * v;
    for (size_t i = 0; i < m.size(); ++i)
      worst = std::max(worst, std::fabs(p[i] - 2.0 * m[i]) / scale);
    for (int al = 0; al < d.dim_g; ++al)
      for (int mu = 0; mu < 4; ++mu) {
        const Mat& g = (d.n == 3) ? d.G[mu][al] : d.G2[mu][al];
        double pair = 0.5 * dot(g.apply(psi), psi);
        worst = std::max(worst, std::fabs(m[al * 4 + mu] - pair) / scale);
      }
  }
  return worst;
}

// projector algebra of the null/range splitting, and block-diagonality of
// both the interaction and the symbol with respect to it
inline double splitting_defect(const SWCaseData& d, int fibers, Rng& rng) {
  double worst = 0;
  int hs = spinor_half_dim(d);
  int trials = std::max(1, fibers / 10);  // SVD-heavy, fewer trials suffice
  for (int t = 0; t < trials; ++t) {
    Vec phi(hs);
    for (auto& v : phi) v = rng.sym();
    FiberSplitting sp = splitting_at(d, phi);
    Mat A = build_A(d, phi);
    double scale = 1.0 + A.max_abs_entry();
    worst = std::max(worst, (sp.proj_N * sp.proj_N - sp.proj_N).max_abs_entry());
    worst = std::max(worst,
                     (sp.proj_N + sp.proj_H - Mat::identity(d.fiber_dim)).max_abs_entry());
    worst = std::max(worst, (A * sp.proj_N).max_abs_entry() / scale);
    worst = std::max(worst, (sp.proj_N * A).max_abs_entry() / scale);
    for (int j = 0; j < d.n; ++j) {
      Vec e(d.n, 0.0);
      e[j] = 1.0;
      Mat s = full_symbol(d, e);
      worst = std::max(worst, (s * sp.proj_N - sp.proj_N * s).max_abs_entry());
    }
  }
  return worst;
}

// the covariant-constant reference has unit norm and vanishing moment
inline double reference_defect(const SWCaseData& d) {
  Vec ref = reference_phi0(d);
  double nrm = 0;
  for (double v : ref) nrm += v * v;
  double worst = std::fabs(std::sqrt(nrm) - 1.0);
  Vec m = moment_map(d, ref);
  for (double v : m) worst = std::max(worst, std::fabs(v));
  return worst;
}

// the full suite: five identity families per case, one defect row each
inline std::vector<IdentityDefect> identity_suite(const std::vector<CaseId>& cases, int fibers,
                                                  uint64_t seed, bool inject = false) {
  std::vector<IdentityDefect> out;
  Rng rng(seed);
  for (CaseId id : cases) {
    SWCaseData d = make_case(id);
    d.corrupt_gamma = inject;
    std::string cn = case_name(id);
    out.push_back({"clifford_relations", cn, clifford_defect(d)});
    out.push_back({"symbol_anticommutation", cn, anticommutation_defect(d, fibers, rng)});
    out.push_back({"moment_duality", cn, moment_duality_defect(d, fibers, rng)});
    out.push_back({"fiber_splitting", cn, splitting_defect(d, fibers, rng)});
    out.push_back({"reference_spinor", cn, reference_defect(d)});
  }
  return out;
}

}  // namespace cdo
