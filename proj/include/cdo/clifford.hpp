#pragma once
// Real Clifford modules in dimensions 3 and 4, realized as signed-permutation
// matrices built from quaternion multiplication. All relations hold exactly in
// integer arithmetic.

#include <array>
#include <stdexcept>

#include "cdo/linalg.hpp"

namespace cdo {

// ---------- quaternions as 4-vectors (1, i, j, k) ----------

struct Quat {
  double w = 0, x = 0, y = 0, z = 0;
  Quat() = default;
  Quat(double w_, double x_, double y_, double z_) : w(w_), x(x_), y(y_), z(z_) {}
};

inline Quat qmul(const Quat& a, const Quat& b) {
  return Quat(a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
              a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
              a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
              a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w);
}

inline Quat qconj(const Quat& q) { return Quat(q.w, -q.x, -q.y, -q.z); }

inline const Quat Q1{1, 0, 0, 0};
inline const Quat QI{0, 1, 0, 0};
inline const Quat QJ{0, 0, 1, 0};
inline const Quat QK{0, 0, 0, 1};

// 4x4 matrix of left multiplication v -> q*v in the basis (1,i,j,k)
inline Mat qleft(const Quat& q) {
  Mat m(4, 4);
  const Quat cols[4] = {qmul(q, Q1), qmul(q, QI), qmul(q, QJ), qmul(q, QK)};
  for (int j = 0; j < 4; ++j) {
    m(0, j) = cols[j].w;
    m(1, j) = cols[j].x;
    m(2, j) = cols[j].y;
    m(3, j) = cols[j].z;
  }
  return m;
}

// 4x4 matrix of right multiplication v -> v*q
inline Mat qright(const Quat& q) {
  Mat m(4, 4);
  const Quat cols[4] = {qmul(Q1, q), qmul(QI, q), qmul(QJ, q), qmul(QK, q)};
  for (int j = 0; j < 4; ++j) {
    m(0, j) = cols[j].w;
    m(1, j) = cols[j].x;
    m(2, j) = cols[j].y;
    m(3, j) = cols[j].z;
  }
  return m;
}

// The frame quaternions attached to the coordinate covectors e^1, e^2, e^3.
// This particular (orientation-reversing) choice is what makes the fiber
// algebra identities of sw_algebra exact; do not reorder.
inline const std::array<Quat, 3> kFrameJ = {QI, Quat(0, 0, 0, -1), Quat(0, 0, -1, 0)};

// e^0 (the 0-form slot) carries 1; e^1..e^3 carry the frame above.
inline Quat frame_quat(int mu) {
  if (mu == 0) return Q1;
  return kFrameJ[mu - 1];
}

// ---------- Clifford models ----------

struct CliffordModel {
  int dim = 0;        // base dimension, 3 or 4
  int fiber_dim = 0;  // 4 (quaternion module) or 8 (H + H)
  std::vector<Mat> gamma;
  // dim=4 only: fiber indices [0,grading_split) are the plus half
  int grading_split = 0;
};

// Co-form convention: sigma_j = -L(J_j). Then sigma(e1)sigma(e2) = sigma(e3)
// and sigma(e1)sigma(e2)sigma(e3) = -Id, matching the documented orientation.
inline CliffordModel build_clifford(int dim) {
  if (dim != 3 && dim != 4) throw std::invalid_argument("build_clifford: dim must be 3 or 4");
  CliffordModel m;
  m.dim = dim;
  if (dim == 3) {
    m.fiber_dim = 4;
    for (int j = 0; j < 3; ++j) m.gamma.push_back(-1.0 * qleft(kFrameJ[j]));
  } else {
    // H + H with off-diagonal blocks  [0, -B^T; B, 0],  B_j = L(q_j),
    // q = (J_1, J_2, J_3, 1). Each sigma swaps the two halves.
    m.fiber_dim = 8;
    m.grading_split = 4;
    const std::array<Quat, 4> q4 = {kFrameJ[0], kFrameJ[1], kFrameJ[2], Q1};
    for (int j = 0; j < 4; ++j) {
      Mat B = qleft(q4[j]);
      Mat s(8, 8);
      for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) {
          s(r, c + 4) = -B(c, r);  // upper right = -B^T
          s(r + 4, c) = B(r, c);   // lower left  =  B
        }
      m.gamma.push_back(s);
    }
  }
  return m;
}

inline Mat symbol(const CliffordModel& m, const Vec& xi) {
  if ((int)xi.size() != m.dim) throw std::invalid_argument("symbol: covector length mismatch");
  Mat s(m.fiber_dim, m.fiber_dim);
  for (int j = 0; j < m.dim; ++j)
    for (size_t t = 0; t < s.a.size(); ++t) s.a[t] += xi[j] * m.gamma[j].a[t];
  return s;
}

// Max violation of sigma_i sigma_j + sigma_j sigma_i + 2 delta_ij Id over all
// basis pairs; exactly 0 for models from build_clifford.
inline double clifford_defect(const CliffordModel& m) {
  double worst = 0.0;
  for (size_t i = 0; i < m.gamma.size(); ++i)
    for (size_t j = 0; j < m.gamma.size(); ++j) {
      Mat anti = m.gamma[i] * m.gamma[j] + m.gamma[j] * m.gamma[i];
      if (i == j)
        for (int d = 0; d < m.fiber_dim; ++d) anti(d, d) += 2.0;
      worst = std::max(worst, anti.max_abs_entry());
    }
  return worst;
}

}  // namespace cdo
