#pragma once
// Small dense linear algebra, RNG, and fitting utilities.
// Everything here is deliberately simple: fibers are at most 48x48 and the
// dense paths are used as oracles or per-node kernels, never on grid-sized data.

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace cdo {

using Vec = std::vector<double>;

// ---------- vector helpers ----------

inline double dot(const Vec& x, const Vec& y) {
  assert(x.size() == y.size());
  double s = 0.0;
  for (size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

inline double nrm2(const Vec& x) { return std::sqrt(dot(x, x)); }

inline double max_abs(const Vec& x) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::fabs(v));
  return m;
}

// y += a*x
inline void axpy(double a, const Vec& x, Vec& y) {
  assert(x.size() == y.size());
  for (size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

inline void scal(double a, Vec& x) {
  for (double& v : x) v *= a;
}

inline Vec zeros(size_t n) { return Vec(n, 0.0); }

// ---------- dense matrices (row major) ----------

struct Mat {
  int rows = 0, cols = 0;
  Vec a;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), a((size_t)r * c, 0.0) {}

  double& operator()(int i, int j) { return a[(size_t)i * cols + j]; }
  double operator()(int i, int j) const { return a[(size_t)i * cols + j]; }

  static Mat identity(int n) {
    Mat m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  Mat transposed() const {
    Mat t(cols, rows);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  Vec apply(const Vec& x) const {
    assert((int)x.size() == cols);
    Vec y((size_t)rows, 0.0);
    for (int i = 0; i < rows; ++i) {
      double s = 0.0;
      const double* row = &a[(size_t)i * cols];
      for (int j = 0; j < cols; ++j) s += row[j] * x[j];
      y[i] = s;
    }
    return y;
  }

  double max_abs_entry() const { return max_abs(a); }

  double frob() const { return nrm2(a); }
};

inline Mat operator*(const Mat& A, const Mat& B) {
  assert(A.cols == B.rows);
  Mat C(A.rows, B.cols);
  for (int i = 0; i < A.rows; ++i)
    for (int k = 0; k < A.cols; ++k) {
      double aik = A(i, k);
      if (aik == 0.0) continue;
      for (int j = 0; j < B.cols; ++j) C(i, j) += aik * B(k, j);
    }
  return C;
}

inline Mat operator+(const Mat& A, const Mat& B) {
  assert(A.rows == B.rows && A.cols == B.cols);
  Mat C = A;
  for (size_t i = 0; i < C.a.size(); ++i) C.a[i] += B.a[i];
  return C;
}

inline Mat operator-(const Mat& A, const Mat& B) {
  assert(A.rows == B.rows && A.cols == B.cols);
  Mat C = A;
  for (size_t i = 0; i < C.a.size(); ++i) C.a[i] -= B.a[i];
  return C;
}

inline Mat operator*(double s, const Mat& A) {
  Mat C = A;
  for (double& v : C.a) v *= s;
  return C;
}

// ---------- LU with partial pivoting ----------

struct LuFactor {
  Mat lu;
  std::vector<int> piv;

  Vec solve(Vec b) const {
    const int n = lu.rows;
    assert((int)b.size() == n);
    for (int i = 0; i < n; ++i) std::swap(b[i], b[piv[i]]);
    for (int i = 1; i < n; ++i)
      for (int j = 0; j < i; ++j) b[i] -= lu(i, j) * b[j];
    for (int i = n - 1; i >= 0; --i) {
      for (int j = i + 1; j < n; ++j) b[i] -= lu(i, j) * b[j];
      b[i] /= lu(i, i);
    }
    return b;
  }
};

inline LuFactor lu_factor(Mat A) {
  const int n = A.rows;
  if (A.rows != A.cols) throw std::invalid_argument("lu_factor: square matrix required");
  std::vector<int> piv(n);
  for (int k = 0; k < n; ++k) {
    int p = k;
    for (int i = k + 1; i < n; ++i)
      if (std::fabs(A(i, k)) > std::fabs(A(p, k))) p = i;
    piv[k] = p;
    if (p != k)
      for (int j = 0; j < n; ++j) std::swap(A(k, j), A(p, j));
    if (A(k, k) == 0.0) throw std::runtime_error("lu_factor: singular matrix");
    for (int i = k + 1; i < n; ++i) {
      A(i, k) /= A(k, k);
      double lik = A(i, k);
      for (int j = k + 1; j < n; ++j) A(i, j) -= lik * A(k, j);
    }
  }
  return LuFactor{std::move(A), std::move(piv)};
}

inline Vec lu_solve(const Mat& A, const Vec& b) { return lu_factor(A).solve(b); }

// ---------- one-sided Jacobi SVD ----------
// A = U diag(s) V^T with s sorted descending. Intended for fiber-sized inputs;
// handles rank deficiency (zero singular values keep zero U columns).

struct Svd {
  Mat u;   // rows x k
  Vec s;   // k = min-like: we keep k = cols of the worked matrix
  Mat v;   // cols x k
};

inline Svd svd_jacobi(const Mat& A_in) {
  // Work on the tall orientation so the one-sided sweep orthogonalizes columns.
  bool transposed = A_in.rows < A_in.cols;
  Mat A = transposed ? A_in.transposed() : A_in;
  const int m = A.rows, n = A.cols;
  Mat V = Mat::identity(n);

  const double eps = 1e-15;
  for (int sweep = 0; sweep < 60; ++sweep) {
    bool rotated = false;
    for (int p = 0; p < n - 1; ++p)
      for (int q = p + 1; q < n; ++q) {
        double app = 0, aqq = 0, apq = 0;
        for (int i = 0; i < m; ++i) {
          app += A(i, p) * A(i, p);
          aqq += A(i, q) * A(i, q);
          apq += A(i, p) * A(i, q);
        }
        if (std::fabs(apq) <= eps * std::sqrt(app * aqq) || apq == 0.0) continue;
        rotated = true;
        double zeta = (aqq - app) / (2.0 * apq);
        double t = ((zeta >= 0) ? 1.0 : -1.0) / (std::fabs(zeta) + std::sqrt(1.0 + zeta * zeta));
        double cs = 1.0 / std::sqrt(1.0 + t * t), sn = cs * t;
        for (int i = 0; i < m; ++i) {
          double aip = A(i, p), aiq = A(i, q);
          A(i, p) = cs * aip - sn * aiq;
          A(i, q) = sn * aip + cs * aiq;
        }
        for (int i = 0; i < n; ++i) {
          double vip = V(i, p), viq = V(i, q);
          V(i, p) = cs * vip - sn * viq;
          V(i, q) = sn * vip + cs * viq;
        }
      }
    if (!rotated) break;
  }

  Vec s(n, 0.0);
  Mat U(m, n);
  for (int j = 0; j < n; ++j) {
    double nj = 0;
    for (int i = 0; i < m; ++i) nj += A(i, j) * A(i, j);
    nj = std::sqrt(nj);
    s[j] = nj;
    if (nj > 0)
      for (int i = 0; i < m; ++i) U(i, j) = A(i, j) / nj;
  }
  // sort descending
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](int a, int b) { return s[a] > s[b]; });
  Svd out;
  out.s.resize(n);
  out.u = Mat(m, n);
  out.v = Mat(n, n);
  for (int j = 0; j < n; ++j) {
    out.s[j] = s[idx[j]];
    for (int i = 0; i < m; ++i) out.u(i, j) = U(i, idx[j]);
    for (int i = 0; i < n; ++i) out.v(i, j) = V(i, idx[j]);
  }
  if (transposed) std::swap(out.u, out.v);
  return out;
}

// ---------- least squares line fit ----------

struct LineFit {
  double slope = 0, intercept = 0, r2 = 0;
  int n = 0;
};

inline LineFit linefit(const Vec& x, const Vec& y) {
  assert(x.size() == y.size());
  LineFit f;
  f.n = (int)x.size();
  if (f.n < 2) return f;
  double sx = 0, sy = 0;
  for (int i = 0; i < f.n; ++i) { sx += x[i]; sy += y[i]; }
  double mx = sx / f.n, my = sy / f.n;
  double sxx = 0, sxy = 0, syy = 0;
  for (int i = 0; i < f.n; ++i) {
    double dx = x[i] - mx, dy = y[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx == 0) return f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r2 = (syy == 0) ? 1.0 : (sxy * sxy) / (sxx * syy);
  return f;
}

// ---------- deterministic RNG (xorshift64*) ----------

struct Rng {
  uint64_t state;
  explicit Rng(uint64_t seed = 0x9E3779B97F4A7C15ull) : state(seed ? seed : 1) {}

  uint64_t next() {
    uint64_t x = state;
    x ^= x >> 12;
    x ^= x << 25;
    x ^= x >> 27;
    state = x;
    return x * 0x2545F4914F6CDD1Dull;
  }

  double uniform() { return (next() >> 11) * (1.0 / 9007199254740992.0); }  // [0,1)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // symmetric interval draw, handy for random fibers
  double sym() { return uniform(-1.0, 1.0); }

  Vec vec(size_t n, double lo = -1.0, double hi = 1.0) {
    Vec v(n);
    for (auto& e : v) e = uniform(lo, hi);
    return v;
  }

  Vec unit_vec(size_t n) {
    Vec v = vec(n);
    double r = nrm2(v);
    while (r < 1e-8) { v = vec(n); r = nrm2(v); }
    scal(1.0 / r, v);
    return v;
  }
};

}  // namespace cdo
