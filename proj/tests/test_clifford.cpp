#include <catch2/catch_amalgamated.hpp>

#include "cdo/clifford.hpp"

using namespace cdo;

// Independent oracle: quaternion multiplication from the structure constants
// i^2=j^2=k^2=-1, ij=k, jk=i, ki=j, written without reference to the library.
namespace {

struct Q4 {
  double c[4];  // (1, i, j, k) coefficients
};

Q4 oracle_mul(const Q4& a, const Q4& b) {
  // table[p][q] = (sign, basis index) for e_p * e_q with basis (1,i,j,k)
  static const int idx[4][4] = {{0, 1, 2, 3}, {1, 0, 3, 2}, {2, 3, 0, 1}, {3, 2, 1, 0}};
  static const int sgn[4][4] = {{1, 1, 1, 1}, {1, -1, 1, -1}, {1, -1, -1, 1}, {1, 1, -1, -1}};
  Q4 r{{0, 0, 0, 0}};
  for (int p = 0; p < 4; ++p)
    for (int q = 0; q < 4; ++q) r.c[idx[p][q]] += sgn[p][q] * a.c[p] * b.c[q];
  return r;
}

Mat oracle_left_mat(const Q4& q) {
  Mat m(4, 4);
  for (int col = 0; col < 4; ++col) {
    Q4 e{{0, 0, 0, 0}};
    e.c[col] = 1;
    Q4 r = oracle_mul(q, e);
    for (int row = 0; row < 4; ++row) m(row, col) = r.c[row];
  }
  return m;
}

double max_diff(const Mat& a, const Mat& b) { return (a - b).max_abs_entry(); }

}  // namespace

TEST_CASE("quaternion products match the structure-constant oracle") {
  Rng rng(42);
  for (int trial = 0; trial < 200; ++trial) {
    Quat a(rng.sym(), rng.sym(), rng.sym(), rng.sym());
    Quat b(rng.sym(), rng.sym(), rng.sym(), rng.sym());
    Quat ab = qmul(a, b);
    Q4 qa{{a.w, a.x, a.y, a.z}}, qb{{b.w, b.x, b.y, b.z}};
    Q4 r = oracle_mul(qa, qb);
    REQUIRE(ab.w == Catch::Approx(r.c[0]).margin(1e-14));
    REQUIRE(ab.x == Catch::Approx(r.c[1]).margin(1e-14));
    REQUIRE(ab.y == Catch::Approx(r.c[2]).margin(1e-14));
    REQUIRE(ab.z == Catch::Approx(r.c[3]).margin(1e-14));
  }
  // left-multiplication matrices agree entrywise with the oracle
  for (const Quat& q : {QI, QJ, QK, Quat(0.3, -1.2, 0.7, 2.0)}) {
    Q4 oq{{q.w, q.x, q.y, q.z}};
    REQUIRE(max_diff(qleft(q), oracle_left_mat(oq)) == 0.0);
  }
}

TEST_CASE("dim 3 model: exact Clifford relations") {
  CliffordModel m = build_clifford(3);
  REQUIRE(m.fiber_dim == 4);
  REQUIRE(m.gamma.size() == 3);

  // sigma(e1)^2 = -Id, integer exact
  Mat sq = m.gamma[0] * m.gamma[0];
  REQUIRE(max_diff(sq, -1.0 * Mat::identity(4)) == 0.0);

  // anticommutation for i != j
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      if (i == j) continue;
      Mat anti = m.gamma[i] * m.gamma[j] + m.gamma[j] * m.gamma[i];
      REQUIRE(anti.max_abs_entry() == 0.0);
    }

  REQUIRE(clifford_defect(m) == 0.0);
}

TEST_CASE("dim 3 model: product structure and orientation") {
  CliffordModel m = build_clifford(3);
  // sigma(e1) sigma(e2) = sigma(e3), exact integer equality
  REQUIRE(max_diff(m.gamma[0] * m.gamma[1], m.gamma[2]) == 0.0);
  // documented orientation: sigma(e1) sigma(e2) sigma(e3) = -Id
  Mat triple = m.gamma[0] * m.gamma[1] * m.gamma[2];
  REQUIRE(max_diff(triple, -1.0 * Mat::identity(4)) == 0.0);
}

TEST_CASE("all symbols are skew orthogonal signed permutations") {
  for (int dim : {3, 4}) {
    CliffordModel m = build_clifford(dim);
    for (const Mat& g : m.gamma) {
      // skew
      REQUIRE(max_diff(g, -1.0 * g.transposed()) == 0.0);
      // orthogonal: g^T g = Id
      REQUIRE(max_diff(g.transposed() * g, Mat::identity(m.fiber_dim)) == 0.0);
      // entries in {-1, 0, 1} with exactly one nonzero per row
      for (int i = 0; i < m.fiber_dim; ++i) {
        int nnz = 0;
        for (int j = 0; j < m.fiber_dim; ++j) {
          double v = g(i, j);
          REQUIRE((v == 0.0 || v == 1.0 || v == -1.0));
          if (v != 0.0) ++nnz;
        }
        REQUIRE(nnz == 1);
      }
    }
  }
}

TEST_CASE("dim 4 model: grading and defect") {
  CliffordModel m = build_clifford(4);
  REQUIRE(m.fiber_dim == 8);
  REQUIRE(m.gamma.size() == 4);
  REQUIRE(m.grading_split == 4);
  REQUIRE(clifford_defect(m) == 0.0);
  // every symbol swaps the two halves: diagonal blocks vanish
  for (const Mat& g : m.gamma)
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) {
        REQUIRE(g(i, j) == 0.0);
        REQUIRE(g(i + 4, j + 4) == 0.0);
      }
}

TEST_CASE("symbol map: linearity, basis vectors, ellipticity") {
  for (int dim : {3, 4}) {
    CliffordModel m = build_clifford(dim);

    Vec zero(dim, 0.0);
    REQUIRE(symbol(m, zero).max_abs_entry() == 0.0);

    for (int j = 0; j < dim; ++j) {
      Vec e(dim, 0.0);
      e[j] = 1.0;
      REQUIRE(max_diff(symbol(m, e), m.gamma[j]) == 0.0);
    }

    // |xi|^2 = 25 example
    Vec xi(dim, 0.0);
    xi[0] = 3.0;
    xi[1] = 4.0;
    Mat sts = symbol(m, xi).transposed() * symbol(m, xi);
    REQUIRE(max_diff(sts, 25.0 * Mat::identity(m.fiber_dim)) <= 1e-12);

    // inverse of the symbol is -symbol/|xi|^2
    Rng rng(7 + dim);
    for (int trial = 0; trial < 50; ++trial) {
      Vec x = rng.vec(dim);
      double n2 = dot(x, x);
      if (n2 < 1e-6) continue;
      Mat s = symbol(m, x);
      Mat prod = s * (-1.0 / n2 * s);
      REQUIRE(max_diff(prod, Mat::identity(m.fiber_dim)) <= 1e-12);
    }
  }
}

TEST_CASE("dim 4 symbol exchanges the chirality blocks for generic xi") {
  CliffordModel m = build_clifford(4);
  Rng rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    Mat s = symbol(m, rng.vec(4));
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) {
        REQUIRE(s(i, j) == 0.0);
        REQUIRE(s(i + 4, j + 4) == 0.0);
      }
  }
}

TEST_CASE("defect of a corrupted model") {
  CliffordModel m = build_clifford(3);
  m.gamma[0] = Mat::identity(4);  // no longer skew, relation broken
  REQUIRE(clifford_defect(m) == 4.0);
}

TEST_CASE("unsupported dimension is rejected") {
  REQUIRE_THROWS_AS(build_clifford(2), std::invalid_argument);
  REQUIRE_THROWS_AS(build_clifford(5), std::invalid_argument);
}
