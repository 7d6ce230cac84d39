#include <catch2/catch_amalgamated.hpp>

#include "cdo/linalg.hpp"

using namespace cdo;

TEST_CASE("lu solves a hand-checked 3x3 system") {
  Mat A(3, 3);
  // x + 2y + z = 8, 2x + y = 4, y + 3z = 11  ->  (x,y,z) = (1,2,3)
  A(0, 0) = 1; A(0, 1) = 2; A(0, 2) = 1;
  A(1, 0) = 2; A(1, 1) = 1; A(1, 2) = 0;
  A(2, 0) = 0; A(2, 1) = 1; A(2, 2) = 3;
  Vec x = lu_solve(A, {8, 4, 11});
  REQUIRE(x[0] == Catch::Approx(1.0).margin(1e-12));
  REQUIRE(x[1] == Catch::Approx(2.0).margin(1e-12));
  REQUIRE(x[2] == Catch::Approx(3.0).margin(1e-12));
}

TEST_CASE("lu residuals vanish on random systems") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    int n = 5 + (int)(rng.uniform() * 20);
    Mat A(n, n);
    for (double& v : A.a) v = rng.sym();
    for (int i = 0; i < n; ++i) A(i, i) += 3.0;  // keep it comfortably invertible
    Vec b = rng.vec(n);
    Vec x = lu_solve(A, b);
    Vec r = A.apply(x);
    axpy(-1.0, b, r);
    REQUIRE(nrm2(r) <= 1e-10 * (1.0 + nrm2(b)));
  }
}

TEST_CASE("svd reproduces hand-built singular values") {
  // A = U diag(5, 3, 1) V^T with U, V from explicit Givens rotations
  auto rot3 = [](double t, int a, int b) {
    Mat r = Mat::identity(3);
    r(a, a) = std::cos(t); r(b, b) = std::cos(t);
    r(a, b) = -std::sin(t); r(b, a) = std::sin(t);
    return r;
  };
  Mat U = rot3(0.3, 0, 1) * rot3(-0.7, 1, 2);
  Mat V = rot3(1.1, 0, 2) * rot3(0.4, 0, 1);
  Mat D(3, 3);
  D(0, 0) = 5; D(1, 1) = 3; D(2, 2) = 1;
  Mat A = U * D * V.transposed();

  Svd s = svd_jacobi(A);
  REQUIRE(s.s[0] == Catch::Approx(5.0).margin(1e-10));
  REQUIRE(s.s[1] == Catch::Approx(3.0).margin(1e-10));
  REQUIRE(s.s[2] == Catch::Approx(1.0).margin(1e-10));
  // reconstruction
  Mat R(3, 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) R(i, j) += s.u(i, k) * s.s[k] * s.v(j, k);
  REQUIRE((R - A).max_abs_entry() <= 1e-10);
}

TEST_CASE("svd handles rectangular and rank-deficient input") {
  // 6x3 matrix with a repeated column: rank 2
  Rng rng(5);
  Mat A(6, 3);
  for (int i = 0; i < 6; ++i) {
    A(i, 0) = rng.sym();
    A(i, 1) = rng.sym();
    A(i, 2) = 2.0 * A(i, 0);  // dependent
  }
  Svd s = svd_jacobi(A);
  REQUIRE(s.s[0] > 0.1);
  REQUIRE(s.s[1] > 1e-8);
  REQUIRE(s.s[2] <= 1e-10 * s.s[0]);
  // null vector: A v_2 = 0
  Vec v2(3);
  for (int i = 0; i < 3; ++i) v2[i] = s.v(i, 2);
  REQUIRE(nrm2(A.apply(v2)) <= 1e-10);

  // wide input goes through the transposed path
  Mat W = A.transposed();
  Svd sw = svd_jacobi(W);
  REQUIRE(sw.s[0] == Catch::Approx(s.s[0]).margin(1e-10));
  REQUIRE(sw.u.rows == 3);
  REQUIRE(sw.v.rows == 6);
}

TEST_CASE("svd orthonormality of the computed factors") {
  Rng rng(17);
  Mat A(8, 5);
  for (double& v : A.a) v = rng.sym();
  Svd s = svd_jacobi(A);
  Mat utu = s.u.transposed() * s.u;
  Mat vtv = s.v.transposed() * s.v;
  REQUIRE((utu - Mat::identity(5)).max_abs_entry() <= 1e-10);
  REQUIRE((vtv - Mat::identity(5)).max_abs_entry() <= 1e-10);
}

TEST_CASE("linefit recovers an exact line and scores noise") {
  Vec x, y;
  for (int i = 0; i < 10; ++i) {
    x.push_back(0.5 * i);
    y.push_back(-2.0 * (0.5 * i) + 3.0);
  }
  LineFit f = linefit(x, y);
  REQUIRE(f.slope == Catch::Approx(-2.0).margin(1e-12));
  REQUIRE(f.intercept == Catch::Approx(3.0).margin(1e-12));
  REQUIRE(f.r2 == Catch::Approx(1.0).margin(1e-12));

  // a flat-plus-noise cloud has tiny r2
  Rng rng(23);
  Vec yn;
  for (int i = 0; i < 10; ++i) yn.push_back(rng.sym());
  LineFit fn = linefit(x, yn);
  REQUIRE(fn.r2 < 0.9);
}

TEST_CASE("rng determinism and range") {
  Rng a(123), b(123);
  for (int i = 0; i < 1000; ++i) REQUIRE(a.next() == b.next());
  Rng c(123);
  for (int i = 0; i < 1000; ++i) {
    double u = c.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
  }
  Vec v = c.unit_vec(12);
  REQUIRE(nrm2(v) == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("matrix helpers: transpose, products, norms") {
  Mat A(2, 3);
  A(0, 0) = 1; A(0, 1) = 2; A(0, 2) = 3;
  A(1, 0) = 4; A(1, 1) = 5; A(1, 2) = 6;
  Mat At = A.transposed();
  REQUIRE(At.rows == 3);
  REQUIRE(At(2, 1) == 6.0);
  Mat AtA = At * A;
  REQUIRE(AtA(0, 0) == 17.0);  // 1 + 16
  REQUIRE(AtA(2, 2) == 45.0);  // 9 + 36
  REQUIRE(A.max_abs_entry() == 6.0);
  Vec y = A.apply({1, 1, 1});
  REQUIRE(y[0] == 6.0);
  REQUIRE(y[1] == 15.0);
}
