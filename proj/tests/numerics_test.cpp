#include <doctest.h>

#include <cmath>

#include "dkm/linalg.hpp"
#include "dkm/rng.hpp"

using namespace dkm;

TEST_CASE("cholesky: identity factorizes to itself") {
  const Matrix id = Matrix::Identity(3, 3);
  const Matrix l = cholesky(id, 0.0);
  CHECK((l - id).norm() == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("cholesky: 2x2 hand-computed factor") {
  Matrix m(2, 2);
  m << 4, 2, 2, 3;
  const Matrix l = cholesky(m, 0.0);
  CHECK(l(0, 0) == doctest::Approx(2.0));
  CHECK(l(1, 0) == doctest::Approx(1.0));
  CHECK(l(0, 1) == doctest::Approx(0.0));
  CHECK(l(1, 1) == doctest::Approx(std::sqrt(2.0)));
  CHECK((l * l.transpose() - m).norm() / m.norm() < 1e-10);
}

TEST_CASE("cholesky: indefinite matrix fails") {
  Matrix m(2, 2);
  m << 1, 2, 2, 1;  // eigenvalues -1 and 3
  CHECK_THROWS_AS(cholesky(m, 0.0), NotPositiveDefinite);
}

TEST_CASE("cholesky: reports the escalated jitter") {
  Matrix m = Matrix::Identity(2, 2);
  double used = -1.0;
  cholesky(m, 1e-9, &used);
  CHECK(used == doctest::Approx(1e-9));
}

TEST_CASE("sym_eigs: small closed forms") {
  CHECK(sym_eigs(Matrix::Identity(2, 2))[0] == doctest::Approx(1.0));
  CHECK(sym_eigs(Matrix::Identity(2, 2))[1] == doctest::Approx(1.0));
  Matrix m(2, 2);
  m << 1, 0.5, 0.5, 1;
  const Vector e = sym_eigs(m);
  CHECK(e[0] == doctest::Approx(0.5));
  CHECK(e[1] == doctest::Approx(1.5));
  const Vector z = sym_eigs(Matrix::Zero(2, 2));
  CHECK(z[0] == doctest::Approx(0.0));
  CHECK(z[1] == doctest::Approx(0.0));
}

TEST_CASE("sym_eigs: rejects non-finite input") {
  Matrix m = Matrix::Identity(2, 2);
  m(0, 1) = m(1, 0) = std::nan("");
  CHECK_THROWS_AS(sym_eigs(m), NonFinite);
}

TEST_CASE("sym_eigs: trace and Frobenius invariants on random matrices") {
  RngStream rng(11);
  for (int rep = 0; rep < 20; ++rep) {
    const int p = 2 + int(rng.below(6));
    Matrix a = sample_std_normal(rng, p, p);
    const Matrix m = 0.5 * (a + a.transpose());
    const Vector e = sym_eigs(m);
    CHECK(std::abs(e.sum() - m.trace()) <=
          1e-8 * std::max(1.0, std::abs(m.trace())));
    CHECK(std::abs(e.squaredNorm() - m.squaredNorm()) <=
          1e-8 * std::max(1.0, m.squaredNorm()));
  }
}

TEST_CASE("eig/cholesky agreement on random spectra") {
  // random orthogonal basis x controlled eigenvalues; the negative case
  // is placed far below the jitter escalation cap
  RngStream rng(29);
  int checked = 0;
  for (int rep = 0; rep < 100; ++rep) {
    const int p = 2 + int(rng.below(7));
    const Matrix g = sample_std_normal(rng, p, p);
    const Eigen::HouseholderQR<Matrix> qr(g);
    const Matrix q = qr.householderQ();
    Vector eigs(p);
    const bool make_indefinite = rep % 3 == 0;
    for (int i = 0; i < p; ++i) eigs[i] = 0.1 + 2.9 * rng.uniform01();
    if (make_indefinite) eigs[0] = -0.5;
    const Matrix m = q * eigs.asDiagonal() * q.transpose();
    const Matrix sym = 0.5 * (m + m.transpose());
    const double jitter = 1e-8 * std::abs(sym.trace()) / double(p);
    const bool psd = sym_eigs(sym)[0] >= -1e-8;
    bool chol_ok = true;
    try {
      cholesky(sym, jitter);
    } catch (const NotPositiveDefinite&) {
      chol_ok = false;
    }
    CHECK(psd == chol_ok);
    ++checked;
  }
  CHECK(checked == 100);
}

TEST_CASE("chol_solve: inverts against known system") {
  Matrix m(3, 3);
  m << 4, 1, 0, 1, 3, 1, 0, 1, 2;
  const Matrix l = cholesky(m, 0.0);
  Vector b(3);
  b << 1, 2, 3;
  const Vector x = chol_solve(l, b);
  CHECK((m * x - b).norm() < 1e-12);
}

TEST_CASE("rng: identical seed gives identical draws") {
  RngStream a(1), b(1);
  CHECK(sample_std_normal(a, 1, 1)(0, 0) == sample_std_normal(b, 1, 1)(0, 0));
  RngStream c(1), d(2);
  CHECK(sample_std_normal(c, 10, 10) != sample_std_normal(d, 10, 10));
}

TEST_CASE("rng: standard normal moments") {
  RngStream rng(1);
  const Matrix x = sample_std_normal(rng, 100000, 1);
  const double mean = x.mean();
  const double var = (x.array() - mean).square().sum() / double(x.rows() - 1);
  CHECK(std::abs(mean) < 0.02);
  CHECK(var == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("rng: substreams differ from parent and each other") {
  RngStream rng(5);
  RngStream s0 = rng.substream(0);
  RngStream s1 = rng.substream(1);
  CHECK(s0.next_u64() != s1.next_u64());
  RngStream again = rng.substream(0);
  RngStream s0b = rng.substream(0);
  CHECK(again.next_u64() == s0b.next_u64());
}

TEST_CASE("gamma: moments at shape=rate=1.5") {
  RngStream rng(3);
  const Vector g = sample_gamma(rng, 1.5, 1.5, 1000000);
  CHECK((g.array() > 0.0).all());
  const double mean = g.mean();
  const double var = (g.array() - mean).square().sum() / double(g.size() - 1);
  CHECK(mean == doctest::Approx(1.0).epsilon(0.01));
  CHECK(std::abs(var - 2.0 / 3.0) < 0.02);
}

TEST_CASE("gamma: shape below one and bad parameters") {
  RngStream rng(7);
  const Vector g = sample_gamma(rng, 0.5, 2.0, 20000);
  CHECK((g.array() > 0.0).all());
  CHECK(g.mean() == doctest::Approx(0.25).epsilon(0.05));
  CHECK_THROWS_AS(rng.gamma(0.0, 1.0), BadParam);
  CHECK_THROWS_AS(rng.gamma(1.0, -1.0), BadParam);
}
