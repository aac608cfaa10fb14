#include <doctest.h>

#include <cmath>

#include "dkm/losses.hpp"
#include "oracles.hpp"

using namespace dkm;

namespace {

JointBatch random_batch(RngStream& rng, Index n, Index p) {
  return {sample_std_normal(rng, n, p), sample_std_normal(rng, n, p)};
}

}  // namespace

TEST_CASE("kernel_eval: closed forms") {
  const KernelSpec k8 = KernelSpec::default8();
  Vector u(3), v(3);
  u << 1, 2, 3;
  v << 1, 2, 3;
  CHECK(kernel_eval(k8, u, v) == doctest::Approx(1.0));

  KernelSpec k1;
  k1.bandwidths = Vector::Ones(1);
  k1.weights = Vector::Ones(1);
  Vector a(2), b(2);
  a << 0, 0;
  b << 1, 1;  // squared distance 2
  CHECK(kernel_eval(k1, a, b) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));

  // default spec at squared distance 2 against an explicitly evaluated sum
  double expected = 0.0;
  for (int i = 0; i < 8; ++i) {
    const double xi = double(1 << i);
    expected += std::exp(-1.0 / (xi * xi)) / 8.0;
  }
  CHECK(kernel_eval(k8, a, b) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("swap: examples and involution") {
  JointBatch b;
  b.X.resize(1, 2);
  b.Xt.resize(1, 2);
  b.X << 1, 2;
  b.Xt << 3, 4;

  SwapSet none;
  const JointBatch same = swap(b, none);
  CHECK(same.X == b.X);
  CHECK(same.Xt == b.Xt);

  SwapSet all;
  all.indices = {0, 1};
  const JointBatch flipped = swap(b, all);
  CHECK(flipped.X == b.Xt);
  CHECK(flipped.Xt == b.X);

  SwapSet second;
  second.indices = {1};
  const JointBatch partial = swap(b, second);
  CHECK(partial.X(0, 0) == 1);
  CHECK(partial.X(0, 1) == 4);
  CHECK(partial.Xt(0, 0) == 3);
  CHECK(partial.Xt(0, 1) == 2);

  SwapSet bad;
  bad.indices = {2};
  CHECK_THROWS_AS(swap(b, bad), IndexOutOfRange);

  RngStream rng(17);
  for (int rep = 0; rep < 20; ++rep) {
    JointBatch rb = random_batch(rng, 5, 4);
    const SwapSet s = sample_swap_set(4, rng);
    const JointBatch round = swap(swap(rb, s), s);
    CHECK((round.X - rb.X).norm() == 0.0);
    CHECK((round.Xt - rb.Xt).norm() == 0.0);
  }
}

TEST_CASE("swap sampling: per-coordinate frequency 1/2") {
  RngStream rng(23);
  const int p = 5, draws = 10000;
  std::vector<int> counts(p, 0);
  for (int t = 0; t < draws; ++t)
    for (int j : sample_swap_set(p, rng).indices) counts[j]++;
  for (int j = 0; j < p; ++j)
    CHECK(std::abs(double(counts[j]) / draws - 0.5) < 0.02);
}

TEST_CASE("mmd_unbiased: two identical two-point sets") {
  const KernelSpec k = KernelSpec::default8();
  Matrix a(2, 3);
  a << 0, 1, 2, 3, -1, 0.5;
  const double kab = kernel_eval(k, a.row(0), a.row(1));
  CHECK(mmd_unbiased(a, a, k) == doctest::Approx(kab - 1.0).epsilon(1e-12));
  CHECK(mmd_unbiased(a, a, k) <= 0.0);
}

TEST_CASE("mmd_unbiased: null mean within 3 SE of zero") {
  const KernelSpec k = KernelSpec::default8();
  RngStream rng(31);
  const int reps = 200;
  Vector vals(reps);
  for (int r = 0; r < reps; ++r) {
    const Matrix a = sample_std_normal(rng, 500, 5);
    const Matrix b = sample_std_normal(rng, 500, 5);
    vals[r] = mmd_unbiased(a, b, k);
  }
  const double mean = vals.mean();
  const double se = std::sqrt((vals.array() - mean).square().sum() /
                              double(reps - 1) / double(reps));
  CHECK(std::abs(mean) <= 3.0 * se);
}

TEST_CASE("mmd_unbiased: separated distributions give positive values") {
  const KernelSpec k = KernelSpec::default8();
  RngStream rng(37);
  int positive = 0;
  for (int r = 0; r < 100; ++r) {
    const Matrix a = sample_std_normal(rng, 500, 3);
    const Matrix b = sample_std_normal(rng, 500, 3).array() + 3.0;
    if (mmd_unbiased(a, b, k) > 0.0) ++positive;
  }
  CHECK(positive >= 99);
}

TEST_CASE("mmd_biased: identities and nonnegativity") {
  const KernelSpec k = KernelSpec::default8();
  RngStream rng(41);
  const Matrix a = sample_std_normal(rng, 6, 3);
  CHECK(mmd_biased(a, a, k) == doctest::Approx(0.0).epsilon(1e-14));

  Matrix u(1, 2), v(1, 2);
  u << 0, 0;
  v << 2, 1;
  const double kv = kernel_eval(k, u.row(0), v.row(0));
  CHECK(mmd_biased(u, v, k) == doctest::Approx(2.0 - 2.0 * kv).epsilon(1e-12));

  for (int rep = 0; rep < 1000; ++rep) {
    const Index n1 = 1 + Index(rng.below(5));
    const Index n2 = 1 + Index(rng.below(5));
    const Index d = 1 + Index(rng.below(3));
    const Matrix x = sample_std_normal(rng, n1, d);
    const Matrix y = sample_std_normal(rng, n2, d);
    CHECK(mmd_biased(x, y, k) >= -1e-12);
  }
}

TEST_CASE("mmd_lower_bound: identities and dominance") {
  const KernelSpec k = KernelSpec::default8();
  RngStream rng(43);
  for (Index n : {2, 3, 6}) {
    const Matrix a = sample_std_normal(rng, n, 2);
    CHECK(mmd_lower_bound(a, a, k) ==
          doctest::Approx(-1.0 / double(n - 1)).epsilon(1e-12));
  }
  for (int rep = 0; rep < 1000; ++rep) {
    const Index n = 2 + Index(rng.below(5));
    const Index d = 1 + Index(rng.below(3));
    const Matrix a = sample_std_normal(rng, n, d);
    const Matrix b = sample_std_normal(rng, n, d);
    CHECK(mmd_lower_bound(a, b, k) <= mmd_unbiased(a, b, k) + 1e-12);
  }
  // n=2 direct formula
  const Matrix a = sample_std_normal(rng, 2, 2);
  const Matrix b = sample_std_normal(rng, 2, 2);
  double direct = 0.0;
  for (int i = 0; i < 2; ++i)
    direct += 2.0 - kernel_eval(k, a.row(i), b.row(i));
  CHECK(mmd_lower_bound(a, b, k) == doctest::Approx(-direct / 2.0).epsilon(1e-12));
}

TEST_CASE("mmd estimators match the brute-force oracle") {
  const KernelSpec k = KernelSpec::default8();
  RngStream rng(47);
  for (int rep = 0; rep < 50; ++rep) {
    const Index n1 = 2 + Index(rng.below(5));
    const Index n2 = 2 + Index(rng.below(5));
    const Index d = 1 + Index(rng.below(3));
    const Matrix a = sample_std_normal(rng, n1, d);
    const Matrix b = sample_std_normal(rng, n2, d);
    CHECK(mmd_unbiased(a, b, k) ==
          doctest::Approx(oracle::mmd_unbiased(a, b, k)).epsilon(1e-12));
    CHECK(mmd_biased(a, b, k) ==
          doctest::Approx(oracle::mmd_biased(a, b, k)).epsilon(1e-12));
    const Matrix b2 = sample_std_normal(rng, n1, d);
    CHECK(mmd_lower_bound(a, b2, k) ==
          doctest::Approx(oracle::mmd_lower_bound(a, b2, k)).epsilon(1e-12));
  }
}

TEST_CASE("mmd symmetry and row-permutation invariance") {
  const KernelSpec k = KernelSpec::default8();
  RngStream rng(53);
  const Matrix a = sample_std_normal(rng, 7, 3);
  const Matrix b = sample_std_normal(rng, 9, 3);
  CHECK(mmd_unbiased(a, b, k) == doctest::Approx(mmd_unbiased(b, a, k)));
  Matrix ap = a;
  ap.row(0).swap(ap.row(6));
  ap.row(2).swap(ap.row(4));
  CHECK(mmd_unbiased(ap, b, k) == doctest::Approx(mmd_unbiased(a, b, k)));
  CHECK(mmd_biased(ap, b, k) == doctest::Approx(mmd_biased(a, b, k)));
}

TEST_CASE("loss_second_order: exact cases") {
  LossWeights w;
  RngStream rng(59);
  JointBatch b = random_batch(rng, 50, 4);
  b.Xt = b.X;
  CHECK(loss_second_order(b, w) == doctest::Approx(0.0).epsilon(1e-12));

  const double c = 0.7;
  b.Xt = b.X.array() + c;
  CHECK(loss_second_order(b, w) == doctest::Approx(c * c).epsilon(1e-9));
}

TEST_CASE("loss_second_order: independent copy is O(1/n)") {
  LossWeights w;
  RngStream rng(61);
  JointBatch b = random_batch(rng, 100000, 5);
  CHECK(loss_second_order(b, w) < 0.01);
}

TEST_CASE("loss_second_order: invariant under common column permutation") {
  LossWeights w;
  RngStream rng(67);
  JointBatch b = random_batch(rng, 40, 5);
  b.Xt = 0.5 * b.X + 0.5 * b.Xt;  // correlate to make the value nontrivial
  const double base = loss_second_order(b, w);
  JointBatch perm = b;
  const std::vector<int> order = {3, 0, 4, 1, 2};
  for (int j = 0; j < 5; ++j) {
    perm.X.col(j) = b.X.col(order[j]);
    perm.Xt.col(j) = b.Xt.col(order[j]);
  }
  CHECK(loss_second_order(perm, w) == doctest::Approx(base).epsilon(1e-10));
}

TEST_CASE("loss_second_order: degenerate covariance is reported") {
  LossWeights w;
  JointBatch b;
  b.X = Matrix::Ones(5, 2);  // constant columns, zero covariance
  b.Xt = Matrix::Ones(5, 2);
  CHECK_THROWS_AS(loss_second_order(b, w), DegenerateCovariance);
}

TEST_CASE("loss_decorrelation_simple: exact and null cases") {
  RngStream rng(71);
  JointBatch b = random_batch(rng, 1000, 5);
  b.Xt = b.X;
  CHECK(loss_decorrelation_simple(b) == doctest::Approx(5.0).epsilon(1e-12));
  b.Xt = -b.X;
  CHECK(loss_decorrelation_simple(b) == doctest::Approx(-5.0).epsilon(1e-12));

  JointBatch big = random_batch(rng, 100000, 5);
  CHECK(std::abs(loss_decorrelation_simple(big)) <= 0.05);

  JointBatch zero;
  zero.X = Matrix::Ones(5, 2);
  zero.Xt = Matrix::Random(5, 2);
  CHECK_THROWS_AS(loss_decorrelation_simple(zero), ZeroVariance);
}

TEST_CASE("loss_decorrelation_sdp: target identities") {
  RngStream rng(73);
  Matrix x = sample_std_normal(rng, 400, 3);
  // standardize columns with the 1/(n-1) convention so diag(Gxt) = 1
  x.rowwise() -= x.colwise().mean();
  for (int j = 0; j < 3; ++j)
    x.col(j) /= std::sqrt(x.col(j).squaredNorm() / double(x.rows() - 1));
  JointBatch b{x, x};
  CHECK(loss_decorrelation_sdp(b, Vector::Ones(3)) ==
        doctest::Approx(3.0).epsilon(1e-9));
  CHECK(loss_decorrelation_sdp(b, Vector::Zero(3)) ==
        doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("loss_mmd: identity copy has null mean (unbiased estimator)") {
  const KernelSpec k = KernelSpec::default8();
  RngStream rng(79);
  const int reps = 200;
  Vector vals(reps);
  for (int r = 0; r < reps; ++r) {
    const Matrix x1 = sample_std_normal(rng, 60, 4);
    const Matrix x2 = sample_std_normal(rng, 60, 4);
    JointBatch bp{x1, x1};
    JointBatch bs{x2, x2};
    const SwapSet s = sample_swap_set(4, rng);
    vals[r] = loss_mmd(bp, bs, s, k, MmdEstimator::unbiased);
  }
  const double mean = vals.mean();
  const double se = std::sqrt((vals.array() - mean).square().sum() /
                              double(reps - 1) / double(reps));
  CHECK(std::abs(mean) <= 3.0 * se);
}

TEST_CASE("loss_mmd: shifted knockoffs are detected") {
  const KernelSpec k = KernelSpec::default8();
  RngStream rng(83);
  int positive = 0;
  for (int r = 0; r < 100; ++r) {
    const Matrix x = sample_std_normal(rng, 200, 3);
    JointBatch bp{x.topRows(100), x.topRows(100).array() + 10.0};
    JointBatch bs{x.bottomRows(100), x.bottomRows(100).array() + 10.0};
    const SwapSet s = sample_swap_set(3, rng);
    if (loss_mmd(bp, bs, s, k, MmdEstimator::unbiased) > 0.0) ++positive;
  }
  CHECK(positive >= 99);
}

TEST_CASE("mmd_full_sweep: agrees with per-coordinate swaps") {
  const KernelSpec k = KernelSpec::default8();
  RngStream rng(89);
  JointBatch bp = random_batch(rng, 6, 3);
  JointBatch bs = random_batch(rng, 6, 3);
  double expected = 0.0;
  for (int j = 0; j < 3; ++j) {
    SwapSet s;
    s.indices = {j};
    const JointBatch sw = swap(bs, s);
    Matrix a(6, 6), b(6, 6);
    a << bp.X, bp.Xt;
    b << sw.X, sw.Xt;
    expected += mmd_unbiased(a, b, k);
  }
  CHECK(mmd_full_sweep(bp, bs, k, MmdEstimator::unbiased) ==
        doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("loss_total: weight composition") {
  const KernelSpec k = KernelSpec::default8();
  RngStream rng(97);
  JointBatch bp = random_batch(rng, 30, 4);
  JointBatch bs = random_batch(rng, 30, 4);
  const SwapSet s = sample_swap_set(4, rng);
  const Vector s_star = Vector::Constant(4, 0.5);

  LossWeights zero;
  zero.gamma = zero.lambda = zero.delta = 0.0;
  CHECK(loss_total(bp, bs, s, k, zero, s_star).total == 0.0);

  LossWeights so_only;
  so_only.gamma = 0.0;
  so_only.lambda = 2.0;
  so_only.delta = 0.5;
  const LossBreakdown lb = loss_total(bp, bs, s, k, so_only, s_star);
  CHECK(lb.mmd == 0.0);
  CHECK(lb.total ==
        doctest::Approx(2.0 * lb.second_order + 0.5 * lb.decorrelation));

  LossWeights full;  // (1,1,1) defaults
  const LossBreakdown fb = loss_total(bp, bs, s, k, full, s_star);
  CHECK(fb.total ==
        doctest::Approx(fb.mmd + fb.second_order + fb.decorrelation));
  CHECK(fb.mmd >= 0.0);  // biased estimator inside the training objective
}

// finite-difference checks of the analytic d(loss)/d(Xt) paths
namespace {

template <typename ValueFn, typename GradFn>
void check_xt_gradient(JointBatch b, ValueFn&& value, GradFn&& grad_fn,
                       double tol = 1e-6) {
  Matrix g = Matrix::Zero(b.Xt.rows(), b.Xt.cols());
  grad_fn(b, g);
  const double step = 1e-6;
  for (Index i = 0; i < b.Xt.rows(); ++i) {
    for (Index j = 0; j < b.Xt.cols(); ++j) {
      const double saved = b.Xt(i, j);
      b.Xt(i, j) = saved + step;
      const double up = value(b);
      b.Xt(i, j) = saved - step;
      const double down = value(b);
      b.Xt(i, j) = saved;
      const double fd = (up - down) / (2.0 * step);
      CHECK(g(i, j) == doctest::Approx(fd).epsilon(tol).scale(1.0));
    }
  }
}

}  // namespace

TEST_CASE("analytic Xt gradients match finite differences") {
  const KernelSpec k = KernelSpec::default8();
  RngStream rng(101);
  LossWeights w;
  w.lambda1 = 0.7;
  w.lambda2 = 1.3;
  w.lambda3 = 0.9;
  const Vector s_star = Vector::Constant(3, 0.4);

  JointBatch b = random_batch(rng, 12, 3);
  check_xt_gradient(
      b, [&](const JointBatch& bb) { return loss_second_order(bb, w); },
      [&](const JointBatch& bb, Matrix& g) {
        loss_second_order_grad(bb, w, g);
      });
  check_xt_gradient(
      b, [&](const JointBatch& bb) { return loss_decorrelation_sdp(bb, s_star); },
      [&](const JointBatch& bb, Matrix& g) {
        loss_decorrelation_sdp_grad(bb, s_star, g);
      });

  const SwapSet s = sample_swap_set(3, rng);
  JointBatch full = random_batch(rng, 10, 3);
  check_xt_gradient(
      full,
      [&](const JointBatch& bb) {
        JointBatch bp{bb.X.topRows(5), bb.Xt.topRows(5)};
        JointBatch bs{bb.X.bottomRows(5), bb.Xt.bottomRows(5)};
        return loss_mmd(bp, bs, s, k, MmdEstimator::biased);
      },
      [&](const JointBatch& bb, Matrix& g) {
        JointBatch bp{bb.X.topRows(5), bb.Xt.topRows(5)};
        JointBatch bs{bb.X.bottomRows(5), bb.Xt.bottomRows(5)};
        Matrix g1 = Matrix::Zero(5, 3), g2 = Matrix::Zero(5, 3);
        loss_mmd_biased_grad(bp, bs, s, k, g1, g2);
        g.topRows(5) = g1;
        g.bottomRows(5) = g2;
      });

  LossWeights lw;
  lw.gamma = 1.2;
  lw.lambda = 0.8;
  lw.delta = 1.5;
  check_xt_gradient(
      full,
      [&](const JointBatch& bb) {
        JointBatch bp{bb.X.topRows(5), bb.Xt.topRows(5)};
        JointBatch bs{bb.X.bottomRows(5), bb.Xt.bottomRows(5)};
        return loss_total(bp, bs, s, k, lw, s_star).total;
      },
      [&](const JointBatch& bb, Matrix& g) {
        loss_total_grad(bb, 5, s, k, lw, s_star, g);
      });
}
