#include <doctest.h>

#include <cmath>

#include "dkm/losses.hpp"
#include "dkm/network.hpp"
#include "oracles.hpp"

using namespace dkm;

TEST_CASE("prelu: definition") {
  CHECK(prelu(-2.0, 0.25) == doctest::Approx(-0.5));
  CHECK(prelu(3.0, 0.25) == doctest::Approx(3.0));
}

TEST_CASE("init_machine: determinism, shapes, finiteness") {
  RngStream a(7), b(7);
  MachineParams m1 = init_machine(3, 5, 2, a);
  MachineParams m2 = init_machine(3, 5, 2, b);
  auto v1 = param_views(m1), v2 = param_views(m2);
  REQUIRE(v1.size() == v2.size());
  for (std::size_t t = 0; t < v1.size(); ++t) {
    REQUIRE(v1[t].size == v2[t].size);
    for (Index i = 0; i < v1[t].size; ++i) {
      CHECK(v1[t].data[i] == v2[t].data[i]);
      CHECK(std::isfinite(v1[t].data[i]));
    }
  }
  CHECK(m1.input.W.rows() == 6);
  CHECK(m1.input.W.cols() == 5);
  CHECK(m1.hidden.size() == 2);
  CHECK(m1.w_out.rows() == 5);
  CHECK(m1.w_out.cols() == 3);
  CHECK(m1.input.prelu_slope == doctest::Approx(0.25));
  CHECK((m1.input.bn.run_var.array() == 1.0).all());
  CHECK_THROWS_AS(init_machine(0, 5, 2, a), BadParam);
}

TEST_CASE("forward: zero weights produce the output bias") {
  RngStream rng(9);
  MachineParams m = init_machine(3, 5, 2, rng);
  for (auto& view : param_views(m))
    for (Index i = 0; i < view.size; ++i) view.data[i] = 0.0;
  m.b_out << 0.5, -1.0, 2.0;
  const Matrix x = sample_std_normal(rng, 4, 3);
  const Matrix v = sample_std_normal(rng, 4, 3);
  const Matrix out = forward(m, x, v);
  CHECK(out.rows() == 4);
  CHECK(out.cols() == 3);
  for (Index i = 0; i < 4; ++i) {
    CHECK(out(i, 0) == doctest::Approx(0.5));
    CHECK(out(i, 1) == doctest::Approx(-1.0));
    CHECK(out(i, 2) == doctest::Approx(2.0));
  }
}

TEST_CASE("forward: shape checks and output finiteness") {
  RngStream rng(11);
  MachineParams m = init_machine(3, 5, 1, rng);
  const Matrix x = sample_std_normal(rng, 4, 3);
  const Matrix v = sample_std_normal(rng, 4, 3);
  CHECK(forward(m, x, v).allFinite());
  const Matrix bad = sample_std_normal(rng, 4, 2);
  CHECK_THROWS_AS(forward(m, x, bad), ShapeMismatch);
}

TEST_CASE("forward: eval mode is deterministic and matches forward_eval") {
  RngStream rng(13);
  MachineParams m = init_machine(2, 6, 2, rng);
  const Matrix x = sample_std_normal(rng, 10, 2);
  const Matrix v = sample_std_normal(rng, 10, 2);
  forward(m, x, v);  // train-mode pass perturbs the running statistics
  m.train_mode = false;
  const Matrix a = forward(m, x, v);
  const Matrix b = forward(m, x, v);
  CHECK((a - b).norm() == 0.0);
  const Matrix c = forward_eval(m, x, v);
  CHECK((a - c).norm() == 0.0);
}

TEST_CASE("batch normalization: train-mode batch statistics") {
  RngStream rng(17);
  MachineParams m = init_machine(4, 8, 1, rng);
  // nontrivial affine state
  m.input.bn.scale = Vector::LinSpaced(8, 0.5, 2.0);
  m.input.bn.shift = Vector::LinSpaced(8, -1.0, 1.0);
  const Index n = 64;
  const Matrix x = sample_std_normal(rng, n, 4);
  const Matrix v = sample_std_normal(rng, n, 4);
  ForwardCache cache;
  forward(m, x, v, &cache);
  const Matrix& act = cache.layers[0].act_in;
  for (Index j = 0; j < 8; ++j) {
    const double mean = act.col(j).mean();
    const double sd = std::sqrt((act.col(j).array() - mean).square().sum() / n);
    CHECK(std::abs(mean - m.input.bn.shift[j]) < 1e-6);
    // the epsilon inside the variance denominator shrinks the scale by
    // a factor sigma/sqrt(sigma^2+eps); allow for it
    CHECK(std::abs(sd - m.input.bn.scale[j]) <
          1e-4 * m.input.bn.scale[j] + 1e-6);
  }
}

TEST_CASE("backward: linear in the upstream gradient") {
  RngStream rng(19);
  MachineParams m = init_machine(2, 4, 1, rng);
  const Matrix x = sample_std_normal(rng, 8, 2);
  const Matrix v = sample_std_normal(rng, 8, 2);
  ForwardCache cache;
  forward(m, x, v, &cache);

  const Matrix zero = Matrix::Zero(8, 2);
  MachineGrads gz = backward(m, cache, zero);
  for (auto& view : grad_views(gz))
    for (Index i = 0; i < view.size; ++i) CHECK(view.data[i] == 0.0);

  const Matrix up = sample_std_normal(rng, 8, 2);
  MachineGrads g1 = backward(m, cache, up);
  MachineGrads g2 = backward(m, cache, 2.0 * up);
  auto v1 = grad_views(g1), v2 = grad_views(g2);
  for (std::size_t t = 0; t < v1.size(); ++t)
    for (Index i = 0; i < v1[t].size; ++i)
      CHECK(v2[t].data[i] == doctest::Approx(2.0 * v1[t].data[i]).epsilon(1e-12));
}

TEST_CASE("backward: stale or missing cache is rejected") {
  RngStream rng(23);
  MachineParams m = init_machine(2, 4, 1, rng);
  ForwardCache cache;
  CHECK_THROWS_AS(backward(m, cache, Matrix::Zero(8, 2)), StaleCache);
  const Matrix x = sample_std_normal(rng, 8, 2);
  const Matrix v = sample_std_normal(rng, 8, 2);
  m.train_mode = false;
  forward(m, x, v, &cache);  // eval-mode pass caches nothing
  CHECK_THROWS_AS(backward(m, cache, Matrix::Zero(8, 2)), StaleCache);
}

TEST_CASE("backward: finite differences on a quadratic objective") {
  RngStream rng(29);
  MachineParams m = init_machine(2, 4, 1, rng);
  const Matrix x = sample_std_normal(rng, 8, 2);
  const Matrix v = sample_std_normal(rng, 8, 2);
  const Matrix target = sample_std_normal(rng, 8, 2);

  ForwardCache cache;
  const Matrix out = forward(m, x, v, &cache);
  MachineGrads g = backward(m, cache, out - target);
  auto loss = [&] {
    MachineParams& mm = m;
    const Matrix o = forward(mm, x, v);
    return 0.5 * (o - target).squaredNorm();
  };
  CHECK(oracle::max_relative_grad_error(m, g, loss) <= 1e-4);
}

TEST_CASE("backward: finite differences through the full training loss") {
  const KernelSpec kernel = KernelSpec::default8();
  RngStream rng(31);
  LossWeights w;
  w.gamma = 1.0;
  w.lambda = 0.7;
  w.delta = 0.4;
  for (int rep = 0; rep < 3; ++rep) {
    const int p = 2 + rep % 2;
    MachineParams m = init_machine(p, 4, 1 + rep % 2, rng);
    const Index n = 8;
    const Matrix x = sample_std_normal(rng, n, p);
    const Matrix v = sample_std_normal(rng, n, p);
    const SwapSet s = sample_swap_set(p, rng);
    const Vector s_star = Vector::Constant(p, 0.6);

    ForwardCache cache;
    const Matrix xt = forward(m, x, v, &cache);
    Matrix dxt;
    loss_total_grad(JointBatch{x, xt}, n / 2, s, kernel, w, s_star, dxt);
    MachineGrads g = backward(m, cache, dxt);
    auto loss = [&] {
      const Matrix o = forward(m, x, v);
      Matrix scratch;
      return loss_total_grad(JointBatch{x, o}, n / 2, s, kernel, w, s_star,
                             scratch)
          .total;
    };
    CHECK(oracle::max_relative_grad_error(m, g, loss) <= 1e-4);
  }
}

TEST_CASE("sgd_step: plain and momentum updates") {
  RngStream rng(37);
  MachineParams m = init_machine(1, 1, 1, rng);
  auto views = param_views(m);
  // locate the output bias (last view) and give it a known value
  auto& bias = views.back();
  REQUIRE(bias.size == 1);
  bias.data[0] = 1.0;

  MachineGrads g = make_zero_grads(m);
  g.db_out[0] = 2.0;
  SgdState plain = make_sgd_state(m, 0.1, 0.0);
  sgd_step(m, plain, g);
  CHECK(bias.data[0] == doctest::Approx(0.8));

  // two momentum steps with unit gradient: velocity 1 then 1.9
  bias.data[0] = 1.0;
  MachineGrads ones = make_zero_grads(m);
  ones.db_out[0] = 1.0;
  SgdState mom = make_sgd_state(m, 0.1, 0.9);
  sgd_step(m, mom, ones);
  CHECK(bias.data[0] == doctest::Approx(1.0 - 0.1));
  ones.db_out[0] = 1.0;
  sgd_step(m, mom, ones);
  CHECK(bias.data[0] == doctest::Approx(1.0 - 0.1 - 0.1 * 1.9));

  // zero gradient leaves every parameter unchanged
  MachineParams before = m;
  MachineGrads zero = make_zero_grads(m);
  SgdState st = make_sgd_state(m, 0.5, 0.0);
  sgd_step(m, st, zero);
  auto va = param_views(before), vb = param_views(m);
  for (std::size_t t = 0; t < va.size(); ++t)
    for (Index i = 0; i < va[t].size; ++i)
      CHECK(va[t].data[i] == vb[t].data[i]);
}

TEST_CASE("clip_grad_norm: rescales only above the threshold") {
  RngStream rng(41);
  MachineParams m = init_machine(2, 3, 1, rng);
  MachineGrads g = make_zero_grads(m);
  g.db_out[0] = 3.0;
  g.db_out[1] = 4.0;  // norm 5
  clip_grad_norm(g, 10.0);
  CHECK(g.db_out[0] == doctest::Approx(3.0));
  clip_grad_norm(g, 1.0);
  CHECK(std::sqrt(grad_squared_norm(g)) == doctest::Approx(1.0));
}
