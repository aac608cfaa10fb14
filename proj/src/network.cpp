#include "dkm/network.hpp"

#include <cmath>

namespace dkm {

double prelu(double x, double slope) { return x >= 0.0 ? x : slope * x; }

namespace {

Layer init_layer(int fan_in, int fan_out, RngStream& rng) {
  Layer l;
  l.W.resize(fan_in, fan_out);
  const double a = std::sqrt(6.0 / double(fan_in + fan_out));
  double* d = l.W.data();
  for (Index i = 0; i < l.W.size(); ++i) d[i] = a * (2.0 * rng.uniform01() - 1.0);
  l.b = Vector::Zero(fan_out);
  l.bn.scale = Vector::Ones(fan_out);
  l.bn.shift = Vector::Zero(fan_out);
  l.bn.run_mean = Vector::Zero(fan_out);
  l.bn.run_var = Vector::Ones(fan_out);
  l.prelu_slope = 0.25;
  return l;
}

// linear -> batch norm -> PReLU for one layer
Matrix layer_forward(Layer& l, const Matrix& x, bool train_mode,
                     LayerCache* cache) {
  Matrix z = x * l.W;
  z.rowwise() += l.b.transpose();
  const Index n = z.rows();
  Vector mean, var;
  if (train_mode) {
    mean = z.colwise().mean().transpose();
    var = (z.rowwise() - mean.transpose()).array().square().colwise().mean().transpose();
    l.bn.run_mean = MachineParams::kBnMomentum * l.bn.run_mean +
                    (1.0 - MachineParams::kBnMomentum) * mean;
    l.bn.run_var = MachineParams::kBnMomentum * l.bn.run_var +
                   (1.0 - MachineParams::kBnMomentum) * var;
  } else {
    mean = l.bn.run_mean;
    var = l.bn.run_var;
  }
  const Vector inv_std =
      (var.array() + MachineParams::kBnEps).sqrt().inverse().matrix();
  Matrix xhat = (z.rowwise() - mean.transpose()).array().rowwise() *
                inv_std.transpose().array();
  Matrix a = (xhat.array().rowwise() * l.bn.scale.transpose().array())
                 .matrix();
  a.rowwise() += l.bn.shift.transpose();
  Matrix out = a.unaryExpr(
      [s = l.prelu_slope](double v) { return v >= 0.0 ? v : s * v; });
  if (cache) {
    cache->x = x;
    cache->xhat = std::move(xhat);
    cache->inv_std = inv_std;
    cache->act_in = std::move(a);
  }
  (void)n;
  return out;
}

// Backward through one layer; returns gradient w.r.t. the layer input.
Matrix layer_backward(const Layer& l, const LayerCache& c, const Matrix& dout,
                      LayerGrads& g) {
  const Index n = dout.rows();
  // PReLU
  Matrix da(dout.rows(), dout.cols());
  double dslope = 0.0;
  for (Index j = 0; j < dout.cols(); ++j) {
    for (Index i = 0; i < n; ++i) {
      const double a = c.act_in(i, j);
      if (a >= 0.0) {
        da(i, j) = dout(i, j);
      } else {
        da(i, j) = dout(i, j) * l.prelu_slope;
        dslope += dout(i, j) * a;
      }
    }
  }
  g.dslope = dslope;
  // batch-norm affine
  g.dscale = (da.array() * c.xhat.array()).colwise().sum().transpose();
  g.dshift = da.colwise().sum().transpose();
  Matrix dxhat =
      (da.array().rowwise() * l.bn.scale.transpose().array()).matrix();
  // normalization (gradients flow through batch mean and variance)
  const Vector sum_dxhat = dxhat.colwise().sum().transpose();
  const Vector sum_dxhat_xhat =
      (dxhat.array() * c.xhat.array()).colwise().sum().transpose();
  Matrix dz =
      (dxhat * double(n) -
       (Matrix::Ones(n, 1) * sum_dxhat.transpose()) -
       (c.xhat.array().rowwise() * sum_dxhat_xhat.transpose().array()).matrix())
          .array()
          .rowwise() *
      (c.inv_std / double(n)).transpose().array();
  // linear
  g.dW = c.x.transpose() * dz;
  g.db = dz.colwise().sum().transpose();
  return dz * l.W.transpose();
}

}  // namespace

MachineParams init_machine(int p, int h, int K, RngStream& rng) {
  if (p < 1 || h < 1 || K < 1)
    throw BadParam("init_machine: p, h, K must be >= 1");
  MachineParams m;
  m.p = p;
  m.h = h;
  m.K = K;
  m.input = init_layer(2 * p, h, rng);
  m.hidden.reserve(K);
  for (int k = 0; k < K; ++k) m.hidden.push_back(init_layer(h, h, rng));
  m.w_out.resize(h, p);
  const double a = std::sqrt(6.0 / double(h + p));
  double* d = m.w_out.data();
  for (Index i = 0; i < m.w_out.size(); ++i)
    d[i] = a * (2.0 * rng.uniform01() - 1.0);
  m.b_out = Vector::Zero(p);
  m.train_mode = true;
  return m;
}

Matrix forward(MachineParams& m, const Matrix& x, const Matrix& v,
               ForwardCache* cache) {
  if (x.rows() != v.rows() || x.cols() != v.cols() || x.cols() != m.p)
    throw ShapeMismatch("forward: X and V must both be n x p");
  Matrix in(x.rows(), 2 * m.p);
  in.leftCols(m.p) = x;
  in.rightCols(m.p) = v;

  const bool caching = cache != nullptr && m.train_mode;
  if (cache) {
    cache->valid = caching;
    cache->n = x.rows();
    cache->layers.assign(caching ? m.K + 1 : 0, LayerCache{});
  }
  Matrix h = layer_forward(m.input, in, m.train_mode,
                           caching ? &cache->layers[0] : nullptr);
  for (int k = 0; k < m.K; ++k)
    h = layer_forward(m.hidden[k], h, m.train_mode,
                      caching ? &cache->layers[k + 1] : nullptr);
  if (caching) cache->last_hidden = h;
  Matrix out = h * m.w_out;
  out.rowwise() += m.b_out.transpose();
  return out;
}

Matrix forward_eval(const MachineParams& m, const Matrix& x, const Matrix& v) {
  if (x.rows() != v.rows() || x.cols() != v.cols() || x.cols() != m.p)
    throw ShapeMismatch("forward_eval: X and V must both be n x p");
  Matrix h(x.rows(), 2 * m.p);
  h.leftCols(m.p) = x;
  h.rightCols(m.p) = v;
  // mirrors the eval branch of forward() operation for operation
  auto eval_layer = [](const Layer& l, const Matrix& in) {
    Matrix z = in * l.W;
    z.rowwise() += l.b.transpose();
    const Vector inv_std =
        (l.bn.run_var.array() + MachineParams::kBnEps).sqrt().inverse().matrix();
    Matrix xhat = (z.rowwise() - l.bn.run_mean.transpose()).array().rowwise() *
                  inv_std.transpose().array();
    Matrix a =
        (xhat.array().rowwise() * l.bn.scale.transpose().array()).matrix();
    a.rowwise() += l.bn.shift.transpose();
    return Matrix(a.unaryExpr(
        [s = l.prelu_slope](double v2) { return v2 >= 0.0 ? v2 : s * v2; }));
  };
  h = eval_layer(m.input, h);
  for (const auto& l : m.hidden) h = eval_layer(l, h);
  Matrix out = h * m.w_out;
  out.rowwise() += m.b_out.transpose();
  return out;
}

MachineGrads backward(const MachineParams& m, const ForwardCache& cache,
                      const Matrix& dxt) {
  if (!cache.valid)
    throw StaleCache("backward: no cached train-mode forward pass");
  if (dxt.rows() != cache.n || dxt.cols() != m.p ||
      int(cache.layers.size()) != m.K + 1)
    throw StaleCache("backward: cache does not match this machine/batch");
  MachineGrads g;
  g.layers.resize(m.K + 1);
  g.dw_out = cache.last_hidden.transpose() * dxt;
  g.db_out = dxt.colwise().sum().transpose();
  Matrix dh = dxt * m.w_out.transpose();
  for (int k = m.K - 1; k >= 0; --k)
    dh = layer_backward(m.hidden[k], cache.layers[k + 1], dh, g.layers[k + 1]);
  layer_backward(m.input, cache.layers[0], dh, g.layers[0]);
  return g;
}

std::vector<ParamView> param_views(MachineParams& m) {
  std::vector<ParamView> v;
  auto add_layer = [&v](Layer& l) {
    v.push_back({l.W.data(), l.W.size()});
    v.push_back({l.b.data(), l.b.size()});
    v.push_back({l.bn.scale.data(), l.bn.scale.size()});
    v.push_back({l.bn.shift.data(), l.bn.shift.size()});
    v.push_back({&l.prelu_slope, 1});
  };
  add_layer(m.input);
  for (auto& l : m.hidden) add_layer(l);
  v.push_back({m.w_out.data(), m.w_out.size()});
  v.push_back({m.b_out.data(), m.b_out.size()});
  return v;
}

std::vector<ParamView> grad_views(MachineGrads& g) {
  std::vector<ParamView> v;
  for (auto& l : g.layers) {
    v.push_back({l.dW.data(), l.dW.size()});
    v.push_back({l.db.data(), l.db.size()});
    v.push_back({l.dscale.data(), l.dscale.size()});
    v.push_back({l.dshift.data(), l.dshift.size()});
    v.push_back({&l.dslope, 1});
  }
  v.push_back({g.dw_out.data(), g.dw_out.size()});
  v.push_back({g.db_out.data(), g.db_out.size()});
  return v;
}

std::vector<ParamView> state_views(MachineParams& m) {
  std::vector<ParamView> v;
  auto add = [&v](Layer& l) {
    v.push_back({l.bn.run_mean.data(), l.bn.run_mean.size()});
    v.push_back({l.bn.run_var.data(), l.bn.run_var.size()});
  };
  add(m.input);
  for (auto& l : m.hidden) add(l);
  return v;
}

MachineGrads make_zero_grads(const MachineParams& m) {
  MachineGrads g;
  g.layers.resize(m.K + 1);
  auto zero_layer = [](LayerGrads& lg, const Layer& l) {
    lg.dW = Matrix::Zero(l.W.rows(), l.W.cols());
    lg.db = Vector::Zero(l.b.size());
    lg.dscale = Vector::Zero(l.bn.scale.size());
    lg.dshift = Vector::Zero(l.bn.shift.size());
    lg.dslope = 0.0;
  };
  zero_layer(g.layers[0], m.input);
  for (int k = 0; k < m.K; ++k) zero_layer(g.layers[k + 1], m.hidden[k]);
  g.dw_out = Matrix::Zero(m.w_out.rows(), m.w_out.cols());
  g.db_out = Vector::Zero(m.b_out.size());
  return g;
}

double grad_squared_norm(MachineGrads& g) {
  double acc = 0.0;
  for (const auto& v : grad_views(g))
    for (Index i = 0; i < v.size; ++i) acc += v.data[i] * v.data[i];
  return acc;
}

void clip_grad_norm(MachineGrads& g, double max_norm) {
  if (max_norm <= 0.0) return;
  const double norm = std::sqrt(grad_squared_norm(g));
  if (norm <= max_norm) return;
  const double scale = max_norm / norm;
  for (auto& v : grad_views(g))
    for (Index i = 0; i < v.size; ++i) v.data[i] *= scale;
}

SgdState make_sgd_state(MachineParams& m, double learning_rate,
                        double momentum) {
  if (!(learning_rate > 0.0)) throw BadParam("sgd: learning rate must be > 0");
  if (momentum < 0.0 || momentum >= 1.0)
    throw BadParam("sgd: momentum must lie in [0,1)");
  SgdState s;
  s.learning_rate = learning_rate;
  s.momentum = momentum;
  for (const auto& v : param_views(m)) s.velocity.push_back(Vector::Zero(v.size));
  return s;
}

void sgd_step(MachineParams& m, SgdState& s, MachineGrads& g) {
  auto pv = param_views(m);
  auto gv = grad_views(g);
  if (pv.size() != gv.size() || pv.size() != s.velocity.size())
    throw ShapeMismatch("sgd_step: parameter/gradient layout mismatch");
  for (std::size_t t = 0; t < pv.size(); ++t) {
    if (pv[t].size != gv[t].size || pv[t].size != s.velocity[t].size())
      throw ShapeMismatch("sgd_step: tensor shape mismatch");
    double* th = pv[t].data;
    const double* gr = gv[t].data;
    double* vel = s.velocity[t].data();
    if (s.momentum == 0.0) {
      for (Index i = 0; i < pv[t].size; ++i) th[i] -= s.learning_rate * gr[i];
    } else {
      for (Index i = 0; i < pv[t].size; ++i) {
        vel[i] = s.momentum * vel[i] + gr[i];
        th[i] -= s.learning_rate * vel[i];
      }
    }
  }
}

}  // namespace dkm
