#pragma once

#include <vector>

#include "dkm/rng.hpp"
#include "dkm/types.hpp"

namespace dkm {

// One block of the sampler network: linear map, batch normalization,
// PReLU with a per-layer scalar slope.
struct BatchNorm {
  Vector scale;     // trainable
  Vector shift;     // trainable
  Vector run_mean;  // eval-mode statistics
  Vector run_var;
};

struct Layer {
  Matrix W;  // in x out
  Vector b;
  BatchNorm bn;
  double prelu_slope = 0.25;
};

// f(X,V): input layer 2p -> h, K hidden layers h -> h, linear output
// h -> p. Train mode normalizes with batch statistics and refreshes the
// running averages; eval mode uses the stored running statistics.
struct MachineParams {
  int p = 0;
  int h = 0;
  int K = 0;
  Layer input;
  std::vector<Layer> hidden;
  Matrix w_out;
  Vector b_out;
  bool train_mode = true;

  static constexpr double kBnEps = 1e-5;
  static constexpr double kBnMomentum = 0.9;
};

struct LayerCache {
  Matrix x;        // layer input
  Matrix xhat;     // normalized pre-activation
  Vector inv_std;  // 1/sqrt(var_batch + eps)
  Matrix act_in;   // batch-norm output = PReLU input
};

struct ForwardCache {
  bool valid = false;
  Index n = 0;
  std::vector<LayerCache> layers;
  Matrix last_hidden;
};

struct LayerGrads {
  Matrix dW;
  Vector db;
  Vector dscale;
  Vector dshift;
  double dslope = 0.0;
};

struct MachineGrads {
  std::vector<LayerGrads> layers;  // input layer first, then hidden
  Matrix dw_out;
  Vector db_out;
};

double prelu(double x, double slope);

// Weights uniform on +-sqrt(6/(fan_in+fan_out)), biases zero, PReLU
// slopes 0.25, normalization scale 1 / shift 0 / running variance 1.
MachineParams init_machine(int p, int h, int K, RngStream& rng);

// Xt = f(X, V). In train mode the running statistics are updated and,
// when cache is non-null, everything backward() needs is recorded.
Matrix forward(MachineParams& m, const Matrix& x, const Matrix& v,
               ForwardCache* cache = nullptr);

// Eval-mode forward (running statistics, no mutation, no cache);
// safe for concurrent callers.
Matrix forward_eval(const MachineParams& m, const Matrix& x, const Matrix& v);

// Backpropagate d(loss)/d(Xt) through a cached train-mode forward pass.
// Gradients flow through the batch-normalization statistics.
MachineGrads backward(const MachineParams& m, const ForwardCache& cache,
                      const Matrix& dxt);

// Flat views over the trainable tensors, in a fixed documented order:
// per layer (input, hidden 0..K-1): W, b, bn scale, bn shift, PReLU slope;
// then output W, output b. state_views lists the running statistics in
// the same layer order (mean then variance).
struct ParamView {
  double* data;
  Index size;
};
std::vector<ParamView> param_views(MachineParams& m);
std::vector<ParamView> grad_views(MachineGrads& g);
std::vector<ParamView> state_views(MachineParams& m);

MachineGrads make_zero_grads(const MachineParams& m);

double grad_squared_norm(MachineGrads& g);

// Scale all gradients so the global L2 norm is at most max_norm.
void clip_grad_norm(MachineGrads& g, double max_norm);

struct SgdState {
  double learning_rate = 0.001;
  double momentum = 0.0;
  std::vector<Vector> velocity;  // aligned with param_views
};

SgdState make_sgd_state(MachineParams& m, double learning_rate,
                        double momentum);

// momentum 0: theta -= lr * g. momentum beta: v = beta*v + g,
// theta -= lr * v.
void sgd_step(MachineParams& m, SgdState& s, MachineGrads& g);

}  // namespace dkm
