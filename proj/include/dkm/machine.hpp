#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dkm/losses.hpp"
#include "dkm/network.hpp"
#include "dkm/rng.hpp"
#include "dkm/types.hpp"

namespace dkm {

struct TrainConfig {
  int iterations = 10000;          // T
  double learning_rate = 0.001;    // mu
  double momentum = 0.9;
  double batch_fraction = 0.25;    // mini-batch size as a fraction of n
  LossWeights weights;             // (gamma, lambda, delta) default (1,1,1)
  KernelSpec kernel = KernelSpec::default8();
  int hidden_width = 0;            // h; 0 means the 10*p guideline
  int hidden_layers = 6;           // K
  std::uint64_t seed = 1;
  int eval_every = 100;            // holdout-loss cadence; 0 disables
  double holdout_fraction = 0.1;
  double grad_clip = 10.0;         // global-norm clip; 0 disables

  void validate() const;
  // Canonical key=value rendering used for the config digest.
  std::string canonical_string() const;
};

struct TrainHistory {
  std::vector<double> train_loss;          // per iteration
  std::vector<double> grad_sq_norm;        // per iteration, pre-clipping
  std::vector<std::pair<int, double>> holdout_loss;  // (iteration, loss)
};

// A trained sampler: network in eval mode plus the standardization and
// decorrelation state baked in at training time.
struct KnockoffMachine {
  MachineParams params;
  Vector col_mean;
  Vector col_scale;   // per-column sd (1/(n-1) normalization)
  Vector s_star;      // SDP solution on the training correlation matrix
  TrainHistory history;
  std::string config_digest;

  int p() const { return params.p; }
};

// Stochastic-gradient training of the sampler network; deterministic
// given cfg.seed. Throws NonFiniteLoss (with the iteration index) if the
// objective stops being finite.
KnockoffMachine train(const Matrix& x, const TrainConfig& cfg);

// Draw m distinct indices from pool (partial Fisher-Yates, random order).
// The first m/2 and the remainder form the two disjoint half-batches.
std::vector<int> sample_minibatch(std::vector<int>& pool, int m,
                                  RngStream& rng);

// Standardize with the stored parameters, run the network in eval mode
// with fresh noise, de-standardize.
Matrix generate(const KnockoffMachine& m, const Matrix& x, RngStream& rng);

// Mean of |g_t|^2 over consecutive windows; ceil(T/window) entries.
std::vector<double> grad_norm_monitor(const std::vector<double>& grad_sq_norm,
                                      int window);

// Versioned binary container: magic "DKM1", u32 LE format version,
// u64 LE length-prefixed JSON metadata (p, h, K, standardization, s_star,
// config digest, loss history), raw little-endian f64 tensors in
// param_views order followed by state_views order, and a trailing CRC64
// (ECMA-182, reflected) of all prior bytes.
void save_checkpoint(const KnockoffMachine& m, const std::string& path);
KnockoffMachine load_checkpoint(const std::string& path);

std::uint64_t crc64(const unsigned char* data, std::size_t len);

}  // namespace dkm
