#pragma once

#include <vector>

#include "dkm/rng.hpp"
#include "dkm/types.hpp"

namespace dkm {

// Elastic-net fit of
//   (1/m)|y - D b|^2 + (1-alpha)(tau/2)|b|_2^2 + alpha tau |b|_1
// by cyclic coordinate descent on internally standardized columns;
// coefficients are reported on the original scale.
struct ElasticNetFit {
  Vector coef;
  double intercept = 0.0;
  double tau = 0.0;
  double alpha = 0.0;
  bool converged = false;
  int sweeps = 0;
};

struct ElasticNetOptions {
  double tol = 1e-8;     // max coefficient change per sweep (standardized)
  int max_sweeps = 100000;
};

ElasticNetFit elastic_net(const Matrix& design, const Vector& y, double alpha,
                          double tau, const ElasticNetOptions& opts = {});

// Warm-started fits along a decreasing tau path (standardization done once).
std::vector<ElasticNetFit> elastic_net_path(const Matrix& design,
                                            const Vector& y, double alpha,
                                            const std::vector<double>& taus,
                                            const ElasticNetOptions& opts = {});

// Smallest tau with an all-zero solution, then a log-spaced grid down to
// ratio * tau_max (count values, descending).
std::vector<double> default_tau_grid(const Matrix& design, const Vector& y,
                                     double alpha, int count = 100,
                                     double ratio = 1e-4);

struct CvResult {
  double tau = 0.0;
  std::vector<double> taus;      // descending
  std::vector<double> mean_mse;  // aligned with taus
};

// K-fold cross-validation over the tau grid; seeded fold assignment,
// ties resolved toward the larger tau.
CvResult cv_tune(const Matrix& design, const Vector& y, double alpha,
                 const std::vector<double>& taus, int folds, RngStream& rng,
                 const ElasticNetOptions& opts = {});

// W_j = |b_j| - |b_{p+j}| for a fit on the [X, Xt] augmented design.
Vector knockoff_stats(const ElasticNetFit& fit);

struct SelectionResult {
  Vector W;
  double threshold = 0.0;      // +inf when nothing passes
  std::vector<int> selected;   // 0-based indices
  double q = 0.0;
  double fdp = -1.0;           // filled by score_selection
  double power = -1.0;
};

// Knockoff(+) threshold: the smallest t among {|W_j| : W_j != 0} with
// (plus + #{W_j <= -t}) / max(1, #{W_j >= t}) <= q; selects {j: W_j >= t}.
SelectionResult knockoff_filter(const Vector& w, double q, bool plus = true);

// fdp = |selected \ truth| / max(1,|selected|), power = |selected & truth| / |truth|.
std::pair<double, double> score_selection(const std::vector<int>& selected,
                                          const std::vector<int>& truth);

}  // namespace dkm
