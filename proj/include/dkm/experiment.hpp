#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dkm/datagen.hpp"
#include "dkm/diagnostics.hpp"
#include "dkm/gaussian.hpp"
#include "dkm/machine.hpp"
#include "dkm/selection.hpp"

namespace dkm {

enum class ExperimentMode { fresh_x, fixed_x };

struct SamplerBundle {
  std::string name;
  KnockoffSampler fn;
};

// Construct the requested knockoff generators.
//   machine      - trained network sampler (requires machine != nullptr)
//   second-order - Gaussian formula with the covariance estimated from
//                  train_data (requires train_data != nullptr)
//   oracle       - exact construction from the true distribution
//                  (Gaussian, mixture or custom-Sigma kinds only)
//   identity     - Xt = X
//   noise        - iid standard normal, independent of X
std::vector<SamplerBundle> build_samplers(const std::vector<std::string>& names,
                                          const DistributionSpec& dist,
                                          const KnockoffMachine* machine,
                                          const Matrix* train_data,
                                          double second_order_shrinkage = 0.0);

struct SelectionExperimentConfig {
  DistributionSpec dist;
  ExperimentMode mode = ExperimentMode::fresh_x;
  Matrix fixed_x;  // fixed-X mode; drawn from dist when empty
  int m = 150;     // rows per replicate
  int signals = 30;
  bool random_signs = false;
  std::vector<double> amplitudes = {10.0};
  double alpha = 0.1;
  double q = 0.1;
  int replicates = 1000;
  int cv_folds = 10;
  int grid_size = 100;
  double grid_ratio = 1e-4;
  std::uint64_t seed = 1;
  int threads = 1;
};

struct SelectionRow {
  double amplitude = 0.0;
  std::string sampler;
  int replicate = 0;
  double fdp = 0.0;
  double power = 0.0;
  int n_selected = 0;
  double threshold = 0.0;
  double tau = 0.0;
};

struct SelectionSummary {
  double amplitude = 0.0;
  std::string sampler;
  int replicates = 0;
  double mean_fdr = 0.0;
  double se_fdr = 0.0;
  double mean_power = 0.0;
  double se_power = 0.0;
};

struct SelectionExperimentResult {
  std::vector<SelectionRow> rows;          // sorted (amplitude, sampler, rep)
  std::vector<SelectionSummary> summaries; // same order, aggregated
};

// Fresh-X mode: per replicate draw X (m rows) and y, generate knockoffs
// per sampler, elastic-net + knockoff filter, score against the truth.
// Fixed-X mode: one X held fixed, y and knockoffs redrawn per replicate.
// Replicates run in parallel on cfg.threads workers; outputs are
// bit-identical for any thread count.
SelectionExperimentResult run_selection_experiment(
    const SelectionExperimentConfig& cfg,
    const std::vector<SamplerBundle>& samplers);

}  // namespace dkm
