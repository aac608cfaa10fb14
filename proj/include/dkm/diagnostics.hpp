#pragma once

#include <functional>
#include <vector>

#include "dkm/kernel.hpp"
#include "dkm/losses.hpp"
#include "dkm/rng.hpp"
#include "dkm/types.hpp"

namespace dkm {

enum class SwapHypothesis { full, partial };

// Two independent groups of concatenated (x, xt) rows used by the
// two-sample statistics. Z1 rows are (x, xt); under the full hypothesis
// Z2 rows are (xt, x), under the partial one (x, xt)_swap(S) with S drawn
// once per construction.
struct DiagnosticPair {
  Matrix z1;
  Matrix z2;
  SwapHypothesis hypothesis = SwapHypothesis::full;
  SwapSet swap_used;  // partial only
};

// Split the joint sample into two independent halves (one seeded shuffle,
// then first half / second half) and build the hypothesis pair.
DiagnosticPair make_pair(const JointBatch& b, SwapHypothesis hyp,
                         RngStream& rng);

// Deterministic variant for tests: explicit row order and swap set.
DiagnosticPair make_pair_with(const JointBatch& b, SwapHypothesis hyp,
                              const std::vector<int>& row_order,
                              const SwapSet& s);

// Unbiased estimate of |G1 - G2|_F^2 from the pairwise inner products;
// rows are centered internally (pooled mean).
double cov_diagnostic(const DiagnosticPair& pair);

// Unbiased MMD between the two groups.
double mmd_diagnostic(const DiagnosticPair& pair, const KernelSpec& k);

// Fraction of pooled points whose nearest neighbor (self excluded,
// ties broken by lowest pooled index) belongs to the same group.
// 1/2 in expectation when the two distributions agree. had_ties, when
// non-null, reports whether any exact distance tie occurred.
double knn_diagnostic(const DiagnosticPair& pair, bool* had_ties = nullptr);

// (n/2) times the empirical energy distance between the two groups.
double energy_diagnostic(const DiagnosticPair& pair);

struct DiagnosticsReport {
  SwapHypothesis hypothesis = SwapHypothesis::full;
  double cov = 0.0;
  double mmd = 0.0;
  double knn = 0.0;
  double energy = 0.0;
  double mean_abs_corr = 0.0;  // mean_j |corr(X_j, Xt_j)| on the input batch
  Index n = 0;
  Index p = 0;
  std::uint64_t seed = 0;
};

using KnockoffSampler = std::function<Matrix(const Matrix&, RngStream&)>;
using DataSource = std::function<Matrix(RngStream&)>;

// Mean over columns of |corr(X_j, Xt_j)|; the power proxy reported next
// to the goodness-of-fit statistics.
double mean_abs_pairwise_correlation(const JointBatch& b);

// For each replicate: draw fresh test data, generate knockoffs, build
// the full- and partial-hypothesis pairs on disjoint halves and compute
// all four statistics. Two reports per replicate.
std::vector<DiagnosticsReport> run_diagnostics(const KnockoffSampler& sampler,
                                               const DataSource& data,
                                               const KernelSpec& k,
                                               int replicates, RngStream& rng);

}  // namespace dkm
