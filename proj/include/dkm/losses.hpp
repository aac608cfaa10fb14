#pragma once

#include <vector>

#include "dkm/kernel.hpp"
#include "dkm/rng.hpp"
#include "dkm/types.hpp"

namespace dkm {

// Paired observations (x_i, xtilde_i), one pair per row.
struct JointBatch {
  Matrix X;
  Matrix Xt;

  Index rows() const { return X.rows(); }
  Index cols() const { return X.cols(); }
  void require_valid(const char* what) const;
};

// Subset of feature indices to swap between X and Xt (0-based, unique).
struct SwapSet {
  std::vector<int> indices;
};

// Each coordinate enters with probability 1/2.
SwapSet sample_swap_set(int p, RngStream& rng);

// Exchange columns j in S between X and Xt. Involution for fixed S.
JointBatch swap(const JointBatch& b, const SwapSet& s);

enum class MmdEstimator { unbiased, biased };

// U-statistic estimator (diagonal excluded); may be negative.
double mmd_unbiased(const Matrix& a, const Matrix& b, const KernelSpec& k);

// V-statistic estimator (diagonal included); equals the squared distance
// between empirical kernel means, hence always >= 0. This is the variant
// used inside the training objective.
double mmd_biased(const Matrix& a, const Matrix& b, const KernelSpec& k);

// Same value as mmd_biased; also accumulates d(mmd)/dA into da and
// d(mmd)/dB into db (both must be pre-sized and are added to).
double mmd_biased_grad(const Matrix& a, const Matrix& b, const KernelSpec& k,
                       Matrix& da, Matrix& db);

// Deterministic lower bound on mmd_unbiased for equal sample counts:
// -(1/(n(n-1))) sum_i [k(a_i,a_i) + k(b_i,b_i) - k(a_i,b_i)].
double mmd_lower_bound(const Matrix& a, const Matrix& b, const KernelSpec& k);

// Weights of the combined objective: gamma scales the swap-MMD term,
// lambda the moment-matching term, delta the decorrelation term.
// lambda1..lambda3 are the inner weights of the moment-matching term.
struct LossWeights {
  double gamma = 1.0;
  double lambda = 1.0;
  double delta = 1.0;
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  double lambda3 = 1.0;

  void validate() const;
};

// Moment-matching penalty on a joint batch:
//   lambda1 |mean(X - Xt)|^2 / p
// + lambda2 |Gxx - Gtt|_F^2 / |Gxx|_F^2
// + lambda3 |offdiag(Gxx - Gxt)|_F^2 / |Gxx|_F^2
// with G blocks the 1/(n-1) covariance estimates of the joint vector.
double loss_second_order(const JointBatch& b, const LossWeights& w);
double loss_second_order_grad(const JointBatch& b, const LossWeights& w,
                              Matrix& dxt);

// Sum of per-column Pearson correlations corr(X_j, Xt_j).
double loss_decorrelation_simple(const JointBatch& b);

// |diag(Gxt) - 1 + s_star|^2; assumes columns on correlation scale.
double loss_decorrelation_sdp(const JointBatch& b, const Vector& s_star);
double loss_decorrelation_sdp_grad(const JointBatch& b, const Vector& s_star,
                                   Matrix& dxt);

// Swap-MMD objective on two disjoint halves:
//   D[(X',Xt'), (Xt'',X'')] + D[(X',Xt'), (X'',Xt'')_swap(S)]
// with D the chosen estimator on concatenated 2p-dimensional rows.
double loss_mmd(const JointBatch& bprime, const JointBatch& bsecond,
                const SwapSet& s, const KernelSpec& k, MmdEstimator est);

// Biased-estimator value plus gradients w.r.t. Xt' and Xt''.
double loss_mmd_biased_grad(const JointBatch& bprime, const JointBatch& bsecond,
                            const SwapSet& s, const KernelSpec& k,
                            Matrix& dxt_prime, Matrix& dxt_second);

// Slow validation utility: the full per-coordinate sweep
// sum_j D[(X',Xt'), (X'',Xt'')_swap({j})]. Not used in training.
double mmd_full_sweep(const JointBatch& bprime, const JointBatch& bsecond,
                      const KernelSpec& k, MmdEstimator est);

struct LossBreakdown {
  double total = 0.0;
  double mmd = 0.0;
  double second_order = 0.0;
  double decorrelation = 0.0;
};

// gamma*J_mmd + lambda*J_second_order + delta*J_decorrelation(SDP).
// The MMD term uses the two halves; the other terms use the full batch
// (concatenation of both halves).
LossBreakdown loss_total(const JointBatch& bprime, const JointBatch& bsecond,
                         const SwapSet& s, const KernelSpec& k,
                         const LossWeights& w, const Vector& s_star,
                         MmdEstimator est = MmdEstimator::biased);

// Training form: full batch with rows [0, n_first) as the first half.
// Returns the breakdown and writes dJ/dXt for the whole batch. Terms with
// zero weight are skipped entirely (exact zero gradient).
LossBreakdown loss_total_grad(const JointBatch& full, Index n_first,
                              const SwapSet& s, const KernelSpec& k,
                              const LossWeights& w, const Vector& s_star,
                              Matrix& dxt);

}  // namespace dkm
