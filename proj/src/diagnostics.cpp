#include "dkm/diagnostics.hpp"

#include <cmath>
#include <limits>

namespace dkm {

namespace {

Matrix concat_cols(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), a.cols() + b.cols());
  out.leftCols(a.cols()) = a;
  out.rightCols(b.cols()) = b;
  return out;
}

}  // namespace

DiagnosticPair make_pair_with(const JointBatch& b, SwapHypothesis hyp,
                              const std::vector<int>& row_order,
                              const SwapSet& s) {
  b.require_valid("make_pair");
  const Index n = b.rows(), p = b.cols();
  if (n < 4) throw TooFewSamples("make_pair: need at least 4 joint rows");
  if (Index(row_order.size()) != n)
    throw ShapeMismatch("make_pair: row order length mismatch");
  // equal-sized groups; one row is dropped when the input count is odd
  const Index half = n / 2;

  JointBatch first{Matrix(half, p), Matrix(half, p)};
  JointBatch second{Matrix(half, p), Matrix(half, p)};
  for (Index i = 0; i < half; ++i) {
    first.X.row(i) = b.X.row(row_order[i]);
    first.Xt.row(i) = b.Xt.row(row_order[i]);
  }
  for (Index i = half; i < 2 * half; ++i) {
    second.X.row(i - half) = b.X.row(row_order[i]);
    second.Xt.row(i - half) = b.Xt.row(row_order[i]);
  }

  DiagnosticPair pair;
  pair.hypothesis = hyp;
  pair.z1 = concat_cols(first.X, first.Xt);
  if (hyp == SwapHypothesis::full) {
    pair.z2 = concat_cols(second.Xt, second.X);
  } else {
    const JointBatch swapped = swap(second, s);
    pair.z2 = concat_cols(swapped.X, swapped.Xt);
    pair.swap_used = s;
  }
  return pair;
}

DiagnosticPair make_pair(const JointBatch& b, SwapHypothesis hyp,
                         RngStream& rng) {
  b.require_valid("make_pair");
  const auto order = shuffled_indices(rng, int(b.rows()));
  SwapSet s;
  if (hyp == SwapHypothesis::partial) s = sample_swap_set(int(b.cols()), rng);
  return make_pair_with(b, hyp, order, s);
}

double cov_diagnostic(const DiagnosticPair& pair) {
  const Index n1 = pair.z1.rows(), n2 = pair.z2.rows();
  if (n1 < 2 || n2 < 2) throw TooFewSamples("cov_diagnostic: need n >= 2");
  if (pair.z1.cols() != pair.z2.cols())
    throw ShapeMismatch("cov_diagnostic: dimension mismatch");
  // center with the pooled mean; preserves the Z1 <-> Z2 symmetry
  const Vector mean = (pair.z1.colwise().sum() + pair.z2.colwise().sum()) /
                      double(n1 + n2);
  const Matrix a = pair.z1.rowwise() - mean.transpose();
  const Matrix b = pair.z2.rowwise() - mean.transpose();
  const Matrix gaa = a * a.transpose();
  const Matrix gbb = b * b.transpose();
  const Matrix gab = a * b.transpose();
  const double saa = gaa.array().square().sum() -
                     gaa.diagonal().array().square().sum();
  const double sbb = gbb.array().square().sum() -
                     gbb.diagonal().array().square().sum();
  return saa / (double(n1) * double(n1 - 1)) +
         sbb / (double(n2) * double(n2 - 1)) -
         2.0 * gab.array().square().sum() / (double(n1) * double(n2));
}

double mmd_diagnostic(const DiagnosticPair& pair, const KernelSpec& k) {
  return mmd_unbiased(pair.z1, pair.z2, k);
}

double knn_diagnostic(const DiagnosticPair& pair, bool* had_ties) {
  const Index n1 = pair.z1.rows(), n2 = pair.z2.rows();
  if (n1 < 2 || n2 < 2) throw TooFewSamples("knn_diagnostic: need n >= 2");
  if (pair.z1.cols() != pair.z2.cols())
    throw ShapeMismatch("knn_diagnostic: dimension mismatch");
  const Index n = n1 + n2;
  Matrix pooled(n, pair.z1.cols());
  pooled.topRows(n1) = pair.z1;
  pooled.bottomRows(n2) = pair.z2;
  const Matrix d2 = pairwise_sqdist(pooled, pooled);
  bool ties = false;
  Index same = 0;
  for (Index i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    Index arg = -1;
    for (Index j = 0; j < n; ++j) {
      if (j == i) continue;
      const double d = d2(i, j);
      if (d < best) {
        best = d;
        arg = j;
      } else if (d == best) {
        ties = true;  // lowest pooled index wins; arg already set
      }
    }
    const bool group_i = i < n1;
    const bool group_j = arg < n1;
    if (group_i == group_j) ++same;
  }
  if (had_ties) *had_ties = ties;
  return double(same) / double(n);
}

double energy_diagnostic(const DiagnosticPair& pair) {
  const Index n1 = pair.z1.rows(), n2 = pair.z2.rows();
  if (n1 < 1 || n2 < 1) throw TooFewSamples("energy_diagnostic: empty group");
  if (n1 != n2)
    throw ShapeMismatch("energy_diagnostic: groups must have equal size");
  if (pair.z1.cols() != pair.z2.cols())
    throw ShapeMismatch("energy_diagnostic: dimension mismatch");
  const Index n = n1;
  // compensated accumulation keeps the brute-force equivalence tight
  auto mean_dist = [](const Matrix& a, const Matrix& b) {
    const Matrix d2 = pairwise_sqdist(a, b);
    double sum = 0.0, comp = 0.0;
    for (Index j = 0; j < d2.cols(); ++j) {
      for (Index i = 0; i < d2.rows(); ++i) {
        const double y = std::sqrt(d2(i, j)) - comp;
        const double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
      }
    }
    return sum / (double(a.rows()) * double(b.rows()));
  };
  const double cross = mean_dist(pair.z1, pair.z2);
  const double within1 = mean_dist(pair.z1, pair.z1);
  const double within2 = mean_dist(pair.z2, pair.z2);
  return 0.5 * double(n) * (2.0 * cross - within1 - within2);
}

double mean_abs_pairwise_correlation(const JointBatch& b) {
  b.require_valid("mean_abs_pairwise_correlation");
  const Index n = b.rows(), p = b.cols();
  if (n < 2) throw TooFewSamples("mean_abs_pairwise_correlation: need n >= 2");
  const Matrix xc = b.X.rowwise() - b.X.colwise().mean();
  const Matrix tc = b.Xt.rowwise() - b.Xt.colwise().mean();
  double acc = 0.0;
  for (Index j = 0; j < p; ++j) {
    const double denom =
        std::sqrt(xc.col(j).squaredNorm() * tc.col(j).squaredNorm());
    if (denom > 0.0) acc += std::abs(xc.col(j).dot(tc.col(j))) / denom;
  }
  return acc / double(p);
}

std::vector<DiagnosticsReport> run_diagnostics(const KnockoffSampler& sampler,
                                               const DataSource& data,
                                               const KernelSpec& k,
                                               int replicates, RngStream& rng) {
  if (replicates < 1) throw BadParam("run_diagnostics: replicates must be >= 1");
  std::vector<DiagnosticsReport> out;
  out.reserve(2 * std::size_t(replicates));
  for (int r = 0; r < replicates; ++r) {
    RngStream sub = rng.substream(std::uint64_t(r));
    const Matrix x = data(sub);
    const Matrix xt = sampler(x, sub);
    JointBatch b{x, xt};
    const double mac = mean_abs_pairwise_correlation(b);
    for (SwapHypothesis hyp : {SwapHypothesis::full, SwapHypothesis::partial}) {
      const DiagnosticPair pair = make_pair(b, hyp, sub);
      DiagnosticsReport rep;
      rep.hypothesis = hyp;
      rep.cov = cov_diagnostic(pair);
      rep.mmd = mmd_diagnostic(pair, k);
      rep.knn = knn_diagnostic(pair);
      rep.energy = energy_diagnostic(pair);
      rep.mean_abs_corr = mac;
      rep.n = pair.z1.rows();
      rep.p = x.cols();
      rep.seed = sub.seed();
      out.push_back(rep);
    }
  }
  return out;
}

}  // namespace dkm
