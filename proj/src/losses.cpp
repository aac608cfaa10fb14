#include "dkm/losses.hpp"

#include <algorithm>

namespace dkm {

void JointBatch::require_valid(const char* what) const {
  if (X.rows() != Xt.rows() || X.cols() != Xt.cols())
    throw ShapeMismatch(std::string(what) + ": X and Xt shapes differ");
  if (X.rows() < 1 || X.cols() < 1)
    throw ShapeMismatch(std::string(what) + ": empty batch");
}

SwapSet sample_swap_set(int p, RngStream& rng) {
  SwapSet s;
  for (int j = 0; j < p; ++j)
    if (rng.uniform01() < 0.5) s.indices.push_back(j);
  return s;
}

JointBatch swap(const JointBatch& b, const SwapSet& s) {
  b.require_valid("swap");
  JointBatch out = b;
  for (int j : s.indices) {
    if (j < 0 || j >= b.X.cols())
      throw IndexOutOfRange("swap: index out of range");
    out.X.col(j).swap(out.Xt.col(j));
  }
  return out;
}

double mmd_unbiased(const Matrix& a, const Matrix& b, const KernelSpec& k) {
  if (a.cols() != b.cols()) throw ShapeMismatch("mmd_unbiased: dim mismatch");
  const Index m = a.rows(), mp = b.rows();
  if (m < 2 || mp < 2)
    throw TooFewSamples("mmd_unbiased: need at least 2 samples per set");
  const Matrix kaa = kernel_matrix(k, a, a);
  const Matrix kbb = kernel_matrix(k, b, b);
  const Matrix kab = kernel_matrix(k, a, b);
  const double saa = kaa.sum() - kaa.trace();
  const double sbb = kbb.sum() - kbb.trace();
  return saa / (double(m) * double(m - 1)) + sbb / (double(mp) * double(mp - 1)) -
         2.0 * kab.sum() / (double(m) * double(mp));
}

double mmd_biased(const Matrix& a, const Matrix& b, const KernelSpec& k) {
  if (a.cols() != b.cols()) throw ShapeMismatch("mmd_biased: dim mismatch");
  const Index m = a.rows(), mp = b.rows();
  if (m < 1 || mp < 1) throw TooFewSamples("mmd_biased: empty sample set");
  const Matrix kaa = kernel_matrix(k, a, a);
  const Matrix kbb = kernel_matrix(k, b, b);
  const Matrix kab = kernel_matrix(k, a, b);
  return kaa.sum() / (double(m) * double(m)) + kbb.sum() / (double(mp) * double(mp)) -
         2.0 * kab.sum() / (double(m) * double(mp));
}

double mmd_biased_grad(const Matrix& a, const Matrix& b, const KernelSpec& k,
                       Matrix& da, Matrix& db) {
  if (a.cols() != b.cols()) throw ShapeMismatch("mmd_biased_grad: dim mismatch");
  const Index m = a.rows(), mp = b.rows();
  if (m < 1 || mp < 1) throw TooFewSamples("mmd_biased_grad: empty sample set");
  Matrix faa, fbb, fab;
  const Matrix kaa = kernel_matrix(k, a, a, &faa);
  const Matrix kbb = kernel_matrix(k, b, b, &fbb);
  const Matrix kab = kernel_matrix(k, a, b, &fab);
  const double val =
      kaa.sum() / (double(m) * double(m)) + kbb.sum() / (double(mp) * double(mp)) -
      2.0 * kab.sum() / (double(m) * double(mp));
  // d mmd / da_i = -(2/m^2) sum_j Faa_ij (a_i - a_j)
  //               +(2/(m m')) sum_j Fab_ij (a_i - b_j)
  const double caa = 2.0 / (double(m) * double(m));
  const double cbb = 2.0 / (double(mp) * double(mp));
  const double cab = 2.0 / (double(m) * double(mp));
  da.noalias() += -caa * (faa.rowwise().sum().asDiagonal() * a - faa * a) +
                  cab * (fab.rowwise().sum().asDiagonal() * a - fab * b);
  db.noalias() += -cbb * (fbb.rowwise().sum().asDiagonal() * b - fbb * b) +
                  cab * (fab.colwise().sum().asDiagonal() * b - fab.transpose() * a);
  return val;
}

double mmd_lower_bound(const Matrix& a, const Matrix& b, const KernelSpec& k) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeMismatch("mmd_lower_bound: equal sample counts required");
  const Index n = a.rows();
  if (n < 2) throw TooFewSamples("mmd_lower_bound: need n >= 2");
  double acc = 0.0;
  for (Index i = 0; i < n; ++i) {
    acc += kernel_eval(k, a.row(i), a.row(i)) + kernel_eval(k, b.row(i), b.row(i)) -
           kernel_eval(k, a.row(i), b.row(i));
  }
  return -acc / (double(n) * double(n - 1));
}

void LossWeights::validate() const {
  for (double v : {gamma, lambda, delta, lambda1, lambda2, lambda3})
    if (!(v >= 0.0) || !std::isfinite(v))
      throw BadParam("LossWeights: weights must be finite and nonnegative");
}

namespace {

// Column-centered copy and the 1/(n-1) covariance normalizer.
Matrix centered(const Matrix& x) {
  return x.rowwise() - x.colwise().mean();
}

// Project a gradient w.r.t. the centered matrix back to the raw matrix:
// centering is x - 1*mean, so the adjoint subtracts column means.
void center_project(Matrix& g) {
  g.rowwise() -= g.colwise().mean().eval();
}

}  // namespace

double loss_second_order(const JointBatch& b, const LossWeights& w) {
  b.require_valid("loss_second_order");
  const Index n = b.rows(), p = b.cols();
  if (n < 2) throw TooFewSamples("loss_second_order: need n >= 2");
  const Matrix xc = centered(b.X);
  const Matrix tc = centered(b.Xt);
  const double nm1 = double(n - 1);
  const Matrix gxx = (xc.transpose() * xc) / nm1;
  const Matrix gtt = (tc.transpose() * tc) / nm1;
  const Matrix gxt = (xc.transpose() * tc) / nm1;
  const double gxx_f2 = gxx.squaredNorm();
  if (gxx_f2 == 0.0)
    throw DegenerateCovariance("loss_second_order: |Gxx|_F = 0");
  const Vector dbar = (b.X.colwise().mean() - b.Xt.colwise().mean()).transpose();
  Matrix diff_diag = gxx - gxt;
  diff_diag.diagonal().setZero();  // off-diagonal mask M = E - I
  return w.lambda1 * dbar.squaredNorm() / double(p) +
         w.lambda2 * (gxx - gtt).squaredNorm() / gxx_f2 +
         w.lambda3 * diff_diag.squaredNorm() / gxx_f2;
}

double loss_second_order_grad(const JointBatch& b, const LossWeights& w,
                              Matrix& dxt) {
  b.require_valid("loss_second_order");
  const Index n = b.rows(), p = b.cols();
  if (n < 2) throw TooFewSamples("loss_second_order: need n >= 2");
  const Matrix xc = centered(b.X);
  const Matrix tc = centered(b.Xt);
  const double nm1 = double(n - 1);
  const Matrix gxx = (xc.transpose() * xc) / nm1;
  const Matrix gtt = (tc.transpose() * tc) / nm1;
  const Matrix gxt = (xc.transpose() * tc) / nm1;
  const double gxx_f2 = gxx.squaredNorm();
  if (gxx_f2 == 0.0)
    throw DegenerateCovariance("loss_second_order: |Gxx|_F = 0");
  const Vector dbar = (b.X.colwise().mean() - b.Xt.colwise().mean()).transpose();
  Matrix offdiag = gxx - gxt;
  offdiag.diagonal().setZero();

  const double val = w.lambda1 * dbar.squaredNorm() / double(p) +
                     w.lambda2 * (gxx - gtt).squaredNorm() / gxx_f2 +
                     w.lambda3 * offdiag.squaredNorm() / gxx_f2;

  // mean term: d/dXt_ij = -(2 lambda1 / (p n)) dbar_j
  Matrix g = Matrix::Zero(n, p);
  g.rowwise() -= (2.0 * w.lambda1 / (double(p) * double(n))) * dbar.transpose();

  // |Gxx - Gtt|^2 term (through Gtt = tc'tc / (n-1), symmetric factor 2)
  Matrix g2 = (4.0 * w.lambda2 / (gxx_f2 * nm1)) * (tc * (gtt - gxx));
  center_project(g2);
  g += g2;

  // off-diagonal cross term (through Gxt = xc'tc / (n-1))
  Matrix g3 = (-2.0 * w.lambda3 / (gxx_f2 * nm1)) * (xc * offdiag);
  center_project(g3);
  g += g3;

  dxt += g;
  return val;
}

double loss_decorrelation_simple(const JointBatch& b) {
  b.require_valid("loss_decorrelation_simple");
  const Index n = b.rows(), p = b.cols();
  if (n < 2) throw TooFewSamples("loss_decorrelation_simple: need n >= 2");
  const Matrix xc = centered(b.X);
  const Matrix tc = centered(b.Xt);
  double acc = 0.0;
  for (Index j = 0; j < p; ++j) {
    const double vx = xc.col(j).squaredNorm();
    const double vt = tc.col(j).squaredNorm();
    if (vx == 0.0 || vt == 0.0)
      throw ZeroVariance("loss_decorrelation_simple: zero variance in column " +
                         std::to_string(j));
    acc += xc.col(j).dot(tc.col(j)) / std::sqrt(vx * vt);
  }
  return acc;
}

double loss_decorrelation_sdp(const JointBatch& b, const Vector& s_star) {
  b.require_valid("loss_decorrelation_sdp");
  if (s_star.size() != b.cols())
    throw ShapeMismatch("loss_decorrelation_sdp: s_star length mismatch");
  const Index n = b.rows();
  if (n < 2) throw TooFewSamples("loss_decorrelation_sdp: need n >= 2");
  const Matrix xc = centered(b.X);
  const Matrix tc = centered(b.Xt);
  const Vector diag = (xc.array() * tc.array()).colwise().sum().transpose() /
                      double(n - 1);
  return (diag.array() - 1.0 + s_star.array()).square().sum();
}

double loss_decorrelation_sdp_grad(const JointBatch& b, const Vector& s_star,
                                   Matrix& dxt) {
  b.require_valid("loss_decorrelation_sdp");
  if (s_star.size() != b.cols())
    throw ShapeMismatch("loss_decorrelation_sdp: s_star length mismatch");
  const Index n = b.rows();
  if (n < 2) throw TooFewSamples("loss_decorrelation_sdp: need n >= 2");
  const Matrix xc = centered(b.X);
  const Matrix tc = centered(b.Xt);
  const Vector diag = (xc.array() * tc.array()).colwise().sum().transpose() /
                      double(n - 1);
  const Vector resid = diag - Vector::Ones(b.cols()) + s_star;
  Matrix g = (2.0 / double(n - 1)) * (xc.array().rowwise() *
                                      resid.transpose().array())
                                         .matrix();
  center_project(g);
  dxt += g;
  return resid.squaredNorm();
}

namespace {

Matrix concat_cols(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), a.cols() + b.cols());
  out.leftCols(a.cols()) = a;
  out.rightCols(b.cols()) = b;
  return out;
}

Matrix swap_concat(const JointBatch& b, const SwapSet& s) {
  Matrix out = concat_cols(b.X, b.Xt);
  const Index p = b.cols();
  for (int j : s.indices) {
    if (j < 0 || j >= p) throw IndexOutOfRange("swap: index out of range");
    out.col(j).swap(out.col(p + j));
  }
  return out;
}

}  // namespace

double loss_mmd(const JointBatch& bprime, const JointBatch& bsecond,
                const SwapSet& s, const KernelSpec& k, MmdEstimator est) {
  bprime.require_valid("loss_mmd");
  bsecond.require_valid("loss_mmd");
  if (bprime.cols() != bsecond.cols())
    throw ShapeMismatch("loss_mmd: feature counts differ");
  const Matrix a = concat_cols(bprime.X, bprime.Xt);
  const Matrix b_full = concat_cols(bsecond.Xt, bsecond.X);
  const Matrix b_swap = swap_concat(bsecond, s);
  if (est == MmdEstimator::unbiased)
    return mmd_unbiased(a, b_full, k) + mmd_unbiased(a, b_swap, k);
  return mmd_biased(a, b_full, k) + mmd_biased(a, b_swap, k);
}

double loss_mmd_biased_grad(const JointBatch& bprime, const JointBatch& bsecond,
                            const SwapSet& s, const KernelSpec& k,
                            Matrix& dxt_prime, Matrix& dxt_second) {
  bprime.require_valid("loss_mmd");
  bsecond.require_valid("loss_mmd");
  if (bprime.cols() != bsecond.cols())
    throw ShapeMismatch("loss_mmd: feature counts differ");
  const Index p = bprime.cols();
  const Index m1 = bprime.rows(), m2 = bsecond.rows();
  const Matrix a = concat_cols(bprime.X, bprime.Xt);
  const Matrix b_full = concat_cols(bsecond.Xt, bsecond.X);
  const Matrix b_swap = swap_concat(bsecond, s);

  Matrix da = Matrix::Zero(m1, 2 * p);
  Matrix db_full = Matrix::Zero(m2, 2 * p);
  Matrix db_swap = Matrix::Zero(m2, 2 * p);
  double val = mmd_biased_grad(a, b_full, k, da, db_full);
  val += mmd_biased_grad(a, b_swap, k, da, db_swap);

  // A carries Xt' in its right block for both terms.
  dxt_prime += da.rightCols(p);
  // b_full = (Xt'', X''): Xt'' occupies the left block.
  dxt_second += db_full.leftCols(p);
  // b_swap: column j holds Xt''_j iff j was swapped, else column p+j does.
  std::vector<bool> swapped(p, false);
  for (int j : s.indices) swapped[j] = true;
  for (Index j = 0; j < p; ++j)
    dxt_second.col(j) += swapped[j] ? db_swap.col(j) : db_swap.col(p + j);
  return val;
}

double mmd_full_sweep(const JointBatch& bprime, const JointBatch& bsecond,
                      const KernelSpec& k, MmdEstimator est) {
  const Index p = bprime.cols();
  const Matrix a = concat_cols(bprime.X, bprime.Xt);
  double acc = 0.0;
  for (int j = 0; j < p; ++j) {
    SwapSet s;
    s.indices = {j};
    const Matrix b = swap_concat(bsecond, s);
    acc += (est == MmdEstimator::unbiased) ? mmd_unbiased(a, b, k)
                                           : mmd_biased(a, b, k);
  }
  return acc;
}

LossBreakdown loss_total(const JointBatch& bprime, const JointBatch& bsecond,
                         const SwapSet& s, const KernelSpec& k,
                         const LossWeights& w, const Vector& s_star,
                         MmdEstimator est) {
  w.validate();
  LossBreakdown out;
  JointBatch full;
  full.X = Matrix(bprime.rows() + bsecond.rows(), bprime.cols());
  full.Xt = Matrix(full.X.rows(), full.X.cols());
  full.X << bprime.X, bsecond.X;
  full.Xt << bprime.Xt, bsecond.Xt;
  if (w.gamma > 0.0) out.mmd = loss_mmd(bprime, bsecond, s, k, est);
  if (w.lambda > 0.0) out.second_order = loss_second_order(full, w);
  if (w.delta > 0.0) out.decorrelation = loss_decorrelation_sdp(full, s_star);
  out.total = w.gamma * out.mmd + w.lambda * out.second_order +
              w.delta * out.decorrelation;
  return out;
}

LossBreakdown loss_total_grad(const JointBatch& full, Index n_first,
                              const SwapSet& s, const KernelSpec& k,
                              const LossWeights& w, const Vector& s_star,
                              Matrix& dxt) {
  w.validate();
  full.require_valid("loss_total_grad");
  if (n_first < 1 || n_first >= full.rows())
    throw TooFewSamples("loss_total_grad: both halves must be nonempty");
  const Index n = full.rows(), p = full.cols();
  dxt.setZero(n, p);
  LossBreakdown out;

  if (w.gamma > 0.0) {
    JointBatch bp{full.X.topRows(n_first), full.Xt.topRows(n_first)};
    JointBatch bs{full.X.bottomRows(n - n_first), full.Xt.bottomRows(n - n_first)};
    Matrix d1 = Matrix::Zero(n_first, p);
    Matrix d2 = Matrix::Zero(n - n_first, p);
    out.mmd = loss_mmd_biased_grad(bp, bs, s, k, d1, d2);
    dxt.topRows(n_first) += w.gamma * d1;
    dxt.bottomRows(n - n_first) += w.gamma * d2;
  }
  if (w.lambda > 0.0) {
    Matrix d = Matrix::Zero(n, p);
    out.second_order = loss_second_order_grad(full, w, d);
    dxt += w.lambda * d;
  }
  if (w.delta > 0.0) {
    Matrix d = Matrix::Zero(n, p);
    out.decorrelation = loss_decorrelation_sdp_grad(full, s_star, d);
    dxt += w.delta * d;
  }
  out.total = w.gamma * out.mmd + w.lambda * out.second_order +
              w.delta * out.decorrelation;
  return out;
}

}  // namespace dkm
