#include "dkm/selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dkm {

namespace {

inline double soft_threshold(double z, double g) {
  if (z > g) return z - g;
  if (z < -g) return z + g;
  return 0.0;
}

struct Standardized {
  Matrix x;       // centered, unit 1/m column norm (constant cols zeroed)
  Vector y;       // centered
  Vector mean_x;
  Vector scale_x;  // population sd; 0 marks a constant column
  double mean_y = 0.0;
};

Standardized standardize(const Matrix& design, const Vector& y) {
  Standardized s;
  const Index m = design.rows();
  s.mean_x = design.colwise().mean().transpose();
  s.x = design.rowwise() - s.mean_x.transpose();
  s.scale_x = (s.x.array().square().colwise().sum() / double(m)).sqrt().transpose();
  for (Index j = 0; j < design.cols(); ++j) {
    if (s.scale_x[j] > 0.0)
      s.x.col(j) /= s.scale_x[j];
    else
      s.x.col(j).setZero();
  }
  s.mean_y = y.mean();
  s.y = y.array() - s.mean_y;
  return s;
}

double objective(const Standardized& s, const Vector& b, const Vector& r,
                 double alpha, double tau) {
  const double m = double(s.x.rows());
  return r.squaredNorm() / m + (1.0 - alpha) * 0.5 * tau * b.squaredNorm() +
         alpha * tau * b.lpNorm<1>();
}

// Cyclic coordinate descent in the standardized space; b and the residual
// r = y - X b are updated in place.
void descend(const Standardized& s, double alpha, double tau, Vector& b,
             Vector& r, const ElasticNetOptions& opts, bool& converged,
             int& sweeps) {
  const Index m = s.x.rows(), d = s.x.cols();
  const double denom = 2.0 + (1.0 - alpha) * tau;
  const double thresh = alpha * tau;
  double prev_obj = objective(s, b, r, alpha, tau);
  converged = false;
  for (sweeps = 0; sweeps < opts.max_sweeps; ++sweeps) {
    double max_change = 0.0;
    for (Index j = 0; j < d; ++j) {
      if (s.scale_x[j] == 0.0) continue;
      const double old = b[j];
      const double z = 2.0 * s.x.col(j).dot(r) / double(m) + 2.0 * old;
      const double next = soft_threshold(z, thresh) / denom;
      if (next != old) {
        r += s.x.col(j) * (old - next);
        b[j] = next;
        max_change = std::max(max_change, std::abs(next - old));
      }
    }
    const double obj = objective(s, b, r, alpha, tau);
    if (obj > prev_obj + 1e-10 * (1.0 + std::abs(prev_obj)))
      throw NumericError("elastic_net: objective increased during a sweep");
    prev_obj = obj;
    if (max_change < opts.tol) {
      converged = true;
      ++sweeps;
      break;
    }
  }
}

ElasticNetFit finalize(const Standardized& s, const Vector& b_std, double alpha,
                       double tau, bool converged, int sweeps) {
  ElasticNetFit fit;
  fit.alpha = alpha;
  fit.tau = tau;
  fit.converged = converged;
  fit.sweeps = sweeps;
  fit.coef = Vector::Zero(b_std.size());
  for (Index j = 0; j < b_std.size(); ++j)
    if (s.scale_x[j] > 0.0) fit.coef[j] = b_std[j] / s.scale_x[j];
  fit.intercept = s.mean_y - s.mean_x.dot(fit.coef);
  return fit;
}

void check_args(const Matrix& design, const Vector& y, double alpha,
                double tau) {
  if (design.rows() != y.size())
    throw ShapeMismatch("elastic_net: row count does not match y");
  if (design.rows() < 2) throw TooFewSamples("elastic_net: need m >= 2");
  if (alpha < 0.0 || alpha > 1.0)
    throw BadParam("elastic_net: alpha must lie in [0,1]");
  if (tau < 0.0) throw BadParam("elastic_net: tau must be >= 0");
  require_finite(design, "elastic_net");
  if (!y.allFinite()) throw NonFinite("elastic_net: non-finite response");
}

}  // namespace

ElasticNetFit elastic_net(const Matrix& design, const Vector& y, double alpha,
                          double tau, const ElasticNetOptions& opts) {
  check_args(design, y, alpha, tau);
  const Standardized s = standardize(design, y);
  Vector b = Vector::Zero(design.cols());
  Vector r = s.y;
  bool converged = false;
  int sweeps = 0;
  descend(s, alpha, tau, b, r, opts, converged, sweeps);
  return finalize(s, b, alpha, tau, converged, sweeps);
}

std::vector<ElasticNetFit> elastic_net_path(const Matrix& design,
                                            const Vector& y, double alpha,
                                            const std::vector<double>& taus,
                                            const ElasticNetOptions& opts) {
  if (taus.empty()) throw BadParam("elastic_net_path: empty grid");
  check_args(design, y, alpha, taus.front());
  std::vector<double> sorted = taus;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  const Standardized s = standardize(design, y);
  Vector b = Vector::Zero(design.cols());
  Vector r = s.y;
  std::vector<ElasticNetFit> fits;
  fits.reserve(sorted.size());
  for (double tau : sorted) {
    if (tau < 0.0) throw BadParam("elastic_net_path: tau must be >= 0");
    bool converged = false;
    int sweeps = 0;
    descend(s, alpha, tau, b, r, opts, converged, sweeps);
    fits.push_back(finalize(s, b, alpha, tau, converged, sweeps));
  }
  return fits;
}

std::vector<double> default_tau_grid(const Matrix& design, const Vector& y,
                                     double alpha, int count, double ratio) {
  if (count < 1) throw BadParam("default_tau_grid: count must be >= 1");
  const Standardized s = standardize(design, y);
  // all-zero solution iff |(2/m) x_j' y| <= alpha*tau for every j; a small
  // floor on alpha keeps the grid finite in the pure-ridge case
  const double a = std::max(alpha, 1e-3);
  const double m = double(design.rows());
  double zmax = 0.0;
  for (Index j = 0; j < s.x.cols(); ++j)
    zmax = std::max(zmax, std::abs(2.0 * s.x.col(j).dot(s.y) / m));
  double tau_max = zmax / a;
  if (!(tau_max > 0.0)) tau_max = 1.0;  // degenerate y
  std::vector<double> grid(count);
  if (count == 1) {
    grid[0] = tau_max;
    return grid;
  }
  const double step = std::log(ratio) / double(count - 1);
  for (int i = 0; i < count; ++i) grid[i] = tau_max * std::exp(step * i);
  return grid;
}

CvResult cv_tune(const Matrix& design, const Vector& y, double alpha,
                 const std::vector<double>& taus, int folds, RngStream& rng,
                 const ElasticNetOptions& opts) {
  if (taus.empty()) throw BadParam("cv_tune: empty grid");
  if (folds < 2) throw BadParam("cv_tune: need at least 2 folds");
  const Index m = design.rows();
  if (m < folds) throw TooFewSamples("cv_tune: fewer rows than folds");
  check_args(design, y, alpha, taus.front());

  CvResult res;
  res.taus = taus;
  std::sort(res.taus.begin(), res.taus.end(), std::greater<>());
  res.mean_mse.assign(res.taus.size(), 0.0);

  const auto order = shuffled_indices(rng, int(m));
  std::vector<int> fold_of(m);
  for (Index i = 0; i < m; ++i) fold_of[order[i]] = int(i) % folds;

  for (int f = 0; f < folds; ++f) {
    std::vector<int> tr, te;
    for (Index i = 0; i < m; ++i) (fold_of[i] == f ? te : tr).push_back(int(i));
    Matrix dtr(tr.size(), design.cols()), dte(te.size(), design.cols());
    Vector ytr(tr.size()), yte(te.size());
    for (std::size_t i = 0; i < tr.size(); ++i) {
      dtr.row(Index(i)) = design.row(tr[i]);
      ytr[Index(i)] = y[tr[i]];
    }
    for (std::size_t i = 0; i < te.size(); ++i) {
      dte.row(Index(i)) = design.row(te[i]);
      yte[Index(i)] = y[te[i]];
    }
    const auto fits = elastic_net_path(dtr, ytr, alpha, res.taus, opts);
    for (std::size_t t = 0; t < fits.size(); ++t) {
      const Vector pred =
          (dte * fits[t].coef).array() + fits[t].intercept;
      res.mean_mse[t] += (pred - yte).squaredNorm() / double(te.size());
    }
  }
  for (double& v : res.mean_mse) v /= double(folds);

  std::size_t best = 0;  // grid is descending, so ties keep the larger tau
  for (std::size_t t = 1; t < res.mean_mse.size(); ++t)
    if (res.mean_mse[t] < res.mean_mse[best]) best = t;
  res.tau = res.taus[best];
  return res;
}

Vector knockoff_stats(const ElasticNetFit& fit) {
  const Index d = fit.coef.size();
  if (d == 0 || d % 2 != 0)
    throw ShapeMismatch("knockoff_stats: fit must cover 2p coefficients");
  const Index p = d / 2;
  Vector w(p);
  for (Index j = 0; j < p; ++j)
    w[j] = std::abs(fit.coef[j]) - std::abs(fit.coef[p + j]);
  return w;
}

SelectionResult knockoff_filter(const Vector& w, double q, bool plus) {
  if (!(q > 0.0) || !(q < 1.0)) throw BadParam("knockoff_filter: q must lie in (0,1)");
  SelectionResult res;
  res.W = w;
  res.q = q;
  res.threshold = std::numeric_limits<double>::infinity();

  std::vector<double> candidates;
  for (Index j = 0; j < w.size(); ++j)
    if (w[j] != 0.0) candidates.push_back(std::abs(w[j]));
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()),
                   candidates.end());

  const double offset = plus ? 1.0 : 0.0;
  for (double t : candidates) {
    Index neg = 0, pos = 0;
    for (Index j = 0; j < w.size(); ++j) {
      if (w[j] <= -t) ++neg;
      if (w[j] >= t) ++pos;
    }
    if ((offset + double(neg)) / std::max<double>(1.0, double(pos)) <= q) {
      res.threshold = t;
      break;
    }
  }
  if (std::isfinite(res.threshold)) {
    for (Index j = 0; j < w.size(); ++j)
      if (w[j] >= res.threshold) res.selected.push_back(int(j));
  }
  return res;
}

std::pair<double, double> score_selection(const std::vector<int>& selected,
                                          const std::vector<int>& truth) {
  if (truth.empty()) throw EmptyTruth("score_selection: empty truth set");
  std::vector<int> sorted_truth = truth;
  std::sort(sorted_truth.begin(), sorted_truth.end());
  Index hits = 0;
  for (int j : selected)
    if (std::binary_search(sorted_truth.begin(), sorted_truth.end(), j)) ++hits;
  const double fdp = double(Index(selected.size()) - hits) /
                     std::max<double>(1.0, double(selected.size()));
  const double power = double(hits) / double(sorted_truth.size());
  return {fdp, power};
}

}  // namespace dkm
