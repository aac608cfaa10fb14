#include "dkm/gaussian.hpp"

#include <cmath>
#include <numbers>

#include "dkm/linalg.hpp"

namespace dkm {

Matrix estimate_covariance(const Matrix& x, double shrinkage) {
  require_data_matrix(x, "estimate_covariance");
  if (x.rows() < 2) throw TooFewSamples("estimate_covariance: need n >= 2");
  if (shrinkage < 0.0 || shrinkage > 1.0)
    throw BadParam("estimate_covariance: shrinkage must lie in [0,1]");
  const Index n = x.rows(), p = x.cols();
  const Matrix xc = x.rowwise() - x.colwise().mean();
  Matrix s = (xc.transpose() * xc) / double(n - 1);
  s = symmetrized(s);
  if (shrinkage > 0.0) {
    const double mu = s.trace() / double(p);
    s = (1.0 - shrinkage) * s;
    s.diagonal().array() += shrinkage * mu;
  }
  return s;
}

Matrix cov_to_corr(const Matrix& sigma) {
  const Vector d = sigma.diagonal();
  if ((d.array() <= 0.0).any())
    throw DegenerateCovariance("cov_to_corr: non-positive diagonal");
  const Vector inv = d.array().sqrt().inverse();
  return symmetrized((inv.asDiagonal() * sigma * inv.asDiagonal()));
}

Vector equicorrelated_s(const Matrix& sigma_corr) {
  const Vector eigs = sym_eigs(sigma_corr);
  const double lmin = eigs[0];
  const double v = std::clamp(2.0 * lmin, 0.0, 1.0);
  return Vector::Constant(sigma_corr.rows(), v);
}

SdpResult solve_sdp(const Matrix& sigma_corr, const SdpOptions& opts) {
  const Index p = sigma_corr.rows();
  if (sigma_corr.cols() != p) throw ShapeMismatch("solve_sdp: not square");
  require_finite(sigma_corr, "solve_sdp");
  if ((sigma_corr.diagonal().array() - 1.0).abs().maxCoeff() > 1e-8)
    throw BadParam("solve_sdp: expected a correlation matrix (unit diagonal)");
  const double eps = opts.feasibility_margin;

  SdpResult res;
  if (p == 1) {
    res.s = Vector::Constant(1, std::clamp(2.0 - eps, 0.0, 1.0));
    res.converged = true;
    return res;
  }

  // Feasible start: equicorrelated point, shaved by the margin.
  const Vector eigs = sym_eigs(sigma_corr);
  double s0 = std::clamp(2.0 * eigs[0] - eps, 0.0, 1.0);
  res.s = Vector::Constant(p, s0);

  Matrix b_minor(p - 1, p - 1);
  Vector col(p - 1);
  for (res.sweeps = 0; res.sweeps < opts.max_sweeps; ++res.sweeps) {
    double max_change = 0.0;
    for (Index j = 0; j < p; ++j) {
      // Schur bound: with B = 2*Sigma - eps*I - diag(s) and row/col j
      // removed, the largest admissible s_j is
      // 2*Sigma_jj - eps - b^T B_minor^{-1} b.
      Index r = 0;
      for (Index a = 0; a < p; ++a) {
        if (a == j) continue;
        col[r] = 2.0 * sigma_corr(a, j);
        Index c = 0;
        for (Index bb = 0; bb < p; ++bb) {
          if (bb == j) continue;
          b_minor(r, c) = 2.0 * sigma_corr(a, bb);
          if (a == bb) b_minor(r, c) -= eps + res.s[a];
          ++c;
        }
        ++r;
      }
      double t_max;
      try {
        const Matrix L = cholesky(b_minor, 0.0);
        const Vector y = chol_solve(L, col);
        t_max = 2.0 - eps - col.dot(y);  // Sigma_jj = 1
      } catch (const NotPositiveDefinite&) {
        continue;  // keep current s_j; neighboring minor too close to singular
      }
      const double s_new = std::clamp(t_max, 0.0, 1.0);
      if (s_new > res.s[j]) {
        max_change = std::max(max_change, s_new - res.s[j]);
        res.s[j] = s_new;
      }
    }
    if (max_change < opts.tol) {
      res.converged = true;
      ++res.sweeps;
      break;
    }
  }

  // Safety: shrink globally if rounding pushed the iterate past the cone.
  for (int guard = 0; guard < 60; ++guard) {
    Matrix m = 2.0 * sigma_corr;
    m.diagonal() -= res.s;
    if (sym_eigs(m)[0] >= -1e-8) break;
    res.s *= 0.999;
  }
  return res;
}

GaussianModel make_gaussian_model(const Vector& mu, const Matrix& sigma,
                                  const Vector& s_corr_in) {
  const Index p = sigma.rows();
  if (sigma.cols() != p) throw ShapeMismatch("make_gaussian_model: Sigma not square");
  if (mu.size() != p) throw ShapeMismatch("make_gaussian_model: mu length mismatch");
  Vector s_corr = s_corr_in;
  if (s_corr.size() == 0) {
    s_corr = solve_sdp(cov_to_corr(sigma)).s;
  } else if (s_corr.size() != p) {
    throw ShapeMismatch("make_gaussian_model: s length mismatch");
  }

  GaussianModel model;
  model.mu = mu;
  model.sigma = symmetrized(sigma);
  model.s_cov = s_corr.array() * sigma.diagonal().array();

  model.sigma_chol = cholesky(model.sigma, 0.0);
  model.log_norm = -0.5 * double(p) * std::log(2.0 * std::numbers::pi);
  for (Index i = 0; i < p; ++i)
    model.log_norm -= std::log(model.sigma_chol(i, i));

  // Sigma^{-1} D via Cholesky solves (never explicit inversion).
  const Matrix inv_sigma_d =
      chol_solve(model.sigma_chol, Matrix(model.s_cov.asDiagonal()));
  model.transfer = Matrix::Identity(p, p) - inv_sigma_d;
  Matrix cond = Matrix(2.0 * model.s_cov.asDiagonal()) -
                model.s_cov.asDiagonal() * inv_sigma_d;
  cond = symmetrized(cond);
  // The conditional covariance sits on the cone boundary when the SDP is
  // tight; a tiny jitter keeps the factorization alive.
  model.noise_chol = cholesky(cond, 1e-12 * std::max(1.0, cond.trace() / double(p)));
  return model;
}

Matrix gaussian_knockoffs(const GaussianModel& model, const Matrix& x,
                          RngStream& rng) {
  const Index p = model.mu.size();
  if (x.cols() != p) throw ShapeMismatch("gaussian_knockoffs: column mismatch");
  const Matrix v = sample_std_normal(rng, x.rows(), p);
  Matrix xt = (x.rowwise() - model.mu.transpose()) * model.transfer +
              v * model.noise_chol.transpose();
  xt.rowwise() += model.mu.transpose();
  return xt;
}

void MixtureModel::validate() const {
  if (components.empty()) throw BadParam("MixtureModel: no components");
  double total = 0.0;
  for (const auto& c : components) {
    if (!(c.weight > 0.0)) throw BadParam("MixtureModel: weights must be positive");
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-8)
    throw BadParam("MixtureModel: weights must sum to 1");
}

Vector mixture_posterior(const MixtureModel& model, const Vector& x) {
  const int kc = int(model.components.size());
  Vector logp(kc);
  for (int k = 0; k < kc; ++k) {
    const auto& c = model.components[k];
    const Vector d = x - c.model.mu;
    const Vector half = c.model.sigma_chol.triangularView<Eigen::Lower>().solve(d);
    logp[k] = std::log(c.weight) + c.model.log_norm - 0.5 * half.squaredNorm();
  }
  // log-sum-exp guards against underflow for far-out observations
  const double m = logp.maxCoeff();
  Vector w = (logp.array() - m).exp();
  return w / w.sum();
}

Matrix mixture_oracle_knockoffs(const MixtureModel& model, const Matrix& x,
                                RngStream& rng) {
  model.validate();
  const Index p = model.components.front().model.mu.size();
  if (x.cols() != p)
    throw ShapeMismatch("mixture_oracle_knockoffs: column mismatch");
  const int kc = int(model.components.size());
  Matrix xt(x.rows(), p);
  for (Index i = 0; i < x.rows(); ++i) {
    int z = 0;
    if (kc > 1) {
      const Vector post = mixture_posterior(model, x.row(i).transpose());
      const double u = rng.uniform01();
      double acc = 0.0;
      z = kc - 1;
      for (int k = 0; k < kc; ++k) {
        acc += post[k];
        if (u < acc) {
          z = k;
          break;
        }
      }
    }
    const auto& gm = model.components[z].model;
    Vector v(p);
    for (Index j = 0; j < p; ++j) v[j] = rng.normal();
    xt.row(i) = gm.mu.transpose() +
                (x.row(i) - gm.mu.transpose()) * gm.transfer +
                v.transpose() * gm.noise_chol.transpose();
  }
  return xt;
}

}  // namespace dkm
