#pragma once

#include <vector>

#include "dkm/rng.hpp"
#include "dkm/types.hpp"

namespace dkm {

// (1-shrinkage) * S + shrinkage * (trace(S)/p) * I with S the unbiased
// sample covariance; output exactly symmetric.
Matrix estimate_covariance(const Matrix& x, double shrinkage);

// Rescale a covariance matrix to unit diagonal.
Matrix cov_to_corr(const Matrix& sigma);

struct SdpOptions {
  double feasibility_margin = 1e-6;  // keep 2*Sigma - diag(s) >= margin*I
  double tol = 1e-6;                 // max coordinate change per sweep
  int max_sweeps = 1000;
};

struct SdpResult {
  Vector s;
  bool converged = false;
  int sweeps = 0;
};

// min sum_j |1 - s_j| over s in [0,1]^p subject to 2*Sigma >= diag(s),
// for Sigma a correlation matrix. Block-coordinate ascent: cycle j,
// raise s_j to the largest feasible value (Schur complement bound),
// repeat to convergence. Started from the equicorrelated point
// min(1, 2*lambda_min)*1, so the objective never ends above that
// closed-form fallback.
SdpResult solve_sdp(const Matrix& sigma_corr, const SdpOptions& opts = {});

// Closed-form equicorrelated point min(1, 2*lambda_min(Sigma)) * 1.
Vector equicorrelated_s(const Matrix& sigma_corr);

// Exact sampler for X ~ N(mu, Sigma):
//   Xt = mu + (X - mu)(I - Sigma^{-1} D) + V * C^T,
// with D = diag(s) in covariance units and C C^T = 2D - D Sigma^{-1} D.
struct GaussianModel {
  Vector mu;
  Matrix sigma;
  Vector s_cov;        // per-feature s, covariance units
  Matrix transfer;     // I - Sigma^{-1} D
  Matrix noise_chol;   // C, lower triangular
  Matrix sigma_chol;   // Cholesky of Sigma (posterior evaluation)
  double log_norm = 0.0;  // -(1/2) log det Sigma - (p/2) log 2 pi
};

// Build the cached factors. s_corr on correlation scale; if empty it is
// computed by solve_sdp on the correlation form of sigma.
GaussianModel make_gaussian_model(const Vector& mu, const Matrix& sigma,
                                  const Vector& s_corr = Vector());

Matrix gaussian_knockoffs(const GaussianModel& model, const Matrix& x,
                          RngStream& rng);

struct MixtureComponent {
  double weight = 0.0;
  GaussianModel model;
};

struct MixtureModel {
  std::vector<MixtureComponent> components;
  void validate() const;
};

// Posterior P(Z = k | x) over mixture components, via log-sum-exp.
Vector mixture_posterior(const MixtureModel& model, const Vector& x);

// Two-step oracle: draw the latent allocation from its posterior given
// each row, then apply the Gaussian sampler of that component.
Matrix mixture_oracle_knockoffs(const MixtureModel& model, const Matrix& x,
                                RngStream& rng);

}  // namespace dkm
