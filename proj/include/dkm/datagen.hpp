#pragma once

#include <string>
#include <vector>

#include "dkm/rng.hpp"
#include "dkm/types.hpp"

namespace dkm {

enum class DistributionKind {
  ar1_gaussian,
  gaussian_mixture,
  multivariate_t,
  sparse_gaussian,
  custom_sigma_gaussian,
};

struct DistributionSpec {
  DistributionKind kind = DistributionKind::ar1_gaussian;
  int p = 100;
  double rho = 0.5;                               // ar1 / multivariate_t
  std::vector<double> mix_rhos = {0.3, 0.5, 0.7}; // gaussian_mixture
  double nu = 3.0;                                // multivariate_t
  int sparse_l = 30;                              // sparse_gaussian
  Matrix sigma;                                   // custom_sigma_gaussian

  void validate() const;
};

// Sigma_ij = rho^|i-j|.
Matrix ar1_sigma(int p, double rho);

// Rows iid N(0, AR1(rho)), sampled by the autoregressive recursion.
Matrix sample_ar1(int p, double rho, Index n, RngStream& rng);

// Equal-weight mixture of AR(1) Gaussians; labels receives the latent
// component of each row when non-null.
Matrix sample_mixture(int p, const std::vector<double>& rhos, Index n,
                      RngStream& rng, std::vector<int>* labels = nullptr);

// X = sqrt((nu-2)/nu) * Z / sqrt(G), Z ~ N(0, AR1(rho)),
// G ~ Gamma(nu/2, nu/2) per row; unit-variance heavy-tailed columns.
Matrix sample_mvt(int p, double nu, double rho, Index n, RngStream& rng);

// Per row: eta ~ N(0,1) on a uniform size-L support, scaled by sqrt(p/L)
// so each column has unit variance.
Matrix sample_sparse_gaussian(int p, int L, Index n, RngStream& rng);

Matrix sample_from_spec(const DistributionSpec& spec, Index n, RngStream& rng);

// True covariance of the spec's distribution (for oracles and moment tests).
Matrix spec_sigma(const DistributionSpec& spec);

struct ResponseSpec {
  int k = 30;          // signal count
  double amplitude = 0.0;
  bool random_signs = false;

  void validate(Index p) const;
};

struct Response {
  Vector y;
  std::vector<int> support;  // sorted, 0-based
  Vector beta;
};

// Support uniform without replacement, beta_j = amplitude/sqrt(m) on the
// support (sign flips optional), y = X beta + N(0, I).
Response simulate_response(const Matrix& x, const ResponseSpec& spec,
                           RngStream& rng);

struct CsvMatrix {
  Matrix values;
  std::vector<std::string> names;  // empty when the file has no header
};

// Rectangular numeric CSV (comma separated, '.' decimal, optional single
// header row, '#' comment lines skipped).
CsvMatrix load_csv(const std::string& path, bool has_header);

void save_csv(const std::string& path, const Matrix& values,
              const std::vector<std::string>& names = {},
              const std::string& comment = "");

}  // namespace dkm
