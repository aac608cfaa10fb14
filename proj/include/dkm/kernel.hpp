#pragma once

#include "dkm/types.hpp"

namespace dkm {

// Mixture-of-Gaussians kernel k(u,v) = sum_i w_i exp(-|u-v|^2 / (2 xi_i^2)).
// Weights must sum to 1 so that k(x,x) = 1.
struct KernelSpec {
  Vector bandwidths;
  Vector weights;

  // The 8-bandwidth spec used for all experiments:
  // xi = (1,2,4,8,16,32,64,128), weights 1/8.
  static KernelSpec default8();

  void validate() const;
};

double kernel_eval(const KernelSpec& k, const Vector& u, const Vector& v);

// D2(i,j) = |a_i - b_j|^2 for row vectors of A and B (clamped at 0).
Matrix pairwise_sqdist(const Matrix& a, const Matrix& b);

// Kernel matrix K(i,j) = k(a_i, b_j). When grad_scale is non-null it also
// receives F(i,j) = sum_i (w_i/xi_i^2) exp(-D2/(2 xi_i^2)), the radial
// factor of dk/du = -F * (u - v).
Matrix kernel_matrix(const KernelSpec& k, const Matrix& a, const Matrix& b,
                     Matrix* grad_scale = nullptr);

}  // namespace dkm
