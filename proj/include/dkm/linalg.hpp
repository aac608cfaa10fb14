#pragma once

#include "dkm/types.hpp"

namespace dkm {

// Lower-triangular L with L*L^T = m + j*I for the smallest jitter j that
// factorizes, starting from the requested value and escalating x10 up to
// 1e-4 * trace/dim. Throws NotPositiveDefinite once the cap is exceeded.
// effective_jitter, when given, receives the jitter actually used.
Matrix cholesky(const Matrix& m, double jitter,
                double* effective_jitter = nullptr);

// Eigenvalues of a symmetric matrix, ascending. Throws NonFinite on
// NaN/Inf input.
Vector sym_eigs(const Matrix& m);

// Solve (L L^T) x = b given the Cholesky factor L.
Vector chol_solve(const Matrix& L, const Vector& b);
Matrix chol_solve(const Matrix& L, const Matrix& b);

}  // namespace dkm
