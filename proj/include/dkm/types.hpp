#pragma once

#include <Eigen/Dense>

#include "dkm/errors.hpp"

namespace dkm {

// Dense double-precision containers used throughout. Data matrices are
// n x p with one observation per row.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

inline bool all_finite(const Matrix& m) { return m.allFinite(); }
inline bool all_finite(const Vector& v) { return v.allFinite(); }

inline void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) throw NonFinite(std::string(what) + ": non-finite entries");
}

inline void require_data_matrix(const Matrix& x, const char* what) {
  if (x.rows() < 1 || x.cols() < 1)
    throw ShapeMismatch(std::string(what) + ": empty matrix");
  require_finite(x, what);
}

// Exact symmetrization; functions taking a symmetric argument assume this
// has been applied (or read only the lower triangle).
inline Matrix symmetrized(const Matrix& m) {
  return 0.5 * (m + m.transpose());
}

}  // namespace dkm
