#include "dkm/linalg.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace dkm {

Matrix cholesky(const Matrix& m, double jitter, double* effective_jitter) {
  if (m.rows() != m.cols()) throw ShapeMismatch("cholesky: matrix not square");
  require_finite(m, "cholesky");
  if (jitter < 0.0) throw BadParam("cholesky: jitter must be >= 0");
  const Index p = m.rows();
  const double scale = m.trace() / static_cast<double>(p);
  const double cap = 1e-4 * std::abs(scale);
  double j = jitter;
  for (;;) {
    Matrix a = m;
    if (j > 0.0) a.diagonal().array() += j;
    Eigen::LLT<Matrix> llt(a);
    if (llt.info() == Eigen::Success) {
      if (effective_jitter) *effective_jitter = j;
      return llt.matrixL();
    }
    const double next = (j == 0.0) ? std::max(1e-12 * std::abs(scale), 1e-300)
                                   : 10.0 * j;
    if (next > cap || cap == 0.0)
      throw NotPositiveDefinite("cholesky: not positive definite after jitter escalation");
    j = next;
  }
}

Vector sym_eigs(const Matrix& m) {
  if (m.rows() != m.cols()) throw ShapeMismatch("sym_eigs: matrix not square");
  if (!m.allFinite()) throw NonFinite("sym_eigs: non-finite entries");
  Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues();  // ascending
}

Vector chol_solve(const Matrix& L, const Vector& b) {
  Vector y = L.triangularView<Eigen::Lower>().solve(b);
  return L.transpose().triangularView<Eigen::Upper>().solve(y);
}

Matrix chol_solve(const Matrix& L, const Matrix& b) {
  Matrix y = L.triangularView<Eigen::Lower>().solve(b);
  return L.transpose().triangularView<Eigen::Upper>().solve(y);
}

}  // namespace dkm
