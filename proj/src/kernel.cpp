#include "dkm/kernel.hpp"

namespace dkm {

KernelSpec KernelSpec::default8() {
  KernelSpec k;
  k.bandwidths.resize(8);
  k.weights = Vector::Constant(8, 1.0 / 8.0);
  for (int i = 0; i < 8; ++i) k.bandwidths[i] = static_cast<double>(1 << i);
  return k;
}

void KernelSpec::validate() const {
  if (bandwidths.size() != weights.size() || bandwidths.size() == 0)
    throw BadParam("KernelSpec: bandwidths/weights length mismatch");
  if ((bandwidths.array() <= 0.0).any())
    throw BadParam("KernelSpec: bandwidths must be positive");
  if ((weights.array() <= 0.0).any())
    throw BadParam("KernelSpec: weights must be positive");
  if (std::abs(weights.sum() - 1.0) > 1e-12)
    throw BadParam("KernelSpec: weights must sum to 1 so that k(x,x)=1");
}

double kernel_eval(const KernelSpec& k, const Vector& u, const Vector& v) {
  if (u.size() != v.size()) throw ShapeMismatch("kernel_eval: length mismatch");
  const double d2 = (u - v).squaredNorm();
  double acc = 0.0;
  for (Index i = 0; i < k.bandwidths.size(); ++i) {
    const double xi = k.bandwidths[i];
    acc += k.weights[i] * std::exp(-d2 / (2.0 * xi * xi));
  }
  return acc;
}

Matrix pairwise_sqdist(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols())
    throw ShapeMismatch("pairwise_sqdist: dimension mismatch");
  const Vector an = a.rowwise().squaredNorm();
  const Vector bn = b.rowwise().squaredNorm();
  Matrix d2 = (-2.0 * a * b.transpose());
  d2.colwise() += an;
  d2.rowwise() += bn.transpose();
  return d2.cwiseMax(0.0);
}

Matrix kernel_matrix(const KernelSpec& k, const Matrix& a, const Matrix& b,
                     Matrix* grad_scale) {
  const Matrix d2 = pairwise_sqdist(a, b);
  Matrix km = Matrix::Zero(d2.rows(), d2.cols());
  if (grad_scale) grad_scale->setZero(d2.rows(), d2.cols());
  for (Index i = 0; i < k.bandwidths.size(); ++i) {
    const double xi2 = k.bandwidths[i] * k.bandwidths[i];
    const Matrix e = (-d2.array() / (2.0 * xi2)).exp();
    km += k.weights[i] * e;
    if (grad_scale) *grad_scale += (k.weights[i] / xi2) * e;
  }
  return km;
}

}  // namespace dkm
