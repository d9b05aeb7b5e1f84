#include "mmf/proximal.hpp"

#include <cmath>

namespace mmf {

Matrix soft_threshold(const Matrix& a, ShrinkThreshold t) {
  const double thr = t.value;
  return a.unaryExpr([thr](double x) {
    const double mag = std::abs(x) - thr;
    return mag > 0.0 ? (x > 0.0 ? mag : -mag) : 0.0;
  });
}

Matrix l21_shrink(const Matrix& d, ShrinkThreshold t) {
  Matrix out = Matrix::Zero(d.rows(), d.cols());
  for (Eigen::Index j = 0; j < d.cols(); ++j) {
    const double norm = d.col(j).norm();
    if (norm > t.value) {
      out.col(j) = (1.0 - t.value / norm) * d.col(j);
    }
  }
  return out;
}

Tensor3 tnn_prox(const Tensor3& b, double rho) {
  if (rho <= 0.0) throw std::invalid_argument("tnn_prox: rho must be > 0");
  const Eigen::Index n1 = b.n1(), n2 = b.n2(), n3 = b.n3();
  const double thr = static_cast<double>(n3) / rho;
  FourierTensor3 bf = fft_mode3(b);
  FourierTensor3 gf(n1, n2, n3);
  for (Eigen::Index k = 0; k <= n3 / 2; ++k) {
    Eigen::JacobiSVD<CMatrix> svd(bf.slice(k),
                                  Eigen::ComputeThinU | Eigen::ComputeThinV);
    Eigen::VectorXd sv = svd.singularValues();
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
      sv(i) = std::max(sv(i) - thr, 0.0);
    }
    gf.slice(k) =
        svd.matrixU() * sv.asDiagonal() * svd.matrixV().adjoint();
    const Eigen::Index m = (n3 - k) % n3;
    if (m != k) gf.slice(m) = gf.slice(k).conjugate();
  }
  return ifft_mode3(gf);
}

}  // namespace mmf
