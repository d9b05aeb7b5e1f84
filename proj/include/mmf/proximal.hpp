#ifndef MMF_PROXIMAL_HPP
#define MMF_PROXIMAL_HPP

#include "mmf/tensor.hpp"

namespace mmf {

/// Nonnegative shrinkage level shared by the three proximal operators.
struct ShrinkThreshold {
  double value = 0.0;
  explicit ShrinkThreshold(double v) : value(v) {
    if (v < 0.0) throw std::invalid_argument("threshold must be >= 0");
  }
};

/// Elementwise sign(a) * max(|a| - t, 0). Minimizer of t*||M||_1 +
/// 0.5*||M - A||_F^2. Ties at |a| = t map to zero.
Matrix soft_threshold(const Matrix& a, ShrinkThreshold t);

/// Column-wise l2,1 shrinkage: columns with norm above t are scaled by
/// (1 - t/norm), the rest become zero. Column-wise convention (samples are
/// columns of the stacked residual), matching the LRR-style solver; note the
/// usual l2,1 notation sums over rows instead.
Matrix l21_shrink(const Matrix& d, ShrinkThreshold t);

/// Proximal operator of the tensor nuclear norm:
/// argmin_G ||G||_* (tensor) + (rho/2) ||G - B||_F^2.
/// Per Fourier slice this is singular value thresholding at level n3/rho
/// (unnormalized-DFT Parseval scaling).
Tensor3 tnn_prox(const Tensor3& b, double rho);

}  // namespace mmf

#endif  // MMF_PROXIMAL_HPP
