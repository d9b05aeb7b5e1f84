#ifndef MMF_TESTS_TEST_UTIL_HPP
#define MMF_TESTS_TEST_UTIL_HPP

#include <random>

#include "mmf/tensor.hpp"

namespace mmf::testutil {

inline Tensor3 random_tensor(Eigen::Index n1, Eigen::Index n2,
                             Eigen::Index n3, std::mt19937& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Tensor3 t(n1, n2, n3);
  for (double& v : t.data()) v = gauss(rng);
  return t;
}

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols,
                            std::mt19937& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = gauss(rng);
  }
  return m;
}

inline double rel_error(const Tensor3& a, const Tensor3& b) {
  const double denom = std::max(b.frobenius_norm(), 1e-300);
  return (a - b).frobenius_norm() / denom;
}

/// Brute-force t-product via the block-circulant times stacked-slices form.
inline Tensor3 t_product_oracle(const Tensor3& x, const Tensor3& y) {
  const Eigen::Index n3 = x.n3();
  const Matrix circ = block_circulant(x);
  Matrix stacked(y.n1() * n3, y.n2());
  for (Eigen::Index k = 0; k < n3; ++k) {
    stacked.middleRows(k * y.n1(), y.n1()) = y.slice(k);
  }
  const Matrix product = circ * stacked;
  Tensor3 out(x.n1(), y.n2(), n3);
  for (Eigen::Index k = 0; k < n3; ++k) {
    out.slice(k) = product.middleRows(k * x.n1(), x.n1());
  }
  return out;
}

inline double matrix_nuclear_norm(const Matrix& m) {
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues().sum();
}

}  // namespace mmf::testutil

#endif  // MMF_TESTS_TEST_UTIL_HPP
