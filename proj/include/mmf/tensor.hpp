#ifndef MMF_TENSOR_HPP
#define MMF_TENSOR_HPP

#include <complex>
#include <stdexcept>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

namespace mmf {

using Matrix = Eigen::MatrixXd;
using CMatrix = Eigen::MatrixXcd;

/// Dense 3-order real tensor, frontal-slice major with column-major slices.
/// Entry (i,j,k) lives at data[i + n1*(j + n2*k)], all indices 0-based.
class Tensor3 {
 public:
  Tensor3() = default;
  Tensor3(Eigen::Index n1, Eigen::Index n2, Eigen::Index n3);

  Eigen::Index n1() const { return n1_; }
  Eigen::Index n2() const { return n2_; }
  Eigen::Index n3() const { return n3_; }

  double operator()(Eigen::Index i, Eigen::Index j, Eigen::Index k) const {
    return data_[i + n1_ * (j + n2_ * k)];
  }
  double& operator()(Eigen::Index i, Eigen::Index j, Eigen::Index k) {
    return data_[i + n1_ * (j + n2_ * k)];
  }

  Eigen::Map<Matrix> slice(Eigen::Index k);
  Eigen::Map<const Matrix> slice(Eigen::Index k) const;

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  double frobenius_norm() const;
  double max_abs() const;

  Tensor3& operator+=(const Tensor3& other);
  Tensor3& operator-=(const Tensor3& other);
  Tensor3& operator*=(double scale);
  friend Tensor3 operator+(Tensor3 a, const Tensor3& b) { return a += b; }
  friend Tensor3 operator-(Tensor3 a, const Tensor3& b) { return a -= b; }
  friend Tensor3 operator*(Tensor3 a, double s) { return a *= s; }
  friend Tensor3 operator*(double s, Tensor3 a) { return a *= s; }

 private:
  Eigen::Index n1_ = 0, n2_ = 0, n3_ = 0;
  std::vector<double> data_;
};

/// Fourier-domain counterpart of Tensor3 (DFT along every mode-3 fiber).
class FourierTensor3 {
 public:
  FourierTensor3() = default;
  FourierTensor3(Eigen::Index n1, Eigen::Index n2, Eigen::Index n3);

  Eigen::Index n1() const { return n1_; }
  Eigen::Index n2() const { return n2_; }
  Eigen::Index n3() const { return n3_; }

  std::complex<double> operator()(Eigen::Index i, Eigen::Index j,
                                  Eigen::Index k) const {
    return data_[i + n1_ * (j + n2_ * k)];
  }
  std::complex<double>& operator()(Eigen::Index i, Eigen::Index j,
                                   Eigen::Index k) {
    return data_[i + n1_ * (j + n2_ * k)];
  }

  Eigen::Map<CMatrix> slice(Eigen::Index k);
  Eigen::Map<const CMatrix> slice(Eigen::Index k) const;

 private:
  Eigen::Index n1_ = 0, n2_ = 0, n3_ = 0;
  std::vector<std::complex<double>> data_;
};

/// Unnormalized DFT along each mode-3 fiber.
FourierTensor3 fft_mode3(const Tensor3& x);

/// Inverse of fft_mode3 (1/n3-scaled). Requires conjugate symmetry across
/// the slice index so the result is real; throws std::invalid_argument when
/// the symmetry check fails (tolerance 1e-8 relative to the largest entry).
Tensor3 ifft_mode3(const FourierTensor3& xf);

/// t-product of conformable tensors, evaluated slice-wise in the Fourier
/// domain. Throws std::invalid_argument on dimension mismatch.
Tensor3 t_product(const Tensor3& x, const Tensor3& y);

/// Transpose each frontal slice, then reverse the order of slices 2..n3.
Tensor3 t_transpose(const Tensor3& x);

/// First frontal slice is the n-by-n identity, all other slices zero.
Tensor3 identity_tensor(Eigen::Index n, Eigen::Index n3);

struct TSvd {
  Tensor3 u;  // n1 x n1 x n3, orthogonal
  Tensor3 s;  // n1 x n2 x n3, f-diagonal
  Tensor3 v;  // n2 x n2 x n3, orthogonal
};

/// Full t-SVD: x = u * s * t_transpose(v) under the t-product, with
/// nonnegative nonincreasing diagonals in every Fourier slice of s.
TSvd t_svd(const Tensor3& x);

/// Tensor nuclear norm: sum of singular values over all Fourier slices.
double tnn(const Tensor3& x);

/// Expand into the (n1*n3) x (n2*n3) block-circulant matrix whose block
/// (r, c) is frontal slice ((r - c) mod n3). Test oracle only; throws when
/// max(n1, n2) * n3 exceeds 512.
Matrix block_circulant(const Tensor3& x);

/// Stack V functional matrices of size N x N into an N x V x N tensor with
/// out(i, v, j) = z[v](i, j). Inverse of phi_split.
Tensor3 phi_merge(const std::vector<Matrix>& z);

/// Exact inverse of phi_merge.
std::vector<Matrix> phi_split(const Tensor3& t);

}  // namespace mmf

#endif  // MMF_TENSOR_HPP
