#include "mmf/tensor.hpp"

#include <algorithm>
#include <cmath>

#include <unsupported/Eigen/FFT>

namespace mmf {

namespace {

constexpr double kSymmetryTol = 1e-8;

void check_same_shape(const Tensor3& a, const Tensor3& b) {
  if (a.n1() != b.n1() || a.n2() != b.n2() || a.n3() != b.n3()) {
    throw std::invalid_argument("tensor shape mismatch");
  }
}

}  // namespace

Tensor3::Tensor3(Eigen::Index n1, Eigen::Index n2, Eigen::Index n3)
    : n1_(n1), n2_(n2), n3_(n3) {
  if (n1 < 0 || n2 < 0 || n3 < 0) {
    throw std::invalid_argument("negative tensor extent");
  }
  data_.assign(static_cast<std::size_t>(n1) * n2 * n3, 0.0);
}

Eigen::Map<Matrix> Tensor3::slice(Eigen::Index k) {
  return Eigen::Map<Matrix>(data_.data() + n1_ * n2_ * k, n1_, n2_);
}

Eigen::Map<const Matrix> Tensor3::slice(Eigen::Index k) const {
  return Eigen::Map<const Matrix>(data_.data() + n1_ * n2_ * k, n1_, n2_);
}

double Tensor3::frobenius_norm() const {
  double acc = 0.0;
  for (double v : data_) acc += v * v;
  return std::sqrt(acc);
}

double Tensor3::max_abs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

Tensor3& Tensor3::operator+=(const Tensor3& other) {
  check_same_shape(*this, other);
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Tensor3& Tensor3::operator-=(const Tensor3& other) {
  check_same_shape(*this, other);
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

Tensor3& Tensor3::operator*=(double scale) {
  for (double& v : data_) v *= scale;
  return *this;
}

FourierTensor3::FourierTensor3(Eigen::Index n1, Eigen::Index n2,
                               Eigen::Index n3)
    : n1_(n1), n2_(n2), n3_(n3) {
  data_.assign(static_cast<std::size_t>(n1) * n2 * n3, {0.0, 0.0});
}

Eigen::Map<CMatrix> FourierTensor3::slice(Eigen::Index k) {
  return Eigen::Map<CMatrix>(data_.data() + n1_ * n2_ * k, n1_, n2_);
}

Eigen::Map<const CMatrix> FourierTensor3::slice(Eigen::Index k) const {
  return Eigen::Map<const CMatrix>(data_.data() + n1_ * n2_ * k, n1_, n2_);
}

FourierTensor3 fft_mode3(const Tensor3& x) {
  const Eigen::Index n1 = x.n1(), n2 = x.n2(), n3 = x.n3();
  FourierTensor3 out(n1, n2, n3);
  if (n3 == 1) {  // length-1 transform is the identity (and trips up kissfft)
    out.slice(0) = x.slice(0).cast<std::complex<double>>();
    return out;
  }
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> fiber(n3), spectrum(n3);
  for (Eigen::Index j = 0; j < n2; ++j) {
    for (Eigen::Index i = 0; i < n1; ++i) {
      for (Eigen::Index k = 0; k < n3; ++k) fiber[k] = x(i, j, k);
      fft.fwd(spectrum, fiber);
      for (Eigen::Index k = 0; k < n3; ++k) out(i, j, k) = spectrum[k];
    }
  }
  return out;
}

Tensor3 ifft_mode3(const FourierTensor3& xf) {
  const Eigen::Index n1 = xf.n1(), n2 = xf.n2(), n3 = xf.n3();
  // Conjugate symmetry: slice k must equal conj(slice n3 - k) for k >= 1,
  // and slice 0 must be real.
  double scale = 0.0;
  for (Eigen::Index k = 0; k < n3; ++k) {
    scale = std::max(scale, xf.slice(k).cwiseAbs().maxCoeff());
  }
  const double tol = kSymmetryTol * std::max(1.0, scale);
  for (Eigen::Index k = 0; k < n3; ++k) {
    const Eigen::Index m = (n3 - k) % n3;
    const double defect =
        (xf.slice(k) - xf.slice(m).conjugate()).cwiseAbs().maxCoeff();
    if (defect > tol) {
      throw std::invalid_argument(
          "ifft_mode3: conjugate symmetry violated, inverse is not real");
    }
  }

  Tensor3 out(n1, n2, n3);
  if (n3 == 1) {
    out.slice(0) = xf.slice(0).real();
    return out;
  }
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spectrum(n3), fiber(n3);
  for (Eigen::Index j = 0; j < n2; ++j) {
    for (Eigen::Index i = 0; i < n1; ++i) {
      for (Eigen::Index k = 0; k < n3; ++k) spectrum[k] = xf(i, j, k);
      fft.inv(fiber, spectrum);
      for (Eigen::Index k = 0; k < n3; ++k) out(i, j, k) = fiber[k].real();
    }
  }
  return out;
}

Tensor3 t_product(const Tensor3& x, const Tensor3& y) {
  if (x.n2() != y.n1() || x.n3() != y.n3()) {
    throw std::invalid_argument("t_product: dimension mismatch");
  }
  const Eigen::Index n3 = x.n3();
  FourierTensor3 xf = fft_mode3(x);
  FourierTensor3 yf = fft_mode3(y);
  FourierTensor3 mf(x.n1(), y.n2(), n3);
  // Slices of a product of conjugate-symmetric tensors stay symmetric; the
  // mirror half is copied rather than recomputed.
  for (Eigen::Index k = 0; k <= n3 / 2; ++k) {
    mf.slice(k) = xf.slice(k) * yf.slice(k);
    const Eigen::Index m = (n3 - k) % n3;
    if (m != k) mf.slice(m) = mf.slice(k).conjugate();
  }
  return ifft_mode3(mf);
}

Tensor3 t_transpose(const Tensor3& x) {
  const Eigen::Index n3 = x.n3();
  Tensor3 out(x.n2(), x.n1(), n3);
  out.slice(0) = x.slice(0).transpose();
  for (Eigen::Index k = 1; k < n3; ++k) {
    out.slice(k) = x.slice(n3 - k).transpose();
  }
  return out;
}

Tensor3 identity_tensor(Eigen::Index n, Eigen::Index n3) {
  if (n < 1 || n3 < 1) {
    throw std::invalid_argument("identity_tensor: extents must be positive");
  }
  Tensor3 out(n, n, n3);
  out.slice(0) = Matrix::Identity(n, n);
  return out;
}

TSvd t_svd(const Tensor3& x) {
  const Eigen::Index n1 = x.n1(), n2 = x.n2(), n3 = x.n3();
  FourierTensor3 xf = fft_mode3(x);
  FourierTensor3 uf(n1, n1, n3), sf(n1, n2, n3), vf(n2, n2, n3);
  for (Eigen::Index k = 0; k <= n3 / 2; ++k) {
    Eigen::JacobiSVD<CMatrix> svd(xf.slice(k),
                                  Eigen::ComputeFullU | Eigen::ComputeFullV);
    uf.slice(k) = svd.matrixU();
    vf.slice(k) = svd.matrixV();
    CMatrix s = CMatrix::Zero(n1, n2);
    const auto& sv = svd.singularValues();
    for (Eigen::Index i = 0; i < sv.size(); ++i) s(i, i) = sv(i);
    sf.slice(k) = s;
    // Mirror slices are conjugates of each other; assigning them directly
    // keeps the inverse transform exactly real despite SVD phase freedom.
    const Eigen::Index m = (n3 - k) % n3;
    if (m != k) {
      uf.slice(m) = uf.slice(k).conjugate();
      sf.slice(m) = sf.slice(k).conjugate();
      vf.slice(m) = vf.slice(k).conjugate();
    }
  }
  return {ifft_mode3(uf), ifft_mode3(sf), ifft_mode3(vf)};
}

double tnn(const Tensor3& x) {
  FourierTensor3 xf = fft_mode3(x);
  const Eigen::Index n3 = x.n3();
  double total = 0.0;
  for (Eigen::Index k = 0; k <= n3 / 2; ++k) {
    Eigen::JacobiSVD<CMatrix> svd(xf.slice(k));
    const double slice_sum = svd.singularValues().sum();
    const Eigen::Index m = (n3 - k) % n3;
    total += (m != k) ? 2.0 * slice_sum : slice_sum;
  }
  return total;
}

Matrix block_circulant(const Tensor3& x) {
  const Eigen::Index n1 = x.n1(), n2 = x.n2(), n3 = x.n3();
  if (std::max(n1, n2) * n3 > 512) {
    throw std::invalid_argument("block_circulant: tensor too large for oracle");
  }
  Matrix out(n1 * n3, n2 * n3);
  for (Eigen::Index r = 0; r < n3; ++r) {
    for (Eigen::Index c = 0; c < n3; ++c) {
      out.block(r * n1, c * n2, n1, n2) = x.slice(((r - c) % n3 + n3) % n3);
    }
  }
  return out;
}

Tensor3 phi_merge(const std::vector<Matrix>& z) {
  if (z.empty()) throw std::invalid_argument("phi_merge: no matrices");
  const Eigen::Index n = z.front().rows();
  const auto nv = static_cast<Eigen::Index>(z.size());
  for (const Matrix& m : z) {
    if (m.rows() != n || m.cols() != n) {
      throw std::invalid_argument("phi_merge: matrices must all be N x N");
    }
  }
  Tensor3 out(n, nv, n);
  for (Eigen::Index v = 0; v < nv; ++v) {
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index i = 0; i < n; ++i) out(i, v, j) = z[v](i, j);
    }
  }
  return out;
}

std::vector<Matrix> phi_split(const Tensor3& t) {
  if (t.n1() != t.n3()) {
    throw std::invalid_argument("phi_split: mode-1 and mode-3 extents differ");
  }
  const Eigen::Index n = t.n1(), nv = t.n2();
  std::vector<Matrix> z(nv, Matrix(n, n));
  for (Eigen::Index v = 0; v < nv; ++v) {
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index i = 0; i < n; ++i) z[v](i, j) = t(i, v, j);
    }
  }
  return z;
}

}  // namespace mmf
