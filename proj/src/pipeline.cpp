#include "mmf/pipeline.hpp"

#include <chrono>
#include <cmath>

namespace mmf {

namespace {

double dense_nonzero_fraction(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  const auto nnz = (m.array() != 0.0).count();
  return static_cast<double>(nnz) / static_cast<double>(m.size());
}

Matrix normalize_columns(Matrix x) {
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double norm = x.col(j).norm();
    if (norm > 0.0) x.col(j) /= norm;
  }
  return x;
}

}  // namespace

void FusionConfig::validate() const {
  alm.validate();
  if (theta1 < 0.0) throw std::invalid_argument("theta1 must be >= 0");
  if (theta2 && *theta2 < 0.0) {
    throw std::invalid_argument("theta2 must be >= 0");
  }
  if (fusion_iters < 1) throw std::invalid_argument("fusion_iters must be >= 1");
  if (inflate_factor <= 0.0) {
    throw std::invalid_argument("inflate_factor must be > 0");
  }
}

Matrix sparsify_z(const Matrix& z, double theta1) {
  if (theta1 < 0.0) throw std::invalid_argument("theta1 must be >= 0");
  return z.unaryExpr(
      [theta1](double v) { return std::abs(v) < theta1 ? 0.0 : v; });
}

std::vector<Matrix> update_indexes(const std::vector<Matrix>& x,
                                   const std::vector<Matrix>& z) {
  if (x.empty() || x.size() != z.size()) {
    throw std::invalid_argument("update_indexes: view count mismatch");
  }
  const Eigen::Index n = x.front().cols();
  Matrix aggregate = Matrix::Identity(n, n);
  for (const Matrix& zv : z) {
    if (zv.rows() != n || zv.cols() != n) {
      throw std::invalid_argument("update_indexes: Z_v must be N x N");
    }
    aggregate += (zv + zv.transpose()) / static_cast<double>(z.size());
  }
  std::vector<Matrix> out;
  out.reserve(x.size());
  for (const Matrix& xv : x) {
    if (xv.cols() != n) {
      throw std::invalid_argument("update_indexes: inconsistent N");
    }
    out.push_back(normalize_columns(xv * aggregate));
  }
  return out;
}

std::pair<std::vector<SparseIndex>, FusionReport> run_fusion(
    const std::vector<SparseIndex>& views, const FusionConfig& config) {
  config.validate();
  if (views.empty()) throw std::invalid_argument("run_fusion: no views");

  std::vector<Matrix> x;
  x.reserve(views.size());
  for (const SparseIndex& v : views) x.push_back(v.to_dense());

  FusionReport report;
  report.theta1 = config.theta1;
  report.theta2 = config.effective_theta2();

  double lambda = config.alm.lambda;
  double sigma = config.alm.sigma;
  for (int t = 1; t <= config.fusion_iters; ++t) {
    const auto start = std::chrono::steady_clock::now();
    AlmConfig alm = config.alm;
    alm.lambda = lambda;
    alm.sigma = sigma;
    SolveResult solved = AlmSolver(x, alm).solve();

    FusionIterationReport iter;
    iter.iteration = t;
    iter.lambda = lambda;
    iter.sigma = sigma;
    iter.converged = solved.converged;
    iter.inner_iters = static_cast<int>(solved.trace.size());
    iter.final_residuals = solved.final_residuals;
    iter.trace = solved.trace;

    std::vector<Matrix> z_sparse;
    z_sparse.reserve(solved.z.size());
    for (const Matrix& zv : solved.z) {
      z_sparse.push_back(sparsify_z(zv, config.theta1));
      iter.z_nonzero_fraction.push_back(
          dense_nonzero_fraction(z_sparse.back()));
    }
    x = update_indexes(x, z_sparse);
    for (const Matrix& xv : x) {
      iter.index_nonzero_fraction.push_back(dense_nonzero_fraction(xv));
    }
    iter.seconds = std::chrono::duration<double>(
                       std::chrono::steady_clock::now() - start)
                       .count();
    report.iterations.push_back(std::move(iter));

    lambda *= config.inflate_factor;
    sigma *= config.inflate_factor;
  }

  const double theta2 = config.effective_theta2();
  std::vector<SparseIndex> fused;
  fused.reserve(x.size());
  for (std::size_t v = 0; v < x.size(); ++v) {
    const Matrix thresholded = sparsify_z(x[v], theta2);
    report.final_index_nonzero_fraction.push_back(
        dense_nonzero_fraction(thresholded));
    fused.push_back(SparseIndex::from_dense(thresholded, views[v].ids()));
  }
  return {std::move(fused), std::move(report)};
}

}  // namespace mmf
