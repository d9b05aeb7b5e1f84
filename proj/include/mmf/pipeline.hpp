#ifndef MMF_PIPELINE_HPP
#define MMF_PIPELINE_HPP

#include <optional>

#include "mmf/solver.hpp"

namespace mmf {

/// Outer-loop parameters: functional-matrix threshold, final-index
/// threshold, fusion iteration count and per-iteration weight inflation.
struct FusionConfig {
  AlmConfig alm;
  double theta1 = 0.01;
  std::optional<double> theta2;  // defaults to theta1 when unset
  int fusion_iters = 3;
  double inflate_factor = 10.0;

  double effective_theta2() const { return theta2 ? *theta2 : theta1; }
  void validate() const;
};

struct FusionIterationReport {
  int iteration = 0;
  double lambda = 0.0, sigma = 0.0;
  bool converged = false;
  int inner_iters = 0;
  Residuals final_residuals;
  std::vector<IterationTrace> trace;
  std::vector<double> z_nonzero_fraction;      // after theta1 sparsification
  std::vector<double> index_nonzero_fraction;  // after update + normalization
  double seconds = 0.0;
};

struct FusionReport {
  std::vector<FusionIterationReport> iterations;
  double theta1 = 0.0, theta2 = 0.0;
  std::vector<double> final_index_nonzero_fraction;
};

/// Entries with |z_ij| < theta1 become zero; the boundary is kept.
Matrix sparsify_z(const Matrix& z, double theta1);

/// Multiply every index by A = I + (1/V) sum_v (Z_v + Z_v^T), then
/// L2-normalize each column.
std::vector<Matrix> update_indexes(const std::vector<Matrix>& x,
                                   const std::vector<Matrix>& z);

/// T rounds of solve -> sparsify -> index update -> normalize, with lambda
/// and sigma inflated per round; final theta2 thresholding on every index.
std::pair<std::vector<SparseIndex>, FusionReport> run_fusion(
    const std::vector<SparseIndex>& views, const FusionConfig& config);

}  // namespace mmf

#endif  // MMF_PIPELINE_HPP
