#ifndef MMF_SOLVER_HPP
#define MMF_SOLVER_HPP

#include <vector>

#include <Eigen/Cholesky>

#include "mmf/index.hpp"
#include "mmf/tensor.hpp"

namespace mmf {

/// Penalty schedule and termination parameters of the inner ALM loop.
struct AlmConfig {
  double lambda = 0.01;  // reconstruction-error weight
  double sigma = 0.001;  // sparsity weight
  double mu0 = 1e-5;
  double rho0 = 1e-5;
  double xi0 = 1e-5;
  double eta = 2.0;
  double mu_max = 1e10;
  double rho_max = 1e10;
  double xi_max = 1e10;
  double epsilon = 1e-7;
  int max_inner_iters = 200;

  void validate() const;
};

/// Entrywise-infinity-norm constraint violations, max over views.
struct Residuals {
  double err1 = 0.0;  // ||X_v - X_v Z_v - E_v||_inf
  double err2 = 0.0;  // ||Z_v - G_v||_inf
  double err3 = 0.0;  // ||Z_v - M_v||_inf

  double max() const { return std::max({err1, err2, err3}); }
};

struct IterationTrace {
  int iter = 0;
  double err1 = 0.0, err2 = 0.0, err3 = 0.0;
  double mu = 0.0, rho = 0.0, xi = 0.0;
};

/// All primal variables, multipliers and current penalties of one solve.
struct AlmState {
  std::vector<Matrix> z;        // N x N per view
  std::vector<Matrix> e;        // d_v x N per view
  std::vector<Matrix> m;        // N x N per view
  std::vector<Matrix> y;        // d_v x N multiplier per view
  std::vector<Matrix> nm;       // N x N multiplier per view
  Tensor3 g;                    // N x V x N auxiliary tensor
  Tensor3 w;                    // N x V x N multiplier
  double mu = 0.0, rho = 0.0, xi = 0.0;
  int iter = 0;
};

struct SolveResult {
  std::vector<Matrix> z;
  bool converged = false;
  Residuals final_residuals;
  std::vector<IterationTrace> trace;
};

/// Alternating-direction solver for the fusion objective: block updates of
/// Z_v, E, M_v and the auxiliary tensor, dual ascent on the multipliers and
/// geometric penalty growth, repeated until the three residuals fall
/// below epsilon.
class AlmSolver {
 public:
  AlmSolver(std::vector<Matrix> x, AlmConfig config);

  int n_views() const { return static_cast<int>(x_.size()); }
  Eigen::Index n_images() const { return x_.front().cols(); }
  const AlmConfig& config() const { return config_; }

  AlmState initial_state() const;

  /// Closed-form Z_v block update (SPD solve; the cached factorization is
  /// reused while mu/(rho+xi) is unchanged).
  Matrix update_z(const AlmState& state, int v) const;

  /// l2,1 shrinkage of the vertically stacked residuals, split back per view.
  std::vector<Matrix> update_e(const AlmState& state) const;

  /// Soft threshold of Z_v + N_v/xi at sigma/xi.
  Matrix update_m(const AlmState& state, int v) const;

  /// Proximal step of the lambda^2-weighted tensor nuclear norm on
  /// Phi(Z) + W/rho.
  Tensor3 update_g(const AlmState& state) const;

  /// Dual ascent on Y_v, W, N_v, then geometric penalty growth with caps.
  void update_multipliers(AlmState& state) const;

  Residuals residuals(const AlmState& state) const;
  bool converged(const Residuals& r, double epsilon) const {
    return r.max() < epsilon;
  }

  /// Full inner loop; non-convergence is reported, not thrown.
  SolveResult solve() const;

  /// Value of the augmented Lagrangian at the given state (test probe).
  double augmented_lagrangian(const AlmState& state) const;

 private:
  std::vector<Matrix> x_;
  std::vector<Matrix> gram_;  // X_v^T X_v, fixed for the whole solve
  AlmConfig config_;

  mutable double cached_coeff_ = -1.0;
  mutable std::vector<Eigen::LLT<Matrix>> llt_;

  void refresh_factorizations(double coeff) const;
  Matrix view_of(const Tensor3& t, int v) const;
};

/// Convenience front end taking sparse indexes (densified internally).
SolveResult solve(const std::vector<SparseIndex>& views,
                  const AlmConfig& config);

}  // namespace mmf

#endif  // MMF_SOLVER_HPP
