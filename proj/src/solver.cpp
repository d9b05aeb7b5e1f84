#include "mmf/solver.hpp"

#include <cmath>

#include "mmf/proximal.hpp"

namespace mmf {

void AlmConfig::validate() const {
  if (lambda <= 0.0) throw std::invalid_argument("lambda must be > 0");
  if (sigma < 0.0) throw std::invalid_argument("sigma must be >= 0");
  if (mu0 <= 0.0 || rho0 <= 0.0 || xi0 <= 0.0) {
    throw std::invalid_argument("initial penalties must be > 0");
  }
  if (eta <= 1.0) throw std::invalid_argument("eta must be > 1");
  if (mu_max < mu0 || rho_max < rho0 || xi_max < xi0) {
    throw std::invalid_argument("penalty caps below initial values");
  }
  if (epsilon <= 0.0) throw std::invalid_argument("epsilon must be > 0");
  if (max_inner_iters < 1) {
    throw std::invalid_argument("max_inner_iters must be >= 1");
  }
}

AlmSolver::AlmSolver(std::vector<Matrix> x, AlmConfig config)
    : x_(std::move(x)), config_(config) {
  config_.validate();
  if (x_.empty()) throw std::invalid_argument("solver needs >= 1 view");
  const Eigen::Index n = x_.front().cols();
  for (const Matrix& xv : x_) {
    if (xv.cols() != n) {
      throw std::invalid_argument("all views must index the same N images");
    }
    gram_.push_back(xv.transpose() * xv);
  }
}

AlmState AlmSolver::initial_state() const {
  const Eigen::Index n = n_images();
  const auto nv = static_cast<Eigen::Index>(x_.size());
  AlmState s;
  for (const Matrix& xv : x_) {
    s.z.push_back(Matrix::Zero(n, n));
    s.e.push_back(Matrix::Zero(xv.rows(), n));
    s.m.push_back(Matrix::Zero(n, n));
    s.y.push_back(Matrix::Zero(xv.rows(), n));
    s.nm.push_back(Matrix::Zero(n, n));
  }
  s.g = Tensor3(n, nv, n);
  s.w = Tensor3(n, nv, n);
  s.mu = config_.mu0;
  s.rho = config_.rho0;
  s.xi = config_.xi0;
  s.iter = 0;
  return s;
}

void AlmSolver::refresh_factorizations(double coeff) const {
  if (coeff == cached_coeff_) return;
  llt_.clear();
  const Eigen::Index n = n_images();
  for (const Matrix& gram : gram_) {
    Matrix a = Matrix::Identity(n, n) + coeff * gram;
    Eigen::LLT<Matrix> llt(a);
    if (llt.info() != Eigen::Success) {
      throw std::runtime_error("Z update: system matrix is not SPD");
    }
    llt_.push_back(std::move(llt));
  }
  cached_coeff_ = coeff;
}

Matrix AlmSolver::view_of(const Tensor3& t, int v) const {
  const Eigen::Index n = t.n1();
  Matrix out(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) out(i, j) = t(i, v, j);
  }
  return out;
}

Matrix AlmSolver::update_z(const AlmState& state, int v) const {
  const double denom = state.rho + state.xi;
  const double coeff = state.mu / denom;
  refresh_factorizations(coeff);

  const Matrix& xv = x_[v];
  const Matrix wv = view_of(state.w, v);
  const Matrix gv = view_of(state.g, v);
  Matrix rhs = xv.transpose() * state.y[v] + state.mu * gram_[v] -
               state.mu * (xv.transpose() * state.e[v]) - wv - state.nm[v] +
               state.rho * gv + state.xi * state.m[v];
  rhs /= denom;
  return llt_[v].solve(rhs);
}

std::vector<Matrix> AlmSolver::update_e(const AlmState& state) const {
  const Eigen::Index n = n_images();
  Eigen::Index total_rows = 0;
  for (const Matrix& xv : x_) total_rows += xv.rows();
  Matrix d(total_rows, n);
  Eigen::Index row = 0;
  for (int v = 0; v < n_views(); ++v) {
    d.middleRows(row, x_[v].rows()) =
        x_[v] - x_[v] * state.z[v] + state.y[v] / state.mu;
    row += x_[v].rows();
  }
  const Matrix shrunk =
      l21_shrink(d, ShrinkThreshold(config_.lambda / state.mu));
  std::vector<Matrix> e;
  row = 0;
  for (int v = 0; v < n_views(); ++v) {
    e.push_back(shrunk.middleRows(row, x_[v].rows()));
    row += x_[v].rows();
  }
  return e;
}

Matrix AlmSolver::update_m(const AlmState& state, int v) const {
  return soft_threshold(state.z[v] + state.nm[v] / state.xi,
                        ShrinkThreshold(config_.sigma / state.xi));
}

Tensor3 AlmSolver::update_g(const AlmState& state) const {
  Tensor3 b = phi_merge(state.z);
  b += (1.0 / state.rho) * state.w;
  // The nuclear-norm term carries an effective weight of lambda^2: the
  // objective is the lambda-scaled form of  ||E||_2,1 + lambda*||G||_TNN +
  // (sigma/lambda)*sum_v ||M_v||_1, which keeps the E and M thresholds at
  // lambda/mu and sigma/xi while the G step shrinks by lambda^2 * n3 / rho.
  // With a unit weight the trivial solution (E swallows X, Z = 0) dominates
  // and the functional matrices carry no structure.
  const double weight = config_.lambda * config_.lambda;
  return tnn_prox(b, state.rho / weight);
}

void AlmSolver::update_multipliers(AlmState& state) const {
  const Tensor3 z_tensor = phi_merge(state.z);
  for (int v = 0; v < n_views(); ++v) {
    state.y[v] += state.mu * (x_[v] - x_[v] * state.z[v] - state.e[v]);
    // Dual ascent uses the Z_v = M_v constraint residual.
    state.nm[v] += state.xi * (state.z[v] - state.m[v]);
  }
  state.w += state.rho * (z_tensor - state.g);
  state.mu = std::min(config_.eta * state.mu, config_.mu_max);
  state.rho = std::min(config_.eta * state.rho, config_.rho_max);
  state.xi = std::min(config_.eta * state.xi, config_.xi_max);
}

Residuals AlmSolver::residuals(const AlmState& state) const {
  Residuals r;
  for (int v = 0; v < n_views(); ++v) {
    const Matrix recon = x_[v] - x_[v] * state.z[v] - state.e[v];
    r.err1 = std::max(r.err1, recon.cwiseAbs().maxCoeff());
    r.err2 = std::max(
        r.err2, (state.z[v] - view_of(state.g, v)).cwiseAbs().maxCoeff());
    r.err3 = std::max(r.err3,
                      (state.z[v] - state.m[v]).cwiseAbs().maxCoeff());
  }
  return r;
}

SolveResult AlmSolver::solve() const {
  AlmState state = initial_state();
  SolveResult result;
  for (int it = 1; it <= config_.max_inner_iters; ++it) {
    state.iter = it;
    for (int v = 0; v < n_views(); ++v) state.z[v] = update_z(state, v);
    state.e = update_e(state);
    for (int v = 0; v < n_views(); ++v) state.m[v] = update_m(state, v);
    state.g = update_g(state);
    update_multipliers(state);

    const Residuals r = residuals(state);
    result.trace.push_back(
        {it, r.err1, r.err2, r.err3, state.mu, state.rho, state.xi});
    result.final_residuals = r;
    if (converged(r, config_.epsilon)) {
      result.converged = true;
      break;
    }
  }
  result.z = state.z;
  return result;
}

double AlmSolver::augmented_lagrangian(const AlmState& state) const {
  double value = 0.0;
  Eigen::Index total_rows = 0;
  for (const Matrix& xv : x_) total_rows += xv.rows();
  Matrix e_stack(total_rows, n_images());
  Eigen::Index row = 0;
  for (int v = 0; v < n_views(); ++v) {
    const Matrix recon = x_[v] - x_[v] * state.z[v] - state.e[v];
    value += config_.sigma * state.m[v].cwiseAbs().sum();
    value += (state.y[v].array() * recon.array()).sum();
    value += 0.5 * state.mu * recon.squaredNorm();
    const Matrix zm = state.z[v] - state.m[v];
    value += (state.nm[v].array() * zm.array()).sum();
    value += 0.5 * state.xi * zm.squaredNorm();
    e_stack.middleRows(row, x_[v].rows()) = state.e[v];
    row += x_[v].rows();
  }
  double e21 = 0.0;
  for (Eigen::Index j = 0; j < e_stack.cols(); ++j) {
    e21 += e_stack.col(j).norm();
  }
  value += config_.lambda * e21;
  value += config_.lambda * config_.lambda * tnn(state.g);
  const Tensor3 zg = phi_merge(state.z) - state.g;
  double inner = 0.0;
  for (std::size_t i = 0; i < zg.data().size(); ++i) {
    inner += state.w.data()[i] * zg.data()[i];
  }
  value += inner + 0.5 * state.rho * zg.frobenius_norm() *
                       zg.frobenius_norm();
  return value;
}

SolveResult solve(const std::vector<SparseIndex>& views,
                  const AlmConfig& config) {
  std::vector<Matrix> x;
  x.reserve(views.size());
  for (const SparseIndex& v : views) x.push_back(v.to_dense());
  return AlmSolver(std::move(x), config).solve();
}

}  // namespace mmf
