#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mmf/proximal.hpp"
#include "mmf/solver.hpp"
#include "mmf/synthdata.hpp"
#include "test_util.hpp"

using namespace mmf;
using namespace mmf::testutil;

namespace {

AlmConfig small_config() {
  AlmConfig c;
  c.lambda = 0.01;
  c.sigma = 0.001;
  return c;
}

}  // namespace

TEST_CASE("AlmConfig validation") {
  AlmConfig c = small_config();
  CHECK_NOTHROW(c.validate());
  c.lambda = 0.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = small_config();
  c.eta = 1.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = small_config();
  c.mu_max = 1e-6;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("update_z hand example: scalar problem") {
  Matrix x(1, 1);
  x << 1.0;
  AlmSolver solver({x}, small_config());
  AlmState state = solver.initial_state();
  state.mu = state.rho = state.xi = 1.0;
  const Matrix z = solver.update_z(state, 0);
  CHECK(z(0, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("update_z matches a dense-inverse oracle") {
  std::mt19937 rng(1);
  const Eigen::Index d = 10, n = 8;
  Matrix x = random_matrix(d, n, rng);
  AlmSolver solver({x}, small_config());
  AlmState state = solver.initial_state();
  state.mu = 0.7;
  state.rho = 0.4;
  state.xi = 0.9;
  state.y[0] = random_matrix(d, n, rng);
  state.e[0] = random_matrix(d, n, rng);
  state.m[0] = random_matrix(n, n, rng);
  state.nm[0] = random_matrix(n, n, rng);
  state.g = phi_merge({random_matrix(n, n, rng)});
  state.w = phi_merge({random_matrix(n, n, rng)});

  const Matrix gram = x.transpose() * x;
  const Matrix gv = phi_split(state.g)[0];
  const Matrix wv = phi_split(state.w)[0];
  const double denom = state.rho + state.xi;
  Matrix rhs = x.transpose() * state.y[0] + state.mu * gram -
               state.mu * x.transpose() * state.e[0] - wv - state.nm[0] +
               state.rho * gv + state.xi * state.m[0];
  const Matrix expected =
      (Matrix::Identity(n, n) + state.mu / denom * gram).inverse() *
      (rhs / denom);
  CHECK((solver.update_z(state, 0) - expected).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("update_z makes the Lagrangian stationary in Z_v") {
  std::mt19937 rng(2);
  const Eigen::Index d = 6, n = 5;
  Matrix x = random_matrix(d, n, rng);
  AlmSolver solver({x}, small_config());
  AlmState state = solver.initial_state();
  state.mu = 1.3;
  state.rho = 0.8;
  state.xi = 0.5;
  state.y[0] = random_matrix(d, n, rng);
  state.e[0] = random_matrix(d, n, rng);
  state.m[0] = random_matrix(n, n, rng);
  state.nm[0] = random_matrix(n, n, rng);
  state.g = phi_merge({random_matrix(n, n, rng)});
  state.w = phi_merge({random_matrix(n, n, rng)});
  state.z[0] = solver.update_z(state, 0);

  const double h = 1e-6;
  for (int rep = 0; rep < 50; ++rep) {
    Matrix dir = random_matrix(n, n, rng);
    dir /= dir.norm();
    AlmState plus = state, minus = state;
    plus.z[0] += h * dir;
    minus.z[0] -= h * dir;
    const double grad = (solver.augmented_lagrangian(plus) -
                         solver.augmented_lagrangian(minus)) /
                        (2.0 * h);
    CHECK(std::abs(grad) <= 1e-6);
  }
}

TEST_CASE("update_e stacks, shrinks and splits per view") {
  Matrix x(2, 1);
  x << 3.0, 4.0;
  AlmConfig c = small_config();
  c.lambda = 1.0;
  AlmSolver solver({x}, c);
  AlmState state = solver.initial_state();
  state.mu = 1.0;
  // D = X - X Z + Y/mu = [3, 4]^T, threshold lambda/mu = 1.
  auto e = solver.update_e(state);
  CHECK(e[0](0, 0) == doctest::Approx(2.4));
  CHECK(e[0](1, 0) == doctest::Approx(3.2));
}

TEST_CASE("update_e with vanishing threshold returns the residual") {
  std::mt19937 rng(3);
  Matrix x = random_matrix(4, 6, rng);
  AlmConfig c = small_config();
  c.lambda = 1e-12;
  AlmSolver solver({x}, c);
  AlmState state = solver.initial_state();
  state.mu = 1e6;
  state.z[0] = random_matrix(6, 6, rng);
  state.y[0] = random_matrix(4, 6, rng);
  const Matrix expected = x - x * state.z[0] + state.y[0] / state.mu;
  CHECK((solver.update_e(state)[0] - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("update_m is soft thresholding of Z + N/xi") {
  std::mt19937 rng(4);
  Matrix x = random_matrix(3, 4, rng);
  AlmConfig c = small_config();
  c.sigma = 0.0;
  AlmSolver solver({x}, c);
  AlmState state = solver.initial_state();
  state.xi = 2.0;
  state.z[0] = random_matrix(4, 4, rng);
  state.nm[0] = random_matrix(4, 4, rng);
  const Matrix expected = state.z[0] + state.nm[0] / state.xi;
  CHECK((solver.update_m(state, 0) - expected).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("update_m zeroes entries below sigma/xi") {
  Matrix x(2, 2);
  x << 1, 0, 0, 1;
  AlmConfig c = small_config();
  c.sigma = 2.0;
  AlmSolver solver({x}, c);
  AlmState state = solver.initial_state();
  state.xi = 2.0;  // threshold sigma/xi = 1
  state.z[0] << 1.5, 0.2, -0.3, -1.5;
  const Matrix m = solver.update_m(state, 0);
  CHECK(m(0, 0) == doctest::Approx(0.5));
  CHECK(m(0, 1) == 0.0);
  CHECK(m(1, 0) == 0.0);
  CHECK(m(1, 1) == doctest::Approx(-0.5));
}

TEST_CASE("update_g shrinks toward Phi(Z) + W/rho") {
  std::mt19937 rng(5);
  Matrix x = random_matrix(3, 4, rng);
  AlmSolver solver({x}, small_config());
  AlmState state = solver.initial_state();

  state.rho = 1.0;
  CHECK(solver.update_g(state).frobenius_norm() == 0.0);

  state.z[0] = random_matrix(4, 4, rng);
  state.w = phi_merge({random_matrix(4, 4, rng)});
  state.rho = 1e10;
  Tensor3 target = phi_merge(state.z) + (1.0 / state.rho) * state.w;
  CHECK((solver.update_g(state) - target).max_abs() < 1e-6);

  state.rho = 2.0;
  Tensor3 b = phi_merge(state.z) + (1.0 / state.rho) * state.w;
  const double weight =
      solver.config().lambda * solver.config().lambda;
  CHECK(rel_error(solver.update_g(state), tnn_prox(b, state.rho / weight)) ==
        0.0);
}

TEST_CASE("update_multipliers: dual ascent and capped penalty growth") {
  std::mt19937 rng(6);
  Matrix x = random_matrix(3, 4, rng);
  AlmSolver solver({x}, small_config());

  // Exact feasibility: multipliers unchanged, penalties still doubled.
  AlmState state = solver.initial_state();
  state.z[0] = random_matrix(4, 4, rng);
  state.e[0] = x - x * state.z[0];
  state.m[0] = state.z[0];
  state.g = phi_merge(state.z);
  const double mu0 = state.mu;
  solver.update_multipliers(state);
  CHECK(state.y[0].cwiseAbs().maxCoeff() == 0.0);
  CHECK(state.nm[0].cwiseAbs().maxCoeff() == 0.0);
  CHECK(state.w.max_abs() == 0.0);
  CHECK(state.mu == doctest::Approx(2.0 * mu0));

  // One step from zero multipliers leaves Y = mu * residual.
  AlmState fresh = solver.initial_state();
  fresh.mu = 3.0;
  const Matrix residual = x - x * fresh.z[0] - fresh.e[0];
  solver.update_multipliers(fresh);
  CHECK((fresh.y[0] - 3.0 * residual).cwiseAbs().maxCoeff() < 1e-12);

  // A capped penalty stays at the cap.
  AlmState capped = solver.initial_state();
  capped.mu = solver.config().mu_max;
  solver.update_multipliers(capped);
  CHECK(capped.mu == solver.config().mu_max);
}

TEST_CASE("residuals and convergence checks") {
  std::mt19937 rng(7);
  Matrix x = random_matrix(3, 4, rng);
  AlmSolver solver({x}, small_config());

  AlmState zero = solver.initial_state();
  Residuals r = solver.residuals(zero);
  CHECK(r.err1 == doctest::Approx(x.cwiseAbs().maxCoeff()));
  CHECK_FALSE(solver.converged(r, 1e-7));

  AlmState feasible = solver.initial_state();
  feasible.z[0] = random_matrix(4, 4, rng);
  feasible.e[0] = x - x * feasible.z[0];
  feasible.m[0] = feasible.z[0];
  feasible.g = phi_merge(feasible.z);
  CHECK(solver.converged(solver.residuals(feasible), 1e-12));

  // Halving every violation halves every residual (norm homogeneity).
  AlmState half = feasible;
  Matrix viol_e = random_matrix(3, 4, rng);
  Matrix viol_m = random_matrix(4, 4, rng);
  AlmState full = feasible;
  full.e[0] -= viol_e;
  full.m[0] -= viol_m;
  half.e[0] -= 0.5 * viol_e;
  half.m[0] -= 0.5 * viol_m;
  const Residuals rf = solver.residuals(full);
  const Residuals rh = solver.residuals(half);
  CHECK(rh.err1 == doctest::Approx(0.5 * rf.err1));
  CHECK(rh.err3 == doctest::Approx(0.5 * rf.err3));
}

TEST_CASE("solve on all-zero indexes converges immediately to Z = 0") {
  std::vector<Matrix> x = {Matrix::Zero(3, 5), Matrix::Zero(4, 5)};
  SolveResult result = AlmSolver(x, small_config()).solve();
  CHECK(result.converged);
  CHECK(result.trace.size() == 1);
  for (const Matrix& z : result.z) {
    CHECK(z.cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("each block update does not increase the augmented Lagrangian") {
  std::mt19937 rng(8);
  Matrix x = random_matrix(6, 8, rng);
  AlmSolver solver({x}, small_config());
  AlmState state = solver.initial_state();
  for (int it = 0; it < 12; ++it) {
    double before = solver.augmented_lagrangian(state);
    state.z[0] = solver.update_z(state, 0);
    double after = solver.augmented_lagrangian(state);
    CHECK(after <= before + 1e-8 * std::max(1.0, std::abs(before)));

    before = after;
    state.e = solver.update_e(state);
    after = solver.augmented_lagrangian(state);
    CHECK(after <= before + 1e-8 * std::max(1.0, std::abs(before)));

    before = after;
    state.m[0] = solver.update_m(state, 0);
    after = solver.augmented_lagrangian(state);
    CHECK(after <= before + 1e-8 * std::max(1.0, std::abs(before)));

    before = after;
    state.g = solver.update_g(state);
    after = solver.augmented_lagrangian(state);
    CHECK(after <= before + 1e-8 * std::max(1.0, std::abs(before)));

    solver.update_multipliers(state);
  }
}

TEST_CASE("penalties are nondecreasing and capped along a solve") {
  std::mt19937 rng(9);
  Matrix x = random_matrix(6, 10, rng);
  AlmConfig c = small_config();
  c.max_inner_iters = 100;
  SolveResult result = AlmSolver({x}, c).solve();
  double prev = 0.0;
  for (const IterationTrace& t : result.trace) {
    CHECK(t.mu >= prev);
    CHECK(t.mu <= c.mu_max);
    prev = t.mu;
  }
}

TEST_CASE("self-expressive synthetic instance: convergence and mass") {
  SynthSpec spec;
  spec.n_clusters = 10;
  spec.per_cluster = 4;
  spec.views = 2;
  spec.dims = {96, 96};
  spec.intra_noise = {0.0, 0.0};
  spec.view_corruption = {0.0, 0.0};
  spec.seed = 42;
  SynthCorpus corpus = generate(spec);

  SolveResult result = solve(corpus.views, small_config());
  CHECK(result.converged);
  CHECK(result.final_residuals.max() < 1e-7);
  CHECK(result.trace.size() <= 200);

  const int per = spec.per_cluster;
  for (const Matrix& z : result.z) {
    double within = 0.0, total = 0.0;
    for (Eigen::Index j = 0; j < z.cols(); ++j) {
      for (Eigen::Index i = 0; i < z.rows(); ++i) {
        const double m = std::abs(z(i, j));
        total += m;
        if (i / per == j / per) within += m;
      }
    }
    CHECK(within / total >= 0.95);
  }
}

TEST_CASE("residual traces are bit-identical across runs") {
  SynthSpec spec;
  spec.n_clusters = 4;
  spec.per_cluster = 3;
  spec.views = 2;
  spec.dims = {32, 32};
  spec.intra_noise = {0.1, 0.1};
  spec.view_corruption = {0.0, 0.0};
  spec.seed = 7;
  SynthCorpus corpus = generate(spec);

  SolveResult a = solve(corpus.views, small_config());
  SolveResult b = solve(corpus.views, small_config());
  REQUIRE(a.trace.size() == b.trace.size());
  for (std::size_t i = 0; i < a.trace.size(); ++i) {
    CHECK(a.trace[i].err1 == b.trace[i].err1);
    CHECK(a.trace[i].err2 == b.trace[i].err2);
    CHECK(a.trace[i].err3 == b.trace[i].err3);
  }
  for (std::size_t v = 0; v < a.z.size(); ++v) {
    CHECK((a.z[v] - b.z[v]).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("solve commutes with permuting the view order") {
  SynthSpec spec;
  spec.n_clusters = 4;
  spec.per_cluster = 3;
  spec.views = 3;
  spec.dims = {24, 32, 40};
  spec.intra_noise = {0.05, 0.05, 0.05};
  spec.view_corruption = {0.0, 0.0, 0.0};
  spec.seed = 11;
  SynthCorpus corpus = generate(spec);

  SolveResult forward = solve(corpus.views, small_config());
  std::vector<SparseIndex> permuted = {corpus.views[2], corpus.views[0],
                                       corpus.views[1]};
  SolveResult swapped = solve(permuted, small_config());
  const int perm[3] = {2, 0, 1};
  for (int v = 0; v < 3; ++v) {
    const double denom = std::max(forward.z[perm[v]].norm(), 1e-12);
    CHECK((swapped.z[v] - forward.z[perm[v]]).norm() / denom < 1e-6);
  }
}

TEST_CASE("views with mismatched N are rejected") {
  std::vector<Matrix> x = {Matrix::Zero(3, 5), Matrix::Zero(3, 6)};
  CHECK_THROWS_AS(AlmSolver(x, small_config()), std::invalid_argument);
}
