#include "mmf/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace mmf {

void SynthSpec::validate() const {
  if (n_clusters < 1 || per_cluster < 1 || views < 1 || subspace_dim < 1) {
    throw std::invalid_argument("synth: counts must be >= 1");
  }
  if (dims.size() != static_cast<std::size_t>(views) ||
      intra_noise.size() != static_cast<std::size_t>(views) ||
      view_corruption.size() != static_cast<std::size_t>(views)) {
    throw std::invalid_argument("synth: per-view parameter count mismatch");
  }
  for (int d : dims) {
    if (d < 1) throw std::invalid_argument("synth: dims must be >= 1");
  }
  for (double s : intra_noise) {
    if (s < 0.0) throw std::invalid_argument("synth: noise must be >= 0");
  }
  for (double c : view_corruption) {
    if (c < 0.0 || c > 1.0) {
      throw std::invalid_argument("synth: corruption must be in [0,1]");
    }
  }
  if (sparsity <= 0.0 || sparsity > 1.0) {
    throw std::invalid_argument("synth: sparsity must be in (0,1]");
  }
}

namespace {

/// Keep the k largest-magnitude entries (ties by lower coordinate), zero the
/// rest, and scale to unit norm.
Eigen::VectorXd sparsify_normalize(const Eigen::VectorXd& v, int keep) {
  std::vector<int> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&v](int a, int b) {
    return std::abs(v(a)) > std::abs(v(b));
  });
  Eigen::VectorXd out = Eigen::VectorXd::Zero(v.size());
  for (int r = 0; r < keep; ++r) out(order[r]) = v(order[r]);
  const double norm = out.norm();
  if (norm > 0.0) out /= norm;
  return out;
}

}  // namespace

SynthCorpus generate(const SynthSpec& spec) {
  spec.validate();
  const int n = spec.n_clusters * spec.per_cluster;

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto abs_gauss = [&]() { return std::abs(gauss(rng)); };

  SynthCorpus corpus;
  for (int v = 0; v < spec.views; ++v) {
    const int d = spec.dims[v];
    const int keep = static_cast<int>(spec.sparsity * d);
    if (keep < 1) {
      throw std::invalid_argument(
          "synth: sparsity target yields zero nonzeros per column");
    }

    Matrix x(d, n);
    std::vector<int> coords(d);
    std::iota(coords.begin(), coords.end(), 0);
    const int n_atoms = spec.subspace_dim;
    // Cluster supports partition a shuffled coordinate axis, so distinct
    // clusters are (near-)orthogonal. Inside a support, each atom owns its
    // own chunk; an image mixes two cyclically adjacent atoms plus a faint
    // cluster-mean component. Adjacent images share an atom (strong link),
    // images two steps apart share only the mean (weak link, just above
    // the impostor floor) — within-cluster similarity is chain-like and
    // only transitively complete.
    // The whole cluster support (all atom chunks) must fit the per-column
    // nonzero budget, or sparsification would strip the shared component.
    const int chunk = std::max(
        1, std::min(keep / n_atoms, d / (spec.n_clusters * n_atoms)));
    const int support = n_atoms * chunk;
    const double mean_weight = 0.15;
    std::shuffle(coords.begin(), coords.end(), rng);
    for (int c = 0; c < spec.n_clusters; ++c) {
      Matrix atoms = Matrix::Zero(d, n_atoms);
      for (int j = 0; j < n_atoms; ++j) {
        for (int r = 0; r < chunk; ++r) {
          const int idx = coords[(c * support + j * chunk + r) % d];
          atoms(idx, j) = abs_gauss();
        }
      }
      const Eigen::VectorXd mean = atoms.rowwise().sum() / double(n_atoms);
      for (int img = 0; img < spec.per_cluster; ++img) {
        const int a = img % n_atoms;
        const int b = (img + 1) % n_atoms;
        Eigen::VectorXd col = (0.5 + abs_gauss()) * atoms.col(a) +
                              (0.5 + abs_gauss()) * atoms.col(b) +
                              mean_weight * mean;
        col /= col.norm();
        // Noise is relative to the unit-normalized signal: a per-coordinate
        // scale of intra_noise/sqrt(3*support) puts intra_noise = 1 at
        // roughly the level where cluster structure drowns. It is always
        // drawn so the cluster structure stays fixed for a given seed
        // across noise-scale sweeps.
        const double noise_sd =
            spec.intra_noise[v] / std::sqrt(3.0 * double(support));
        for (int i = 0; i < d; ++i) {
          col(i) += noise_sd * gauss(rng);
        }
        x.col(c * spec.per_cluster + img) = sparsify_normalize(col, keep);
      }
    }

    const int n_corrupt = static_cast<int>(
        std::lround(spec.view_corruption[v] * static_cast<double>(n)));
    if (n_corrupt > 0) {
      std::vector<int> order(n);
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), rng);
      for (int t = 0; t < n_corrupt; ++t) {
        // Signed noise, unlike the nonnegative features: corrupted columns
        // share no common direction, so their rankings are pure chance.
        Eigen::VectorXd noise(spec.dims[v]);
        for (int i = 0; i < spec.dims[v]; ++i) noise(i) = gauss(rng);
        x.col(order[t]) = sparsify_normalize(noise, keep);
      }
    }

    std::vector<std::uint32_t> ids(n);
    std::iota(ids.begin(), ids.end(), 0u);
    corpus.views.push_back(SparseIndex::from_dense(x, ids));
  }

  for (int c = 0; c < spec.n_clusters; ++c) {
    std::set<std::uint32_t> members;
    for (int img = 0; img < spec.per_cluster; ++img) {
      members.insert(static_cast<std::uint32_t>(c * spec.per_cluster + img));
    }
    for (std::uint32_t id : members) {
      corpus.truth[id] = {members, {}};
    }
  }
  return corpus;
}

}  // namespace mmf
