#ifndef MMF_SYNTHDATA_HPP
#define MMF_SYNTHDATA_HPP

#include <cstdint>
#include <vector>

#include "mmf/index.hpp"

namespace mmf {

/// Deterministic multi-view corpus with known cluster (subspace) structure.
struct SynthSpec {
  int n_clusters = 10;
  int per_cluster = 4;
  int views = 3;
  std::vector<int> dims = {128, 128, 128};       // d_v per view
  std::vector<double> intra_noise = {0, 0, 0};   // additive noise scale
  std::vector<double> view_corruption = {0, 0, 0};  // fraction replaced by noise
  double sparsity = 0.2;   // target nonzero fraction per column
  int subspace_dim = 4;
  std::uint64_t seed = 1;

  void validate() const;
};

struct SynthCorpus {
  std::vector<SparseIndex> views;
  GroundTruth truth;  // cluster co-membership, query included in its own set
};

/// Per cluster and view: a nonnegative low-dimensional basis; each image is
/// basis * nonnegative coefficients + noise, sparsified to the target
/// fraction by largest magnitude, then column-normalized. Corrupted images
/// are replaced by pure noise. Bit-identical for a fixed seed.
SynthCorpus generate(const SynthSpec& spec);

}  // namespace mmf

#endif  // MMF_SYNTHDATA_HPP
