#ifndef MMF_INDEX_HPP
#define MMF_INDEX_HPP

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mmf {

using Matrix = Eigen::MatrixXd;

/// One sparse feature column: strictly increasing coordinates, nonzero values.
struct SparseColumn {
  std::vector<std::uint32_t> coords;
  std::vector<double> values;

  double norm() const;
};

/// A visual index X_v: sparse d_v x N matrix, column j = feature vector of
/// image ids[j]. Immutable once built; construction validates the column
/// invariants.
class SparseIndex {
 public:
  SparseIndex() = default;
  SparseIndex(std::uint32_t dim, std::vector<std::uint32_t> ids,
              std::vector<SparseColumn> columns);

  static SparseIndex from_dense(const Matrix& x,
                                const std::vector<std::uint32_t>& ids);

  std::uint32_t dim() const { return dim_; }
  std::uint32_t n_images() const {
    return static_cast<std::uint32_t>(columns_.size());
  }
  const std::vector<std::uint32_t>& ids() const { return ids_; }
  const std::vector<SparseColumn>& columns() const { return columns_; }
  const SparseColumn& column(std::size_t j) const { return columns_[j]; }

  Matrix to_dense() const;
  double nonzero_fraction() const;

  bool operator==(const SparseIndex& other) const;

  /// Inverted lists: postings(c) = (column, value) pairs with coordinate c.
  const std::vector<std::pair<std::uint32_t, double>>& postings(
      std::uint32_t coord) const {
    return postings_[coord];
  }
  double column_norm(std::size_t j) const { return col_norms_[j]; }

 private:
  std::uint32_t dim_ = 0;
  std::vector<std::uint32_t> ids_;
  std::vector<SparseColumn> columns_;
  std::vector<std::vector<std::pair<std::uint32_t, double>>> postings_;
  std::vector<double> col_norms_;
};

/// Sparse query vector; must be nonzero.
struct QueryVector {
  std::uint32_t dim = 0;
  std::vector<std::uint32_t> coords;
  std::vector<double> values;

  static QueryVector from_column(const SparseIndex& index, std::size_t j);
  double norm() const;
};

struct ScoredImage {
  std::uint32_t id = 0;
  double score = 0.0;
};

/// Full ranking, scores nonincreasing, ties broken by ascending image id.
using RankedResult = std::vector<ScoredImage>;

/// Cosine-similarity ranking via inverted traversal: only coordinates where
/// both the query and a column are nonzero contribute.
RankedResult query(const SparseIndex& index, const QueryVector& q);

struct QueryTruth {
  std::set<std::uint32_t> relevant;
  std::set<std::uint32_t> excluded;

  bool operator==(const QueryTruth&) const = default;
};

/// Per-query relevant sets (plus optional exclusions), keyed by query id.
using GroundTruth = std::map<std::uint32_t, QueryTruth>;

/// UKBench-style score: mean count of relevant images among the top 4.
/// Queries whose relevant set is not exactly 4 are protocol violations and
/// are reported through `violations` (skipped from the mean).
double ns_score(const std::map<std::uint32_t, RankedResult>& results,
                const GroundTruth& truth,
                std::vector<std::uint32_t>* violations = nullptr);

/// Average precision of one ranking after removing excluded ids.
/// Throws std::invalid_argument when no relevant ids remain.
double average_precision(const RankedResult& result,
                         const std::set<std::uint32_t>& relevant,
                         const std::set<std::uint32_t>& excluded = {});

double mean_average_precision(
    const std::map<std::uint32_t, RankedResult>& results,
    const GroundTruth& truth);

/// Fraction of queries whose first non-excluded result is relevant.
double cmc_rank1(const std::map<std::uint32_t, RankedResult>& results,
                 const GroundTruth& truth);

/// Binary container: magic "MMFI", version, dim, n, ids, columns, CRC32.
void save_index(const SparseIndex& index, const std::filesystem::path& dest);
SparseIndex load_index(const std::filesystem::path& source);

/// Text format: one line per query, `query_id: id1 id2 ... !excluded ...`.
void save_ground_truth(const GroundTruth& truth,
                       const std::filesystem::path& dest);
GroundTruth load_ground_truth(const std::filesystem::path& source);

/// TREC-run style lines `query_id image_id rank score` (score at 6 dp).
void write_ranking(std::ostream& out, std::uint32_t query_id,
                   const RankedResult& result, std::size_t top_k);
std::map<std::uint32_t, RankedResult> load_ranking(
    const std::filesystem::path& source);

}  // namespace mmf

#endif  // MMF_INDEX_HPP
