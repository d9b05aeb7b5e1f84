#include "mmf/index.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <zlib.h>

namespace mmf {

namespace {

constexpr char kMagic[4] = {'M', 'M', 'F', 'I'};
constexpr std::uint32_t kFormatVersion = 1;

void append_raw(std::string& buf, const void* p, std::size_t n) {
  buf.append(static_cast<const char*>(p), n);
}

template <typename T>
void append_value(std::string& buf, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  append_raw(buf, &v, sizeof(v));
}

template <typename T>
T read_value(const std::string& buf, std::size_t& pos) {
  if (pos + sizeof(T) > buf.size()) {
    throw std::runtime_error("index file truncated");
  }
  T v;
  std::memcpy(&v, buf.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace

double SparseColumn::norm() const {
  double acc = 0.0;
  for (double v : values) acc += v * v;
  return std::sqrt(acc);
}

SparseIndex::SparseIndex(std::uint32_t dim, std::vector<std::uint32_t> ids,
                         std::vector<SparseColumn> columns)
    : dim_(dim), ids_(std::move(ids)), columns_(std::move(columns)) {
  if (ids_.size() != columns_.size()) {
    throw std::invalid_argument("SparseIndex: ids/columns size mismatch");
  }
  for (const SparseColumn& col : columns_) {
    if (col.coords.size() != col.values.size()) {
      throw std::invalid_argument("SparseIndex: ragged column");
    }
    for (std::size_t i = 0; i < col.coords.size(); ++i) {
      if (col.coords[i] >= dim_) {
        throw std::invalid_argument("SparseIndex: coordinate out of range");
      }
      if (i > 0 && col.coords[i] <= col.coords[i - 1]) {
        throw std::invalid_argument("SparseIndex: coordinates not increasing");
      }
      if (col.values[i] == 0.0) {
        throw std::invalid_argument("SparseIndex: stored zero value");
      }
    }
  }
  postings_.resize(dim_);
  col_norms_.reserve(columns_.size());
  for (std::size_t j = 0; j < columns_.size(); ++j) {
    const SparseColumn& col = columns_[j];
    for (std::size_t i = 0; i < col.coords.size(); ++i) {
      postings_[col.coords[i]].emplace_back(static_cast<std::uint32_t>(j),
                                            col.values[i]);
    }
    col_norms_.push_back(col.norm());
  }
}

SparseIndex SparseIndex::from_dense(const Matrix& x,
                                    const std::vector<std::uint32_t>& ids) {
  std::vector<SparseColumn> cols(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      if (x(i, j) != 0.0) {
        cols[j].coords.push_back(static_cast<std::uint32_t>(i));
        cols[j].values.push_back(x(i, j));
      }
    }
  }
  return SparseIndex(static_cast<std::uint32_t>(x.rows()), ids,
                     std::move(cols));
}

Matrix SparseIndex::to_dense() const {
  Matrix x = Matrix::Zero(dim_, static_cast<Eigen::Index>(columns_.size()));
  for (std::size_t j = 0; j < columns_.size(); ++j) {
    const SparseColumn& col = columns_[j];
    for (std::size_t i = 0; i < col.coords.size(); ++i) {
      x(col.coords[i], static_cast<Eigen::Index>(j)) = col.values[i];
    }
  }
  return x;
}

double SparseIndex::nonzero_fraction() const {
  if (dim_ == 0 || columns_.empty()) return 0.0;
  std::size_t nnz = 0;
  for (const SparseColumn& col : columns_) nnz += col.values.size();
  return static_cast<double>(nnz) /
         (static_cast<double>(dim_) * columns_.size());
}

bool SparseIndex::operator==(const SparseIndex& other) const {
  if (dim_ != other.dim_ || ids_ != other.ids_) return false;
  for (std::size_t j = 0; j < columns_.size(); ++j) {
    if (columns_[j].coords != other.columns_[j].coords ||
        columns_[j].values != other.columns_[j].values) {
      return false;
    }
  }
  return true;
}

QueryVector QueryVector::from_column(const SparseIndex& index, std::size_t j) {
  const SparseColumn& col = index.column(j);
  return {index.dim(), col.coords, col.values};
}

double QueryVector::norm() const {
  double acc = 0.0;
  for (double v : values) acc += v * v;
  return std::sqrt(acc);
}

RankedResult query(const SparseIndex& index, const QueryVector& q) {
  if (q.dim != index.dim()) {
    throw std::invalid_argument("query: dimension mismatch");
  }
  const double qnorm = q.norm();
  if (qnorm == 0.0) {
    throw std::invalid_argument("query: zero-norm query vector");
  }
  const std::size_t n = index.n_images();

  // Inverted traversal: only coordinates in the query's support are visited,
  // and within each postings list only columns that share the coordinate.
  std::vector<double> dots(n, 0.0);
  for (std::size_t a = 0; a < q.coords.size(); ++a) {
    for (const auto& [col, value] : index.postings(q.coords[a])) {
      dots[col] += q.values[a] * value;
    }
  }

  RankedResult out(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double cnorm = index.column_norm(j);
    out[j] = {index.ids()[j], cnorm > 0.0 ? dots[j] / (qnorm * cnorm) : 0.0};
  }
  std::sort(out.begin(), out.end(), [](const ScoredImage& x,
                                       const ScoredImage& y) {
    if (x.score != y.score) return x.score > y.score;
    return x.id < y.id;
  });
  return out;
}

namespace {

RankedResult filter_excluded(const RankedResult& result,
                             const std::set<std::uint32_t>& excluded) {
  if (excluded.empty()) return result;
  RankedResult out;
  out.reserve(result.size());
  for (const ScoredImage& s : result) {
    if (!excluded.count(s.id)) out.push_back(s);
  }
  return out;
}

}  // namespace

double ns_score(const std::map<std::uint32_t, RankedResult>& results,
                const GroundTruth& truth,
                std::vector<std::uint32_t>* violations) {
  double total = 0.0;
  std::size_t valid = 0;
  for (const auto& [qid, result] : results) {
    auto it = truth.find(qid);
    if (it == truth.end() || it->second.relevant.size() != 4) {
      if (violations) violations->push_back(qid);
      continue;
    }
    const RankedResult filtered = filter_excluded(result, it->second.excluded);
    std::size_t hits = 0;
    for (std::size_t r = 0; r < std::min<std::size_t>(4, filtered.size());
         ++r) {
      hits += it->second.relevant.count(filtered[r].id);
    }
    total += static_cast<double>(hits);
    ++valid;
  }
  if (valid == 0) throw std::invalid_argument("ns_score: no valid queries");
  return total / static_cast<double>(valid);
}

double average_precision(const RankedResult& result,
                         const std::set<std::uint32_t>& relevant,
                         const std::set<std::uint32_t>& excluded) {
  std::set<std::uint32_t> effective;
  for (std::uint32_t id : relevant) {
    if (!excluded.count(id)) effective.insert(id);
  }
  if (effective.empty()) {
    throw std::invalid_argument(
        "average_precision: empty relevant set after exclusion");
  }
  const RankedResult filtered = filter_excluded(result, excluded);
  double ap = 0.0;
  std::size_t hits = 0;
  for (std::size_t r = 0; r < filtered.size(); ++r) {
    if (effective.count(filtered[r].id)) {
      ++hits;
      ap += static_cast<double>(hits) / static_cast<double>(r + 1);
    }
  }
  return ap / static_cast<double>(effective.size());
}

double mean_average_precision(
    const std::map<std::uint32_t, RankedResult>& results,
    const GroundTruth& truth) {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& [qid, result] : results) {
    auto it = truth.find(qid);
    if (it == truth.end()) continue;
    total += average_precision(result, it->second.relevant,
                               it->second.excluded);
    ++count;
  }
  if (count == 0) throw std::invalid_argument("mAP: no queries with truth");
  return total / static_cast<double>(count);
}

double cmc_rank1(const std::map<std::uint32_t, RankedResult>& results,
                 const GroundTruth& truth) {
  std::size_t correct = 0, count = 0;
  for (const auto& [qid, result] : results) {
    auto it = truth.find(qid);
    if (it == truth.end()) continue;
    const RankedResult filtered = filter_excluded(result, it->second.excluded);
    if (!filtered.empty() && it->second.relevant.count(filtered.front().id)) {
      ++correct;
    }
    ++count;
  }
  if (count == 0) throw std::invalid_argument("cmc_rank1: no queries");
  return static_cast<double>(correct) / static_cast<double>(count);
}

void save_index(const SparseIndex& index, const std::filesystem::path& dest) {
  std::string buf;
  append_raw(buf, kMagic, sizeof(kMagic));
  append_value(buf, kFormatVersion);
  append_value(buf, index.dim());
  append_value(buf, index.n_images());
  for (std::uint32_t id : index.ids()) append_value(buf, id);
  for (const SparseColumn& col : index.columns()) {
    append_value(buf, static_cast<std::uint32_t>(col.coords.size()));
    for (std::uint32_t c : col.coords) append_value(buf, c);
    for (double v : col.values) append_value(buf, v);
  }
  const auto crc = static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(buf.data()),
            static_cast<uInt>(buf.size())));
  append_value(buf, crc);

  std::ofstream out(dest, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + dest.string());
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw std::runtime_error("write failed: " + dest.string());
}

SparseIndex load_index(const std::filesystem::path& source) {
  std::ifstream in(source, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + source.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  std::string buf = ss.str();

  if (buf.size() < sizeof(kMagic) + 3 * sizeof(std::uint32_t) + 4) {
    throw std::runtime_error("index file truncated");
  }
  const std::string body = buf.substr(0, buf.size() - 4);
  std::size_t pos = body.size();
  std::size_t tail = body.size();
  const auto stored_crc = read_value<std::uint32_t>(buf, tail);
  const auto crc = static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(body.data()),
            static_cast<uInt>(body.size())));
  if (crc != stored_crc) {
    throw std::runtime_error("index file corrupt (checksum mismatch)");
  }

  pos = 0;
  char magic[4];
  std::memcpy(magic, body.data(), 4);
  pos = 4;
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("not an index file (bad magic)");
  }
  const auto version = read_value<std::uint32_t>(body, pos);
  if (version != kFormatVersion) {
    throw std::runtime_error("unsupported index format version " +
                             std::to_string(version));
  }
  const auto dim = read_value<std::uint32_t>(body, pos);
  const auto n = read_value<std::uint32_t>(body, pos);
  std::vector<std::uint32_t> ids(n);
  for (std::uint32_t& id : ids) id = read_value<std::uint32_t>(body, pos);
  std::vector<SparseColumn> cols(n);
  for (SparseColumn& col : cols) {
    const auto count = read_value<std::uint32_t>(body, pos);
    col.coords.resize(count);
    col.values.resize(count);
    for (std::uint32_t& c : col.coords) c = read_value<std::uint32_t>(body, pos);
    for (double& v : col.values) v = read_value<double>(body, pos);
  }
  if (pos != body.size()) {
    throw std::runtime_error("index file has trailing bytes");
  }
  return SparseIndex(dim, std::move(ids), std::move(cols));
}

void save_ground_truth(const GroundTruth& truth,
                       const std::filesystem::path& dest) {
  std::ofstream out(dest, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + dest.string());
  for (const auto& [qid, qt] : truth) {
    out << qid << ":";
    for (std::uint32_t id : qt.relevant) out << " " << id;
    for (std::uint32_t id : qt.excluded) out << " !" << id;
    out << "\n";
  }
}

GroundTruth load_ground_truth(const std::filesystem::path& source) {
  std::ifstream in(source);
  if (!in) throw std::runtime_error("cannot open " + source.string());
  GroundTruth truth;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto colon = line.find(':');
    if (colon == std::string::npos) {
      throw std::runtime_error("truth parse error at line " +
                               std::to_string(lineno) + ": missing ':'");
    }
    std::uint32_t qid = 0;
    try {
      qid = static_cast<std::uint32_t>(std::stoul(line.substr(0, colon)));
    } catch (const std::exception&) {
      throw std::runtime_error("truth parse error at line " +
                               std::to_string(lineno) + ": bad query id");
    }
    QueryTruth qt;
    std::istringstream rest(line.substr(colon + 1));
    std::string tok;
    while (rest >> tok) {
      try {
        if (tok.front() == '!') {
          qt.excluded.insert(
              static_cast<std::uint32_t>(std::stoul(tok.substr(1))));
        } else {
          qt.relevant.insert(static_cast<std::uint32_t>(std::stoul(tok)));
        }
      } catch (const std::exception&) {
        throw std::runtime_error("truth parse error at line " +
                                 std::to_string(lineno) + ": bad id '" + tok +
                                 "'");
      }
    }
    if (qt.relevant.empty()) {
      throw std::runtime_error("truth parse error at line " +
                               std::to_string(lineno) +
                               ": empty relevant set");
    }
    truth[qid] = std::move(qt);
  }
  return truth;
}

void write_ranking(std::ostream& out, std::uint32_t query_id,
                   const RankedResult& result, std::size_t top_k) {
  const std::size_t limit = std::min(top_k, result.size());
  for (std::size_t r = 0; r < limit; ++r) {
    out << query_id << " " << result[r].id << " " << (r + 1) << " "
        << std::fixed << std::setprecision(6) << result[r].score << "\n";
  }
  out.unsetf(std::ios::fixed);
}

std::map<std::uint32_t, RankedResult> load_ranking(
    const std::filesystem::path& source) {
  std::ifstream in(source);
  if (!in) throw std::runtime_error("cannot open " + source.string());
  std::map<std::uint32_t, RankedResult> results;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::uint32_t qid, id;
    std::size_t rank;
    double score;
    if (!(ss >> qid >> id >> rank >> score)) {
      throw std::runtime_error("ranking parse error at line " +
                               std::to_string(lineno));
    }
    results[qid].push_back({id, score});
  }
  return results;
}

}  // namespace mmf
