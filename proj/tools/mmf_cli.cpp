// Command-line front end: synthetic corpus generation, multi-index fusion,
// similarity queries and metric evaluation.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <sstream>

#include <zlib.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "mmf/index.hpp"
#include "mmf/pipeline.hpp"
#include "mmf/synthdata.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kToolVersion = "1.0.0";

std::uint32_t file_crc32(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string buf = ss.str();
  return static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(buf.data()),
            static_cast<uInt>(buf.size())));
}

void write_manifest(const fs::path& dest, const std::string& command,
                    const json& config, const std::vector<fs::path>& inputs,
                    double seconds, const json& outcome) {
  json manifest;
  manifest["tool_version"] = kToolVersion;
  manifest["command"] = command;
  manifest["config"] = config;
  json digests = json::object();
  for (const fs::path& p : inputs) {
    digests[p.string()] = file_crc32(p);
  }
  manifest["input_digests"] = digests;
  manifest["seconds"] = seconds;
  manifest["outcome"] = outcome;
  std::ofstream out(dest, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + dest.string());
  out << manifest.dump(2) << "\n";
}

json trace_to_json(const std::vector<mmf::IterationTrace>& trace) {
  json out = json::array();
  for (const auto& t : trace) {
    out.push_back({{"iter", t.iter},
                   {"err1", t.err1},
                   {"err2", t.err2},
                   {"err3", t.err3},
                   {"mu", t.mu},
                   {"rho", t.rho},
                   {"xi", t.xi}});
  }
  return out;
}

json report_to_json(const mmf::FusionReport& report) {
  json iters = json::array();
  for (const auto& it : report.iterations) {
    iters.push_back({{"iteration", it.iteration},
                     {"lambda", it.lambda},
                     {"sigma", it.sigma},
                     {"converged", it.converged},
                     {"inner_iters", it.inner_iters},
                     {"err1", it.final_residuals.err1},
                     {"err2", it.final_residuals.err2},
                     {"err3", it.final_residuals.err3},
                     {"z_nonzero_fraction", it.z_nonzero_fraction},
                     {"index_nonzero_fraction", it.index_nonzero_fraction},
                     {"seconds", it.seconds},
                     {"trace", trace_to_json(it.trace)}});
  }
  return {{"iterations", iters},
          {"theta1", report.theta1},
          {"theta2", report.theta2},
          {"final_index_nonzero_fraction",
           report.final_index_nonzero_fraction}};
}

/// Minimal SVG polyline chart; one series per curve, y optionally log10.
void write_svg_plot(const fs::path& dest, const std::string& title,
                    const std::vector<std::pair<std::string,
                                                std::vector<double>>>& series,
                    bool log_y) {
  const int w = 640, h = 400, margin = 50;
  double lo = 1e300, hi = -1e300;
  std::size_t max_len = 1;
  for (const auto& [name, ys] : series) {
    for (double y : ys) {
      const double v = log_y ? std::log10(std::max(y, 1e-16)) : y;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    max_len = std::max(max_len, ys.size());
  }
  if (hi <= lo) hi = lo + 1.0;
  static const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                 "#9467bd", "#8c564b"};
  std::ofstream out(dest, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + dest.string());
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w
      << "' height='" << h << "'>\n"
      << "<rect width='100%' height='100%' fill='white'/>\n"
      << "<text x='" << w / 2 << "' y='20' text-anchor='middle'>" << title
      << (log_y ? " (log10 y)" : "") << "</text>\n";
  int ci = 0;
  for (const auto& [name, ys] : series) {
    out << "<polyline fill='none' stroke='" << colors[ci % 6]
        << "' stroke-width='1.5' points='";
    for (std::size_t i = 0; i < ys.size(); ++i) {
      const double v = log_y ? std::log10(std::max(ys[i], 1e-16)) : ys[i];
      const double px =
          margin + (w - 2.0 * margin) * (max_len > 1
                                             ? static_cast<double>(i) /
                                                   (max_len - 1)
                                             : 0.0);
      const double py = h - margin - (h - 2.0 * margin) * (v - lo) / (hi - lo);
      out << px << "," << py << " ";
    }
    out << "'/>\n<text x='" << (w - margin + 5) << "' y='"
        << (30 + 15 * ci) << "' fill='" << colors[ci % 6]
        << "' font-size='10' text-anchor='end'>" << name << "</text>\n";
    ++ci;
  }
  out << "</svg>\n";
}

int cmd_gen_data(int clusters, int per_cluster, int views,
                 std::vector<int> dims, std::vector<double> noise,
                 std::vector<double> corruption, double sparsity,
                 std::uint64_t seed, const fs::path& out_dir) {
  mmf::SynthSpec spec;
  spec.n_clusters = clusters;
  spec.per_cluster = per_cluster;
  spec.views = views;
  spec.dims = dims.empty() ? std::vector<int>(views, 128) : dims;
  spec.intra_noise = noise.empty() ? std::vector<double>(views, 0.0) : noise;
  spec.view_corruption =
      corruption.empty() ? std::vector<double>(views, 0.0) : corruption;
  if (spec.dims.size() == 1) spec.dims.assign(views, spec.dims[0]);
  if (spec.intra_noise.size() == 1) {
    spec.intra_noise.assign(views, spec.intra_noise[0]);
  }
  if (spec.view_corruption.size() == 1) {
    spec.view_corruption.assign(views, spec.view_corruption[0]);
  }
  spec.sparsity = sparsity;
  spec.seed = seed;

  const auto start = std::chrono::steady_clock::now();
  mmf::SynthCorpus corpus = mmf::generate(spec);
  fs::create_directories(out_dir);
  for (int v = 0; v < views; ++v) {
    mmf::save_index(corpus.views[v],
                    out_dir / ("view" + std::to_string(v + 1) + ".idx"));
  }
  mmf::save_ground_truth(corpus.truth, out_dir / "truth.txt");
  const double seconds = std::chrono::duration<double>(
                             std::chrono::steady_clock::now() - start)
                             .count();

  json config = {{"clusters", clusters},     {"per_cluster", per_cluster},
                 {"views", views},           {"dims", spec.dims},
                 {"noise", spec.intra_noise}, {"corruption",
                                               spec.view_corruption},
                 {"sparsity", sparsity},     {"seed", seed}};
  json outcome = {{"n_images", clusters * per_cluster}};
  write_manifest(out_dir / "manifest.json", "gen-data", config, {}, seconds,
                 outcome);
  std::cout << "wrote " << views << " index files + truth to " << out_dir
            << "\n";
  return 0;
}

int cmd_fuse(const std::vector<fs::path>& inputs, mmf::FusionConfig config,
             const fs::path& out_dir, const fs::path& truth_path, bool plot,
             bool strict) {
  const auto start = std::chrono::steady_clock::now();
  std::vector<mmf::SparseIndex> views;
  for (const fs::path& p : inputs) views.push_back(mmf::load_index(p));

  mmf::GroundTruth truth;
  const bool have_truth = !truth_path.empty();
  if (have_truth) truth = mmf::load_ground_truth(truth_path);

  auto evaluate_map = [&truth](const std::vector<mmf::SparseIndex>& idx) {
    std::vector<double> maps;
    for (const mmf::SparseIndex& index : idx) {
      std::map<std::uint32_t, mmf::RankedResult> results;
      for (std::size_t j = 0; j < index.n_images(); ++j) {
        results[index.ids()[j]] =
            mmf::query(index, mmf::QueryVector::from_column(index, j));
      }
      maps.push_back(mmf::mean_average_precision(results, truth));
    }
    return maps;
  };

  // Stepwise outer loop (one fusion round at a time) so accuracy can be
  // measured per iteration; identical arithmetic to a single T-round run.
  mmf::FusionReport report;
  report.theta1 = config.theta1;
  report.theta2 = config.effective_theta2();
  std::vector<std::vector<double>> map_per_iter;
  std::vector<mmf::SparseIndex> current = views;
  double lambda = config.alm.lambda;
  double sigma = config.alm.sigma;
  bool all_converged = true;
  for (int t = 1; t <= config.fusion_iters; ++t) {
    mmf::FusionConfig step = config;
    step.alm.lambda = lambda;
    step.alm.sigma = sigma;
    step.fusion_iters = 1;
    step.theta2 = 0.0;  // final threshold applied once, after the last round
    auto [next, step_report] = mmf::run_fusion(current, step);
    current = std::move(next);
    step_report.iterations.front().iteration = t;
    all_converged &= step_report.iterations.front().converged;
    report.iterations.push_back(std::move(step_report.iterations.front()));
    if (have_truth) map_per_iter.push_back(evaluate_map(current));
    lambda *= config.inflate_factor;
    sigma *= config.inflate_factor;
  }

  std::vector<mmf::SparseIndex> fused;
  const double theta2 = config.effective_theta2();
  for (std::size_t v = 0; v < current.size(); ++v) {
    const mmf::Matrix thresholded =
        mmf::sparsify_z(current[v].to_dense(), theta2);
    report.final_index_nonzero_fraction.push_back(
        mmf::SparseIndex::from_dense(thresholded, current[v].ids())
            .nonzero_fraction());
    fused.push_back(
        mmf::SparseIndex::from_dense(thresholded, current[v].ids()));
  }

  fs::create_directories(out_dir);
  std::vector<std::string> out_names;
  for (std::size_t v = 0; v < fused.size(); ++v) {
    const std::string name = inputs[v].filename().string();
    out_names.push_back(name);
    mmf::save_index(fused[v], out_dir / name);
  }
  {
    std::ofstream rep(out_dir / "report.json", std::ios::trunc);
    json j = report_to_json(report);
    if (have_truth) j["map_per_iteration"] = map_per_iter;
    rep << j.dump(2) << "\n";
  }

  if (plot) {
    std::vector<std::pair<std::string, std::vector<double>>> residuals;
    std::vector<double> e1, e2, e3;
    for (const auto& it : report.iterations) {
      for (const auto& tr : it.trace) {
        e1.push_back(tr.err1);
        e2.push_back(tr.err2);
        e3.push_back(tr.err3);
      }
    }
    residuals = {{"err1", e1}, {"err2", e2}, {"err3", e3}};
    write_svg_plot(out_dir / "residuals.svg", "residuals vs inner iteration",
                   residuals, true);
    if (have_truth) {
      std::vector<std::pair<std::string, std::vector<double>>> acc;
      for (std::size_t v = 0; v < fused.size(); ++v) {
        std::vector<double> ys;
        for (const auto& row : map_per_iter) ys.push_back(row[v]);
        acc.emplace_back("mAP " + out_names[v], ys);
      }
      write_svg_plot(out_dir / "accuracy.svg", "mAP vs fusion iteration", acc,
                     false);
    }
  }

  const double seconds = std::chrono::duration<double>(
                             std::chrono::steady_clock::now() - start)
                             .count();
  json cfg = {{"lambda", config.alm.lambda},
              {"sigma", config.alm.sigma},
              {"theta1", config.theta1},
              {"theta2", theta2},
              {"fusion_iters", config.fusion_iters},
              {"inflate_factor", config.inflate_factor},
              {"epsilon", config.alm.epsilon},
              {"max_inner_iters", config.alm.max_inner_iters},
              {"eta", config.alm.eta},
              {"mu0", config.alm.mu0},
              {"rho0", config.alm.rho0},
              {"xi0", config.alm.xi0}};
  json outcome = {{"all_converged", all_converged},
                  {"outputs", out_names}};
  if (!all_converged) {
    outcome["warning"] = "inner solver did not converge in every iteration";
    std::cerr << "warning: inner solver did not converge in every fusion "
                 "iteration\n";
  }
  write_manifest(out_dir / "manifest.json", "fuse", cfg, inputs, seconds,
                 outcome);
  if (strict && !all_converged) return 3;
  return 0;
}

int cmd_query(const fs::path& index_path, std::vector<std::uint32_t> query_ids,
              const fs::path& query_file, std::size_t top_k,
              const fs::path& out_path) {
  const mmf::SparseIndex index = mmf::load_index(index_path);

  std::ostream* out = &std::cout;
  std::ofstream file;
  if (!out_path.empty()) {
    file.open(out_path, std::ios::trunc);
    if (!file) throw std::runtime_error("cannot open " + out_path.string());
    out = &file;
  }

  auto run_one = [&](std::uint32_t qid, const mmf::QueryVector& q) {
    mmf::RankedResult result = mmf::query(index, q);
    mmf::write_ranking(*out, qid, result, top_k);
  };

  if (!query_file.empty()) {
    const mmf::SparseIndex queries = mmf::load_index(query_file);
    for (std::size_t j = 0; j < queries.n_images(); ++j) {
      run_one(queries.ids()[j], mmf::QueryVector::from_column(queries, j));
    }
  }
  for (std::uint32_t qid : query_ids) {
    const auto& ids = index.ids();
    const auto it = std::find(ids.begin(), ids.end(), qid);
    if (it == ids.end()) {
      throw std::runtime_error("unknown image id " + std::to_string(qid));
    }
    const auto j = static_cast<std::size_t>(it - ids.begin());
    run_one(qid, mmf::QueryVector::from_column(index, j));
  }
  return 0;
}

int cmd_evaluate(const fs::path& ranking_path, const fs::path& truth_path) {
  const auto results = mmf::load_ranking(ranking_path);
  const auto truth = mmf::load_ground_truth(truth_path);

  const double map = mmf::mean_average_precision(results, truth);
  const double rank1 = mmf::cmc_rank1(results, truth);

  bool ns_valid = true;
  double ns = 0.0;
  std::vector<std::uint32_t> violations;
  try {
    ns = mmf::ns_score(results, truth, &violations);
  } catch (const std::invalid_argument&) {
    ns_valid = false;
  }
  for (std::uint32_t qid : violations) {
    std::cerr << "protocol violation: query " << qid
              << " does not have exactly 4 relevant images\n";
  }
  if (!violations.empty()) ns_valid = false;

  std::cout << "metric      value\n"
            << "----------  --------\n";
  if (ns_valid) {
    std::cout << "N-S score   " << std::fixed << std::setprecision(4) << ns
              << "\n";
  } else {
    std::cout << "N-S score   n/a (4-relevant protocol not satisfied)\n";
  }
  std::cout << "mAP         " << std::fixed << std::setprecision(4) << map
            << "\n"
            << "rank-1      " << std::fixed << std::setprecision(4) << rank1
            << "\n\n";
  std::cout.unsetf(std::ios::fixed);
  std::cout << "map=" << map << "\n"
            << "rank1=" << rank1 << "\n";
  if (ns_valid) std::cout << "ns=" << ns << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-index fusion for sparse similarity retrieval"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic corpus");
  int clusters = 10, per_cluster = 4, views = 3;
  std::vector<int> dims;
  std::vector<double> noise, corruption;
  double sparsity = 0.2;
  std::uint64_t seed = 1;
  std::string gen_out;
  gen->add_option("--clusters", clusters, "number of clusters");
  gen->add_option("--per-cluster", per_cluster, "images per cluster");
  gen->add_option("--views", views, "number of views");
  gen->add_option("--dims", dims, "feature dimension per view");
  gen->add_option("--noise", noise, "additive noise scale per view");
  gen->add_option("--corruption", corruption,
                  "fraction of images replaced by noise, per view");
  gen->add_option("--sparsity", sparsity, "nonzero fraction per column");
  gen->add_option("--seed", seed, "RNG seed");
  gen->add_option("--out", gen_out, "output directory")->required();

  // fuse
  auto* fuse = app.add_subcommand("fuse", "fuse index files");
  std::vector<std::string> fuse_inputs;
  mmf::FusionConfig fusion_config;
  double theta2 = -1.0;
  std::string fuse_out, fuse_truth;
  bool plot = false, strict = false;
  fuse->add_option("inputs", fuse_inputs, "index files")->required();
  fuse->add_option("--lambda", fusion_config.alm.lambda,
                   "reconstruction-error weight");
  fuse->add_option("--sigma", fusion_config.alm.sigma, "sparsity weight");
  fuse->add_option("--theta1", fusion_config.theta1,
                   "functional-matrix threshold");
  fuse->add_option("--theta2", theta2,
                   "final-index threshold (defaults to theta1)");
  fuse->add_option("--iters", fusion_config.fusion_iters,
                   "fusion iterations T");
  fuse->add_option("--epsilon", fusion_config.alm.epsilon,
                   "inner convergence tolerance");
  fuse->add_option("--max-inner", fusion_config.alm.max_inner_iters,
                   "inner iteration cap");
  fuse->add_option("--truth", fuse_truth, "ground-truth file (for accuracy)");
  fuse->add_flag("--plot", plot, "emit residual/accuracy SVG figures");
  fuse->add_flag("--strict", strict,
                 "nonzero exit when the inner solver fails to converge");
  fuse->add_option("--out", fuse_out, "output directory")->required();

  // query
  auto* qry = app.add_subcommand("query", "rank images by cosine similarity");
  std::string query_index, query_file, query_out;
  std::vector<std::uint32_t> query_ids;
  long long top_k = -1;
  qry->add_option("index", query_index, "index file")->required();
  qry->add_option("--query-id", query_ids,
                  "query by database column image id (repeatable)");
  qry->add_option("--query-file", query_file,
                  "index file whose columns are query vectors");
  qry->add_option("--top", top_k, "truncate ranking to K results");
  qry->add_option("--out", query_out, "ranking output file (default stdout)");

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "score a ranking file");
  std::string eval_ranking, eval_truth;
  eval->add_option("ranking", eval_ranking, "ranking file")->required();
  eval->add_option("--truth", eval_truth, "ground-truth file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*gen) {
      return cmd_gen_data(clusters, per_cluster, views, dims, noise,
                          corruption, sparsity, seed, gen_out);
    }
    if (*fuse) {
      if (theta2 >= 0.0) fusion_config.theta2 = theta2;
      std::vector<fs::path> inputs(fuse_inputs.begin(), fuse_inputs.end());
      return cmd_fuse(inputs, fusion_config, fuse_out, fuse_truth, plot,
                      strict);
    }
    if (*qry) {
      if (top_k == 0) {
        std::cerr << "--top must be positive\n";
        return 2;
      }
      if (query_ids.empty() && query_file.empty()) {
        std::cerr << "query: need --query-id or --query-file\n";
        return 2;
      }
      const std::size_t limit =
          top_k < 0 ? std::numeric_limits<std::size_t>::max()
                    : static_cast<std::size_t>(top_k);
      return cmd_query(query_index, query_ids, query_file, limit, query_out);
    }
    if (*eval) return cmd_evaluate(eval_ranking, eval_truth);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
