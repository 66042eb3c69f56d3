#pragma once

#include "bcca/baselines.hpp"
#include "bcca/fit.hpp"
#include "bcca/io.hpp"
#include "bcca/metrics.hpp"
#include "bcca/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace bcca {

enum class Algorithm { bcorrca = 0, gfa_like = 1, cca = 2, corrca = 3 };

inline const char* to_string(Algorithm a) {
  switch (a) {
    case Algorithm::bcorrca: return "bcorrca";
    case Algorithm::gfa_like: return "gfa-like";
    case Algorithm::cca: return "cca";
    default: return "corrca";
  }
}

inline Algorithm parse_algorithm(const std::string& name) {
  if (name == "bcorrca") return Algorithm::bcorrca;
  if (name == "gfa-like") return Algorithm::gfa_like;
  if (name == "cca") return Algorithm::cca;
  if (name == "corrca") return Algorithm::corrca;
  throw InvalidInput("unknown algorithm '" + name + "'");
}

inline bool is_variational(Algorithm a) {
  return a == Algorithm::bcorrca || a == Algorithm::gfa_like;
}

// Model settings per variational algorithm; the informed flag swaps the
// default Wishart scale for per-view observation-variance scales.
inline Hyperparameters hyperparameters_for(Algorithm alg, const ViewSet& data,
                                           bool informed_prior) {
  Hyperparameters hp = default_hyperparameters(static_cast<int>(data.channels()));
  if (alg == Algorithm::gfa_like) {
    hp.coupling = Coupling::independent;
    hp.noise_model = NoiseModel::diagonal_precision;
  }
  if (informed_prior) hp.s0_per_view = informed_noise_prior(data, hp.v0);
  return hp;
}

// Estimated sources for the eigenvalue baselines: each component's series is
// the concatenation of the two canonical variates over the pairwise-
// concatenated data; the true sources are tiled to match.
inline std::pair<MatX, MatX> baseline_sources(const EigenSolution& sol, const MatX& xa,
                                              const MatX& xb, const MatX& z_true) {
  const Eigen::Index k = sol.correlations.size();
  const Eigen::Index big_n = xa.cols();
  MatX est(k, 2 * big_n);
  est.leftCols(big_n) = sol.weights.at(0).transpose() * xa;
  est.rightCols(big_n) = sol.weights.at(1).transpose() * xb;

  const Eigen::Index n = z_true.cols();
  const Eigen::Index tiles = 2 * big_n / n;
  MatX truth(z_true.rows(), 2 * big_n);
  for (Eigen::Index t = 0; t < tiles; ++t) truth.middleCols(t * n, n) = z_true;
  return {std::move(est), std::move(truth)};
}

inline int worker_count_from_env() {
  if (const char* s = std::getenv("BCCA_JOBS")) {
    const int v = std::atoi(s);
    if (v >= 1) return v;
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc ? static_cast<int>(hc) : 1;
}

// Runs fn(0..count-1) on a small worker pool. Work items must be independent;
// the first exception wins and is rethrown after all workers join.
template <class Fn>
void parallel_for(std::size_t count, int workers, Fn&& fn) {
  if (workers <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto body = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const int n_threads = std::min<std::size_t>(static_cast<std::size_t>(workers), count);
  pool.reserve(static_cast<std::size_t>(n_threads));
  for (int t = 0; t < n_threads; ++t) pool.emplace_back(body);
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

namespace config_detail {

// Flat key/list config file: "key: value" lines, '#' comments, lists comma
// separated. Consumers must take every key; leftovers are rejected.
class FlatConfig {
 public:
  explicit FlatConfig(const std::filesystem::path& path) : path_(path.string()) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config: " + path_);
    std::string line, key, value;
    while (std::getline(in, line)) {
      if (!io_detail::split_key_value(line, key, value)) continue;
      if (entries_.count(key)) throw InvalidInput(path_ + ": duplicate key '" + key + "'");
      entries_[key] = value;
    }
  }

  bool has(const std::string& key) const { return entries_.count(key) > 0; }

  std::string take(const std::string& key) {
    auto it = entries_.find(key);
    if (it == entries_.end()) throw InvalidInput(path_ + ": missing required key '" + key + "'");
    std::string v = it->second;
    entries_.erase(it);
    return v;
  }
  std::string take_or(const std::string& key, const std::string& fallback) {
    return has(key) ? take(key) : fallback;
  }
  long take_long(const std::string& key) { return io_detail::parse_long(take(key), path_); }
  long take_long_or(const std::string& key, long fallback) {
    return has(key) ? take_long(key) : fallback;
  }
  double take_double_or(const std::string& key, double fallback) {
    return has(key) ? io_detail::parse_double(take(key), path_) : fallback;
  }
  bool take_bool_or(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const std::string v = take(key);
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw InvalidInput(path_ + ": boolean key '" + key + "' must be true/false");
  }

  std::vector<std::string> take_list(const std::string& key) {
    std::vector<std::string> out;
    std::string raw = take(key);
    std::size_t start = 0;
    while (start <= raw.size()) {
      std::size_t comma = raw.find(',', start);
      if (comma == std::string::npos) comma = raw.size();
      std::string item = raw.substr(start, comma - start);
      const auto b = item.find_first_not_of(" \t");
      const auto e = item.find_last_not_of(" \t");
      if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
      start = comma + 1;
    }
    if (out.empty()) throw InvalidInput(path_ + ": key '" + key + "' has an empty list");
    return out;
  }
  std::vector<double> take_double_list(const std::string& key) {
    std::vector<double> out;
    for (const auto& s : take_list(key)) out.push_back(io_detail::parse_double(s, path_));
    return out;
  }
  std::vector<long> take_long_list(const std::string& key) {
    std::vector<long> out;
    for (const auto& s : take_list(key)) out.push_back(io_detail::parse_long(s, path_));
    return out;
  }

  void finish() const {
    if (!entries_.empty())
      throw InvalidInput(path_ + ": unknown key '" + entries_.begin()->first + "'");
  }
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::map<std::string, std::string> entries_;
};

inline std::string csv_escape(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  return s;
}

inline void ensure_parent_dir(const std::filesystem::path& file) {
  const std::filesystem::path parent = file.parent_path();
  if (parent.empty()) return;
  std::error_code ec;
  std::filesystem::create_directories(parent, ec);
  if (ec) throw IoError("cannot create directory: " + parent.string());
}

inline std::string csv_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace config_detail

struct SweepConfig {
  std::vector<Algorithm> algorithms;
  std::vector<double> snr_db_list;
  std::vector<long> views_list;
  std::vector<double> lambda_true_list;
  int k0 = 1;
  int channels = 6;
  long n_total = 5000;
  int k = 0;  // components requested from every algorithm; 0 means k0
  int repetitions = 20;
  int n_restarts = 1;
  std::uint64_t base_seed = 0;
  std::filesystem::path output;
  std::filesystem::path aggregate_output;
  bool informed_prior = false;
  bool record_wall_time = false;

  void validate() const {
    if (algorithms.empty()) throw InvalidInput("sweep config: empty algorithm list");
    if (snr_db_list.empty() || views_list.empty() || lambda_true_list.empty())
      throw InvalidInput("sweep config: empty grid");
    if (repetitions < 1) throw InvalidInput("sweep config: repetitions must be >= 1");
    if (n_restarts < 1) throw InvalidInput("sweep config: restarts must be >= 1");
    if (k0 < 1 || k0 > channels) throw InvalidInput("sweep config: need 1 <= k0 <= d");
    const int k_eff = k ? k : k0;
    if (k_eff < k0 || k_eff > channels)
      throw InvalidInput("sweep config: need k0 <= k <= d");
    if (output.empty()) throw InvalidInput("sweep config: missing output path");
    for (long m : views_list) {
      if (m < 2) throw InvalidInput("sweep config: views must be >= 2");
      if (n_total % m != 0)
        throw InvalidInput("sweep config: n_total must be divisible by every views value");
    }
  }
  int components() const { return k ? k : k0; }
};

inline SweepConfig parse_sweep_config(const std::filesystem::path& path) {
  config_detail::FlatConfig cfg(path);
  if (cfg.take_long("format_version") != 1)
    throw InvalidInput(cfg.path() + ": unsupported format_version");
  SweepConfig out;
  for (const auto& name : cfg.take_list("algorithms"))
    out.algorithms.push_back(parse_algorithm(name));
  out.snr_db_list = cfg.take_double_list("snr_db");
  out.views_list = cfg.take_long_list("views");
  out.lambda_true_list = cfg.take_double_list("lambda_true");
  out.k0 = static_cast<int>(cfg.take_long_or("k0", 1));
  out.channels = static_cast<int>(cfg.take_long_or("d", 6));
  out.n_total = cfg.take_long_or("n_total", 5000);
  out.k = static_cast<int>(cfg.take_long_or("k", 0));
  out.repetitions = static_cast<int>(cfg.take_long_or("repetitions", 20));
  out.n_restarts = static_cast<int>(cfg.take_long_or("restarts", 1));
  out.base_seed = static_cast<std::uint64_t>(cfg.take_long_or("base_seed", 0));
  out.output = cfg.take("output");
  out.aggregate_output = cfg.take_or("aggregate_output", out.output.string() + ".aggregate.csv");
  out.informed_prior = cfg.take_bool_or("informed_prior", false);
  out.record_wall_time = cfg.take_bool_or("record_wall_time", false);
  cfg.finish();
  out.validate();
  return out;
}

namespace bench_detail {

struct GridPoint {
  double snr_db;
  long views;
  double lambda_true;
};

struct Outcome {
  double mean_abs_corr = 0;
  bool has_corr = false;
  double lambda_est = 0;
  bool has_lambda = false;
  int active_sources = -1;
  double lower_bound = 0;
  bool has_lb = false;
  int iterations = -1;
  double wall_ms = 0;
  std::string error;
};

// Everything one (grid point, repetition) work item needs and produces.
struct Cell {
  GridPoint grid;
  std::size_t grid_index;
  int rep;
  std::uint64_t seed;
  std::vector<Outcome> outcomes;  // one per algorithm, config order
};

inline std::uint64_t cell_seed(const SweepConfig& cfg, const GridPoint& g, int rep) {
  return StableHash()
      .mix(cfg.base_seed)
      .mix(cfg.k0)
      .mix(g.views)
      .mix(cfg.channels)
      .mix(cfg.n_total)
      .mix(g.snr_db)
      .mix(g.lambda_true)
      .mix(rep)
      .digest();
}

inline Outcome run_algorithm_on(Algorithm alg, const ViewSet& data, const GroundTruth& truth,
                                const SweepConfig& cfg, std::uint64_t seed) {
  Outcome out;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    if (is_variational(alg)) {
      const Hyperparameters hp = hyperparameters_for(alg, data, cfg.informed_prior);
      // the cell seed doubles as the restart stream seed, so a CSV row is
      // reproducible with `simulate --seed S` followed by `fit --seed S`
      const FitResult fit =
          fit_with_restarts(data, cfg.components(), hp, cfg.n_restarts, seed);
      out.mean_abs_corr = match_sources(fit.posterior.z_mean, truth.z_true).mean_abs_corr;
      out.has_corr = true;
      if (hp.coupling == Coupling::hierarchical) {
        out.lambda_est = fit.lambda_point;
        out.has_lambda = true;
      }
      out.active_sources = count_active_sources(fit);
      out.lower_bound = fit.lb_trace.back();
      out.has_lb = true;
      out.iterations = fit.iterations;
    } else {
      const auto [xa, xb] = pairwise_concatenate(data);
      const EigenSolution sol = alg == Algorithm::cca
                                    ? cca(xa, xb, cfg.components())
                                    : corrca(xa, xb, cfg.components());
      const auto [est, tiled] = baseline_sources(sol, xa, xb, truth.z_true);
      out.mean_abs_corr = match_sources(est, tiled).mean_abs_corr;
      out.has_corr = true;
    }
  } catch (const Error& e) {
    out.error = config_detail::csv_escape(e.what());
  }
  const auto t1 = std::chrono::steady_clock::now();
  out.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
  return out;
}

}  // namespace bench_detail

inline constexpr const char* kBenchmarkCsvHeader =
    "k0,views,d,n_total,snr_db,lambda_true,rep,seed,algorithm,mean_abs_corr,lambda_est,"
    "active_sources,lower_bound,iterations,wall_time_ms,error";

struct BenchmarkPaths {
  std::filesystem::path rows;
  std::filesystem::path aggregate;
};

// Full sweep: every grid point x repetition generates one dataset (seeded by
// the cell hash) shared by all algorithms; per-cell failures land in the
// error column and the sweep continues. Output rows are ordered by grid
// point, algorithm, repetition, so the files are byte-deterministic given
// the config (wall-clock timing is only recorded when asked for).
inline BenchmarkPaths run_benchmark(const SweepConfig& cfg) {
  cfg.validate();
  using bench_detail::Cell;
  using bench_detail::GridPoint;

  std::vector<GridPoint> grid;
  for (double snr : cfg.snr_db_list)
    for (long views : cfg.views_list)
      for (double lt : cfg.lambda_true_list) grid.push_back({snr, views, lt});

  std::vector<Cell> cells;
  cells.reserve(grid.size() * static_cast<std::size_t>(cfg.repetitions));
  for (std::size_t g = 0; g < grid.size(); ++g)
    for (int rep = 0; rep < cfg.repetitions; ++rep) {
      Cell c;
      c.grid = grid[g];
      c.grid_index = g;
      c.rep = rep;
      c.seed = bench_detail::cell_seed(cfg, grid[g], rep);
      cells.push_back(std::move(c));
    }

  parallel_for(cells.size(), worker_count_from_env(), [&](std::size_t i) {
    Cell& cell = cells[i];
    SimSpec spec;
    spec.k0 = cfg.k0;
    spec.views = static_cast<int>(cell.grid.views);
    spec.channels = cfg.channels;
    spec.n_total = cfg.n_total;
    spec.snr_db = cell.grid.snr_db;
    spec.lambda_true = cell.grid.lambda_true;
    spec.seed = cell.seed;
    const auto [data, truth] = generate_dataset(spec);
    cell.outcomes.reserve(cfg.algorithms.size());
    for (Algorithm alg : cfg.algorithms)
      cell.outcomes.push_back(bench_detail::run_algorithm_on(alg, data, truth, cfg, cell.seed));
  });

  // Per-repetition rows, sorted by grid point, algorithm, repetition.
  config_detail::ensure_parent_dir(cfg.output);
  config_detail::ensure_parent_dir(cfg.aggregate_output);
  std::ofstream rows(cfg.output);
  if (!rows) throw IoError("cannot open for writing: " + cfg.output.string());
  rows << kBenchmarkCsvHeader << '\n';
  const std::size_t reps = static_cast<std::size_t>(cfg.repetitions);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    for (std::size_t a = 0; a < cfg.algorithms.size(); ++a) {
      for (std::size_t rep = 0; rep < reps; ++rep) {
        const Cell& cell = cells[g * reps + rep];
        const bench_detail::Outcome& o = cell.outcomes[a];
        rows << cfg.k0 << ',' << cell.grid.views << ',' << cfg.channels << ',' << cfg.n_total
             << ',' << config_detail::csv_double(cell.grid.snr_db) << ','
             << config_detail::csv_double(cell.grid.lambda_true) << ',' << cell.rep << ','
             << cell.seed << ',' << to_string(cfg.algorithms[a]) << ','
             << (o.has_corr ? config_detail::csv_double(o.mean_abs_corr) : "") << ','
             << (o.has_lambda ? config_detail::csv_double(o.lambda_est) : "") << ','
             << (o.active_sources >= 0 ? std::to_string(o.active_sources) : "") << ','
             << (o.has_lb ? config_detail::csv_double(o.lower_bound) : "") << ','
             << (o.iterations >= 0 ? std::to_string(o.iterations) : "") << ','
             << (cfg.record_wall_time ? config_detail::csv_double(o.wall_ms) : "0") << ','
             << o.error << '\n';
      }
    }
  }
  if (!rows) throw IoError("write failed: " + cfg.output.string());

  // Aggregates: mean and standard error of the mean per (grid point,
  // algorithm); failed repetitions are excluded and counted.
  std::ofstream agg(cfg.aggregate_output);
  if (!agg) throw IoError("cannot open for writing: " + cfg.aggregate_output.string());
  agg << "k0,views,d,n_total,snr_db,lambda_true,algorithm,repetitions,failures,"
         "mean_abs_corr_mean,mean_abs_corr_sem,lambda_est_mean,lambda_est_sem,"
         "active_sources_mean,lower_bound_mean\n";
  const auto mean_sem = [](const std::vector<double>& xs) {
    double mean = 0, sem = 0;
    if (!xs.empty()) {
      for (double x : xs) mean += x;
      mean /= static_cast<double>(xs.size());
      if (xs.size() > 1) {
        double ss = 0;
        for (double x : xs) ss += (x - mean) * (x - mean);
        sem = std::sqrt(ss / static_cast<double>(xs.size() - 1)) /
              std::sqrt(static_cast<double>(xs.size()));
      }
    }
    return std::pair<double, double>(mean, sem);
  };
  for (std::size_t g = 0; g < grid.size(); ++g) {
    for (std::size_t a = 0; a < cfg.algorithms.size(); ++a) {
      std::vector<double> corrs, lambdas, actives, lbs;
      int failures = 0;
      for (std::size_t rep = 0; rep < reps; ++rep) {
        const bench_detail::Outcome& o = cells[g * reps + rep].outcomes[a];
        if (!o.error.empty()) {
          ++failures;
          continue;
        }
        if (o.has_corr) corrs.push_back(o.mean_abs_corr);
        if (o.has_lambda) lambdas.push_back(o.lambda_est);
        if (o.active_sources >= 0) actives.push_back(o.active_sources);
        if (o.has_lb) lbs.push_back(o.lower_bound);
      }
      const auto [corr_mean, corr_sem] = mean_sem(corrs);
      const auto [lam_mean, lam_sem] = mean_sem(lambdas);
      const auto [act_mean, act_sem] = mean_sem(actives);
      const auto [lb_mean, lb_sem] = mean_sem(lbs);
      agg << cfg.k0 << ',' << grid[g].views << ',' << cfg.channels << ',' << cfg.n_total << ','
          << config_detail::csv_double(grid[g].snr_db) << ','
          << config_detail::csv_double(grid[g].lambda_true) << ','
          << to_string(cfg.algorithms[a]) << ',' << (reps - static_cast<std::size_t>(failures))
          << ',' << failures << ','
          << (corrs.empty() ? "" : config_detail::csv_double(corr_mean)) << ','
          << (corrs.empty() ? "" : config_detail::csv_double(corr_sem)) << ','
          << (lambdas.empty() ? "" : config_detail::csv_double(lam_mean)) << ','
          << (lambdas.empty() ? "" : config_detail::csv_double(lam_sem)) << ','
          << (actives.empty() ? "" : config_detail::csv_double(act_mean)) << ','
          << (lbs.empty() ? "" : config_detail::csv_double(lb_mean)) << '\n';
      (void)act_sem;
      (void)lb_sem;
    }
  }
  if (!agg) throw IoError("write failed: " + cfg.aggregate_output.string());
  return {cfg.output, cfg.aggregate_output};
}

// ---------------------------------------------------------------------------
// Restart sweep: how many random restarts are needed before bound-based
// selection lands on the true number of active sources.

struct RestartSweepConfig {
  int k0 = 4;
  int channels = 8;
  int views = 5;
  long n_total = 5000;
  double snr_db = -3;
  double lambda_true = 1;
  int k = 6;
  int datasets = 20;
  int fits_per_dataset = 100;
  std::vector<long> restart_counts;
  std::uint64_t base_seed = 0;
  std::filesystem::path output;
  bool informed_prior = false;

  void validate() const {
    if (datasets < 1 || fits_per_dataset < 1)
      throw InvalidInput("restart sweep: datasets and fits_per_dataset must be >= 1");
    if (restart_counts.empty()) throw InvalidInput("restart sweep: empty restart_counts");
    for (long r : restart_counts)
      if (r < 1 || r > fits_per_dataset)
        throw InvalidInput("restart sweep: restart counts must lie in [1, fits_per_dataset]");
    if (k < k0) throw InvalidInput("restart sweep: need k >= k0");
    if (output.empty()) throw InvalidInput("restart sweep: missing output path");
    if (views < 2 || n_total % views != 0)
      throw InvalidInput("restart sweep: n_total must be a positive multiple of views >= 2");
  }
};

inline RestartSweepConfig parse_restart_sweep_config(const std::filesystem::path& path) {
  config_detail::FlatConfig cfg(path);
  if (cfg.take_long("format_version") != 1)
    throw InvalidInput(cfg.path() + ": unsupported format_version");
  RestartSweepConfig out;
  out.k0 = static_cast<int>(cfg.take_long_or("k0", 4));
  out.channels = static_cast<int>(cfg.take_long_or("d", 8));
  out.views = static_cast<int>(cfg.take_long_or("views", 5));
  out.n_total = cfg.take_long_or("n_total", 5000);
  out.snr_db = cfg.take_double_or("snr_db", -3);
  out.lambda_true = cfg.take_double_or("lambda_true", 1);
  out.k = static_cast<int>(cfg.take_long_or("k", 6));
  out.datasets = static_cast<int>(cfg.take_long_or("datasets", 20));
  out.fits_per_dataset = static_cast<int>(cfg.take_long_or("fits_per_dataset", 100));
  out.restart_counts = cfg.take_long_list("restart_counts");
  out.base_seed = static_cast<std::uint64_t>(cfg.take_long_or("base_seed", 0));
  out.output = cfg.take("output");
  out.informed_prior = cfg.take_bool_or("informed_prior", false);
  cfg.finish();
  out.validate();
  return out;
}

namespace bench_detail {

// Probability that the fit at (1-based) descending-bound position pos is the
// best of a uniformly drawn r-subset of f fits: C(f-pos, r-1) / C(f, r).
inline double subset_selection_weight(int pos, long r, int f) {
  if (f - pos < r - 1) return 0.0;
  const double lw = std::log(static_cast<double>(r)) + std::lgamma(static_cast<double>(f - pos + 1)) +
                    std::lgamma(static_cast<double>(f - r + 1)) -
                    std::lgamma(static_cast<double>(f - pos - r + 2)) -
                    std::lgamma(static_cast<double>(f + 1));
  return std::exp(lw);
}

}  // namespace bench_detail

// For each dataset, runs fits_per_dataset independently seeded fits once and
// then scores every restart budget r in closed form: the accuracy is the
// exact expectation, over uniformly drawn r-subsets of the fits, that the
// subset's highest-bound fit has the true number of active sources. (This is
// what resampling subsets estimates, computed without Monte Carlo noise.)
inline std::filesystem::path run_restart_sweep(const RestartSweepConfig& cfg) {
  cfg.validate();
  const int f = cfg.fits_per_dataset;

  struct FitScore {
    double lb;
    int index;
    bool correct;
  };
  std::vector<std::uint64_t> dataset_seeds(static_cast<std::size_t>(cfg.datasets));
  std::vector<std::vector<FitScore>> scores(static_cast<std::size_t>(cfg.datasets));

  std::vector<ViewSet> data(static_cast<std::size_t>(cfg.datasets));
  for (int ds = 0; ds < cfg.datasets; ++ds) {
    dataset_seeds[static_cast<std::size_t>(ds)] =
        StableHash().mix(cfg.base_seed).mix(ds).digest();
    SimSpec spec;
    spec.k0 = cfg.k0;
    spec.views = cfg.views;
    spec.channels = cfg.channels;
    spec.n_total = cfg.n_total;
    spec.snr_db = cfg.snr_db;
    spec.lambda_true = cfg.lambda_true;
    spec.seed = dataset_seeds[static_cast<std::size_t>(ds)];
    data[static_cast<std::size_t>(ds)] = generate_dataset(spec).first;
    scores[static_cast<std::size_t>(ds)].resize(static_cast<std::size_t>(f));
  }

  const std::size_t total = static_cast<std::size_t>(cfg.datasets) * static_cast<std::size_t>(f);
  parallel_for(total, worker_count_from_env(), [&](std::size_t item) {
    const int ds = static_cast<int>(item / static_cast<std::size_t>(f));
    const int i = static_cast<int>(item % static_cast<std::size_t>(f));
    const ViewSet& views = data[static_cast<std::size_t>(ds)];
    const Hyperparameters hp =
        hyperparameters_for(Algorithm::bcorrca, views, cfg.informed_prior);
    const std::uint64_t seed =
        StableHash().mix(dataset_seeds[static_cast<std::size_t>(ds)]).mix(1 + i).digest();
    FitScore score{-std::numeric_limits<double>::infinity(), i, false};
    try {
      const FitResult fit = bcca::fit(views, cfg.k, hp, seed);
      score.lb = fit.lb_trace.back();
      score.correct = count_active_sources(fit) == cfg.k0;
    } catch (const Error&) {
      // a failed fit never gets selected
    }
    scores[static_cast<std::size_t>(ds)][static_cast<std::size_t>(i)] = score;
  });

  config_detail::ensure_parent_dir(cfg.output);
  std::ofstream out(cfg.output);
  if (!out) throw IoError("cannot open for writing: " + cfg.output.string());
  out << "dataset,seed,restarts,accuracy\n";
  for (int ds = 0; ds < cfg.datasets; ++ds) {
    auto& fits = scores[static_cast<std::size_t>(ds)];
    std::sort(fits.begin(), fits.end(), [](const FitScore& a, const FitScore& b) {
      if (a.lb != b.lb) return a.lb > b.lb;
      return a.index < b.index;
    });
    for (long r : cfg.restart_counts) {
      double accuracy = 0;
      for (int pos = 1; pos <= f; ++pos)
        if (fits[static_cast<std::size_t>(pos - 1)].correct)
          accuracy += bench_detail::subset_selection_weight(pos, r, f);
      out << ds << ',' << dataset_seeds[static_cast<std::size_t>(ds)] << ',' << r << ','
          << config_detail::csv_double(accuracy) << '\n';
    }
  }
  if (!out) throw IoError("write failed: " + cfg.output.string());
  return cfg.output;
}

}  // namespace bcca
