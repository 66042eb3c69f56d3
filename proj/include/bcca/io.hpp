#pragma once

#include "bcca/baselines.hpp"
#include "bcca/types.hpp"

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace bcca {

namespace io_detail {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double parse_double(const std::string& s, const std::string& context) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0')
    throw IoError(context + ": cannot parse number '" + s + "'");
  return v;
}

inline long parse_long(const std::string& s, const std::string& context) {
  char* end = nullptr;
  const long v = std::strtol(s.c_str(), &end, 10);
  if (end == s.c_str() || *end != '\0')
    throw IoError(context + ": cannot parse integer '" + s + "'");
  return v;
}

inline std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream is(line);
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

// Splits "key: value"; returns false for blank/comment lines.
inline bool split_key_value(const std::string& line, std::string& key, std::string& value) {
  if (line.empty() || line[0] == '#') return false;
  const auto pos = line.find(':');
  if (pos == std::string::npos) return false;
  key = line.substr(0, pos);
  value = line.substr(pos + 1);
  const auto trim = [](std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    s = (b == std::string::npos) ? std::string() : s.substr(b, e - b + 1);
  };
  trim(key);
  trim(value);
  return !key.empty();
}

}  // namespace io_detail

// Delimited text matrix: one row per line, tab separated, '.' radix, no
// header. Values are written with enough digits to round-trip exactly.
inline void write_matrix(const std::filesystem::path& path, const MatX& m) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) out << '\t';
      out << io_detail::format_double(m(r, c));
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

inline MatX read_matrix(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    const auto toks = io_detail::split_ws(line);
    if (toks.empty()) continue;
    std::vector<double> row;
    row.reserve(toks.size());
    for (const auto& t : toks) row.push_back(io_detail::parse_double(t, path.string()));
    if (!rows.empty() && row.size() != rows.front().size())
      throw IoError(path.string() + ": ragged rows");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw IoError(path.string() + ": empty matrix");
  MatX m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      m(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
  return m;
}

// FNV-1a over raw file bytes; used as the dataset provenance hash.
inline std::uint64_t fnv1a_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path.string());
  std::uint64_t h = 0xCBF29CE484222325ull;
  char buf[4096];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001B3ull;
    }
  }
  return h;
}

struct Dataset {
  ViewSet views;
  std::optional<GroundTruth> truth;
};

inline constexpr const char* kManifestName = "dataset.manifest";

// Writes view files, optional ground truth, and the manifest listing them.
// Returns the manifest path.
inline std::filesystem::path write_dataset(const std::filesystem::path& dir, const ViewSet& data,
                                           const GroundTruth* truth = nullptr) {
  data.validate();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory: " + dir.string());

  std::vector<std::string> view_files;
  for (int m = 0; m < data.view_count(); ++m) {
    char name[32];
    std::snprintf(name, sizeof name, "view_%02d.tsv", m);
    write_matrix(dir / name, data.views[static_cast<std::size_t>(m)]);
    view_files.emplace_back(name);
  }

  const std::filesystem::path manifest = dir / kManifestName;
  std::ofstream out(manifest);
  if (!out) throw IoError("cannot open for writing: " + manifest.string());
  out << "format_version: 1\n";
  out << "views: " << data.view_count() << '\n';
  out << "channels: " << data.channels() << '\n';
  out << "samples: " << data.samples() << '\n';
  for (const auto& f : view_files) out << "view_file: " << f << '\n';
  if (truth) {
    out << "truth: 1\n";
    out << "truth_k0: " << truth->z_true.rows() << '\n';
    out << "truth_lambda: " << io_detail::format_double(truth->lambda_true) << '\n';
    out << "truth_noise_var: " << io_detail::format_double(truth->noise_var) << '\n';
    out << "truth_snr_db: " << io_detail::format_double(truth->snr_db) << '\n';
    write_matrix(dir / "truth_z.tsv", truth->z_true);
    out << "truth_sources_file: truth_z.tsv\n";
    write_matrix(dir / "truth_u.tsv", truth->u_true);
    out << "truth_common_pattern_file: truth_u.tsv\n";
    for (std::size_t m = 0; m < truth->a_true.size(); ++m) {
      char name[32];
      std::snprintf(name, sizeof name, "truth_a_%02zu.tsv", m);
      write_matrix(dir / name, truth->a_true[m]);
      out << "truth_mixing_file: " << name << '\n';
    }
  } else {
    out << "truth: 0\n";
  }
  if (!out) throw IoError("write failed: " + manifest.string());
  return manifest;
}

// Accepts either the manifest file itself or the directory containing it.
inline Dataset read_dataset(const std::filesystem::path& where) {
  std::filesystem::path manifest = where;
  if (std::filesystem::is_directory(manifest)) manifest /= kManifestName;
  std::ifstream in(manifest);
  if (!in) throw IoError("cannot open: " + manifest.string());
  const std::filesystem::path dir = manifest.parent_path();

  long format_version = -1, views = -1, channels = -1, samples = -1, truth_flag = 0, k0 = -1;
  double lambda_true = 0, noise_var = 0, snr_db = 0;
  std::vector<std::string> view_files, mixing_files;
  std::string sources_file, common_file;

  std::string line, key, value;
  while (std::getline(in, line)) {
    if (!io_detail::split_key_value(line, key, value)) continue;
    const std::string ctx = manifest.string();
    if (key == "format_version") format_version = io_detail::parse_long(value, ctx);
    else if (key == "views") views = io_detail::parse_long(value, ctx);
    else if (key == "channels") channels = io_detail::parse_long(value, ctx);
    else if (key == "samples") samples = io_detail::parse_long(value, ctx);
    else if (key == "view_file") view_files.push_back(value);
    else if (key == "truth") truth_flag = io_detail::parse_long(value, ctx);
    else if (key == "truth_k0") k0 = io_detail::parse_long(value, ctx);
    else if (key == "truth_lambda") lambda_true = io_detail::parse_double(value, ctx);
    else if (key == "truth_noise_var") noise_var = io_detail::parse_double(value, ctx);
    else if (key == "truth_snr_db") snr_db = io_detail::parse_double(value, ctx);
    else if (key == "truth_sources_file") sources_file = value;
    else if (key == "truth_common_pattern_file") common_file = value;
    else if (key == "truth_mixing_file") mixing_files.push_back(value);
    else throw IoError(manifest.string() + ": unknown manifest key '" + key + "'");
  }
  if (format_version != 1)
    throw IoError(manifest.string() + ": unsupported format_version");
  if (views < 1 || static_cast<long>(view_files.size()) != views)
    throw IoError(manifest.string() + ": view count does not match listed files");

  Dataset ds;
  for (const auto& f : view_files) {
    MatX v = read_matrix(dir / f);
    if (v.rows() != channels || v.cols() != samples)
      throw IoError(manifest.string() + ": view file " + f + " has unexpected shape");
    ds.views.views.push_back(std::move(v));
  }
  ds.views.validate();

  if (truth_flag) {
    if (sources_file.empty() || common_file.empty() ||
        static_cast<long>(mixing_files.size()) != views)
      throw IoError(manifest.string() + ": incomplete truth section");
    GroundTruth t;
    t.z_true = read_matrix(dir / sources_file);
    t.u_true = read_matrix(dir / common_file);
    for (const auto& f : mixing_files) t.a_true.push_back(read_matrix(dir / f));
    t.lambda_true = lambda_true;
    t.noise_var = noise_var;
    t.snr_db = snr_db;
    if (t.z_true.rows() != k0 || t.z_true.cols() != samples)
      throw IoError(manifest.string() + ": truth sources have unexpected shape");
    ds.truth = std::move(t);
  }
  return ds;
}

namespace io_detail {

inline void write_named_matrix(std::ofstream& out, const std::string& name, const MatX& m) {
  out << "matrix " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) out << '\t';
      out << format_double(m(r, c));
    }
    out << '\n';
  }
}

inline void write_named_vector(std::ofstream& out, const std::string& name, const VecX& v) {
  out << "vector " << name << ' ' << v.size() << '\n';
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) out << '\t';
    out << format_double(v(i));
  }
  out << '\n';
}

// Sequential reader for the fit-result format.
class BlockReader {
 public:
  BlockReader(const std::filesystem::path& path) : path_(path.string()), in_(path) {
    if (!in_) throw IoError("cannot open: " + path_);
  }

  std::string scalar(const std::string& expect_key) {
    std::string line, key, value;
    if (!std::getline(in_, line) || !split_key_value(line, key, value) || key != expect_key)
      throw IoError(path_ + ": expected key '" + expect_key + "'");
    return value;
  }
  double scalar_double(const std::string& key) { return parse_double(scalar(key), path_); }
  long scalar_long(const std::string& key) { return parse_long(scalar(key), path_); }

  MatX matrix(const std::string& expect_name) {
    std::string line;
    if (!std::getline(in_, line)) throw IoError(path_ + ": unexpected end of file");
    const auto toks = split_ws(line);
    if (toks.size() != 4 || toks[0] != "matrix" || toks[1] != expect_name)
      throw IoError(path_ + ": expected matrix '" + expect_name + "'");
    const long rows = parse_long(toks[2], path_);
    const long cols = parse_long(toks[3], path_);
    MatX m(rows, cols);
    for (long r = 0; r < rows; ++r) {
      if (!std::getline(in_, line)) throw IoError(path_ + ": truncated matrix");
      const auto vals = split_ws(line);
      if (static_cast<long>(vals.size()) != cols) throw IoError(path_ + ": ragged matrix row");
      for (long c = 0; c < cols; ++c) m(r, c) = parse_double(vals[static_cast<std::size_t>(c)], path_);
    }
    return m;
  }

  VecX vector(const std::string& expect_name) {
    std::string line;
    if (!std::getline(in_, line)) throw IoError(path_ + ": unexpected end of file");
    const auto toks = split_ws(line);
    if (toks.size() != 3 || toks[0] != "vector" || toks[1] != expect_name)
      throw IoError(path_ + ": expected vector '" + expect_name + "'");
    const long len = parse_long(toks[2], path_);
    if (!std::getline(in_, line)) throw IoError(path_ + ": truncated vector");
    const auto vals = split_ws(line);
    if (static_cast<long>(vals.size()) != len) throw IoError(path_ + ": vector length mismatch");
    VecX v(len);
    for (long i = 0; i < len; ++i) v(i) = parse_double(vals[static_cast<std::size_t>(i)], path_);
    return v;
  }

 private:
  std::string path_;
  std::ifstream in_;
};

}  // namespace io_detail

// Serialized fit: provenance, hyperparameters, the lower-bound trace, and
// every posterior parameter.
inline void write_fit_result(const std::filesystem::path& path, const FitResult& fit,
                             const Hyperparameters& hp, const std::string& algorithm,
                             std::uint64_t manifest_hash) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  const PosteriorState& st = fit.posterior;
  char hash_buf[32];
  std::snprintf(hash_buf, sizeof hash_buf, "%016llx",
                static_cast<unsigned long long>(manifest_hash));

  out << "fit_result_version: 1\n";
  out << "algorithm: " << algorithm << '\n';
  out << "seed: " << fit.seed << '\n';
  out << "manifest_hash: " << hash_buf << '\n';
  out << "converged: " << (fit.converged ? 1 : 0) << '\n';
  out << "iterations: " << fit.iterations << '\n';
  out << "lambda_point: " << io_detail::format_double(fit.lambda_point) << '\n';
  out << "coupling: " << to_string(hp.coupling) << '\n';
  out << "noise_model: " << to_string(hp.noise_model) << '\n';
  out << "a0: " << io_detail::format_double(hp.a0) << '\n';
  out << "b0: " << io_detail::format_double(hp.b0) << '\n';
  out << "v0: " << io_detail::format_double(hp.v0) << '\n';
  out << "max_iter: " << hp.max_iter << '\n';
  out << "rel_tol: " << io_detail::format_double(hp.rel_tol) << '\n';
  out << "views: " << st.view_count() << '\n';
  out << "channels: " << st.channels() << '\n';
  out << "samples: " << st.samples() << '\n';
  out << "components: " << st.components() << '\n';
  out << "psi_dof: " << io_detail::format_double(st.psi_dof) << '\n';
  out << "alpha_shape: " << io_detail::format_double(st.alpha_shape) << '\n';
  out << "lambda_shape: " << io_detail::format_double(st.lambda_shape) << '\n';
  out << "lambda_rate: " << io_detail::format_double(st.lambda_rate) << '\n';

  VecX trace(static_cast<Eigen::Index>(fit.lb_trace.size()));
  for (Eigen::Index i = 0; i < trace.size(); ++i)
    trace(i) = fit.lb_trace[static_cast<std::size_t>(i)];
  io_detail::write_named_vector(out, "lb_trace", trace);
  io_detail::write_named_vector(out, "alpha_point", fit.alpha_point);
  io_detail::write_named_vector(out, "alpha_rate", st.alpha_rate);
  io_detail::write_named_vector(out, "u_var", st.u_var);
  io_detail::write_named_matrix(out, "S0", hp.S0);
  io_detail::write_named_matrix(out, "z_mean", st.z_mean);
  io_detail::write_named_matrix(out, "z_cov", st.z_cov);
  io_detail::write_named_matrix(out, "u_mean", st.u_mean);
  for (int m = 0; m < st.view_count(); ++m) {
    io_detail::write_named_matrix(out, "psi_scale_" + std::to_string(m), st.psi_scale[m]);
    io_detail::write_named_matrix(out, "a_mean_" + std::to_string(m), st.a_mean[m]);
    for (Eigen::Index d = 0; d < st.channels(); ++d)
      io_detail::write_named_matrix(
          out, "a_cov_" + std::to_string(m) + "_" + std::to_string(d),
          st.a_cov[static_cast<std::size_t>(m)][static_cast<std::size_t>(d)]);
  }
  if (!out) throw IoError("write failed: " + path.string());
}

inline FitResult read_fit_result(const std::filesystem::path& path,
                                 Hyperparameters* hp_out = nullptr,
                                 std::string* algorithm_out = nullptr) {
  io_detail::BlockReader r(path);
  if (r.scalar_long("fit_result_version") != 1)
    throw IoError(path.string() + ": unsupported fit_result_version");
  const std::string algorithm = r.scalar("algorithm");
  FitResult fit;
  fit.seed = static_cast<std::uint64_t>(r.scalar_long("seed"));
  r.scalar("manifest_hash");
  fit.converged = r.scalar_long("converged") != 0;
  fit.iterations = static_cast<int>(r.scalar_long("iterations"));
  fit.lambda_point = r.scalar_double("lambda_point");

  Hyperparameters hp;
  const std::string coupling = r.scalar("coupling");
  hp.coupling = coupling == "hierarchical" ? Coupling::hierarchical
               : coupling == "independent" ? Coupling::independent
                                           : Coupling::tied;
  hp.noise_model = r.scalar("noise_model") == "full_precision" ? NoiseModel::full_precision
                                                               : NoiseModel::diagonal_precision;
  hp.a0 = r.scalar_double("a0");
  hp.b0 = r.scalar_double("b0");
  hp.v0 = r.scalar_double("v0");
  hp.max_iter = static_cast<int>(r.scalar_long("max_iter"));
  hp.rel_tol = r.scalar_double("rel_tol");

  const long views = r.scalar_long("views");
  const long channels = r.scalar_long("channels");
  r.scalar_long("samples");
  r.scalar_long("components");

  PosteriorState st;
  st.psi_dof = r.scalar_double("psi_dof");
  st.alpha_shape = r.scalar_double("alpha_shape");
  st.lambda_shape = r.scalar_double("lambda_shape");
  st.lambda_rate = r.scalar_double("lambda_rate");

  const VecX trace = r.vector("lb_trace");
  fit.lb_trace.assign(trace.data(), trace.data() + trace.size());
  fit.alpha_point = r.vector("alpha_point");
  st.alpha_rate = r.vector("alpha_rate");
  st.u_var = r.vector("u_var");
  hp.S0 = r.matrix("S0");
  st.z_mean = r.matrix("z_mean");
  st.z_cov = r.matrix("z_cov");
  st.u_mean = r.matrix("u_mean");
  for (long m = 0; m < views; ++m) {
    st.psi_scale.push_back(r.matrix("psi_scale_" + std::to_string(m)));
    st.a_mean.push_back(r.matrix("a_mean_" + std::to_string(m)));
    std::vector<MatX> row_covs;
    for (long d = 0; d < channels; ++d)
      row_covs.push_back(r.matrix("a_cov_" + std::to_string(m) + "_" + std::to_string(d)));
    st.a_cov.push_back(std::move(row_covs));
  }
  fit.posterior = std::move(st);
  if (hp_out) *hp_out = std::move(hp);
  if (algorithm_out) *algorithm_out = algorithm;
  return fit;
}

// Baseline solutions persist the same way, minus the posterior machinery.
inline void write_eigen_solution(const std::filesystem::path& path, const EigenSolution& sol,
                                 const std::string& algorithm, std::uint64_t manifest_hash) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  char hash_buf[32];
  std::snprintf(hash_buf, sizeof hash_buf, "%016llx",
                static_cast<unsigned long long>(manifest_hash));
  out << "eigen_solution_version: 1\n";
  out << "algorithm: " << algorithm << '\n';
  out << "manifest_hash: " << hash_buf << '\n';
  out << "shared: " << (sol.shared ? 1 : 0) << '\n';
  out << "weight_sets: " << sol.weights.size() << '\n';
  io_detail::write_named_vector(out, "correlations", sol.correlations);
  for (std::size_t i = 0; i < sol.weights.size(); ++i)
    io_detail::write_named_matrix(out, "weights_" + std::to_string(i), sol.weights[i]);
  if (!out) throw IoError("write failed: " + path.string());
}

inline EigenSolution read_eigen_solution(const std::filesystem::path& path,
                                         std::string* algorithm_out = nullptr) {
  io_detail::BlockReader r(path);
  if (r.scalar_long("eigen_solution_version") != 1)
    throw IoError(path.string() + ": unsupported eigen_solution_version");
  const std::string algorithm = r.scalar("algorithm");
  r.scalar("manifest_hash");
  EigenSolution sol;
  sol.shared = r.scalar_long("shared") != 0;
  const long sets = r.scalar_long("weight_sets");
  sol.correlations = r.vector("correlations");
  for (long i = 0; i < sets; ++i) sol.weights.push_back(r.matrix("weights_" + std::to_string(i)));
  if (algorithm_out) *algorithm_out = algorithm;
  return sol;
}

}  // namespace bcca
