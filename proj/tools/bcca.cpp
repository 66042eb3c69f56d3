// Command-line harness: dataset generation, single fits, benchmark sweeps,
// and the restart-count sweep. Exit codes: 0 success, 1 numerical failure,
// 2 usage or configuration error.

#include "bcca/bcca.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

namespace {

struct SimulateArgs {
  bcca::SimSpec spec;
  std::string out_dir;
};

int cmd_simulate(const SimulateArgs& args) {
  const auto [views, truth] = bcca::generate_dataset(args.spec);
  const auto manifest = bcca::write_dataset(args.out_dir, views, &truth);
  std::cout << manifest.string() << "\n";
  return 0;
}

struct FitArgs {
  std::string data_path;
  std::string algorithm = "bcorrca";
  int k = 1;
  int restarts = 1;
  std::uint64_t seed = 0;
  std::string out_path;
  double ridge = -1;
  bool informed_prior = false;
  // hyperparameter overrides (NaN / 0 = keep defaults)
  double a0 = 0, b0 = 0, v0 = 0, rel_tol = 0;
  int max_iter = 0;
};

int cmd_fit(const FitArgs& args) {
  const bcca::Algorithm alg = bcca::parse_algorithm(args.algorithm);
  const bcca::Dataset ds = bcca::read_dataset(args.data_path);
  std::filesystem::path manifest = args.data_path;
  if (std::filesystem::is_directory(manifest)) manifest /= bcca::kManifestName;
  const std::uint64_t hash = bcca::fnv1a_file(manifest);
  const std::string out = args.out_path.empty()
                              ? (manifest.parent_path() / "fit_result.txt").string()
                              : args.out_path;

  const auto t0 = std::chrono::steady_clock::now();
  if (bcca::is_variational(alg)) {
    bcca::Hyperparameters hp = bcca::hyperparameters_for(alg, ds.views, args.informed_prior);
    if (args.a0 > 0) hp.a0 = args.a0;
    if (args.b0 > 0) hp.b0 = args.b0;
    if (args.v0 > 0) hp.v0 = args.v0;
    if (args.max_iter > 0) hp.max_iter = args.max_iter;
    if (args.rel_tol > 0) hp.rel_tol = args.rel_tol;
    const bcca::FitResult fit =
        bcca::fit_with_restarts(ds.views, args.k, hp, args.restarts, args.seed);
    const auto ms = std::chrono::duration<double, std::milli>(
                        std::chrono::steady_clock::now() - t0).count();
    bcca::write_fit_result(out, fit, hp, args.algorithm, hash);
    std::printf(
        "algorithm=%s k=%d lower_bound=%.6f active_sources=%d iterations=%d converged=%d "
        "wall_time_ms=%.1f result=%s\n",
        args.algorithm.c_str(), args.k, fit.lb_trace.back(),
        bcca::count_active_sources(fit), fit.iterations, fit.converged ? 1 : 0, ms, out.c_str());
  } else {
    const auto [xa, xb] = bcca::pairwise_concatenate(ds.views);
    const bcca::EigenSolution sol = alg == bcca::Algorithm::cca
                                        ? bcca::cca(xa, xb, args.k, args.ridge)
                                        : bcca::corrca(xa, xb, args.k, args.ridge);
    const auto ms = std::chrono::duration<double, std::milli>(
                        std::chrono::steady_clock::now() - t0).count();
    bcca::write_eigen_solution(out, sol, args.algorithm, hash);
    std::string corrs;
    for (Eigen::Index i = 0; i < sol.correlations.size(); ++i) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%s%.6f", i ? "," : "", sol.correlations(i));
      corrs += buf;
    }
    std::printf("algorithm=%s k=%d correlations=%s wall_time_ms=%.1f result=%s\n",
                args.algorithm.c_str(), args.k, corrs.c_str(), ms, out.c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian correlated component analysis toolkit"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic multi-view dataset");
  simulate->add_option("--k0", sim.spec.k0, "True source count (1..4)");
  simulate->add_option("--views", sim.spec.views, "Number of views (>= 2)");
  simulate->add_option("--channels", sim.spec.channels, "Channels per view");
  simulate->add_option("--n-total", sim.spec.n_total, "Total samples, split across views");
  simulate->add_option("--snr-db", sim.spec.snr_db, "Signal-to-noise ratio in dB");
  simulate->add_option("--lambda-true", sim.spec.lambda_true, "Mixing similarity precision");
  simulate->add_option("--seed", sim.spec.seed, "RNG seed");
  simulate->add_flag("--random-phases", sim.spec.random_phases, "Random source phases");
  simulate->add_flag("--no-noise", sim.spec.no_noise, "Skip additive observation noise");
  simulate->add_option("--out", sim.out_dir, "Output directory")->required();

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "Fit one algorithm to a dataset");
  fit_cmd->add_option("--data", fit.data_path, "Dataset manifest or directory")->required();
  fit_cmd->add_option("--alg", fit.algorithm, "Algorithm")
      ->check(CLI::IsMember({"bcorrca", "gfa-like", "cca", "corrca"}));
  fit_cmd->add_option("--k", fit.k, "Components to infer");
  fit_cmd->add_option("--restarts", fit.restarts, "Random restarts (variational only)");
  fit_cmd->add_option("--seed", fit.seed, "Seed for the restart stream");
  fit_cmd->add_option("--out", fit.out_path, "Result file path");
  fit_cmd->add_option("--ridge", fit.ridge, "Ridge for the eigenvalue baselines");
  fit_cmd->add_flag("--informed-prior", fit.informed_prior,
                    "Scale the noise prior by each view's observation variance");
  fit_cmd->add_option("--a0", fit.a0, "Gamma shape override");
  fit_cmd->add_option("--b0", fit.b0, "Gamma rate override");
  fit_cmd->add_option("--v0", fit.v0, "Wishart dof override");
  fit_cmd->add_option("--max-iter", fit.max_iter, "Sweep limit override");
  fit_cmd->add_option("--rel-tol", fit.rel_tol, "Convergence tolerance override");

  std::string bench_config;
  auto* bench = app.add_subcommand("benchmark", "Run a sweep from a config file");
  bench->add_option("config", bench_config, "Sweep config file")->required();

  std::string restart_config;
  auto* restarts = app.add_subcommand("sweep-restarts",
                                      "Restart-count vs active-source accuracy sweep");
  restarts->add_option("config", restart_config, "Restart sweep config file")->required();

  try {
    app.parse(argc, argv);
    if (simulate->parsed()) return cmd_simulate(sim);
    if (fit_cmd->parsed()) return cmd_fit(fit);
    if (bench->parsed()) {
      const auto paths = bcca::run_benchmark(bcca::parse_sweep_config(bench_config));
      std::cout << paths.rows.string() << "\n" << paths.aggregate.string() << "\n";
      return 0;
    }
    if (restarts->parsed()) {
      const auto path = bcca::run_restart_sweep(bcca::parse_restart_sweep_config(restart_config));
      std::cout << path.string() << "\n";
      return 0;
    }
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  } catch (const bcca::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 1;
  } catch (const bcca::InvalidInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const bcca::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
