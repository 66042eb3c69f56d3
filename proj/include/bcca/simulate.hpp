#pragma once

#include "bcca/rng.hpp"
#include "bcca/types.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <utility>

namespace bcca {

// Synthetic multi-view scenario. All views observe the same N = n_total / M
// samples of one source realization through their own mixing matrices.
template <class Scalar>
struct SimSpecT {
  int k0 = 1;
  int views = 2;
  int channels = 6;
  long n_total = 5000;
  Scalar snr_db = 0;
  Scalar lambda_true = 1;
  std::uint64_t seed = 0;
  bool random_phases = false;
  bool no_noise = false;

  void validate() const {
    if (k0 < 1) throw InvalidInput("sim spec: k0 must be >= 1");
    if (views < 2) throw InvalidInput("sim spec: need at least 2 views");
    if (channels < 1) throw InvalidInput("sim spec: channels must be >= 1");
    if (k0 > channels) throw InvalidInput("sim spec: k0 must not exceed channels");
    if (n_total < views || n_total % views != 0)
      throw InvalidInput("sim spec: n_total must be a positive multiple of views");
    if (!(lambda_true > Scalar(0))) throw InvalidInput("sim spec: lambda_true must be positive");
  }
};
using SimSpec = SimSpecT<double>;

// Unit-power sinusoid sources, z_k(n) = sqrt(2) sin(2 pi kappa_k n / N + phi_k)
// with fixed cycle counts kappa = (17, 29, 41, 53). Distinct prime cycle
// counts keep the rows mutually near-orthogonal; each row has sample
// variance 1 up to O(1/N).
inline constexpr int kSourceCycleCounts[4] = {17, 29, 41, 53};

template <class Scalar>
Mat<Scalar> generate_sources(int k0, Eigen::Index n, std::uint64_t seed, bool random_phases) {
  if (k0 < 1) throw InvalidInput("generate_sources: k0 must be >= 1");
  if (k0 > 4)
    throw InvalidInput(
        "generate_sources: at most 4 sources supported; extend kSourceCycleCounts to add more");
  if (n < 2) throw InvalidInput("generate_sources: need at least 2 samples");

  std::mt19937_64 engine(seed);
  std::uniform_real_distribution<double> unif(0.0, 2.0 * std::numbers::pi);
  Mat<Scalar> z(k0, n);
  const Scalar amp = std::sqrt(Scalar(2));
  for (int j = 0; j < k0; ++j) {
    const double phase = random_phases ? unif(engine) : 0.0;
    const double omega = 2.0 * std::numbers::pi * kSourceCycleCounts[j] / static_cast<double>(n);
    for (Eigen::Index t = 0; t < n; ++t)
      z(j, t) = amp * static_cast<Scalar>(std::sin(omega * static_cast<double>(t) + phase));
  }
  return z;
}

// Common pattern U with standard-normal columns rescaled to norm sqrt(D)
// (unit mean-square entries), plus per-view mixings A_true^(m) = U_true +
// delta^(m) with delta entries iid N(0, 1/lambda_true). The rescaling keeps
// every component at the same nominal power, so dataset difficulty does not
// hinge on the luck of one draw.
template <class Scalar>
std::pair<Mat<Scalar>, std::vector<Mat<Scalar>>> generate_mixing(int channels, int k0, int views,
                                                                 Scalar lambda_true,
                                                                 std::uint64_t seed) {
  if (!(lambda_true > Scalar(0))) throw InvalidInput("generate_mixing: lambda_true must be > 0");
  std::mt19937_64 engine(seed);
  Mat<Scalar> u = sample_standard_normal<Scalar>(channels, k0, engine);
  for (int j = 0; j < k0; ++j)
    u.col(j) *= std::sqrt(static_cast<Scalar>(channels)) / u.col(j).norm();
  const Scalar dev = Scalar(1) / std::sqrt(lambda_true);
  std::vector<Mat<Scalar>> a;
  a.reserve(static_cast<std::size_t>(views));
  for (int m = 0; m < views; ++m)
    a.push_back(u + dev * sample_standard_normal<Scalar>(channels, k0, engine));
  return {std::move(u), std::move(a)};
}

// Adds iid Gaussian noise with variance sigma_eps^2 = P_signal / 10^(snr/10),
// where P_signal is the channel-averaged variance of the clean input. An
// infinite snr_db (or no_noise) passes the input through unchanged.
template <class Scalar>
std::pair<Mat<Scalar>, Scalar> apply_noise(const Mat<Scalar>& clean, Scalar snr_db,
                                           std::uint64_t seed, bool no_noise = false) {
  if (no_noise || std::isinf(static_cast<double>(snr_db)))
    return {clean, Scalar(0)};
  Scalar p_signal = 0;
  for (Eigen::Index r = 0; r < clean.rows(); ++r) {
    const Scalar mu = clean.row(r).mean();
    p_signal += (clean.row(r).array() - mu).square().mean();
  }
  p_signal /= static_cast<Scalar>(clean.rows());
  if (!(p_signal > Scalar(0))) throw InvalidInput("apply_noise: degenerate all-constant signal");
  const Scalar sigma2 = p_signal / std::pow(Scalar(10), snr_db / Scalar(10));

  std::mt19937_64 engine(seed);
  Mat<Scalar> noisy =
      clean + std::sqrt(sigma2) * sample_standard_normal<Scalar>(clean.rows(), clean.cols(), engine);
  return {std::move(noisy), sigma2};
}

// Full scenario: X^(m) = A_true^(m) Z + eps. The noise variance is chosen
// once from the pooled clean signal (views concatenated in time) so every
// view receives the same sigma_eps^2.
template <class Scalar>
std::pair<ViewSetT<Scalar>, GroundTruthT<Scalar>> generate_dataset(const SimSpecT<Scalar>& spec) {
  spec.validate();
  const Eigen::Index n = static_cast<Eigen::Index>(spec.n_total / spec.views);

  SeedStream seeds(spec.seed);
  const std::uint64_t source_seed = seeds.next();
  const std::uint64_t mixing_seed = seeds.next();
  const std::uint64_t noise_seed = seeds.next();

  GroundTruthT<Scalar> truth;
  truth.z_true = generate_sources<Scalar>(spec.k0, n, source_seed, spec.random_phases);
  auto [u_true, a_true] = generate_mixing<Scalar>(spec.channels, spec.k0, spec.views,
                                                  spec.lambda_true, mixing_seed);
  truth.u_true = std::move(u_true);
  truth.a_true = std::move(a_true);
  truth.lambda_true = spec.lambda_true;
  truth.snr_db = spec.snr_db;

  Mat<Scalar> clean(spec.channels, n * spec.views);
  for (int m = 0; m < spec.views; ++m)
    clean.middleCols(static_cast<Eigen::Index>(m) * n, n).noalias() =
        truth.a_true[static_cast<std::size_t>(m)] * truth.z_true;
  auto [noisy, sigma2] = apply_noise(clean, spec.snr_db, noise_seed, spec.no_noise);
  truth.noise_var = sigma2;

  ViewSetT<Scalar> data;
  data.views.reserve(static_cast<std::size_t>(spec.views));
  for (int m = 0; m < spec.views; ++m)
    data.views.push_back(noisy.middleCols(static_cast<Eigen::Index>(m) * n, n));
  return {std::move(data), std::move(truth)};
}

}  // namespace bcca
