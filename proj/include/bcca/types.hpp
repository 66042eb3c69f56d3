#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace bcca {

template <class Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <class Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatX = Mat<double>;
using VecX = Vec<double>;

// Error taxonomy. InvalidInput covers misuse of the public surface (CLI exit
// code 2), NumericalError covers breakdown inside an otherwise valid run
// (exit code 1), IoError covers file problems.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InvalidInput : Error {
  using Error::Error;
};
struct NumericalError : Error {
  using Error::Error;
};
struct IoError : Error {
  using Error::Error;
};

enum class NoiseModel { full_precision, diagonal_precision };
enum class Coupling { hierarchical, independent, tied };

// Fixed coupling precisions for the non-hierarchical variants. They bracket
// the simulated similarity range 1e-3..1e3 by three decades on either side.
inline constexpr double kLambdaPinIndependent = 1e-6;
inline constexpr double kLambdaPinTied = 1e6;

inline const char* to_string(NoiseModel m) {
  return m == NoiseModel::full_precision ? "full_precision" : "diagonal_precision";
}
inline const char* to_string(Coupling c) {
  switch (c) {
    case Coupling::hierarchical: return "hierarchical";
    case Coupling::independent: return "independent";
    default: return "tied";
  }
}

// M parallel observation matrices, one per view; every view is channels x
// samples with identical dimensions.
template <class Scalar>
struct ViewSetT {
  std::vector<Mat<Scalar>> views;

  int view_count() const { return static_cast<int>(views.size()); }
  Eigen::Index channels() const { return views.empty() ? 0 : views.front().rows(); }
  Eigen::Index samples() const { return views.empty() ? 0 : views.front().cols(); }

  void validate() const {
    if (views.empty()) throw InvalidInput("view set: no views");
    const Eigen::Index d = views.front().rows();
    const Eigen::Index n = views.front().cols();
    if (d < 1 || n < 1) throw InvalidInput("view set: empty view matrix");
    for (std::size_t m = 0; m < views.size(); ++m) {
      if (views[m].rows() != d || views[m].cols() != n)
        throw InvalidInput("view set: view " + std::to_string(m) + " has mismatched shape");
      if (!views[m].allFinite())
        throw InvalidInput("view set: view " + std::to_string(m) + " contains non-finite entries");
    }
  }
};
using ViewSet = ViewSetT<double>;

template <class Scalar>
struct HyperparametersT {
  Mat<Scalar> S0;     // Wishart scale for the noise precision, D x D SPD
  Scalar v0 = 0;      // Wishart degrees of freedom, >= D
  Scalar a0 = 1e-3;   // gamma shape for both alpha and lambda
  Scalar b0 = 1e-3;   // gamma rate for both alpha and lambda
  NoiseModel noise_model = NoiseModel::full_precision;
  Coupling coupling = Coupling::hierarchical;
  int max_iter = 500;
  Scalar rel_tol = Scalar(1e-9);
  // Optional per-view Wishart scales (e.g. from informed_noise_prior). When
  // non-empty this overrides S0 and must have one entry per view.
  std::vector<Mat<Scalar>> s0_per_view;

  void validate(Eigen::Index channels) const {
    if (S0.rows() != channels || S0.cols() != channels)
      throw InvalidInput("hyperparameters: S0 must be D x D");
    if (!S0.isApprox(S0.transpose(), Scalar(1e-10)))
      throw InvalidInput("hyperparameters: S0 must be symmetric");
    if (v0 < Scalar(channels)) throw InvalidInput("hyperparameters: v0 must be >= D");
    if (!(a0 > Scalar(0)) || !(b0 > Scalar(0)))
      throw InvalidInput("hyperparameters: a0 and b0 must be positive");
    if (max_iter < 1) throw InvalidInput("hyperparameters: max_iter must be positive");
    if (!(rel_tol > Scalar(0))) throw InvalidInput("hyperparameters: rel_tol must be positive");
    for (const auto& s : s0_per_view)
      if (s.rows() != channels || s.cols() != channels)
        throw InvalidInput("hyperparameters: per-view S0 must be D x D");
  }

  const Mat<Scalar>& scale_for_view(int m) const {
    if (s0_per_view.empty()) return S0;
    return s0_per_view.at(static_cast<std::size_t>(m));
  }
};
using Hyperparameters = HyperparametersT<double>;

// Non-informative defaults: S0 = 1e-3 I, v0 = D + 1, a0 = b0 = 1e-3.
template <class Scalar = double>
HyperparametersT<Scalar> default_hyperparameters(int channels) {
  if (channels < 1) throw InvalidInput("default_hyperparameters: D must be >= 1");
  HyperparametersT<Scalar> hp;
  hp.S0 = Scalar(1e-3) * Mat<Scalar>::Identity(channels, channels);
  hp.v0 = Scalar(channels + 1);
  hp.a0 = Scalar(1e-3);
  hp.b0 = Scalar(1e-3);
  return hp;
}

// Data-informed Wishart scales: S0^(m) = var[X^(m)] I with the variance
// pooled over all D*N entries of the view. per_channel instead puts each
// channel's own variance on the diagonal.
template <class Scalar>
std::vector<Mat<Scalar>> informed_noise_prior(const ViewSetT<Scalar>& data, Scalar v0,
                                              bool per_channel = false) {
  data.validate();
  const Eigen::Index d = data.channels();
  if (v0 < Scalar(d)) throw InvalidInput("informed_noise_prior: v0 must be >= D");
  std::vector<Mat<Scalar>> scales;
  scales.reserve(data.views.size());
  for (std::size_t m = 0; m < data.views.size(); ++m) {
    const Mat<Scalar>& x = data.views[m];
    if (per_channel) {
      Vec<Scalar> var(d);
      for (Eigen::Index r = 0; r < d; ++r) {
        const Scalar mu = x.row(r).mean();
        var(r) = (x.row(r).array() - mu).square().mean();
        if (!(var(r) > Scalar(0)))
          throw InvalidInput("informed_noise_prior: zero-variance channel in view " +
                             std::to_string(m));
      }
      scales.push_back(var.asDiagonal());
    } else {
      const Scalar mu = x.mean();
      const Scalar var = (x.array() - mu).square().mean();
      if (!(var > Scalar(0)))
        throw InvalidInput("informed_noise_prior: zero-variance view " + std::to_string(m));
      scales.push_back(var * Mat<Scalar>::Identity(d, d));
    }
  }
  return scales;
}

// All variational factor parameters. Updated in place, one factor at a time.
template <class Scalar>
struct PosteriorStateT {
  Mat<Scalar> z_mean;  // K x N
  Mat<Scalar> z_cov;   // K x K, shared over samples

  std::vector<Mat<Scalar>> psi_scale;  // per view, D x D
  Scalar psi_dof = 0;                  // shared over views

  std::vector<Mat<Scalar>> a_mean;               // per view, D x K
  std::vector<std::vector<Mat<Scalar>>> a_cov;   // per view, per row d, K x K

  Mat<Scalar> u_mean;  // D x K
  Vec<Scalar> u_var;   // per component isotropic variance

  Scalar alpha_shape = 0;
  Vec<Scalar> alpha_rate;  // per component

  Scalar lambda_shape = 0;
  Scalar lambda_rate = 0;

  int view_count() const { return static_cast<int>(a_mean.size()); }
  Eigen::Index channels() const { return u_mean.rows(); }
  Eigen::Index components() const { return z_mean.rows(); }
  Eigen::Index samples() const { return z_mean.cols(); }
};
using PosteriorState = PosteriorStateT<double>;

namespace detail {
template <class Scalar>
void require_spd(const Mat<Scalar>& a, const std::string& what) {
  if (a.rows() != a.cols()) throw InvalidInput("state: " + what + " is not square");
  if (!a.allFinite()) throw InvalidInput("state: " + what + " has non-finite entries");
  const Scalar scale = Scalar(1) + a.template lpNorm<Eigen::Infinity>();
  if ((a - a.transpose()).template lpNorm<Eigen::Infinity>() > Scalar(1e-8) * scale)
    throw InvalidInput("state: " + what + " is not symmetric");
  Eigen::LLT<Mat<Scalar>> llt(a);
  if (llt.info() != Eigen::Success)
    throw InvalidInput("state: " + what + " is not positive definite");
}
}  // namespace detail

// Asserts the dimension and positivity invariants of a posterior state.
// Tests run this after every individual update.
template <class Scalar>
void validate_state(const PosteriorStateT<Scalar>& st) {
  const int m_count = st.view_count();
  const Eigen::Index d = st.channels();
  const Eigen::Index k = st.components();
  const Eigen::Index n = st.samples();
  if (m_count < 1 || d < 1 || k < 1 || n < 1) throw InvalidInput("state: empty dimensions");
  if (st.z_cov.rows() != k) throw InvalidInput("state: z_cov dimension mismatch");
  detail::require_spd(st.z_cov, "z_cov");
  if (!st.z_mean.allFinite()) throw InvalidInput("state: z_mean has non-finite entries");
  if (static_cast<int>(st.psi_scale.size()) != m_count ||
      static_cast<int>(st.a_cov.size()) != m_count)
    throw InvalidInput("state: per-view container size mismatch");
  if (!(st.psi_dof > Scalar(0))) throw InvalidInput("state: psi_dof must be positive");
  for (int m = 0; m < m_count; ++m) {
    if (st.psi_scale[m].rows() != d) throw InvalidInput("state: psi_scale dimension mismatch");
    detail::require_spd(st.psi_scale[m], "psi_scale[" + std::to_string(m) + "]");
    if (st.a_mean[m].rows() != d || st.a_mean[m].cols() != k)
      throw InvalidInput("state: a_mean dimension mismatch");
    if (!st.a_mean[m].allFinite()) throw InvalidInput("state: a_mean has non-finite entries");
    if (static_cast<Eigen::Index>(st.a_cov[m].size()) != d)
      throw InvalidInput("state: a_cov row count mismatch");
    for (Eigen::Index r = 0; r < d; ++r)
      detail::require_spd(st.a_cov[m][static_cast<std::size_t>(r)],
                          "a_cov[" + std::to_string(m) + "][" + std::to_string(r) + "]");
  }
  if (st.u_mean.rows() != d || st.u_mean.cols() != k)
    throw InvalidInput("state: u_mean dimension mismatch");
  if (!st.u_mean.allFinite()) throw InvalidInput("state: u_mean has non-finite entries");
  if (st.u_var.size() != k || !(st.u_var.minCoeff() > Scalar(0)))
    throw InvalidInput("state: u_var must be positive per component");
  if (!(st.alpha_shape > Scalar(0))) throw InvalidInput("state: alpha_shape must be positive");
  if (st.alpha_rate.size() != k || !(st.alpha_rate.minCoeff() > Scalar(0)))
    throw InvalidInput("state: alpha_rate must be positive per component");
  if (!(st.lambda_shape > Scalar(0)) || !(st.lambda_rate > Scalar(0)))
    throw InvalidInput("state: lambda parameters must be positive");
}

template <class Scalar>
struct FitResultT {
  PosteriorStateT<Scalar> posterior;
  std::vector<Scalar> lb_trace;  // one lower-bound value per sweep
  int iterations = 0;
  bool converged = false;
  Scalar lambda_point = 0;  // posterior mean lambda_shape / lambda_rate
  Vec<Scalar> alpha_point;
  std::uint64_t seed = 0;
  std::vector<std::string> diagnostics;
};
using FitResult = FitResultT<double>;

template <class Scalar>
struct GroundTruthT {
  Mat<Scalar> z_true;                // K0 x N
  Mat<Scalar> u_true;                // D x K0
  std::vector<Mat<Scalar>> a_true;   // per view, D x K0
  Scalar lambda_true = 0;
  Scalar noise_var = 0;
  Scalar snr_db = 0;
};
using GroundTruth = GroundTruthT<double>;

}  // namespace bcca
