#pragma once

#include "bcca/lower_bound.hpp"
#include "bcca/moments.hpp"
#include "bcca/rng.hpp"
#include "bcca/types.hpp"
#include "bcca/updates.hpp"

#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace bcca {

// Starting point: E[alpha] = E[lambda] = 1 (pinned couplings start at their
// pin instead), a_mean iid N(0, 1/K), a_cov = I, u = 0 with unit variance,
// z = 0 with identity covariance, and E[Psi] = I via psi_scale = I / v0.
// Deterministic given the seed.
template <class Scalar>
PosteriorStateT<Scalar> init_posterior(const ViewSetT<Scalar>& data, int k,
                                       const HyperparametersT<Scalar>& hp, std::uint64_t seed,
                                       std::vector<std::string>* diagnostics = nullptr) {
  data.validate();
  hp.validate(data.channels());
  if (!hp.s0_per_view.empty() &&
      hp.s0_per_view.size() != static_cast<std::size_t>(data.view_count()))
    throw InvalidInput("init_posterior: per-view S0 count does not match the view count");
  if (k < 1) throw InvalidInput("init_posterior: K must be >= 1");
  const Eigen::Index d = data.channels();
  const Eigen::Index n = data.samples();
  const int m_count = data.view_count();
  if (diagnostics && k > static_cast<int>(d) * m_count)
    diagnostics->push_back("K = " + std::to_string(k) +
                           " exceeds D*M = " + std::to_string(d * m_count) +
                           "; expect heavy component pruning");

  std::mt19937_64 engine(seed);
  PosteriorStateT<Scalar> st;
  st.z_mean = Mat<Scalar>::Zero(k, n);
  st.z_cov = Mat<Scalar>::Identity(k, k);
  st.psi_scale.assign(m_count, Mat<Scalar>::Identity(d, d) / hp.v0);
  st.psi_dof = hp.v0;
  st.a_mean.reserve(m_count);
  const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(k));
  for (int m = 0; m < m_count; ++m)
    st.a_mean.push_back(scale * sample_standard_normal<Scalar>(d, k, engine));
  st.a_cov.assign(m_count, std::vector<Mat<Scalar>>(static_cast<std::size_t>(d),
                                                    Mat<Scalar>::Identity(k, k)));
  st.u_mean = Mat<Scalar>::Zero(d, k);
  st.u_var = Vec<Scalar>::Ones(k);
  st.alpha_shape = Scalar(1);
  st.alpha_rate = Vec<Scalar>::Ones(k);
  switch (hp.coupling) {
    case Coupling::hierarchical:
      st.lambda_shape = Scalar(1);
      st.lambda_rate = Scalar(1);
      break;
    case Coupling::independent:
      st.lambda_shape = Scalar(kLambdaPinIndependent);
      st.lambda_rate = Scalar(1);
      break;
    case Coupling::tied:
      st.lambda_shape = Scalar(kLambdaPinTied);
      st.lambda_rate = Scalar(1);
      break;
  }
  return st;
}

// Coordinate-ascent fit. Factors are swept in the order Z, Psi, A (per
// view), U, alpha, lambda, with moment-cache entries refreshed inside each
// update. The bound is evaluated right after the Z and Psi refresh of the
// following sweep: at that point every factor parameter satisfies its own
// normaliser identity, so the compact expression equals the full bound up to
// a constant and the recorded trace is non-decreasing under exact
// arithmetic. Convergence: |L_t - L_{t-1}| / (|L_t| + 1) < rel_tol.
template <class Scalar>
FitResultT<Scalar> fit(const ViewSetT<Scalar>& data, int k, const HyperparametersT<Scalar>& hp,
                       std::uint64_t seed) {
  FitResultT<Scalar> result;
  result.seed = seed;
  PosteriorStateT<Scalar> st = init_posterior(data, k, hp, seed, &result.diagnostics);
  MomentCacheT<Scalar> cache = make_cache(st);
  const bool hierarchical = hp.coupling == Coupling::hierarchical;

  std::vector<Mat<Scalar>> scatter;  // per view X X^T, constant over the fit
  scatter.reserve(data.views.size());
  for (const auto& x : data.views) scatter.push_back(x * x.transpose());

  int sweep = 0;
  try {
    update_z(st, data, cache);
    update_psi(st, data, cache, hp, &scatter);
    Scalar prev = 0;
    for (sweep = 1; sweep <= hp.max_iter; ++sweep) {
      if (hierarchical) {
        for (int m = 0; m < st.view_count(); ++m) update_a(st, data, cache, m);
      } else {
        // pinned lambda: A and U means go to their joint fixed point
        update_a_u_pinned(st, data, cache);
      }
      update_u(st, cache);
      update_alpha(st, cache, hp);
      if (hierarchical) update_lambda(st, cache, hp);
      update_z(st, data, cache);
      update_psi(st, data, cache, hp, &scatter);

      const Scalar lb = lower_bound(st, hp);
      result.lb_trace.push_back(lb);
      if (sweep > 1 && std::abs(lb - prev) / (std::abs(lb) + Scalar(1)) < hp.rel_tol) {
        result.converged = true;
        break;
      }
      prev = lb;
    }
  } catch (const NumericalError& e) {
    throw NumericalError(std::string(e.what()) + " (sweep " + std::to_string(sweep) + ")");
  }

  result.iterations = std::min(sweep, hp.max_iter);
  result.lambda_point = st.lambda_shape / st.lambda_rate;
  result.alpha_point = st.alpha_shape * st.alpha_rate.cwiseInverse();
  result.posterior = std::move(st);
  return result;
}

// Runs fit under n_restarts seeds drawn from the stream and keeps the run
// with the highest final bound; ties go to the lowest restart index.
template <class Scalar>
FitResultT<Scalar> fit_with_restarts(const ViewSetT<Scalar>& data, int k,
                                     const HyperparametersT<Scalar>& hp, int n_restarts,
                                     std::uint64_t stream_seed) {
  if (n_restarts < 1) throw InvalidInput("fit_with_restarts: n_restarts must be >= 1");
  SeedStream stream(stream_seed);
  std::optional<FitResultT<Scalar>> best;
  std::vector<std::string> failures;
  for (int i = 0; i < n_restarts; ++i) {
    const std::uint64_t seed = stream.next();
    try {
      FitResultT<Scalar> r = fit(data, k, hp, seed);
      if (!best || r.lb_trace.back() > best->lb_trace.back()) best = std::move(r);
    } catch (const NumericalError& e) {
      failures.push_back("restart " + std::to_string(i) + " (seed " + std::to_string(seed) +
                         "): " + e.what());
    }
  }
  if (!best) {
    std::string msg = "all restarts failed numerically:";
    for (const auto& f : failures) msg += "\n  " + f;
    throw NumericalError(msg);
  }
  return *best;
}

}  // namespace bcca
