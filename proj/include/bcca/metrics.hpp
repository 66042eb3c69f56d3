#pragma once

#include "bcca/assignment.hpp"
#include "bcca/types.hpp"

#include <cmath>
#include <string>
#include <utility>
#include <vector>

namespace bcca {

namespace detail {

template <class Derived>
typename Derived::Scalar population_variance(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  const Scalar mu = x.mean();
  return (x.array() - mu).square().mean();
}

}  // namespace detail

// Pearson correlation of two equal-length series; a constant series
// correlates 0 with everything so degenerate fits score 0 instead of NaN.
template <class Scalar>
Scalar pearson_correlation(const Vec<Scalar>& a, const Vec<Scalar>& b) {
  if (a.size() != b.size() || a.size() < 2)
    throw InvalidInput("pearson_correlation: length mismatch or too short");
  const Scalar mu_a = a.mean(), mu_b = b.mean();
  const auto da = (a.array() - mu_a).eval();
  const auto db = (b.array() - mu_b).eval();
  const Scalar va = da.square().sum(), vb = db.square().sum();
  if (!(va > Scalar(0)) || !(vb > Scalar(0))) return Scalar(0);
  return (da * db).sum() / std::sqrt(va * vb);
}

template <class Scalar>
struct MatchResultT {
  std::vector<int> assignment;  // true-source index -> estimated-source index
  Scalar mean_abs_corr = 0;
  Vec<Scalar> per_pair_corr;  // signed correlation of each matched pair
};
using MatchResult = MatchResultT<double>;

namespace detail {

// Exhaustive search over injective assignments of true rows to estimated
// rows, maximizing the mean absolute correlation.
template <class Scalar>
std::vector<int> best_assignment_exhaustive(const Mat<Scalar>& abs_corr) {
  const int k0 = static_cast<int>(abs_corr.rows());
  const int k = static_cast<int>(abs_corr.cols());
  std::vector<int> current(static_cast<std::size_t>(k0), -1);
  std::vector<int> best(static_cast<std::size_t>(k0), -1);
  Scalar best_sum = -Scalar(1);
  std::vector<bool> used(static_cast<std::size_t>(k), false);

  auto recurse = [&](auto&& self, int row, Scalar sum) -> void {
    if (row == k0) {
      if (sum > best_sum) {
        best_sum = sum;
        best = current;
      }
      return;
    }
    for (int c = 0; c < k; ++c) {
      if (used[static_cast<std::size_t>(c)]) continue;
      used[static_cast<std::size_t>(c)] = true;
      current[static_cast<std::size_t>(row)] = c;
      self(self, row + 1, sum + abs_corr(row, c));
      used[static_cast<std::size_t>(c)] = false;
    }
  };
  recurse(recurse, 0, Scalar(0));
  return best;
}

// Hungarian route for larger K: pad the matrix square with zero-cost dummy
// rows; padding is constant so it cannot distort the real rows' assignment.
template <class Scalar>
std::vector<int> best_assignment_hungarian(const Mat<Scalar>& abs_corr) {
  const int k0 = static_cast<int>(abs_corr.rows());
  const int k = static_cast<int>(abs_corr.cols());
  Mat<Scalar> cost = Mat<Scalar>::Zero(k, k);
  cost.topRows(k0) = -abs_corr;
  std::vector<int> full = solve_assignment(cost);
  return {full.begin(), full.begin() + k0};
}

}  // namespace detail

// Pairs each true source with one estimated source without replacement so
// the mean absolute Pearson correlation is maximal. Sign- and
// scale-invariant by construction.
template <class Scalar>
MatchResultT<Scalar> match_sources(const Mat<Scalar>& z_est, const Mat<Scalar>& z_true) {
  const int k = static_cast<int>(z_est.rows());
  const int k0 = static_cast<int>(z_true.rows());
  if (k0 < 1 || k < k0) throw InvalidInput("match_sources: need K >= K0 >= 1");
  if (z_est.cols() != z_true.cols() || z_true.cols() < 3)
    throw InvalidInput("match_sources: need matching N >= 3");

  Mat<Scalar> corr(k0, k);
  for (int i = 0; i < k0; ++i)
    for (int j = 0; j < k; ++j)
      corr(i, j) = pearson_correlation<Scalar>(z_true.row(i).transpose(),
                                               z_est.row(j).transpose());
  const Mat<Scalar> abs_corr = corr.cwiseAbs();

  MatchResultT<Scalar> result;
  result.assignment = (k <= 8) ? detail::best_assignment_exhaustive(abs_corr)
                               : detail::best_assignment_hungarian(abs_corr);
  result.per_pair_corr = Vec<Scalar>(k0);
  for (int i = 0; i < k0; ++i)
    result.per_pair_corr(i) = corr(i, result.assignment[static_cast<std::size_t>(i)]);
  result.mean_abs_corr = result.per_pair_corr.cwiseAbs().mean();
  return result;
}

// A component is active when its reconstructed variance -- source variance
// times the variance of its inferred pattern's entries -- is at least
// rel_threshold of the largest component's. The pattern here is the common
// pattern U: that is the factor the ARD prior actually shuts off, so pruned
// components fall many decades below the threshold. Per-view mixing columns
// keep a noise-fitting floor of order 1/sqrt(lambda) even for pruned
// components and would never clear a 1e-3 relative cut.
template <class Scalar>
int count_active_sources(const FitResultT<Scalar>& fit, Scalar rel_threshold = Scalar(1e-3),
                         std::vector<std::string>* diagnostics = nullptr) {
  const PosteriorStateT<Scalar>& st = fit.posterior;
  const Eigen::Index k = st.components();

  Vec<Scalar> recon_var(k);
  for (Eigen::Index j = 0; j < k; ++j)
    recon_var(j) = detail::population_variance(st.z_mean.row(j)) *
                   detail::population_variance(st.u_mean.col(j));
  const Scalar vmax = recon_var.maxCoeff();
  if (!(vmax > Scalar(0))) {
    if (diagnostics) diagnostics->push_back("count_active_sources: degenerate fit, all zero");
    return 0;
  }
  return static_cast<int>((recon_var.array() >= rel_threshold * vmax).count());
}

// Average within-view variance: mean over views of Var(delta_m), the
// variance taken over the entries of each view's quantity.
template <class Scalar>
Scalar within_view_variance(const std::vector<Vec<Scalar>>& quantities) {
  if (quantities.empty()) throw InvalidInput("within_view_variance: no views");
  Scalar acc = 0;
  for (const auto& q : quantities) acc += detail::population_variance(q);
  return acc / static_cast<Scalar>(quantities.size());
}

// Average between-view variance: mean over unordered pairs of
// Var(delta_m - delta_i).
template <class Scalar>
Scalar between_view_variance(const std::vector<Vec<Scalar>>& quantities) {
  const int m_count = static_cast<int>(quantities.size());
  if (m_count < 2) throw InvalidInput("between_view_variance: need at least 2 views");
  Scalar acc = 0;
  for (int m = 0; m < m_count; ++m)
    for (int i = m + 1; i < m_count; ++i)
      acc += detail::population_variance((quantities[static_cast<std::size_t>(m)] -
                                          quantities[static_cast<std::size_t>(i)]).eval());
  return Scalar(2) / (static_cast<Scalar>(m_count) * static_cast<Scalar>(m_count - 1)) * acc;
}

// Matrix overloads treat each view's quantity as the flat collection of its
// entries; pass rows or columns to select an axis.
template <class Scalar>
Scalar within_view_variance(const std::vector<Mat<Scalar>>& quantities) {
  std::vector<Vec<Scalar>> flat;
  flat.reserve(quantities.size());
  for (const auto& q : quantities) flat.push_back(q.reshaped());
  return within_view_variance(flat);
}

template <class Scalar>
Scalar between_view_variance(const std::vector<Mat<Scalar>>& quantities) {
  std::vector<Vec<Scalar>> flat;
  flat.reserve(quantities.size());
  for (const auto& q : quantities) flat.push_back(q.reshaped());
  return between_view_variance(flat);
}

// Proportion of variance explained per view by the rank-K reconstruction
// X_hat = a_mean z_mean: (SST - SSE) / SST.
template <class Scalar>
Vec<Scalar> proportion_variance_explained(const ViewSetT<Scalar>& data,
                                          const std::vector<Mat<Scalar>>& a_mean,
                                          const Mat<Scalar>& z_mean) {
  data.validate();
  if (a_mean.size() != data.views.size())
    throw InvalidInput("pve: a_mean must have one matrix per view");
  Vec<Scalar> pve(data.view_count());
  for (int m = 0; m < data.view_count(); ++m) {
    const Mat<Scalar>& x = data.views[static_cast<std::size_t>(m)];
    const Scalar mu = x.mean();
    const Scalar sst = (x.array() - mu).square().sum();
    if (!(sst > Scalar(0)))
      throw InvalidInput("pve: degenerate constant view " + std::to_string(m));
    const Scalar sse = (x - a_mean[static_cast<std::size_t>(m)] * z_mean).squaredNorm();
    pve(m) = (sst - sse) / sst;
  }
  return pve;
}

// Per component, multiplies pattern columns by std(z_k) and divides z_k by
// it, leaving the product a z unchanged and giving unit-std source rows.
// Zero-variance components are skipped with a diagnostic.
template <class Scalar>
std::pair<std::vector<Mat<Scalar>>, Mat<Scalar>> normalize_scale(
    std::vector<Mat<Scalar>> a, Mat<Scalar> z, std::vector<std::string>* diagnostics = nullptr) {
  for (Eigen::Index j = 0; j < z.rows(); ++j) {
    const Scalar sd = std::sqrt(detail::population_variance(z.row(j)));
    if (!(sd > Scalar(0))) {
      if (diagnostics)
        diagnostics->push_back("normalize_scale: component " + std::to_string(j) +
                               " has zero variance, skipped");
      continue;
    }
    for (auto& am : a) am.col(j) *= sd;
    z.row(j) /= sd;
  }
  return {std::move(a), std::move(z)};
}

template <class Scalar>
struct BackwardModelT {
  std::vector<Mat<Scalar>> filters;     // per view, D x K
  std::vector<Mat<Scalar>> components;  // per view, K x N, rows w_k^T X
};
using BackwardModel = BackwardModelT<double>;

// Forward-model-to-filter transform W^(m) = (R_xx^(m) + ridge I)^{-1} A^(m);
// the view-specific component series are y = W^T X.
template <class Scalar>
BackwardModelT<Scalar> backward_filters(const ViewSetT<Scalar>& data,
                                        const std::vector<Mat<Scalar>>& a_mean, Scalar ridge) {
  data.validate();
  if (a_mean.size() != data.views.size())
    throw InvalidInput("backward_filters: a_mean must have one matrix per view");
  if (ridge < Scalar(0)) throw InvalidInput("backward_filters: ridge must be >= 0");
  const Scalar inv_n = Scalar(1) / static_cast<Scalar>(data.samples());

  BackwardModelT<Scalar> model;
  for (int m = 0; m < data.view_count(); ++m) {
    const Mat<Scalar>& x = data.views[static_cast<std::size_t>(m)];
    Mat<Scalar> centered = x;
    centered.colwise() -= x.rowwise().mean();
    Mat<Scalar> rxx = inv_n * (centered * centered.transpose());
    rxx.diagonal().array() += ridge;
    Eigen::LLT<Mat<Scalar>> llt(rxx);
    if (llt.info() != Eigen::Success)
      throw NumericalError("backward_filters: ill-conditioned covariance in view " +
                           std::to_string(m));
    Mat<Scalar> w = llt.solve(a_mean[static_cast<std::size_t>(m)]);
    model.components.push_back(w.transpose() * x);
    model.filters.push_back(std::move(w));
  }
  return model;
}

}  // namespace bcca
