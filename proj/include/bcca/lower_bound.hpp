#pragma once

#include "bcca/types.hpp"

#include <cmath>
#include <string>

namespace bcca {

namespace detail {

template <class Scalar>
Scalar log_det_spd(const Mat<Scalar>& a, const char* what) {
  Eigen::LLT<Mat<Scalar>> llt(a);
  if (llt.info() != Eigen::Success)
    throw NumericalError(std::string(what) + ": log-determinant of non-PD matrix");
  return Scalar(2) * llt.matrixLLT().diagonal().array().log().sum();
}

}  // namespace detail

// Compact variational lower bound, up to an iteration-independent constant:
//
//   L = 1/2 sum_m { v_Psi ln|S_Psi^(m)| + sum_d ln|Sigma_a_d^(m)| }
//       - a_lambda ln b_lambda
//       + sum_k { -a_alpha ln b_alpha_k + D/2 ln sigma_u_k^2 }
//       + N/2 ln|Sigma_z| - 1/2 ( N tr(Sigma_z) + sum_n mu_z,n^T mu_z,n ).
//
// Every prior/posterior expectation outside these terms cancels against the
// corresponding factor's own normaliser, so only differences of L across
// sweeps are meaningful. With a pinned coupling precision there is no
// lambda factor to cancel against; the -a_lambda ln b_lambda term is then
// replaced by the explicit prior coupling term
// -lambda/2 sum_{m,k} E[(a_k - u_k)^T (a_k - u_k)].
template <class Scalar>
Scalar lower_bound(const PosteriorStateT<Scalar>& st, const HyperparametersT<Scalar>& hp) {
  const Eigen::Index d = st.channels();
  const Eigen::Index k = st.components();
  const Scalar n = static_cast<Scalar>(st.samples());

  Scalar lb = 0;
  for (int m = 0; m < st.view_count(); ++m) {
    lb += Scalar(0.5) * st.psi_dof * detail::log_det_spd(st.psi_scale[m], "lower_bound: S_Psi");
    for (Eigen::Index r = 0; r < d; ++r)
      lb += Scalar(0.5) * detail::log_det_spd(st.a_cov[m][static_cast<std::size_t>(r)],
                                              "lower_bound: Sigma_a");
  }

  if (hp.coupling == Coupling::hierarchical) {
    lb -= st.lambda_shape * std::log(st.lambda_rate);
  } else {
    const Scalar lambda = st.lambda_shape / st.lambda_rate;  // pinned value
    Scalar coupling_quad = 0;
    for (int m = 0; m < st.view_count(); ++m) {
      for (Eigen::Index j = 0; j < k; ++j) {
        Scalar a_sq = st.a_mean[m].col(j).squaredNorm();
        for (Eigen::Index r = 0; r < d; ++r)
          a_sq += st.a_cov[m][static_cast<std::size_t>(r)](j, j);
        const Scalar u_sq = st.u_mean.col(j).squaredNorm() + static_cast<Scalar>(d) * st.u_var(j);
        coupling_quad += a_sq - Scalar(2) * st.a_mean[m].col(j).dot(st.u_mean.col(j)) + u_sq;
      }
    }
    lb -= Scalar(0.5) * lambda * coupling_quad;
  }

  for (Eigen::Index j = 0; j < k; ++j) {
    lb -= st.alpha_shape * std::log(st.alpha_rate(j));
    lb += Scalar(0.5) * static_cast<Scalar>(d) * std::log(st.u_var(j));
  }

  lb += Scalar(0.5) * n * detail::log_det_spd(st.z_cov, "lower_bound: Sigma_z");
  lb -= Scalar(0.5) * (n * st.z_cov.trace() + st.z_mean.squaredNorm());
  return lb;
}

}  // namespace bcca
