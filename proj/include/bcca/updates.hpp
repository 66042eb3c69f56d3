#pragma once

#include "bcca/moments.hpp"
#include "bcca/types.hpp"

#include <string>
#include <utility>

namespace bcca {

namespace detail {

template <class Scalar>
void symmetrize(Mat<Scalar>& a) {
  a = (Scalar(0.5) * (a + a.transpose())).eval();
}

// Inverts an SPD matrix via Cholesky; the result is symmetrized.
template <class Scalar>
Mat<Scalar> invert_spd(const Mat<Scalar>& a, const char* what) {
  Eigen::LLT<Mat<Scalar>> llt(a);
  if (llt.info() != Eigen::Success)
    throw NumericalError(std::string(what) + ": matrix not positive definite");
  Mat<Scalar> inv = llt.solve(Mat<Scalar>::Identity(a.rows(), a.cols()));
  symmetrize(inv);
  return inv;
}

}  // namespace detail

// Sigma_z = (sum_m E[A^T Psi A] + I)^{-1},
// mu_z,n  = Sigma_z sum_m E[A]^T E[Psi] x_n.
template <class Scalar>
void update_z(PosteriorStateT<Scalar>& st, const ViewSetT<Scalar>& data,
              MomentCacheT<Scalar>& cache) {
  const Eigen::Index k = st.components();
  Mat<Scalar> prec = Mat<Scalar>::Identity(k, k);
  for (int m = 0; m < st.view_count(); ++m) prec += cache.atpa[m];
  detail::symmetrize(prec);
  st.z_cov = detail::invert_spd(prec, "update_z");

  Mat<Scalar> rhs = Mat<Scalar>::Zero(k, st.samples());
  for (int m = 0; m < st.view_count(); ++m) {
    const Mat<Scalar> projector = st.a_mean[m].transpose() * cache.psi_mean[m];  // K x D
    rhs.noalias() += projector * data.views[m];
  }
  st.z_mean.noalias() = st.z_cov * rhs;

  refresh_z_moments(cache, st);
}

// S_Psi^{-1} = S0^{-1} + sum_n x_n x_n^T - B - B^T + E[A zz_sum A^T] with
// B = X mu_z^T mu_A^T, then v_Psi = N + v0. Under diagonal_precision only the
// diagonal of S_Psi^{-1} is kept. The per-view scatter X X^T never changes
// over a fit; callers that sweep repeatedly pass it precomputed.
template <class Scalar>
void update_psi(PosteriorStateT<Scalar>& st, const ViewSetT<Scalar>& data,
                MomentCacheT<Scalar>& cache, const HyperparametersT<Scalar>& hp,
                const std::vector<Mat<Scalar>>* scatter = nullptr) {
  const Eigen::Index d = st.channels();
  const Scalar n = static_cast<Scalar>(st.samples());
  for (int m = 0; m < st.view_count(); ++m) {
    const Mat<Scalar>& x = data.views[m];
    const Mat<Scalar>& a = st.a_mean[m];

    // E[A zz_sum A^T]_{dd'} = a_d^T zz a_d' + [d = d'] tr(zz Sigma_a_d)
    Mat<Scalar> e_azza = a * cache.zz_sum * a.transpose();
    for (Eigen::Index r = 0; r < d; ++r)
      e_azza(r, r) += cache.zz_sum.cwiseProduct(st.a_cov[m][static_cast<std::size_t>(r)]).sum();

    Mat<Scalar> cross = (x * st.z_mean.transpose()) * a.transpose();
    Mat<Scalar> scale_inv = detail::invert_spd(hp.scale_for_view(m), "update_psi: S0");
    if (scatter) {
      scale_inv += (*scatter)[static_cast<std::size_t>(m)];
    } else {
      scale_inv += x * x.transpose();
    }
    scale_inv += -cross - cross.transpose() + e_azza;
    detail::symmetrize(scale_inv);
    if (hp.noise_model == NoiseModel::diagonal_precision) {
      const Vec<Scalar> retained = scale_inv.diagonal();
      scale_inv.setZero();
      scale_inv.diagonal() = retained;
    }

    st.psi_scale[m] =
        detail::invert_spd(scale_inv, ("update_psi: view " + std::to_string(m)).c_str());
    st.psi_dof = n + hp.v0;
    refresh_psi_moments(cache, st, m);
  }
}

// Row-wise update of the mixing posterior for one view. Rows run
// sequentially because row d couples to the freshest values of every other
// row through E[psi_dd'] zz_sum E[a_d'].
template <class Scalar>
void update_a(PosteriorStateT<Scalar>& st, const ViewSetT<Scalar>& data,
              MomentCacheT<Scalar>& cache, int m) {
  const Eigen::Index d_count = st.channels();
  const Mat<Scalar>& psi = cache.psi_mean[m];
  const Scalar lambda = cache.lambda_mean;

  // column d holds sum_n E[z_n] (E[psi_(d,:)] x_n)
  Mat<Scalar> data_term = (st.z_mean * data.views[m].transpose()) * psi;

  Mat<Scalar>& a = st.a_mean[m];
  for (Eigen::Index d = 0; d < d_count; ++d) {
    Mat<Scalar> prec = psi(d, d) * cache.zz_sum;
    prec.diagonal().array() += lambda;
    detail::symmetrize(prec);
    Mat<Scalar> cov = detail::invert_spd(prec, "update_a");

    Vec<Scalar> coupled = a.transpose() * psi.col(d) - psi(d, d) * a.row(d).transpose();
    Vec<Scalar> rhs = data_term.col(d) + lambda * st.u_mean.row(d).transpose() -
                      cache.zz_sum * coupled;
    a.row(d) = (cov * rhs).transpose();
    st.a_cov[m][static_cast<std::size_t>(d)] = std::move(cov);
  }
  refresh_a_moments(cache, st, m);
}

// Joint mean update of A and U for the pinned couplings. With lambda fixed
// (1e-6 or 1e6 instead of a learned factor), alternating the per-factor mean
// updates contracts at a rate proportional to (data scale) / lambda, which
// for the tied pin means the means barely move per sweep. Both equations are
// linear in the means, so the row-wise alternation has a closed-form limit:
//   a_d^(m) = Sigma_a_d^(m) (g_d^(m) + lambda u_d)
//   u_d     = P sum_m a_d^(m),  P = diag(lambda / (M lambda + alpha_k))
// gives (I - lambda P sum_m Sigma_a_d^(m)) u_d = P sum_m Sigma_a_d^(m) g_d^(m).
// Jumping to that fixed point is the limit of valid ascent steps, so the
// bound still never decreases. Covariances keep their usual closed forms.
template <class Scalar>
void update_a_u_pinned(PosteriorStateT<Scalar>& st, const ViewSetT<Scalar>& data,
                       MomentCacheT<Scalar>& cache) {
  const Eigen::Index d_count = st.channels();
  const Eigen::Index k = st.components();
  const int m_count = st.view_count();
  const Scalar lambda = cache.lambda_mean;

  Vec<Scalar> shrink(k);
  for (Eigen::Index j = 0; j < k; ++j)
    shrink(j) = lambda / (Scalar(m_count) * lambda + cache.alpha_mean(j));

  std::vector<Mat<Scalar>> data_term(static_cast<std::size_t>(m_count));
  for (int m = 0; m < m_count; ++m)
    data_term[static_cast<std::size_t>(m)] =
        (st.z_mean * data.views[m].transpose()) * cache.psi_mean[m];

  std::vector<Mat<Scalar>> cov(static_cast<std::size_t>(m_count));
  std::vector<Vec<Scalar>> g(static_cast<std::size_t>(m_count));
  for (Eigen::Index d = 0; d < d_count; ++d) {
    Mat<Scalar> cov_sum = Mat<Scalar>::Zero(k, k);
    Vec<Scalar> smoothed = Vec<Scalar>::Zero(k);
    for (int m = 0; m < m_count; ++m) {
      const Mat<Scalar>& psi = cache.psi_mean[m];
      Mat<Scalar> prec = psi(d, d) * cache.zz_sum;
      prec.diagonal().array() += lambda;
      detail::symmetrize(prec);
      cov[static_cast<std::size_t>(m)] = detail::invert_spd(prec, "update_a");
      Vec<Scalar> coupled =
          st.a_mean[m].transpose() * psi.col(d) - psi(d, d) * st.a_mean[m].row(d).transpose();
      g[static_cast<std::size_t>(m)] =
          data_term[static_cast<std::size_t>(m)].col(d) - cache.zz_sum * coupled;
      cov_sum += cov[static_cast<std::size_t>(m)];
      smoothed += cov[static_cast<std::size_t>(m)] * g[static_cast<std::size_t>(m)];
    }
    Mat<Scalar> sys = Mat<Scalar>::Identity(k, k) - lambda * shrink.asDiagonal() * cov_sum;
    Vec<Scalar> u_row = sys.partialPivLu().solve(shrink.asDiagonal() * smoothed);
    st.u_mean.row(d) = u_row.transpose();
    for (int m = 0; m < m_count; ++m) {
      st.a_mean[m].row(d) =
          (cov[static_cast<std::size_t>(m)] * (g[static_cast<std::size_t>(m)] + lambda * u_row))
              .transpose();
      st.a_cov[m][static_cast<std::size_t>(d)] = cov[static_cast<std::size_t>(m)];
    }
  }
  for (int m = 0; m < m_count; ++m) refresh_a_moments(cache, st, m);
}

// sigma_u_k^2 = 1 / (M E[lambda] + E[alpha_k]),
// mu_u_k = sigma_u_k^2 E[lambda] sum_m E[a_k^(m)].
template <class Scalar>
void update_u(PosteriorStateT<Scalar>& st, MomentCacheT<Scalar>& cache) {
  const int m_count = st.view_count();
  const Eigen::Index k = st.components();
  const Scalar lambda = cache.lambda_mean;

  Mat<Scalar> a_sum = Mat<Scalar>::Zero(st.channels(), k);
  for (int m = 0; m < m_count; ++m) a_sum += st.a_mean[m];

  for (Eigen::Index j = 0; j < k; ++j) {
    const Scalar prec = Scalar(m_count) * lambda + cache.alpha_mean(j);
    st.u_var(j) = Scalar(1) / prec;
    st.u_mean.col(j) = (lambda / prec) * a_sum.col(j);
  }
  refresh_u_moments(cache, st);
}

// a_alpha = a0 + D/2, b_alpha_k = b0 + E[u_k^T u_k] / 2.
template <class Scalar>
void update_alpha(PosteriorStateT<Scalar>& st, MomentCacheT<Scalar>& cache,
                  const HyperparametersT<Scalar>& hp) {
  st.alpha_shape = hp.a0 + Scalar(0.5) * static_cast<Scalar>(st.channels());
  st.alpha_rate = Vec<Scalar>::Constant(st.components(), hp.b0) + Scalar(0.5) * cache.u_sqnorm;
  refresh_alpha_moments(cache, st);
}

// a_lambda = a0 + MKD/2,
// b_lambda = b0 + sum_k [ M E[u_k^T u_k]/2
//                        + sum_m ( E[a_k^T a_k]/2 - E[a_k]^T E[u_k] ) ].
// Only valid for the hierarchical coupling; the fit loop skips it otherwise.
template <class Scalar>
void update_lambda(PosteriorStateT<Scalar>& st, MomentCacheT<Scalar>& cache,
                   const HyperparametersT<Scalar>& hp) {
  const int m_count = st.view_count();
  const Eigen::Index k = st.components();
  const Eigen::Index d = st.channels();

  st.lambda_shape =
      hp.a0 + Scalar(0.5) * static_cast<Scalar>(m_count) * static_cast<Scalar>(k) *
                  static_cast<Scalar>(d);
  Scalar rate = hp.b0;
  for (Eigen::Index j = 0; j < k; ++j) {
    rate += Scalar(0.5) * static_cast<Scalar>(m_count) * cache.u_sqnorm(j);
    for (int m = 0; m < m_count; ++m)
      rate += Scalar(0.5) * cache.a_sqnorm[m](j) - st.a_mean[m].col(j).dot(st.u_mean.col(j));
  }
  if (!(rate > Scalar(0)))
    throw NumericalError("update_lambda: non-positive rate, moment cache inconsistent");
  st.lambda_rate = rate;
  refresh_lambda_moments(cache, st);
}

}  // namespace bcca
