#pragma once

#include "bcca/types.hpp"

namespace bcca {

// Expectations of the variational factors that the updates consume. Entries
// are refreshed immediately after the factor they depend on changes.
template <class Scalar>
struct MomentCacheT {
  Mat<Scalar> zz_sum;                    // sum_n E[z_n z_n^T] = N Sigma_z + mu_z mu_z^T
  std::vector<Mat<Scalar>> psi_mean;     // per view, E[Psi] = v_Psi S_Psi
  std::vector<Mat<Scalar>> atpa;         // per view, E[A^T Psi A]
  std::vector<Vec<Scalar>> a_sqnorm;     // per view, E[a_k^T a_k] per component
  Vec<Scalar> u_sqnorm;                  // E[u_k^T u_k] per component
  Vec<Scalar> alpha_mean;                // E[alpha_k]
  Scalar lambda_mean = 0;                // E[lambda]
};
using MomentCache = MomentCacheT<double>;

template <class Scalar>
void refresh_z_moments(MomentCacheT<Scalar>& cache, const PosteriorStateT<Scalar>& st) {
  const Scalar n = static_cast<Scalar>(st.samples());
  cache.zz_sum = n * st.z_cov + st.z_mean * st.z_mean.transpose();
}

// E[A^T Psi A] = mu_A^T E[Psi] mu_A + sum_d E[psi_dd] Sigma_a_d, exact under
// the row-factorised posterior on A.
template <class Scalar>
void refresh_atpa(MomentCacheT<Scalar>& cache, const PosteriorStateT<Scalar>& st, int m) {
  const Mat<Scalar>& a = st.a_mean[m];
  const Mat<Scalar>& psi = cache.psi_mean[m];
  Mat<Scalar> e = a.transpose() * psi * a;
  for (Eigen::Index d = 0; d < st.channels(); ++d)
    e += psi(d, d) * st.a_cov[m][static_cast<std::size_t>(d)];
  cache.atpa[m] = std::move(e);
}

template <class Scalar>
void refresh_psi_moments(MomentCacheT<Scalar>& cache, const PosteriorStateT<Scalar>& st, int m) {
  cache.psi_mean[m] = st.psi_dof * st.psi_scale[m];
  refresh_atpa(cache, st, m);
}

template <class Scalar>
void refresh_a_moments(MomentCacheT<Scalar>& cache, const PosteriorStateT<Scalar>& st, int m) {
  Vec<Scalar> sq = st.a_mean[m].colwise().squaredNorm().transpose();
  for (Eigen::Index d = 0; d < st.channels(); ++d)
    sq += st.a_cov[m][static_cast<std::size_t>(d)].diagonal();
  cache.a_sqnorm[m] = std::move(sq);
  refresh_atpa(cache, st, m);
}

template <class Scalar>
void refresh_u_moments(MomentCacheT<Scalar>& cache, const PosteriorStateT<Scalar>& st) {
  const Scalar d = static_cast<Scalar>(st.channels());
  cache.u_sqnorm = st.u_mean.colwise().squaredNorm().transpose();
  cache.u_sqnorm += d * st.u_var;
}

template <class Scalar>
void refresh_alpha_moments(MomentCacheT<Scalar>& cache, const PosteriorStateT<Scalar>& st) {
  cache.alpha_mean = st.alpha_shape * st.alpha_rate.cwiseInverse();
}

template <class Scalar>
void refresh_lambda_moments(MomentCacheT<Scalar>& cache, const PosteriorStateT<Scalar>& st) {
  cache.lambda_mean = st.lambda_shape / st.lambda_rate;
}

template <class Scalar>
MomentCacheT<Scalar> make_cache(const PosteriorStateT<Scalar>& st) {
  MomentCacheT<Scalar> cache;
  const int m_count = st.view_count();
  cache.psi_mean.resize(m_count);
  cache.atpa.resize(m_count);
  cache.a_sqnorm.resize(m_count);
  refresh_z_moments(cache, st);
  refresh_u_moments(cache, st);
  refresh_alpha_moments(cache, st);
  refresh_lambda_moments(cache, st);
  for (int m = 0; m < m_count; ++m) {
    cache.psi_mean[m] = st.psi_dof * st.psi_scale[m];
    refresh_a_moments(cache, st, m);
  }
  return cache;
}

}  // namespace bcca
