#pragma once

// Independent reference implementations for the update equations and the
// evaluation metrics, written as literal sums over indices. These stay
// deliberately naive: every expectation is expanded element by element and
// inverses go through Eigen's generic .inverse() instead of the Cholesky
// path the library uses.

#include "bcca/types.hpp"

#include <Eigen/Dense>

#include <utility>
#include <vector>

namespace oracle {

using bcca::Hyperparameters;
using bcca::MatX;
using bcca::PosteriorState;
using bcca::VecX;
using bcca::ViewSet;

inline MatX zz_sum_loops(const PosteriorState& st) {
  const Eigen::Index k = st.components();
  const Eigen::Index n = st.samples();
  MatX zz = static_cast<double>(n) * st.z_cov;
  for (Eigen::Index t = 0; t < n; ++t)
    for (Eigen::Index a = 0; a < k; ++a)
      for (Eigen::Index b = 0; b < k; ++b) zz(a, b) += st.z_mean(a, t) * st.z_mean(b, t);
  return zz;
}

inline MatX psi_mean_of(const PosteriorState& st, int m) { return st.psi_dof * st.psi_scale[m]; }

// E[A^T Psi A](k,k') = sum_{d,d'} E[psi_dd'] E[a_dk a_d'k'],
// E[a_dk a_d'k'] = mu_dk mu_d'k' + [d = d'] Sigma_a_d(k,k').
inline MatX e_at_psi_a_loops(const PosteriorState& st, int m) {
  const Eigen::Index d_count = st.channels();
  const Eigen::Index k = st.components();
  const MatX psi = psi_mean_of(st, m);
  MatX out = MatX::Zero(k, k);
  for (Eigen::Index a = 0; a < k; ++a)
    for (Eigen::Index b = 0; b < k; ++b)
      for (Eigen::Index d = 0; d < d_count; ++d)
        for (Eigen::Index e = 0; e < d_count; ++e) {
          double second = st.a_mean[m](d, a) * st.a_mean[m](e, b);
          if (d == e) second += st.a_cov[m][static_cast<std::size_t>(d)](a, b);
          out(a, b) += psi(d, e) * second;
        }
  return out;
}

struct ZUpdate {
  MatX cov;
  MatX mean;
};

inline ZUpdate update_z_loops(const PosteriorState& st, const ViewSet& data) {
  const Eigen::Index k = st.components();
  const Eigen::Index n = st.samples();
  MatX prec = MatX::Identity(k, k);
  for (int m = 0; m < st.view_count(); ++m) prec += e_at_psi_a_loops(st, m);
  ZUpdate out;
  out.cov = prec.inverse();
  out.mean = MatX::Zero(k, n);
  for (Eigen::Index t = 0; t < n; ++t) {
    VecX rhs = VecX::Zero(k);
    for (int m = 0; m < st.view_count(); ++m) {
      const MatX psi = psi_mean_of(st, m);
      for (Eigen::Index a = 0; a < k; ++a)
        for (Eigen::Index d = 0; d < st.channels(); ++d)
          for (Eigen::Index e = 0; e < st.channels(); ++e)
            rhs(a) += st.a_mean[m](d, a) * psi(d, e) * data.views[static_cast<std::size_t>(m)](e, t);
    }
    out.mean.col(t) = out.cov * rhs;
  }
  return out;
}

struct PsiUpdate {
  std::vector<MatX> scale;
  double dof = 0;
};

inline PsiUpdate update_psi_loops(const PosteriorState& st, const ViewSet& data,
                                  const Hyperparameters& hp) {
  const Eigen::Index d_count = st.channels();
  const Eigen::Index n = st.samples();
  const MatX zz = zz_sum_loops(st);
  PsiUpdate out;
  out.dof = static_cast<double>(n) + hp.v0;
  for (int m = 0; m < st.view_count(); ++m) {
    const MatX& x = data.views[static_cast<std::size_t>(m)];
    MatX sinv = hp.scale_for_view(m).inverse();
    for (Eigen::Index d = 0; d < d_count; ++d)
      for (Eigen::Index e = 0; e < d_count; ++e) {
        double cxx = 0, cross_de = 0, cross_ed = 0, azza = 0;
        for (Eigen::Index t = 0; t < n; ++t) {
          cxx += x(d, t) * x(e, t);
          for (Eigen::Index a = 0; a < st.components(); ++a) {
            cross_de += x(d, t) * st.z_mean(a, t) * st.a_mean[m](e, a);
            cross_ed += x(e, t) * st.z_mean(a, t) * st.a_mean[m](d, a);
          }
        }
        for (Eigen::Index a = 0; a < st.components(); ++a)
          for (Eigen::Index b = 0; b < st.components(); ++b) {
            double second = st.a_mean[m](d, a) * st.a_mean[m](e, b);
            if (d == e) second += st.a_cov[m][static_cast<std::size_t>(d)](a, b);
            azza += zz(a, b) * second;
          }
        sinv(d, e) += cxx - cross_de - cross_ed + azza;
      }
    sinv = 0.5 * (sinv + sinv.transpose()).eval();
    if (hp.noise_model == bcca::NoiseModel::diagonal_precision)
      sinv = MatX(sinv.diagonal().asDiagonal());
    out.scale.push_back(sinv.inverse());
  }
  return out;
}

struct AUpdate {
  MatX mean;
  std::vector<MatX> cov;
};

// Rows are updated sequentially, each using the freshest other rows, exactly
// like the library's coordinate-wise schedule.
inline AUpdate update_a_loops(const PosteriorState& st, const ViewSet& data, int m) {
  const Eigen::Index d_count = st.channels();
  const Eigen::Index k = st.components();
  const Eigen::Index n = st.samples();
  const MatX psi = psi_mean_of(st, m);
  const MatX zz = zz_sum_loops(st);
  const double lambda = st.lambda_shape / st.lambda_rate;
  const MatX& x = data.views[static_cast<std::size_t>(m)];

  AUpdate out;
  out.mean = st.a_mean[m];
  out.cov.resize(static_cast<std::size_t>(d_count));
  for (Eigen::Index d = 0; d < d_count; ++d) {
    MatX prec = psi(d, d) * zz + lambda * MatX::Identity(k, k);
    MatX cov = prec.inverse();
    VecX rhs = VecX::Zero(k);
    for (Eigen::Index a = 0; a < k; ++a) {
      for (Eigen::Index t = 0; t < n; ++t) {
        double psi_x = 0;
        for (Eigen::Index e = 0; e < d_count; ++e) psi_x += psi(d, e) * x(e, t);
        rhs(a) += st.z_mean(a, t) * psi_x;
      }
      rhs(a) += lambda * st.u_mean(d, a);
      for (Eigen::Index e = 0; e < d_count; ++e) {
        if (e == d) continue;
        for (Eigen::Index b = 0; b < k; ++b) rhs(a) -= psi(d, e) * zz(a, b) * out.mean(e, b);
      }
    }
    out.mean.row(d) = (cov * rhs).transpose();
    out.cov[static_cast<std::size_t>(d)] = std::move(cov);
  }
  return out;
}

struct UUpdate {
  MatX mean;
  VecX var;
};

inline UUpdate update_u_loops(const PosteriorState& st) {
  const Eigen::Index d_count = st.channels();
  const Eigen::Index k = st.components();
  const double lambda = st.lambda_shape / st.lambda_rate;
  UUpdate out;
  out.mean = MatX::Zero(d_count, k);
  out.var = VecX::Zero(k);
  for (Eigen::Index a = 0; a < k; ++a) {
    const double alpha = st.alpha_shape / st.alpha_rate(a);
    const double prec = static_cast<double>(st.view_count()) * lambda + alpha;
    out.var(a) = 1.0 / prec;
    for (Eigen::Index d = 0; d < d_count; ++d) {
      double sum_a = 0;
      for (int m = 0; m < st.view_count(); ++m) sum_a += st.a_mean[m](d, a);
      out.mean(d, a) = lambda * sum_a / prec;
    }
  }
  return out;
}

inline double e_u_sqnorm(const PosteriorState& st, Eigen::Index component) {
  double out = static_cast<double>(st.channels()) * st.u_var(component);
  for (Eigen::Index d = 0; d < st.channels(); ++d)
    out += st.u_mean(d, component) * st.u_mean(d, component);
  return out;
}

struct GammaUpdate {
  double shape = 0;
  VecX rate;
};

inline GammaUpdate update_alpha_loops(const PosteriorState& st, const Hyperparameters& hp) {
  GammaUpdate out;
  out.shape = hp.a0 + 0.5 * static_cast<double>(st.channels());
  out.rate = VecX(st.components());
  for (Eigen::Index a = 0; a < st.components(); ++a)
    out.rate(a) = hp.b0 + 0.5 * e_u_sqnorm(st, a);
  return out;
}

// b_lambda evaluated term by term from E[(a_k - u_k)^T (a_k - u_k)].
inline std::pair<double, double> update_lambda_loops(const PosteriorState& st,
                                                     const Hyperparameters& hp) {
  const double shape = hp.a0 + 0.5 * static_cast<double>(st.view_count()) *
                                  static_cast<double>(st.components()) *
                                  static_cast<double>(st.channels());
  double rate = hp.b0;
  for (int m = 0; m < st.view_count(); ++m)
    for (Eigen::Index a = 0; a < st.components(); ++a) {
      double quad = static_cast<double>(st.channels()) * st.u_var(a);
      for (Eigen::Index d = 0; d < st.channels(); ++d) {
        const double diff = st.a_mean[m](d, a) - st.u_mean(d, a);
        quad += diff * diff + st.a_cov[m][static_cast<std::size_t>(d)](a, a);
      }
      rate += 0.5 * quad;
    }
  return {shape, rate};
}

// ---------------------------------------------------------------------------
// Baseline and metric oracles.

// Double-loop covariance with explicit two-pass centering.
inline MatX covariance_loops(const MatX& x1, const MatX& x2, bool center) {
  const Eigen::Index n = x1.cols();
  MatX r(x1.rows(), x2.rows());
  for (Eigen::Index i = 0; i < x1.rows(); ++i)
    for (Eigen::Index j = 0; j < x2.rows(); ++j) {
      double m1 = 0, m2 = 0;
      if (center) {
        for (Eigen::Index t = 0; t < n; ++t) {
          m1 += x1(i, t);
          m2 += x2(j, t);
        }
        m1 /= static_cast<double>(n);
        m2 /= static_cast<double>(n);
      }
      double acc = 0;
      for (Eigen::Index t = 0; t < n; ++t) acc += (x1(i, t) - m1) * (x2(j, t) - m2);
      r(i, j) = acc / static_cast<double>(n);
    }
  return r;
}

// Canonical correlations via eigendecomposition-based whitening plus SVD of
// the whitened cross-covariance.
inline VecX cca_correlations_svd(const MatX& r11, const MatX& r12, const MatX& r22,
                                 double ridge) {
  const auto inv_sqrt = [](const MatX& r, double rr) {
    Eigen::SelfAdjointEigenSolver<MatX> eig(r + rr * MatX::Identity(r.rows(), r.cols()));
    return MatX(eig.eigenvectors() *
                eig.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
                eig.eigenvectors().transpose());
  };
  const MatX c = inv_sqrt(r11, ridge) * r12 * inv_sqrt(r22, ridge);
  Eigen::JacobiSVD<MatX> svd(c);
  return svd.singularValues();
}

// Solves (R12 + R21) w = rho (R11 + R22) w through the plain non-symmetric
// eigenproblem of (R11 + R22)^{-1} (R12 + R21).
struct GeneralizedEig {
  VecX values;   // sorted descending
  MatX vectors;  // matching columns
};

inline GeneralizedEig corrca_eig_direct(const MatX& r11, const MatX& r12, const MatX& r21,
                                        const MatX& r22, double ridge) {
  const Eigen::Index d = r11.rows();
  const MatX lhs = (r11 + r22 + ridge * MatX::Identity(d, d)).inverse() * (r12 + r21);
  Eigen::EigenSolver<MatX> eig(lhs);
  VecX values = eig.eigenvalues().real();
  MatX vectors = eig.eigenvectors().real();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(d));
  for (Eigen::Index i = 0; i < d; ++i) order[static_cast<std::size_t>(i)] = i;
  std::sort(order.begin(), order.end(),
            [&](Eigen::Index a, Eigen::Index b) { return values(a) > values(b); });
  GeneralizedEig out;
  out.values = VecX(d);
  out.vectors = MatX(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    out.values(i) = values(order[static_cast<std::size_t>(i)]);
    out.vectors.col(i) = vectors.col(order[static_cast<std::size_t>(i)]);
  }
  return out;
}

inline double population_variance_loops(const VecX& v) {
  double mean = 0;
  for (Eigen::Index i = 0; i < v.size(); ++i) mean += v(i);
  mean /= static_cast<double>(v.size());
  double acc = 0;
  for (Eigen::Index i = 0; i < v.size(); ++i) acc += (v(i) - mean) * (v(i) - mean);
  return acc / static_cast<double>(v.size());
}

inline double within_view_variance_loops(const std::vector<VecX>& qs) {
  double acc = 0;
  for (const auto& q : qs) acc += population_variance_loops(q);
  return acc / static_cast<double>(qs.size());
}

inline double between_view_variance_loops(const std::vector<VecX>& qs) {
  const int m_count = static_cast<int>(qs.size());
  double acc = 0;
  for (int m = 0; m < m_count; ++m)
    for (int i = m + 1; i < m_count; ++i)
      acc += population_variance_loops(qs[static_cast<std::size_t>(m)] -
                                       qs[static_cast<std::size_t>(i)]);
  return 2.0 / (static_cast<double>(m_count) * static_cast<double>(m_count - 1)) * acc;
}

inline VecX pve_loops(const ViewSet& data, const std::vector<MatX>& a_mean, const MatX& z_mean) {
  VecX out(data.view_count());
  for (int m = 0; m < data.view_count(); ++m) {
    const MatX& x = data.views[static_cast<std::size_t>(m)];
    const MatX recon = a_mean[static_cast<std::size_t>(m)] * z_mean;
    double mean = 0;
    for (Eigen::Index r = 0; r < x.rows(); ++r)
      for (Eigen::Index c = 0; c < x.cols(); ++c) mean += x(r, c);
    mean /= static_cast<double>(x.size());
    double sst = 0, sse = 0;
    for (Eigen::Index r = 0; r < x.rows(); ++r)
      for (Eigen::Index c = 0; c < x.cols(); ++c) {
        sst += (x(r, c) - mean) * (x(r, c) - mean);
        sse += (x(r, c) - recon(r, c)) * (x(r, c) - recon(r, c));
      }
    out(m) = (sst - sse) / sst;
  }
  return out;
}

// Two-pass scalar variance over all entries of a matrix.
inline double two_pass_variance(const MatX& x) {
  double mean = 0;
  for (Eigen::Index r = 0; r < x.rows(); ++r)
    for (Eigen::Index c = 0; c < x.cols(); ++c) mean += x(r, c);
  mean /= static_cast<double>(x.size());
  double acc = 0;
  for (Eigen::Index r = 0; r < x.rows(); ++r)
    for (Eigen::Index c = 0; c < x.cols(); ++c) acc += (x(r, c) - mean) * (x(r, c) - mean);
  return acc / static_cast<double>(x.size());
}

}  // namespace oracle
