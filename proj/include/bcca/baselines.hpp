#pragma once

#include "bcca/types.hpp"

#include <cmath>
#include <string>
#include <utility>
#include <vector>

namespace bcca {

// Solution of a CCA/CorrCA eigenproblem. weights holds one filter matrix per
// view; for CorrCA both entries are the same matrix and shared is true.
// correlations are sorted descending.
template <class Scalar>
struct EigenSolutionT {
  std::vector<Mat<Scalar>> weights;
  Vec<Scalar> correlations;
  bool shared = false;
};
using EigenSolution = EigenSolutionT<double>;

template <class Scalar>
struct CovarianceSetT {
  Mat<Scalar> r11, r12, r21, r22;
};
using CovarianceSet = CovarianceSetT<double>;

// R_ij = (1/N) X_i X_j^T after optional per-row mean removal. R21 is the
// exact transpose of R12.
template <class Scalar>
CovarianceSetT<Scalar> sample_covariances(const Mat<Scalar>& x1, const Mat<Scalar>& x2,
                                          bool center = true) {
  if (x1.cols() != x2.cols()) throw InvalidInput("sample_covariances: sample counts differ");
  if (center && x1.cols() < 2)
    throw InvalidInput("sample_covariances: need at least 2 samples to center");
  if (x1.cols() < 1) throw InvalidInput("sample_covariances: empty input");
  const Scalar inv_n = Scalar(1) / static_cast<Scalar>(x1.cols());
  Mat<Scalar> c1 = x1, c2 = x2;
  if (center) {
    c1.colwise() -= x1.rowwise().mean();
    c2.colwise() -= x2.rowwise().mean();
  }
  CovarianceSetT<Scalar> cov;
  cov.r11 = inv_n * (c1 * c1.transpose());
  cov.r12 = inv_n * (c1 * c2.transpose());
  cov.r21 = cov.r12.transpose();
  cov.r22 = inv_n * (c2 * c2.transpose());
  return cov;
}

template <class Scalar>
Scalar default_ridge(const Mat<Scalar>& r) {
  return Scalar(1e-8) * r.trace() / static_cast<Scalar>(r.rows());
}

namespace detail {

// Sign convention: largest-magnitude entry of each weight column positive.
template <class Scalar>
void fix_signs(Mat<Scalar>& w) {
  for (Eigen::Index c = 0; c < w.cols(); ++c) {
    Eigen::Index imax = 0;
    w.col(c).cwiseAbs().maxCoeff(&imax);
    if (w(imax, c) < Scalar(0)) w.col(c) = -w.col(c);
  }
}

// Scales each column so the projected series has unit variance under cov.
template <class Scalar>
void normalize_projected_variance(Mat<Scalar>& w, const Mat<Scalar>& cov) {
  for (Eigen::Index c = 0; c < w.cols(); ++c) {
    const Scalar v = w.col(c).dot(cov * w.col(c));
    if (v > Scalar(0)) w.col(c) /= std::sqrt(v);
  }
}

template <class Scalar>
Eigen::LLT<Mat<Scalar>> llt_or_throw(const Mat<Scalar>& a, const char* what) {
  Eigen::LLT<Mat<Scalar>> llt(a);
  if (llt.info() != Eigen::Success)
    throw NumericalError(std::string(what) + ": singular regularized covariance");
  return llt;
}

}  // namespace detail

// CCA weights solve R11^{-1} R12 R22^{-1} R21 w1 = rho^2 w1. Computed via
// Cholesky whitening: with R11 = L1 L1^T the problem is similar to the
// symmetric C C^T, C = L1^{-1} R12 L2^{-T}, whose eigenvectors map back as
// w1 = L1^{-T} v. The mirrored weights follow the pairing
// w2 ~ R22^{-1} R21 w1. Ridge is added to R11 and R22 before inversion.
template <class Scalar>
EigenSolutionT<Scalar> cca_from_covariances(const CovarianceSetT<Scalar>& cov, int k,
                                            Scalar ridge) {
  const Eigen::Index d1 = cov.r11.rows();
  const Eigen::Index d2 = cov.r22.rows();
  if (k < 1 || k > static_cast<int>(std::min(d1, d2)))
    throw InvalidInput("cca: K out of range");
  Mat<Scalar> r11 = cov.r11 + ridge * Mat<Scalar>::Identity(d1, d1);
  Mat<Scalar> r22 = cov.r22 + ridge * Mat<Scalar>::Identity(d2, d2);
  auto llt1 = detail::llt_or_throw(r11, "cca: view 1");
  auto llt2 = detail::llt_or_throw(r22, "cca: view 2");

  const Mat<Scalar> l1 = llt1.matrixL();
  const Mat<Scalar> l2 = llt2.matrixL();
  Mat<Scalar> c = l1.template triangularView<Eigen::Lower>().solve(cov.r12);
  c = l2.template triangularView<Eigen::Lower>()
          .solve(Mat<Scalar>(c.transpose()))
          .transpose();  // C = L1^{-1} R12 L2^{-T}
  Mat<Scalar> product = c * c.transpose();

  Eigen::SelfAdjointEigenSolver<Mat<Scalar>> eig(product);
  if (eig.info() != Eigen::Success) throw NumericalError("cca: eigensolver failed");

  EigenSolutionT<Scalar> sol;
  sol.shared = false;
  sol.correlations = Vec<Scalar>(k);
  Mat<Scalar> w1(d1, k), w2(d2, k);
  for (int j = 0; j < k; ++j) {
    const Eigen::Index src = d1 - 1 - j;  // eigenvalues come out ascending
    const Scalar ev = std::max(eig.eigenvalues()(src), Scalar(0));
    sol.correlations(j) = std::sqrt(ev);
    w1.col(j) = l1.transpose().template triangularView<Eigen::Upper>().solve(
        eig.eigenvectors().col(src));
    w2.col(j) = llt2.solve(cov.r21 * w1.col(j));
  }
  detail::normalize_projected_variance(w1, cov.r11);
  detail::normalize_projected_variance(w2, cov.r22);
  detail::fix_signs(w1);
  detail::fix_signs(w2);
  sol.weights = {std::move(w1), std::move(w2)};
  return sol;
}

// CorrCA solves the single generalized symmetric-definite eigenproblem
// (R12 + R21) w = rho (R11 + R22) w; the shared weights serve both views.
template <class Scalar>
EigenSolutionT<Scalar> corrca_from_covariances(const CovarianceSetT<Scalar>& cov, int k,
                                               Scalar ridge) {
  const Eigen::Index d = cov.r11.rows();
  if (cov.r22.rows() != d) throw InvalidInput("corrca: views must share D");
  if (k < 1 || k > static_cast<int>(d)) throw InvalidInput("corrca: K out of range");
  Mat<Scalar> lhs = Scalar(0.5) * (cov.r12 + cov.r21 + cov.r12.transpose() + cov.r21.transpose());
  Mat<Scalar> rhs = cov.r11 + cov.r22 + ridge * Mat<Scalar>::Identity(d, d);

  Eigen::GeneralizedSelfAdjointEigenSolver<Mat<Scalar>> eig(lhs, rhs);
  if (eig.info() != Eigen::Success)
    throw NumericalError("corrca: singular regularized covariance");

  EigenSolutionT<Scalar> sol;
  sol.shared = true;
  sol.correlations = Vec<Scalar>(k);
  Mat<Scalar> w(d, k);
  for (int j = 0; j < k; ++j) {
    const Eigen::Index src = d - 1 - j;
    sol.correlations(j) = eig.eigenvalues()(src);
    w.col(j) = eig.eigenvectors().col(src);
  }
  const Mat<Scalar> avg_cov = Scalar(0.5) * (cov.r11 + cov.r22);
  detail::normalize_projected_variance(w, avg_cov);
  detail::fix_signs(w);
  sol.weights.push_back(w);
  sol.weights.push_back(std::move(w));
  return sol;
}

template <class Scalar>
EigenSolutionT<Scalar> cca(const Mat<Scalar>& x1, const Mat<Scalar>& x2, int k,
                           Scalar ridge = Scalar(-1)) {
  CovarianceSetT<Scalar> cov = sample_covariances(x1, x2, true);
  if (ridge < Scalar(0))
    ridge = Scalar(0.5) * (default_ridge(cov.r11) + default_ridge(cov.r22));
  return cca_from_covariances(cov, k, ridge);
}

template <class Scalar>
EigenSolutionT<Scalar> corrca(const Mat<Scalar>& x1, const Mat<Scalar>& x2, int k,
                              Scalar ridge = Scalar(-1)) {
  CovarianceSetT<Scalar> cov = sample_covariances(x1, x2, true);
  if (ridge < Scalar(0))
    ridge = Scalar(0.5) * (default_ridge(cov.r11) + default_ridge(cov.r22));
  return corrca_from_covariances(cov, k, ridge);
}

// Time-concatenation of all ordered view pairs, in lexicographic order:
// block (i, j) contributes view i's samples to the first output and view j's
// to the second. The concatenated length is N * M * (M - 1).
template <class Scalar>
std::pair<Mat<Scalar>, Mat<Scalar>> pairwise_concatenate(const ViewSetT<Scalar>& data) {
  data.validate();
  const int m_count = data.view_count();
  if (m_count < 2) throw InvalidInput("pairwise_concatenate: need at least 2 views");
  const Eigen::Index d = data.channels();
  const Eigen::Index n = data.samples();
  const Eigen::Index total = n * static_cast<Eigen::Index>(m_count) *
                             static_cast<Eigen::Index>(m_count - 1);
  Mat<Scalar> xa(d, total), xb(d, total);
  Eigen::Index offset = 0;
  for (int i = 0; i < m_count; ++i) {
    for (int j = 0; j < m_count; ++j) {
      if (i == j) continue;
      xa.middleCols(offset, n) = data.views[static_cast<std::size_t>(i)];
      xb.middleCols(offset, n) = data.views[static_cast<std::size_t>(j)];
      offset += n;
    }
  }
  return {std::move(xa), std::move(xb)};
}

// Analytic worst case: two views mixing the same unit-power source through
// orthogonal unit patterns. Its population CorrCA spectrum is known in
// closed form with top eigenvalue P / (2 sigma^2 + P).
template <class Scalar>
struct OrthogonalMixCaseT {
  Vec<Scalar> a1, a2;
  Scalar signal_power = 1;
  Scalar noise_var = 1;

  void validate() const {
    if (a1.size() != a2.size() || a1.size() < 2)
      throw InvalidInput("orthogonal mix case: patterns must share D >= 2");
    if (std::abs(a1.norm() - Scalar(1)) > Scalar(1e-10) ||
        std::abs(a2.norm() - Scalar(1)) > Scalar(1e-10))
      throw InvalidInput("orthogonal mix case: patterns must be unit length");
    if (std::abs(a1.dot(a2)) > Scalar(1e-10))
      throw InvalidInput("orthogonal mix case: patterns must be orthogonal");
    if (!(signal_power > Scalar(0)) || !(noise_var > Scalar(0)))
      throw InvalidInput("orthogonal mix case: P and sigma^2 must be positive");
  }
};
using OrthogonalMixCase = OrthogonalMixCaseT<double>;

template <class Scalar>
CovarianceSetT<Scalar> population_covariances(const OrthogonalMixCaseT<Scalar>& c) {
  c.validate();
  const Eigen::Index d = c.a1.size();
  CovarianceSetT<Scalar> cov;
  cov.r11 = c.signal_power * (c.a1 * c.a1.transpose()) +
            c.noise_var * Mat<Scalar>::Identity(d, d);
  cov.r22 = c.signal_power * (c.a2 * c.a2.transpose()) +
            c.noise_var * Mat<Scalar>::Identity(d, d);
  cov.r12 = c.signal_power * (c.a1 * c.a2.transpose());
  cov.r21 = cov.r12.transpose();
  return cov;
}

}  // namespace bcca
