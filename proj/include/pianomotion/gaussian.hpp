#pragma once

// Gaussian summaries, PSD matrix square roots and the Frechet (Gaussian W2)
// distance.

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "pianomotion/error.hpp"

namespace pianomotion::stats {

inline constexpr double kEigenClamp = -1e-8;  // smallest eigenvalue still treated as round-off
inline constexpr double kDefaultRegularization = 1e-6;

struct GaussianStats {
  Eigen::VectorXd mu;
  Eigen::MatrixXd cov;

  Eigen::Index dim() const noexcept { return mu.size(); }
  bool operator==(const GaussianStats& o) const {
    return mu.size() == o.mu.size() && cov.rows() == o.cov.rows() && cov.cols() == o.cov.cols() && mu == o.mu &&
           cov == o.cov;
  }
};

/// Mean and covariance of the rows of `samples`. `ddof` is 1 for the unbiased
/// estimate, 0 for maximum likelihood. `reg` is added to the diagonal.
inline GaussianStats estimate(const Eigen::MatrixXd& samples, int ddof = 1, double reg = 0.0) {
  const Eigen::Index n = samples.rows();
  require(n > ddof, Errc::TooFewSamples, "need more than " + std::to_string(ddof) + " samples for a covariance");
  require(samples.allFinite(), Errc::NonFinite, "samples contain non-finite values");
  GaussianStats s;
  s.mu = samples.colwise().mean().transpose();
  const Eigen::MatrixXd centred = samples.rowwise() - s.mu.transpose();
  s.cov = (centred.transpose() * centred) / static_cast<double>(n - ddof);
  if (reg != 0.0) s.cov.diagonal().array() += reg;
  return s;
}

inline Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& m) { return 0.5 * (m + m.transpose()); }

/// Eigendecomposition of a symmetric matrix, failing with NotPSD when an
/// eigenvalue lies below -1e-8 and clamping the remaining negatives to zero.
inline Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> psd_eigen(const Eigen::MatrixXd& m, const char* what) {
  require(m.rows() == m.cols(), Errc::DimensionMismatch, std::string(what) + " is not square");
  require(m.allFinite(), Errc::NonFinite, std::string(what) + " contains non-finite values");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrize(m));
  require(es.info() == Eigen::Success, Errc::NoConvergence, std::string(what) + ": eigendecomposition failed");
  if (m.rows() > 0 && es.eigenvalues().minCoeff() < kEigenClamp)
    fail(Errc::NotPSD, std::string(what) + " has eigenvalue " + std::to_string(es.eigenvalues().minCoeff()));
  return es;
}

inline Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  const auto es = psd_eigen(m, "matrix");
  const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

/// Tr((B^1/2 A B^1/2)^1/2), the trace of the geometric-mean term. Evaluated
/// in both orders and averaged so the result is exactly symmetric in (A, B).
inline double trace_sqrt_product(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  auto one_way = [](const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
    const Eigen::MatrixXd root_y = psd_sqrt(y);
    const auto es = psd_eigen(root_y * symmetrize(x) * root_y, "covariance product");
    return es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  };
  return 0.5 * (one_way(a, b) + one_way(b, a));
}

/// ||mu_a - mu_b||^2 + Tr(C_a + C_b - 2 (C_b^1/2 C_a C_b^1/2)^1/2).
inline double frechet_distance(const GaussianStats& a, const GaussianStats& b) {
  require(a.dim() == b.dim() && a.cov.rows() == a.dim() && b.cov.rows() == b.dim(), Errc::DimensionMismatch,
          "Gaussian dimensions differ");
  if (a == b) return 0.0;
  const Eigen::MatrixXd ca = symmetrize(a.cov);
  const Eigen::MatrixXd cb = symmetrize(b.cov);
  psd_eigen(ca, "covariance");
  const double mean_term = (a.mu - b.mu).squaredNorm();
  const double d = mean_term + (ca.trace() + cb.trace()) - 2.0 * trace_sqrt_product(ca, cb);
  return std::max(d, 0.0);
}

/// Squared 2-Wasserstein distance between Gaussians (same value as the
/// Frechet distance).
inline double gaussian_w2_squared(const GaussianStats& a, const GaussianStats& b) { return frechet_distance(a, b); }

/// Frechet distance between the regularised sample Gaussians of two sample
/// sets (rows are samples). When the dimension exceeds the pooled sample
/// count the computation is carried out exactly in the span of the centred
/// samples: outside it both covariances equal reg * I and cancel.
inline double frechet_from_samples(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                   double reg = kDefaultRegularization) {
  require(a.cols() == b.cols(), Errc::LengthMismatch, "sample dimensions differ");
  require(a.rows() > 1 && b.rows() > 1, Errc::TooFewSamples, "each side needs at least two samples");
  const Eigen::Index dim = a.cols();
  const Eigen::Index pooled = a.rows() + b.rows();
  if (dim <= pooled) return frechet_distance(estimate(a, 1, reg), estimate(b, 1, reg));

  require(a.allFinite() && b.allFinite(), Errc::NonFinite, "samples contain non-finite values");
  const Eigen::RowVectorXd mu_a = a.colwise().mean();
  const Eigen::RowVectorXd mu_b = b.colwise().mean();
  if (a.rows() == b.rows() && a == b) return 0.0;
  Eigen::MatrixXd span(dim, pooled);
  span.leftCols(a.rows()) = (a.rowwise() - mu_a).transpose();
  span.rightCols(b.rows()) = (b.rowwise() - mu_b).transpose();
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(span);
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(dim, pooled);

  auto projected = [&](const Eigen::MatrixXd& x, const Eigen::RowVectorXd& mu) {
    const Eigen::MatrixXd p = (x.rowwise() - mu) * q;
    Eigen::MatrixXd c = (p.transpose() * p) / static_cast<double>(x.rows() - 1);
    c.diagonal().array() += reg;
    return c;
  };
  const Eigen::MatrixXd ca = projected(a, mu_a);
  const Eigen::MatrixXd cb = projected(b, mu_b);
  const double d = (mu_a - mu_b).squaredNorm() + ca.trace() + cb.trace() - 2.0 * trace_sqrt_product(ca, cb);
  return std::max(d, 0.0);
}

}  // namespace pianomotion::stats
