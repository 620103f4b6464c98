#pragma once

// Gaussian mixture fitting by EM and the mixture Wasserstein distance.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pianomotion/error.hpp"
#include "pianomotion/gaussian.hpp"
#include "pianomotion/transport.hpp"

namespace pianomotion::stats {

struct GmmModel {
  std::vector<double> weights;
  std::vector<GaussianStats> components;

  std::size_t size() const noexcept { return weights.size(); }
  Eigen::Index dim() const noexcept { return components.empty() ? 0 : components.front().dim(); }
  bool operator==(const GmmModel&) const = default;
};

struct GmmOptions {
  int components = 8;
  std::uint64_t seed = 42;
  int max_iterations = 200;
  double tolerance = 1e-6;        // on the mean per-sample log-likelihood
  double covariance_floor = 1e-6;  // lower bound on covariance eigenvalues
};

struct GmmFit {
  GmmModel model;
  // Mean log-likelihood of the data under each successive parameter set;
  // the last entry belongs to `model`.
  std::vector<double> log_likelihood;
  bool converged = false;
};

namespace detail {

/// k-means++ seeding: first centre uniform, then proportional to squared
/// distance from the nearest chosen centre.
inline std::vector<Eigen::Index> kmeanspp(const Eigen::MatrixXd& x, int k, std::mt19937_64& rng) {
  const Eigen::Index n = x.rows();
  std::vector<Eigen::Index> centres;
  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  centres.push_back(pick(rng));
  Eigen::VectorXd d2 = (x.rowwise() - x.row(centres[0])).rowwise().squaredNorm();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  while (static_cast<int>(centres.size()) < k) {
    const double total = d2.sum();
    Eigen::Index chosen = 0;
    if (total <= 0.0) {
      chosen = pick(rng);
    } else {
      const double target = unit(rng) * total;
      double acc = 0.0;
      chosen = n - 1;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += d2(i);
        if (acc > target) {
          chosen = i;
          break;
        }
      }
    }
    centres.push_back(chosen);
    d2 = d2.cwiseMin((x.rowwise() - x.row(chosen)).rowwise().squaredNorm());
  }
  return centres;
}

/// Applies the eigenvalue floor; matrices already above it are left untouched.
inline Eigen::MatrixXd floor_covariance(const Eigen::MatrixXd& c, double floor) {
  const Eigen::MatrixXd sym = symmetrize(c);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  if (es.eigenvalues().minCoeff() >= floor) return sym;
  const Eigen::VectorXd clamped = es.eigenvalues().cwiseMax(floor);
  return symmetrize(es.eigenvectors() * clamped.asDiagonal() * es.eigenvectors().transpose());
}

struct ComponentDensity {
  Eigen::LLT<Eigen::MatrixXd> chol;
  double log_norm;  // log weight - 0.5 (d log 2pi + log det C)
};

inline std::vector<ComponentDensity> densities(const GmmModel& m) {
  std::vector<ComponentDensity> out;
  const double d = static_cast<double>(m.dim());
  for (std::size_t k = 0; k < m.size(); ++k) {
    ComponentDensity cd{Eigen::LLT<Eigen::MatrixXd>(m.components[k].cov), 0.0};
    require(cd.chol.info() == Eigen::Success, Errc::NotPSD, "mixture covariance is not positive definite");
    const double log_det = 2.0 * cd.chol.matrixL().toDenseMatrix().diagonal().array().log().sum();
    cd.log_norm = (m.weights[k] > 0.0 ? std::log(m.weights[k]) : -std::numeric_limits<double>::infinity()) -
                  0.5 * (d * std::log(2.0 * std::numbers::pi) + log_det);
    out.push_back(std::move(cd));
  }
  return out;
}

/// Per-sample, per-component log joint densities.
inline Eigen::MatrixXd log_joint(const GmmModel& m, const Eigen::MatrixXd& x) {
  const auto dens = densities(m);
  Eigen::MatrixXd lj(x.rows(), static_cast<Eigen::Index>(m.size()));
  for (std::size_t k = 0; k < m.size(); ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    if (!std::isfinite(dens[k].log_norm)) {
      lj.col(kk).setConstant(-std::numeric_limits<double>::infinity());
      continue;
    }
    // Explicit inverse factor so the bulk of the work is a plain matrix product.
    const Eigen::Index d = x.cols();
    const Eigen::MatrixXd l_inv = dens[k].chol.matrixL().solve(Eigen::MatrixXd::Identity(d, d));
    const Eigen::MatrixXd centred = x.rowwise() - m.components[k].mu.transpose();
    const Eigen::MatrixXd solved = centred * l_inv.transpose();
    lj.col(kk) = dens[k].log_norm - 0.5 * solved.rowwise().squaredNorm().array();
  }
  return lj;
}

inline double logsumexp_rows(const Eigen::MatrixXd& lj, Eigen::MatrixXd* resp) {
  double total = 0.0;
  if (resp) resp->resize(lj.rows(), lj.cols());
  for (Eigen::Index i = 0; i < lj.rows(); ++i) {
    const double mx = lj.row(i).maxCoeff();
    const double lse = mx + std::log((lj.row(i).array() - mx).exp().sum());
    total += lse;
    if (resp) resp->row(i) = (lj.row(i).array() - lse).exp();
  }
  return total / static_cast<double>(lj.rows());
}

inline GmmModel m_step(const Eigen::MatrixXd& x, const Eigen::MatrixXd& resp, const GmmModel* previous,
                       double floor) {
  const Eigen::Index n = x.rows();
  const Eigen::Index k = resp.cols();
  GmmModel m;
  const Eigen::VectorXd mass = resp.colwise().sum().transpose();
  for (Eigen::Index c = 0; c < k; ++c) {
    GaussianStats g;
    if (mass(c) <= 1e-12 * static_cast<double>(n)) {
      // Empty component: weight zero, parameters carried over.
      m.weights.push_back(0.0);
      if (previous) {
        g = previous->components[static_cast<std::size_t>(c)];
      } else {
        g = estimate(x, 0);
        g.cov = floor_covariance(g.cov, floor);
      }
      m.components.push_back(std::move(g));
      continue;
    }
    m.weights.push_back(mass(c) / static_cast<double>(n));
    g.mu = (x.transpose() * resp.col(c)) / mass(c);
    const Eigen::MatrixXd centred = x.rowwise() - g.mu.transpose();
    const Eigen::MatrixXd scaled = centred.array().colwise() * resp.col(c).array().sqrt();
    Eigen::MatrixXd scatter = Eigen::MatrixXd::Zero(x.cols(), x.cols());
    scatter.selfadjointView<Eigen::Lower>().rankUpdate(scaled.transpose());
    g.cov = floor_covariance(Eigen::MatrixXd(scatter.selfadjointView<Eigen::Lower>()) / mass(c), floor);
    m.components.push_back(std::move(g));
  }
  double wsum = 0.0;
  for (double w : m.weights) wsum += w;
  for (double& w : m.weights) w /= wsum;
  return m;
}

}  // namespace detail

/// Mean per-sample log-likelihood of `x` under the mixture.
inline double log_likelihood(const GmmModel& m, const Eigen::MatrixXd& x) {
  require(x.cols() == m.dim(), Errc::DimensionMismatch, "sample dimension differs from mixture dimension");
  return detail::logsumexp_rows(detail::log_joint(m, x), nullptr);
}

/// EM with seeded k-means++ initialisation (hard nearest-centre assignment
/// gives the starting parameters). Stops when the mean log-likelihood gains
/// less than the tolerance or after max_iterations parameter updates.
inline GmmFit fit_gmm(const Eigen::MatrixXd& x, const GmmOptions& opts = {}) {
  require(opts.components >= 1, Errc::InvalidArgument, "need at least one mixture component");
  require(x.rows() >= opts.components, Errc::TooFewSamples,
          "need at least " + std::to_string(opts.components) + " samples, got " + std::to_string(x.rows()));
  require(x.cols() >= 1, Errc::DimensionMismatch, "samples must have positive dimension");
  require(x.allFinite(), Errc::NonFinite, "samples contain non-finite values");

  std::mt19937_64 rng(opts.seed);
  const auto centres = detail::kmeanspp(x, opts.components, rng);
  Eigen::MatrixXd resp = Eigen::MatrixXd::Zero(x.rows(), opts.components);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int c = 0; c < opts.components; ++c) {
      const double d = (x.row(i) - x.row(centres[static_cast<std::size_t>(c)])).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    resp(i, best) = 1.0;
  }

  GmmFit fit;
  fit.model = detail::m_step(x, resp, nullptr, opts.covariance_floor);
  for (int update = 0;; ++update) {
    const double ll = detail::logsumexp_rows(detail::log_joint(fit.model, x), &resp);
    fit.log_likelihood.push_back(ll);
    const std::size_t t = fit.log_likelihood.size();
    if (t >= 2 && ll - fit.log_likelihood[t - 2] < opts.tolerance) {
      fit.converged = true;
      break;
    }
    if (update >= opts.max_iterations) break;
    GmmModel next = detail::m_step(x, resp, &fit.model, opts.covariance_floor);
    fit.model = std::move(next);
  }
  return fit;
}

/// Mixture 2-Wasserstein distance: optimal transport between component
/// weights with pairwise Gaussian W2^2 costs; returns the square root of the
/// optimal cost.
inline double gmm_w2(const GmmModel& a, const GmmModel& b) {
  require(a.size() > 0 && b.size() > 0, Errc::InvalidArgument, "mixtures must be non-empty");
  require(a.dim() == b.dim(), Errc::DimensionMismatch, "mixture dimensions differ");
  Eigen::MatrixXd cost(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(b.size()));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j)
      cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          gaussian_w2_squared(a.components[i], b.components[j]);
  const auto plan = transport::solve_transport(a.weights, b.weights, cost);
  return std::sqrt(std::max(plan.cost, 0.0));
}

}  // namespace pianomotion::stats
