#pragma once

// Linear feature embedder used for FID. Fitted as PCA on the reference set so
// results are deterministic; weights of any externally trained linear
// encoder can be loaded from the same file format instead.

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "pianomotion/error.hpp"

namespace pianomotion::stats {

inline constexpr int kDefaultLatentDim = 32;

struct Embedder {
  Eigen::VectorXd mean;   // input_dim
  Eigen::MatrixXd basis;  // latent_dim x input_dim, orthonormal rows

  Eigen::Index input_dim() const noexcept { return mean.size(); }
  Eigen::Index latent_dim() const noexcept { return basis.rows(); }

  /// Rows of `samples` mapped to latent coordinates.
  Eigen::MatrixXd embed(const Eigen::MatrixXd& samples) const {
    require(samples.cols() == input_dim(), Errc::DimensionMismatch,
            "embedder expects dimension " + std::to_string(input_dim()) + ", got " + std::to_string(samples.cols()));
    return (samples.rowwise() - mean.transpose()) * basis.transpose();
  }

  Eigen::MatrixXd reconstruct(const Eigen::MatrixXd& latent) const {
    return (latent * basis).rowwise() + mean.transpose();
  }

  static Embedder identity(Eigen::Index dim) {
    return {Eigen::VectorXd::Zero(dim), Eigen::MatrixXd::Identity(dim, dim)};
  }
};

namespace detail {

/// Flips each row so that its largest-magnitude entry (first on ties) is positive.
inline void canonical_signs(Eigen::MatrixXd& rows) {
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < rows.cols(); ++c)
      if (std::abs(rows(r, c)) > std::abs(rows(r, best))) best = c;
    if (rows(r, best) < 0.0) rows.row(r) *= -1.0;
  }
}

/// Modified Gram-Schmidt over the rows in order. Rows of (near) zero norm are
/// replaced by the first standard basis vector not yet spanned.
inline void orthonormalize_rows(Eigen::MatrixXd& rows) {
  Eigen::Index next_unit = 0;
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    for (int pass = 0; pass < 2; ++pass)
      for (Eigen::Index p = 0; p < r; ++p) rows.row(r) -= rows.row(r).dot(rows.row(p)) * rows.row(p);
    double norm = rows.row(r).norm();
    while (norm < 1e-8) {
      require(next_unit < rows.cols(), Errc::NoConvergence, "cannot complete orthonormal basis");
      rows.row(r).setZero();
      rows(r, next_unit++) = 1.0;
      for (int pass = 0; pass < 2; ++pass)
        for (Eigen::Index p = 0; p < r; ++p) rows.row(r) -= rows.row(r).dot(rows.row(p)) * rows.row(p);
      norm = rows.row(r).norm();
    }
    rows.row(r) /= norm;
  }
}

}  // namespace detail

/// PCA on the rows of `reference`, keeping the `latent_dim` leading
/// directions. Uses the covariance eigenproblem when the dimension is at most
/// the sample count and the Gram-matrix eigenproblem otherwise.
inline Embedder fit_embedder(const Eigen::MatrixXd& reference, int latent_dim = kDefaultLatentDim) {
  const Eigen::Index n = reference.rows();
  const Eigen::Index dim = reference.cols();
  require(latent_dim >= 1, Errc::InvalidArgument, "latent dimension must be positive");
  require(n > latent_dim, Errc::TooFewSamples,
          "PCA needs more samples (" + std::to_string(n) + ") than latent dimensions (" + std::to_string(latent_dim) + ")");
  require(latent_dim <= dim, Errc::DimensionMismatch, "latent dimension exceeds input dimension");
  require(reference.allFinite(), Errc::NonFinite, "reference contains non-finite values");

  Embedder e;
  e.mean = reference.colwise().mean().transpose();
  const Eigen::MatrixXd centred = reference.rowwise() - e.mean.transpose();
  const double denom = static_cast<double>(n - 1);
  e.basis.resize(latent_dim, dim);

  if (dim <= n) {
    const Eigen::MatrixXd cov = (centred.transpose() * centred) / denom;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    require(es.info() == Eigen::Success, Errc::NoConvergence, "PCA eigendecomposition failed");
    for (int k = 0; k < latent_dim; ++k) e.basis.row(k) = es.eigenvectors().col(dim - 1 - k).transpose();
  } else {
    const Eigen::MatrixXd gram = (centred * centred.transpose()) / denom;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
    require(es.info() == Eigen::Success, Errc::NoConvergence, "PCA eigendecomposition failed");
    const double top = std::max(es.eigenvalues()(n - 1), 0.0);
    for (int k = 0; k < latent_dim; ++k) {
      const double lambda = es.eigenvalues()(n - 1 - k);
      if (lambda > 1e-10 * top && lambda > 0.0) {
        e.basis.row(k) = (centred.transpose() * es.eigenvectors().col(n - 1 - k)).transpose();
        e.basis.row(k).normalize();
      } else {
        e.basis.row(k).setZero();  // null direction, completed below
      }
    }
  }
  detail::orthonormalize_rows(e.basis);
  detail::canonical_signs(e.basis);
  return e;
}

inline nlohmann::ordered_json to_json(const Embedder& e) {
  nlohmann::ordered_json j;
  j["input_dim"] = e.input_dim();
  j["latent_dim"] = e.latent_dim();
  j["mean"] = std::vector<double>(e.mean.data(), e.mean.data() + e.mean.size());
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(e.basis.size()));
  for (Eigen::Index r = 0; r < e.basis.rows(); ++r)
    for (Eigen::Index c = 0; c < e.basis.cols(); ++c) flat.push_back(e.basis(r, c));
  j["basis"] = std::move(flat);
  return j;
}

inline Embedder embedder_from_json(const nlohmann::json& j) {
  try {
    const auto in = j.at("input_dim").get<Eigen::Index>();
    const auto latent = j.at("latent_dim").get<Eigen::Index>();
    const auto mean = j.at("mean").get<std::vector<double>>();
    const auto basis = j.at("basis").get<std::vector<double>>();
    require(in > 0 && latent > 0, Errc::SchemaViolation, "embedder dimensions must be positive");
    require(static_cast<Eigen::Index>(mean.size()) == in, Errc::SchemaViolation, "embedder mean length mismatch");
    require(static_cast<Eigen::Index>(basis.size()) == in * latent, Errc::SchemaViolation,
            "embedder basis size mismatch");
    Embedder e;
    e.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), in);
    e.basis = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(basis.data(),
                                                                                                       latent, in);
    return e;
  } catch (const nlohmann::json::exception& ex) {
    fail(Errc::SchemaViolation, std::string("embedder: ") + ex.what());
  }
}

inline Embedder load_embedder(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::Io, "cannot open " + path);
  try {
    return embedder_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& ex) {
    fail(Errc::SchemaViolation, path + ": " + ex.what());
  }
}

inline void save_embedder(const Embedder& e, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(Errc::Io, "cannot write " + path);
  out << to_json(e).dump() << '\n';
}

}  // namespace pianomotion::stats
