#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <Eigen/Eigenvalues>

#include "pianomotion/embedder.hpp"
#include "pianomotion/gaussian.hpp"
#include "pianomotion/gmm.hpp"
#include "pianomotion/metrics.hpp"
#include "pianomotion/transport.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace pianomotion;
using namespace pianomotion::stats;

namespace {

Eigen::MatrixXd random_spd(std::mt19937_64& rng, int d, double ridge = 0.1) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd a(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) a(i, j) = g(rng);
  return a * a.transpose() / d + ridge * Eigen::MatrixXd::Identity(d, d);
}

Eigen::VectorXd random_vec(std::mt19937_64& rng, int d, double s = 1.0) {
  std::normal_distribution<double> g(0.0, s);
  Eigen::VectorXd v(d);
  for (int i = 0; i < d; ++i) v(i) = g(rng);
  return v;
}

Eigen::MatrixXd random_samples(std::mt19937_64& rng, int n, int d, double s = 1.0) {
  std::normal_distribution<double> g(0.0, s);
  Eigen::MatrixXd x(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) x(i, j) = g(rng);
  return x;
}

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return Errc::Io;
}

GmmModel random_1d_mixture(std::mt19937_64& rng, int k) {
  std::uniform_real_distribution<double> u(0.05, 1.0), m(-5.0, 5.0), s(0.05, 2.0);
  GmmModel g;
  double total = 0.0;
  for (int i = 0; i < k; ++i) {
    g.weights.push_back(u(rng));
    total += g.weights.back();
    g.components.push_back({Eigen::VectorXd::Constant(1, m(rng)), Eigen::MatrixXd::Constant(1, 1, s(rng))});
  }
  for (double& w : g.weights) w /= total;
  return g;
}

}  // namespace

// ---------------------------------------------------------------------------
// Frechet distance

TEST(Frechet, IdenticalIsZero) {
  std::mt19937_64 rng(1);
  const GaussianStats a{random_vec(rng, 10), random_spd(rng, 10)};
  EXPECT_LE(frechet_distance(a, a), 1e-9);
}

TEST(Frechet, MeanShiftWithIdentityCovariance) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 20; ++t) {
    const int d = 1 + t;
    const GaussianStats a{random_vec(rng, d), Eigen::MatrixXd::Identity(d, d)};
    const GaussianStats b{random_vec(rng, d), Eigen::MatrixXd::Identity(d, d)};
    EXPECT_NEAR(frechet_distance(a, b), (a.mu - b.mu).squaredNorm(), 1e-8);
  }
}

TEST(Frechet, ScaledIdentity) {
  const GaussianStats a{Eigen::VectorXd::Zero(8), 4.0 * Eigen::MatrixXd::Identity(8, 8)};
  const GaussianStats b{Eigen::VectorXd::Zero(8), Eigen::MatrixXd::Identity(8, 8)};
  EXPECT_NEAR(frechet_distance(a, b), 8.0, 1e-6);
}

TEST(Frechet, CommutingCovariancesEigenFormula) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.01, 5.0);
  for (int t = 0; t < 20; ++t) {
    const int d = 12;
    const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(random_spd(rng, d)).householderQ();
    Eigen::VectorXd la(d), lb(d);
    for (int i = 0; i < d; ++i) la(i) = u(rng), lb(i) = u(rng);
    const GaussianStats a{random_vec(rng, d), q * la.asDiagonal() * q.transpose()};
    const GaussianStats b{random_vec(rng, d), q * lb.asDiagonal() * q.transpose()};
    const double expect = (la.cwiseSqrt() - lb.cwiseSqrt()).squaredNorm() + (a.mu - b.mu).squaredNorm();
    EXPECT_NEAR(frechet_distance(a, b), expect, 1e-8);
  }
}

TEST(Frechet, MatchesProductEigenvalueOracle) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 30; ++t) {
    const int d = 2 + t % 15;
    const GaussianStats a{random_vec(rng, d), random_spd(rng, d)};
    const GaussianStats b{random_vec(rng, d), random_spd(rng, d)};
    EXPECT_NEAR(frechet_distance(a, b), oracles::frechet(a, b), 1e-8);
  }
}

TEST(Frechet, SymmetricAndNonNegative) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 30; ++t) {
    const GaussianStats a{random_vec(rng, 6), random_spd(rng, 6, 1e-4)};
    const GaussianStats b{random_vec(rng, 6), random_spd(rng, 6, 1e-4)};
    EXPECT_EQ(frechet_distance(a, b), frechet_distance(b, a));
    EXPECT_GE(frechet_distance(a, b), 0.0);
  }
}

TEST(Frechet, Errors) {
  const GaussianStats a{Eigen::VectorXd::Zero(3), Eigen::MatrixXd::Identity(3, 3)};
  const GaussianStats b{Eigen::VectorXd::Zero(4), Eigen::MatrixXd::Identity(4, 4)};
  EXPECT_EQ(code_of([&] { frechet_distance(a, b); }), Errc::DimensionMismatch);
  GaussianStats bad = a;
  bad.cov(0, 0) = -1.0;
  EXPECT_EQ(code_of([&] { frechet_distance(bad, a); }), Errc::NotPSD);
  GaussianStats tiny = a;
  tiny.cov(0, 0) = -1e-10;  // within the clamp band
  EXPECT_NO_THROW(frechet_distance(tiny, a));
}

TEST(Frechet, SamplesLowRankPathMatchesDirect) {
  std::mt19937_64 rng(6);
  for (int t = 0; t < 5; ++t) {
    const Eigen::MatrixXd a = random_samples(rng, 20, 60);
    Eigen::MatrixXd b = random_samples(rng, 25, 60, 1.3);
    b.col(3).array() += 0.7;
    const double direct = frechet_distance(estimate(a, 1, 1e-6), estimate(b, 1, 1e-6));
    EXPECT_NEAR(frechet_from_samples(a, b, 1e-6), direct, 1e-8 * std::max(1.0, direct));
  }
}

TEST(Frechet, TimingAtDimension64) {
  std::mt19937_64 rng(7);
  const Eigen::MatrixXd a = random_samples(rng, 10000, 64);
  const Eigen::MatrixXd b = random_samples(rng, 10000, 64);
  const auto t0 = std::chrono::steady_clock::now();
  const double d = frechet_from_samples(a, b);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_LT(d, 0.5);  // finite-sample bias only
  EXPECT_LT(secs, 1.0);
}

// ---------------------------------------------------------------------------
// Embedder

TEST(Embedder, LineDataHasZeroReconstructionError) {
  Eigen::MatrixXd x(50, 2);
  for (int i = 0; i < 50; ++i) x.row(i) << 1.0 + 0.3 * i, -2.0 + 0.6 * i;
  const auto e = fit_embedder(x, 1);
  EXPECT_LT((e.reconstruct(e.embed(x)) - x).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Embedder, FullRankReconstructsExactly) {
  std::mt19937_64 rng(8);
  const Eigen::MatrixXd x = random_samples(rng, 40, 7);
  const auto e = fit_embedder(x, 7);
  EXPECT_LT((e.reconstruct(e.embed(x)) - x).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Embedder, OrthonormalDeterministicAndSigned) {
  std::mt19937_64 rng(9);
  const Eigen::MatrixXd x = random_samples(rng, 100, 40);
  const auto a = fit_embedder(x, 32);
  const auto b = fit_embedder(x, 32);
  EXPECT_EQ(a.basis, b.basis);
  EXPECT_EQ(a.mean, b.mean);
  EXPECT_LT((a.basis * a.basis.transpose() - Eigen::MatrixXd::Identity(32, 32)).cwiseAbs().maxCoeff(), 1e-10);
  for (int r = 0; r < 32; ++r) {
    Eigen::Index idx;
    a.basis.row(r).cwiseAbs().maxCoeff(&idx);
    EXPECT_GT(a.basis(r, idx), 0.0);
  }
}

TEST(Embedder, DualRouteMatchesPrimal) {
  std::mt19937_64 rng(10);
  // Low-rank structure so the leading subspace is well separated.
  const Eigen::MatrixXd z = random_samples(rng, 30, 5, 3.0);
  const Eigen::MatrixXd w = random_samples(rng, 5, 80);
  const Eigen::MatrixXd x = z * w + random_samples(rng, 30, 80, 0.01);  // D = 80 > n = 30
  const auto e = fit_embedder(x, 5);
  // Primal reference from the explicit D x D covariance.
  const auto s = estimate(x, 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s.cov);
  const Eigen::MatrixXd top = es.eigenvectors().rightCols(5);
  const Eigen::MatrixXd p_ref = top * top.transpose();
  const Eigen::MatrixXd p = e.basis.transpose() * e.basis;
  EXPECT_LT((p - p_ref).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Embedder, OptimalAmongRandomProjections) {
  std::mt19937_64 rng(11);
  const Eigen::MatrixXd x = random_samples(rng, 200, 12) * random_spd(rng, 12);
  const auto e = fit_embedder(x, 4);
  const Eigen::MatrixXd centred = x.rowwise() - e.mean.transpose();
  const double best = (centred - centred * e.basis.transpose() * e.basis).squaredNorm();
  for (int t = 0; t < 100; ++t) {
    const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(random_samples(rng, 12, 4)).householderQ() *
                              Eigen::MatrixXd::Identity(12, 4);
    EXPECT_GE((centred - centred * q * q.transpose()).squaredNorm(), best);
  }
}

TEST(Embedder, TooFewSamplesAndDimensionMismatch) {
  std::mt19937_64 rng(12);
  EXPECT_EQ(code_of([&] { fit_embedder(random_samples(rng, 32, 40), 32); }), Errc::TooFewSamples);
  const auto e = fit_embedder(random_samples(rng, 50, 10), 3);
  EXPECT_EQ(code_of([&] { metrics::compute_fid(random_samples(rng, 5, 9), random_samples(rng, 5, 9), e); }),
            Errc::DimensionMismatch);
}

TEST(Embedder, JsonRoundTrip) {
  std::mt19937_64 rng(13);
  const auto e = fit_embedder(random_samples(rng, 50, 10), 3);
  const auto back = embedder_from_json(nlohmann::json::parse(to_json(e).dump()));
  EXPECT_EQ(back.mean, e.mean);
  EXPECT_EQ(back.basis, e.basis);
}

TEST(Fid, IdentityAndMeanShift) {
  std::mt19937_64 rng(14);
  const Eigen::MatrixXd x = random_samples(rng, 60, 6);
  const auto id = Embedder::identity(6);
  EXPECT_LE(metrics::compute_fid(x, x, id), 1e-12);
  const Eigen::VectorXd v = random_vec(rng, 6);
  const Eigen::MatrixXd shifted = x.rowwise() + v.transpose();
  EXPECT_NEAR(metrics::compute_fid(shifted, x, id), v.squaredNorm(), 1e-8);
}

// ---------------------------------------------------------------------------
// Transport

TEST(Transport, UniformWeightsMatchBestPermutation) {
  std::mt19937_64 rng(15);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (int t = 0; t < 60; ++t) {
    const int n = 2 + t % 5;
    Eigen::MatrixXd c(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) c(i, j) = t % 3 == 0 ? std::floor(u(rng) / 3.0) : u(rng);  // ties too
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += c(i, perm[i]);
      best = std::min(best, s / n);
    } while (std::next_permutation(perm.begin(), perm.end()));
    const std::vector<double> w(n, 1.0 / n);
    const auto plan = transport::solve_transport(w, w, c);
    EXPECT_NEAR(plan.cost, best, 1e-12);
  }
}

TEST(Transport, OneDimensionalMonotoneCoupling) {
  std::mt19937_64 rng(16);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 100; ++t) {
    const int m = 1 + t % 7, n = 1 + (t / 7) % 6;
    std::vector<double> x(m), y(n), a(m), b(n);
    for (auto& v : x) v = 10 * u(rng);
    for (auto& v : y) v = 10 * u(rng);
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    double sa = 0, sb = 0;
    for (auto& v : a) sa += (v = 0.1 + u(rng));
    for (auto& v : b) sb += (v = 0.1 + u(rng));
    for (auto& v : a) v /= sa;
    for (auto& v : b) v /= sb;
    Eigen::MatrixXd c(m, n);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) c(i, j) = (x[i] - y[j]) * (x[i] - y[j]);
    // Quantile coupling of sorted supports is optimal for convex costs.
    double expect = 0.0;
    {
      std::vector<double> ra = a, rb = b;
      int i = 0, j = 0;
      while (i < m && j < n) {
        const double f = std::min(ra[i], rb[j]);
        expect += f * c(i, j);
        ra[i] -= f;
        rb[j] -= f;
        if (ra[i] <= rb[j]) ++i;
        else ++j;
      }
    }
    const auto plan = transport::solve_transport(a, b, c);
    EXPECT_NEAR(plan.cost, expect, 1e-10);
    EXPECT_LT((plan.flow.rowwise().sum() - Eigen::Map<Eigen::VectorXd>(a.data(), m)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((plan.flow.colwise().sum().transpose() - Eigen::Map<Eigen::VectorXd>(b.data(), n)).cwiseAbs().maxCoeff(),
              1e-12);
    EXPECT_GE(plan.flow.minCoeff(), 0.0);
  }
}

TEST(Transport, ZeroWeightsAndErrors) {
  const std::vector<double> a{0.5, 0.0, 0.5}, b{1.0};
  Eigen::MatrixXd c(3, 1);
  c << 1, 2, 3;
  EXPECT_NEAR(transport::solve_transport(a, b, c).cost, 2.0, 1e-15);
  const std::vector<double> bad{0.3};
  EXPECT_EQ(code_of([&] { transport::solve_transport(a, bad, c); }), Errc::InvalidArgument);
  EXPECT_EQ(code_of([&] { transport::solve_transport(a, b, Eigen::MatrixXd::Zero(2, 1)); }), Errc::DimensionMismatch);
}

// ---------------------------------------------------------------------------
// GMM

TEST(Gmm, SingleComponentIsSampleEstimate) {
  std::mt19937_64 rng(17);
  const Eigen::MatrixXd x = random_samples(rng, 300, 4) * random_spd(rng, 4);
  GmmOptions o;
  o.components = 1;
  const auto fit = fit_gmm(x, o);
  const auto ml = estimate(x, 0);
  ASSERT_EQ(fit.model.size(), 1u);
  EXPECT_NEAR(fit.model.weights[0], 1.0, 1e-15);
  EXPECT_LT((fit.model.components[0].mu - ml.mu).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((fit.model.components[0].cov - ml.cov).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Gmm, TwoClustersAgreeWithKMeans) {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd x(400, 1);
  for (int i = 0; i < 400; ++i) x(i, 0) = (i % 2 ? 5.0 : -5.0) + g(rng);
  // Lloyd's algorithm from the extreme points.
  double c0 = x.minCoeff(), c1 = x.maxCoeff();
  for (int it = 0; it < 100; ++it) {
    double s0 = 0, s1 = 0;
    int n0 = 0, n1 = 0;
    for (int i = 0; i < 400; ++i) {
      if (std::abs(x(i, 0) - c0) <= std::abs(x(i, 0) - c1)) s0 += x(i, 0), ++n0;
      else s1 += x(i, 0), ++n1;
    }
    c0 = s0 / n0;
    c1 = s1 / n1;
  }
  GmmOptions o;
  o.components = 2;
  const auto fit = fit_gmm(x, o);
  std::vector<double> means{fit.model.components[0].mu(0), fit.model.components[1].mu(0)};
  std::sort(means.begin(), means.end());
  EXPECT_NEAR(means[0], -5.0, 0.2);
  EXPECT_NEAR(means[1], 5.0, 0.2);
  EXPECT_NEAR(means[0], c0, 0.05);
  EXPECT_NEAR(means[1], c1, 0.05);
  EXPECT_TRUE(fit.converged);
}

TEST(Gmm, LogLikelihoodNonDecreasing) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    Eigen::MatrixXd x = random_samples(rng, 300, 3);
    x.topRows(100).array() += 3.0;
    GmmOptions o;
    o.components = 4;
    o.seed = seed;
    const auto fit = fit_gmm(x, o);
    for (std::size_t i = 1; i < fit.log_likelihood.size(); ++i)
      ASSERT_GE(fit.log_likelihood[i], fit.log_likelihood[i - 1]) << seed << " " << i;
    EXPECT_NEAR(log_likelihood(fit.model, x), fit.log_likelihood.back(), 1e-12);
  }
}

TEST(Gmm, WeightsSumToOneAndCovariancesFloored) {
  std::mt19937_64 rng(18);
  Eigen::MatrixXd x = random_samples(rng, 100, 3);
  x.col(2).setConstant(1.0);  // degenerate direction
  const auto fit = fit_gmm(x);
  double s = 0.0;
  for (double w : fit.model.weights) s += w;
  EXPECT_NEAR(s, 1.0, 1e-12);
  for (const auto& c : fit.model.components) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c.cov);
    EXPECT_GE(es.eigenvalues().minCoeff(), 1e-6 * (1 - 1e-9));
  }
}

TEST(Gmm, TooFewSamples) {
  std::mt19937_64 rng(19);
  EXPECT_EQ(code_of([&] { fit_gmm(random_samples(rng, 5, 2)); }), Errc::TooFewSamples);
}

TEST(GmmW2, IdenticalIsZero) {
  std::mt19937_64 rng(20);
  const auto a = random_1d_mixture(rng, 4);
  EXPECT_LE(gmm_w2(a, a), 1e-9);
}

TEST(GmmW2, SingleComponentsMatchClosedForm) {
  std::mt19937_64 rng(21);
  for (int t = 0; t < 20; ++t) {
    const GaussianStats a{random_vec(rng, 5), random_spd(rng, 5)};
    const GaussianStats b{random_vec(rng, 5), random_spd(rng, 5)};
    EXPECT_NEAR(gmm_w2({{1.0}, {a}}, {{1.0}, {b}}), std::sqrt(oracles::frechet(a, b)), 1e-8);
  }
}

TEST(GmmW2, SymmetryAndTriangle) {
  std::mt19937_64 rng(22);
  for (int t = 0; t < 100; ++t) {
    const auto a = random_1d_mixture(rng, 1 + t % 4);
    const auto b = random_1d_mixture(rng, 1 + (t + 1) % 5);
    const auto c = random_1d_mixture(rng, 1 + (t + 2) % 3);
    EXPECT_NEAR(gmm_w2(a, b), gmm_w2(b, a), 1e-10);
    EXPECT_LE(gmm_w2(a, c), gmm_w2(a, b) + gmm_w2(b, c) + 1e-8);
  }
}

TEST(Wgd, IdenticalAndShift) {
  std::mt19937_64 rng(23);
  const Eigen::MatrixXd x = random_samples(rng, 200, 4);
  EXPECT_LE(metrics::wgd(x, x), 1e-9);
  const Eigen::VectorXd v = random_vec(rng, 4);
  GmmOptions o;
  o.components = 1;
  EXPECT_NEAR(metrics::wgd(x.rowwise() + v.transpose(), x, o), v.norm(), 1e-6);
  o.components = 300;
  EXPECT_EQ(code_of([&] { metrics::wgd(x, x, o); }), Errc::TooFewSamples);
}

// ---------------------------------------------------------------------------
// FGD, PD, smoothness

TEST(Fgd, IdentityOffsetAndRankDeficiency) {
  std::mt19937_64 rng(24);
  const Eigen::MatrixXd x = random_samples(rng, 40, 30);
  EXPECT_LE(metrics::fgd(x, x), 1e-9);
  const double c = 0.3;
  EXPECT_NEAR(metrics::fgd((x.array() + c).matrix(), x), 30 * c * c, 1e-6);
  // High-dimensional sequences with duplicates: rank-deficient covariances.
  Eigen::MatrixXd y(10, 500);
  for (int i = 0; i < 10; ++i) y.row(i) = random_samples(rng, 1, 500).row(0);
  y.row(1) = y.row(0);
  y.row(2) = y.row(0);
  const Eigen::MatrixXd z = random_samples(rng, 10, 500);
  const double d = metrics::fgd(y, z);
  EXPECT_TRUE(std::isfinite(d));
  EXPECT_GT(d, 0.0);
  EXPECT_NEAR(metrics::fgd((y.array() + c).matrix(), y), 500 * c * c, 1e-6);
  EXPECT_EQ(code_of([&] { metrics::fgd(x, z); }), Errc::LengthMismatch);
}

TEST(PositionDistance, Examples) {
  std::mt19937_64 rng(25);
  const Eigen::MatrixX3d p = random_samples(rng, 50, 3);
  EXPECT_EQ(metrics::position_distance(p, p), 0.0);
  const Eigen::RowVector3d off(0.3, -0.4, 1.2);  // length 1.3
  EXPECT_NEAR(metrics::position_distance(p.rowwise() + off, p), 1.69, 1e-12);
  Eigen::MatrixX3d bad = p;
  bad(3, 1) = std::nan("");
  EXPECT_EQ(code_of([&] { metrics::position_distance(bad, p); }), Errc::NonFinite);
  EXPECT_EQ(code_of([&] { metrics::position_distance(p.topRows(3), p); }), Errc::LengthMismatch);
}

TEST(Smoothness, Examples) {
  const hand::Kinematics kin(hand::HandTemplate::neutral());
  std::mt19937_64 rng(26);
  const auto moving = testsupport::smooth_hand(rng, 60, 30.0);
  EXPECT_EQ(metrics::smoothness(moving, moving, HandSide::Right, kin), 0.0);

  HandTrack still{30.0, std::vector<std::optional<HandFrame>>(60, *moving.frames[0])};
  hand::AccelerationSummary gt(kNumPoints);
  gt.add(hand::joint_accelerations(moving, HandSide::Right, kin));
  EXPECT_NEAR(metrics::smoothness(still, moving, HandSide::Right, kin), gt.mean().sum(), 1e-9);

  const double a = 0.002, fps = 30.0;
  HandTrack quad{fps, {}}, lin{fps, {}};
  for (int n = 0; n < 40; ++n) {
    HandFrame f;
    f.trans.y() = a * n * n;
    quad.frames.push_back(f);
    f.trans.y() = 0.01 * n;
    lin.frames.push_back(f);
  }
  EXPECT_NEAR(metrics::smoothness(quad, lin, HandSide::Left, kin), 2 * a * fps * fps * kNumPoints, 1e-8);
}
