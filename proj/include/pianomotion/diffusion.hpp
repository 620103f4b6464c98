#pragma once

// Diffusion-process mathematics for the gesture generator: noise schedules,
// the closed-form forward process, x0 / epsilon / v parameterisations,
// ancestral sampling over (possibly strided) schedules, and the position
// losses used to train the position predictor.

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "pianomotion/error.hpp"

namespace pianomotion::diffusion {

enum class ScheduleKind { Linear };

/// Betas and cumulative alpha products, indexed by step t = 1..T.
class NoiseSchedule {
 public:
  static NoiseSchedule from_betas(std::vector<double> betas) {
    require(!betas.empty(), Errc::BadRange, "schedule needs at least one step");
    NoiseSchedule s;
    double prod = 1.0;
    for (double b : betas) {
      require(b > 0.0 && b < 1.0, Errc::BadRange, "betas must lie strictly within (0, 1)");
      prod *= 1.0 - b;
      s.alpha_bars_.push_back(prod);
    }
    s.betas_ = std::move(betas);
    return s;
  }

  int steps() const noexcept { return static_cast<int>(betas_.size()); }
  double beta(int t) const { return betas_[index(t)]; }
  double alpha_bar(int t) const { return alpha_bars_[index(t)]; }
  const std::vector<double>& betas() const noexcept { return betas_; }
  const std::vector<double>& alpha_bars() const noexcept { return alpha_bars_; }

 private:
  std::size_t index(int t) const {
    require(t >= 1 && t <= steps(), Errc::StepOutOfRange,
            "step " + std::to_string(t) + " outside [1, " + std::to_string(steps()) + "]");
    return static_cast<std::size_t>(t - 1);
  }

  std::vector<double> betas_;
  std::vector<double> alpha_bars_;
};

inline NoiseSchedule build_schedule(int steps = 1000, double beta_start = 1e-4, double beta_end = 0.02,
                                    ScheduleKind kind = ScheduleKind::Linear) {
  require(steps >= 1, Errc::BadRange, "schedule needs at least one step");
  require(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0, Errc::BadRange,
          "need 0 < beta_start <= beta_end < 1");
  std::vector<double> betas(static_cast<std::size_t>(steps));
  switch (kind) {
    case ScheduleKind::Linear:
      for (int i = 0; i < steps; ++i)
        betas[static_cast<std::size_t>(i)] =
            steps == 1 ? beta_start : beta_start + (beta_end - beta_start) * i / static_cast<double>(steps - 1);
      break;
  }
  return NoiseSchedule::from_betas(std::move(betas));
}

// ---------------------------------------------------------------------------
// Forward process and parameterisations. The primitives take alpha_bar
// directly so degenerate values (0 or 1) can be exercised.

namespace detail {
inline void same_shape(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const char* what) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), Errc::ShapeMismatch, what);
}
}  // namespace detail

inline Eigen::MatrixXd q_sample(const Eigen::MatrixXd& x0, const Eigen::MatrixXd& noise, double alpha_bar) {
  detail::same_shape(x0, noise, "q_sample: x0 and noise shapes differ");
  return std::sqrt(alpha_bar) * x0 + std::sqrt(1.0 - alpha_bar) * noise;
}

inline Eigen::MatrixXd q_sample(const Eigen::MatrixXd& x0, int t, const Eigen::MatrixXd& noise,
                                const NoiseSchedule& sched) {
  return q_sample(x0, noise, sched.alpha_bar(t));
}

/// v = sqrt(ab) * eps - sqrt(1 - ab) * x0
inline Eigen::MatrixXd v_convert(const Eigen::MatrixXd& x0, const Eigen::MatrixXd& noise, double alpha_bar) {
  detail::same_shape(x0, noise, "v_convert: x0 and noise shapes differ");
  return std::sqrt(alpha_bar) * noise - std::sqrt(1.0 - alpha_bar) * x0;
}

inline Eigen::MatrixXd v_convert(const Eigen::MatrixXd& x0, const Eigen::MatrixXd& noise, int t,
                                 const NoiseSchedule& sched) {
  return v_convert(x0, noise, sched.alpha_bar(t));
}

/// x0 = sqrt(ab) * x_t - sqrt(1 - ab) * v
inline Eigen::MatrixXd x0_from_v(const Eigen::MatrixXd& v, const Eigen::MatrixXd& x_t, double alpha_bar) {
  detail::same_shape(v, x_t, "x0_from_v: v and x_t shapes differ");
  return std::sqrt(alpha_bar) * x_t - std::sqrt(1.0 - alpha_bar) * v;
}

inline Eigen::MatrixXd x0_from_v(const Eigen::MatrixXd& v, const Eigen::MatrixXd& x_t, int t,
                                 const NoiseSchedule& sched) {
  return x0_from_v(v, x_t, sched.alpha_bar(t));
}

enum class Parameterization { X0, Epsilon, V };

/// Converts a model output in `kind` form to an x0 estimate.
inline Eigen::MatrixXd to_x0(const Eigen::MatrixXd& out, Parameterization kind, const Eigen::MatrixXd& x_t,
                             double alpha_bar) {
  detail::same_shape(out, x_t, "denoiser output shape differs from sample shape");
  switch (kind) {
    case Parameterization::X0: return out;
    case Parameterization::Epsilon: return (x_t - std::sqrt(1.0 - alpha_bar) * out) / std::sqrt(alpha_bar);
    case Parameterization::V: return x0_from_v(out, x_t, alpha_bar);
  }
  return out;
}

/// Expresses an x0 estimate in `kind` form for the given noisy sample.
inline Eigen::MatrixXd from_x0(const Eigen::MatrixXd& x0, Parameterization kind, const Eigen::MatrixXd& x_t,
                               double alpha_bar) {
  detail::same_shape(x0, x_t, "x0 shape differs from sample shape");
  switch (kind) {
    case Parameterization::X0: return x0;
    case Parameterization::Epsilon: return (x_t - std::sqrt(alpha_bar) * x0) / std::sqrt(1.0 - alpha_bar);
    case Parameterization::V: {
      const Eigen::MatrixXd eps = (x_t - std::sqrt(alpha_bar) * x0) / std::sqrt(1.0 - alpha_bar);
      return v_convert(x0, eps, alpha_bar);
    }
  }
  return x0;
}

// ---------------------------------------------------------------------------
// Conditioning and denoisers

/// Opaque conditioning passed through to the denoiser; only frame counts
/// are checked here.
struct Conditioning {
  Eigen::MatrixXd gesture_features;  // frames x C
  Eigen::MatrixXd positions;         // frames x 6 (left xyz, right xyz)
};

struct Denoiser {
  Parameterization kind = Parameterization::X0;
  std::function<Eigen::MatrixXd(const Eigen::MatrixXd& x_t, int t, const Conditioning& cond)> predict;
};

/// Returns the stored clean sample, expressed in the requested form.
inline Denoiser oracle_denoiser(Eigen::MatrixXd x0, const NoiseSchedule& sched,
                                Parameterization kind = Parameterization::X0) {
  return {kind, [x0 = std::move(x0), sched, kind](const Eigen::MatrixXd& x_t, int t, const Conditioning&) {
            return from_x0(x0, kind, x_t, sched.alpha_bar(t));
          }};
}

inline Denoiser zero_denoiser(Parameterization kind = Parameterization::X0) {
  return {kind, [](const Eigen::MatrixXd& x_t, int, const Conditioning&) {
            return Eigen::MatrixXd::Zero(x_t.rows(), x_t.cols()).eval();
          }};
}

// ---------------------------------------------------------------------------
// Sampling

/// S timesteps from T spread uniformly, ending at T: t_i = floor(i * T / S).
inline std::vector<int> strided_timesteps(int total, int steps) {
  require(steps >= 1 && steps <= total, Errc::StepOutOfRange,
          "sampling steps must lie in [1, " + std::to_string(total) + "]");
  std::vector<int> ts(static_cast<std::size_t>(steps));
  for (int i = 1; i <= steps; ++i)
    ts[static_cast<std::size_t>(i - 1)] =
        static_cast<int>((static_cast<std::int64_t>(i) * total) / steps);
  return ts;
}

/// Transition betas of the sub-chain visiting `timesteps`:
/// 1 - ab(t_i) / ab(t_{i-1}), reusing the original beta for unit strides.
struct SubSchedule {
  std::vector<int> timesteps;
  std::vector<double> betas;
  std::vector<double> alpha_bars;
};

inline SubSchedule strided_schedule(const NoiseSchedule& sched, int steps) {
  SubSchedule s;
  s.timesteps = strided_timesteps(sched.steps(), steps);
  int prev = 0;
  double ab_prev = 1.0;
  for (int t : s.timesteps) {
    const double ab = sched.alpha_bar(t);
    s.betas.push_back(t - prev == 1 ? sched.beta(t) : 1.0 - ab / ab_prev);
    s.alpha_bars.push_back(ab);
    prev = t;
    ab_prev = ab;
  }
  return s;
}

enum class ReverseVariance {
  Posterior,  // (1 - ab_prev) / (1 - ab_t) * beta_t
  Beta,       // beta_t
};

struct SampleOptions {
  int steps = 1000;
  std::uint64_t seed = 42;
  ReverseVariance variance = ReverseVariance::Posterior;
};

/// Ancestral sampling from seeded standard normal noise. The sample has
/// `frames` rows and `width` columns (e.g. 2 hands x 16 joints x 3 angles).
inline Eigen::MatrixXd ddpm_sample(const Denoiser& denoiser, const NoiseSchedule& sched, const Conditioning& cond,
                                   Eigen::Index frames, Eigen::Index width, const SampleOptions& opts = {}) {
  require(static_cast<bool>(denoiser.predict), Errc::InvalidArgument, "denoiser has no prediction function");
  require(frames > 0 && width > 0, Errc::ShapeMismatch, "sample shape must be positive");
  require(cond.gesture_features.size() == 0 || cond.gesture_features.rows() == frames, Errc::ShapeMismatch,
          "gesture features frame count differs from sample");
  require(cond.positions.size() == 0 || cond.positions.rows() == frames, Errc::ShapeMismatch,
          "position guidance frame count differs from sample");
  const SubSchedule sub = strided_schedule(sched, opts.steps);

  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto gaussian = [&] {
    Eigen::MatrixXd z(frames, width);
    for (Eigen::Index r = 0; r < frames; ++r)
      for (Eigen::Index c = 0; c < width; ++c) z(r, c) = normal(rng);
    return z;
  };

  Eigen::MatrixXd x = gaussian();
  for (std::size_t i = sub.timesteps.size(); i-- > 0;) {
    const int t = sub.timesteps[i];
    const double ab = sub.alpha_bars[i];
    const double ab_prev = i == 0 ? 1.0 : sub.alpha_bars[i - 1];
    const double beta = sub.betas[i];
    const Eigen::MatrixXd out = denoiser.predict(x, t, cond);
    const Eigen::MatrixXd x0 = to_x0(out, denoiser.kind, x, ab);

    const double coef_x0 = std::sqrt(ab_prev) * beta / (1.0 - ab);
    const double coef_xt = std::sqrt(1.0 - beta) * (1.0 - ab_prev) / (1.0 - ab);
    Eigen::MatrixXd mean = coef_x0 * x0 + coef_xt * x;
    if (i == 0) {
      x = std::move(mean);
      break;
    }
    const double var = opts.variance == ReverseVariance::Posterior ? (1.0 - ab_prev) / (1.0 - ab) * beta : beta;
    x = mean + std::sqrt(var) * gaussian();
  }
  return x;
}

// ---------------------------------------------------------------------------
// Position losses (rows are frames)

/// Mean absolute error over all coordinates.
inline double loss_position(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target) {
  require(pred.rows() == target.rows() && pred.cols() == target.cols(), Errc::LengthMismatch,
          "position arrays differ in shape");
  require(pred.size() > 0, Errc::TooShort, "empty position arrays");
  return (pred - target).cwiseAbs().mean();
}

/// Mean over frames n >= 1 of ||(pred_n - pred_{n-1}) - (target_n - target_{n-1})||_2.
inline double loss_velocity(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target) {
  require(pred.rows() == target.rows() && pred.cols() == target.cols(), Errc::LengthMismatch,
          "position arrays differ in shape");
  require(pred.rows() >= 2, Errc::TooShort, "velocity loss needs at least two frames");
  const Eigen::Index n = pred.rows();
  const Eigen::MatrixXd r = pred - target;
  return (r.bottomRows(n - 1) - r.topRows(n - 1)).rowwise().norm().mean();
}

}  // namespace pianomotion::diffusion
