#pragma once

// Benchmark metrics: FID, FGD, WGD, position distance and smoothness.

#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "pianomotion/embedder.hpp"
#include "pianomotion/error.hpp"
#include "pianomotion/gaussian.hpp"
#include "pianomotion/gmm.hpp"
#include "pianomotion/hand_model.hpp"
#include "pianomotion/motion.hpp"

namespace pianomotion::metrics {

using stats::Embedder;
using stats::GmmOptions;

/// Frechet distance between Gaussians of embedded features (rows = clips).
inline double compute_fid(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& gt, const Embedder& embedder,
                          double reg = stats::kDefaultRegularization) {
  require(pred.rows() > 1 && gt.rows() > 1, Errc::TooFewSamples, "FID needs at least two clips per side");
  const Eigen::MatrixXd fp = embedder.embed(pred);
  const Eigen::MatrixXd fg = embedder.embed(gt);
  return stats::frechet_distance(stats::estimate(fp, 1, reg), stats::estimate(fg, 1, reg));
}

/// Frechet distance over flattened per-hand gesture sequences (rows = sequences).
inline double fgd(const Eigen::MatrixXd& pred_sequences, const Eigen::MatrixXd& gt_sequences,
                  double reg = stats::kDefaultRegularization) {
  require(pred_sequences.cols() == gt_sequences.cols(), Errc::LengthMismatch,
          "sequence lengths differ: " + std::to_string(pred_sequences.cols()) + " vs " +
              std::to_string(gt_sequences.cols()));
  return stats::frechet_from_samples(pred_sequences, gt_sequences, reg);
}

/// Mixture Wasserstein distance between GMMs fitted to per-frame gestures.
inline double wgd(const Eigen::MatrixXd& pred_gestures, const Eigen::MatrixXd& gt_gestures,
                  const GmmOptions& opts = {}) {
  require(pred_gestures.cols() == gt_gestures.cols(), Errc::DimensionMismatch, "gesture dimensions differ");
  const auto a = stats::fit_gmm(pred_gestures, opts);
  const auto b = stats::fit_gmm(gt_gestures, opts);
  return stats::gmm_w2(a.model, b.model);
}

/// Mean over frames of the squared Euclidean distance between root positions.
inline double position_distance(const Eigen::MatrixX3d& pred, const Eigen::MatrixX3d& gt) {
  require(pred.rows() == gt.rows(), Errc::LengthMismatch, "position sequences differ in frame count");
  require(pred.allFinite() && gt.allFinite(), Errc::NonFinite, "positions contain non-finite values");
  require(pred.rows() > 0, Errc::TooShort, "no frames to compare");
  return (pred - gt).rowwise().squaredNorm().mean();
}

/// Sum over points of |mean accel magnitude (pred) - mean accel magnitude (gt)|.
inline double smoothness(const hand::AccelerationSummary& pred, const hand::AccelerationSummary& gt) {
  require(pred.magnitude_sum.size() == gt.magnitude_sum.size(), Errc::DimensionMismatch, "point counts differ");
  return (pred.mean() - gt.mean()).cwiseAbs().sum();
}

inline double smoothness(const HandTrack& pred, const HandTrack& gt, HandSide side, const hand::Kinematics& kin) {
  require(pred.size() == gt.size(), Errc::LengthMismatch, "sequences differ in frame count");
  hand::AccelerationSummary p(kin.hand_template().point_count()), g(kin.hand_template().point_count());
  p.add(hand::joint_accelerations(pred, side, kin));
  g.add(hand::joint_accelerations(gt, side, kin));
  return smoothness(p, g);
}

/// Both hands: joints of the left and right hand summed together.
inline double smoothness(const TwoHandTrack& pred, const TwoHandTrack& gt, const hand::Kinematics& kin) {
  return smoothness(pred.left, gt.left, HandSide::Left, kin) + smoothness(pred.right, gt.right, HandSide::Right, kin);
}

}  // namespace pianomotion::metrics
