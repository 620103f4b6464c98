#pragma once

// Core per-hand motion containers shared by the pipeline, metrics and I/O.

#include <cmath>
#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "pianomotion/error.hpp"

namespace pianomotion {

constexpr int kNumJoints = 16;     // 1 root + 15 articulations
constexpr int kNumTips = 5;
constexpr int kNumPoints = kNumJoints + kNumTips;
constexpr int kShapeDim = 10;
constexpr int kAngleChannels = kNumJoints * 3;

enum class HandSide { Left, Right };

constexpr std::string_view to_string(HandSide side) noexcept { return side == HandSide::Left ? "left" : "right"; }

using JointAngles = Eigen::Matrix<double, kNumJoints, 3, Eigen::RowMajor>;
using ShapeVector = Eigen::Matrix<double, kShapeDim, 1>;

/// One observed hand in one frame: per-joint Euler angles plus root position.
struct HandFrame {
  JointAngles theta = JointAngles::Zero();
  Eigen::Vector3d trans = Eigen::Vector3d::Zero();

  bool all_finite() const { return theta.allFinite() && trans.allFinite(); }
  bool operator==(const HandFrame& o) const { return theta == o.theta && trans == o.trans; }

  /// Flat channel view: 48 angle channels followed by 3 translation channels.
  double channel(int c) const { return c < kAngleChannels ? theta(c / 3, c % 3) : trans(c - kAngleChannels); }
  double& channel(int c) { return c < kAngleChannels ? theta(c / 3, c % 3) : trans(c - kAngleChannels); }
};

constexpr int kFrameChannels = kAngleChannels + 3;

/// A single hand over time; an empty optional marks an invisible frame.
struct HandTrack {
  double fps = 30.0;
  std::vector<std::optional<HandFrame>> frames;

  std::size_t size() const noexcept { return frames.size(); }
  bool visible(std::size_t i) const { return frames[i].has_value(); }
  std::size_t visible_count() const {
    std::size_t n = 0;
    for (const auto& f : frames) n += f.has_value();
    return n;
  }
  bool operator==(const HandTrack&) const = default;
};

struct TwoHandTrack {
  HandTrack left;
  HandTrack right;

  double fps() const noexcept { return left.fps; }
  std::size_t size() const noexcept { return left.size(); }
  const HandTrack& hand(HandSide s) const { return s == HandSide::Left ? left : right; }
  HandTrack& hand(HandSide s) { return s == HandSide::Left ? left : right; }

  void validate() const {
    require(left.fps > 0.0 && std::isfinite(left.fps), Errc::InvalidArgument, "fps must be positive");
    require(left.fps == right.fps, Errc::InvalidArgument, "left and right hands differ in fps");
    require(left.size() == right.size(), Errc::LengthMismatch, "left and right hands differ in frame count");
  }
  bool operator==(const TwoHandTrack&) const = default;
};

}  // namespace pianomotion
