#pragma once

// Joint-skeleton hand model: template skeleton, per-joint Euler rotations and
// forward kinematics to 16 joints plus 5 fingertips.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <json.hpp>

#include "pianomotion/error.hpp"
#include "pianomotion/motion.hpp"

namespace pianomotion::hand {

// ---------------------------------------------------------------------------
// Rotations. Euler angles are intrinsic X-Y-Z: R = Rx(a) * Ry(b) * Rz(c).

inline Eigen::Matrix3d euler_to_matrix(const Eigen::Vector3d& e) {
  return (Eigen::AngleAxisd(e.x(), Eigen::Vector3d::UnitX()) * Eigen::AngleAxisd(e.y(), Eigen::Vector3d::UnitY()) *
          Eigen::AngleAxisd(e.z(), Eigen::Vector3d::UnitZ()))
      .toRotationMatrix();
}

/// Inverse of euler_to_matrix with the middle angle in [-pi/2, pi/2].
inline Eigen::Vector3d matrix_to_euler(const Eigen::Matrix3d& r) {
  const double sb = std::clamp(r(0, 2), -1.0, 1.0);
  const double b = std::asin(sb);
  if (std::abs(sb) > 1.0 - 1e-12) {
    // Gimbal lock: only a +/- c is determined; put it all in a.
    const double a = std::atan2(r(2, 1), r(1, 1));
    return {a, b, 0.0};
  }
  return {std::atan2(-r(1, 2), r(2, 2)), b, std::atan2(-r(0, 1), r(0, 0))};
}

inline Eigen::Vector3d axis_angle_to_euler(const Eigen::Vector3d& rotvec) {
  const double angle = rotvec.norm();
  if (angle < 1e-15) return Eigen::Vector3d::Zero();
  return matrix_to_euler(Eigen::AngleAxisd(angle, rotvec / angle).toRotationMatrix());
}

inline Eigen::Vector3d euler_to_axis_angle(const Eigen::Vector3d& euler) {
  const Eigen::AngleAxisd aa(euler_to_matrix(euler));
  return aa.axis() * aa.angle();
}

// ---------------------------------------------------------------------------
// Template

struct HandShape {
  ShapeVector rho = ShapeVector::Zero();
};

/// Skeleton of a right hand; left hands use the same template mirrored in X.
/// offsets[j] is the bone from parent[j] to joint j in the parent frame.
struct HandTemplate {
  std::vector<int> parent;
  std::vector<Eigen::Vector3d> offsets;
  std::vector<int> tip_parent;
  std::vector<Eigen::Vector3d> tip_offsets;
  // (joints + tips) * 3 rows by kShapeDim columns; offset delta = basis * rho.
  std::optional<Eigen::MatrixXd> shape_basis;

  int joint_count() const noexcept { return static_cast<int>(parent.size()); }
  int point_count() const noexcept { return static_cast<int>(parent.size() + tip_parent.size()); }

  /// Joints ordered so each parent precedes its children. Throws on a non-tree.
  std::vector<int> topological_order() const {
    const int n = joint_count();
    require(n >= 1 && parent[0] == 0, Errc::InvalidArgument, "joint 0 must be the root (its own parent)");
    std::vector<std::vector<int>> children(static_cast<std::size_t>(n));
    for (int j = 1; j < n; ++j) {
      const int p = parent[static_cast<std::size_t>(j)];
      require(p >= 0 && p < n && p != j, Errc::InvalidArgument, "bad parent index for joint " + std::to_string(j));
      children[static_cast<std::size_t>(p)].push_back(j);
    }
    std::vector<int> order{0};
    for (std::size_t i = 0; i < order.size(); ++i)
      for (int c : children[static_cast<std::size_t>(order[i])]) order.push_back(c);
    require(static_cast<int>(order.size()) == n, Errc::InvalidArgument, "parent array contains a cycle");
    return order;
  }

  void validate() const {
    const int n = joint_count();
    require(static_cast<int>(offsets.size()) == n, Errc::DimensionMismatch, "offset count differs from joint count");
    require(tip_parent.size() == tip_offsets.size(), Errc::DimensionMismatch, "tip arrays differ in length");
    static_cast<void>(topological_order());
    for (int j = 1; j < n; ++j)
      require(offsets[static_cast<std::size_t>(j)].norm() > 0.0, Errc::InvalidArgument,
              "bone offset of joint " + std::to_string(j) + " has zero length");
    for (std::size_t k = 0; k < tip_parent.size(); ++k) {
      require(tip_parent[k] >= 0 && tip_parent[k] < n, Errc::InvalidArgument, "bad fingertip parent index");
      require(tip_offsets[k].norm() > 0.0, Errc::InvalidArgument, "fingertip offset has zero length");
    }
    if (shape_basis) {
      require(shape_basis->rows() == 3 * point_count() && shape_basis->cols() == kShapeDim, Errc::DimensionMismatch,
              "shape basis must be (3 * points) x 10");
      require(shape_basis->allFinite(), Errc::NonFinite, "shape basis contains non-finite values");
    }
  }

  /// Shape-adjusted bone offsets for all points (joints then tips), right-hand frame.
  std::vector<Eigen::Vector3d> shaped_offsets(const HandShape& shape) const {
    std::vector<Eigen::Vector3d> out(offsets);
    out.insert(out.end(), tip_offsets.begin(), tip_offsets.end());
    if (shape_basis) {
      const Eigen::VectorXd delta = *shape_basis * shape.rho;
      for (std::size_t i = 0; i < out.size(); ++i) out[i] += delta.segment<3>(static_cast<Eigen::Index>(3 * i));
    }
    return out;
  }

  /// Neutral adult right hand, meters. Fingers point along +Y with the palm
  /// facing -Z and the thumb on the -X side. Joint layout: wrist, then
  /// index, middle, pinky, ring, thumb (three joints each).
  static HandTemplate neutral() {
    HandTemplate t;
    t.parent = {0, 0, 1, 2, 0, 4, 5, 0, 7, 8, 0, 10, 11, 0, 13, 14};
    t.offsets = {
        {0.0, 0.0, 0.0},
        // index
        {-0.025, 0.095, 0.0}, {0.0, 0.040, 0.0}, {0.0, 0.024, 0.0},
        // middle
        {-0.003, 0.097, 0.0}, {0.0, 0.045, 0.0}, {0.0, 0.028, 0.0},
        // pinky
        {0.038, 0.080, 0.0}, {0.0, 0.030, 0.0}, {0.0, 0.019, 0.0},
        // ring
        {0.018, 0.092, 0.0}, {0.0, 0.042, 0.0}, {0.0, 0.027, 0.0},
        // thumb
        {-0.030, 0.030, -0.010}, {-0.020, 0.030, 0.0}, {-0.010, 0.030, 0.0},
    };
    t.tip_parent = {3, 6, 9, 12, 15};
    t.tip_offsets = {{0.0, 0.021, 0.0}, {0.0, 0.023, 0.0}, {0.0, 0.018, 0.0}, {0.0, 0.022, 0.0}, {-0.008, 0.025, 0.0}};
    return t;
  }
};

inline nlohmann::ordered_json to_json(const HandTemplate& t) {
  auto vec3 = [](const Eigen::Vector3d& v) { return nlohmann::ordered_json::array({v.x(), v.y(), v.z()}); };
  nlohmann::ordered_json j;
  j["parents"] = t.parent;
  j["offsets"] = nlohmann::ordered_json::array();
  for (const auto& o : t.offsets) j["offsets"].push_back(vec3(o));
  j["tip_parents"] = t.tip_parent;
  j["tip_offsets"] = nlohmann::ordered_json::array();
  for (const auto& o : t.tip_offsets) j["tip_offsets"].push_back(vec3(o));
  if (t.shape_basis) {
    j["shape_basis"] = {{"rows", t.shape_basis->rows()}, {"cols", t.shape_basis->cols()}, {"data", {}}};
    auto& data = j["shape_basis"]["data"] = nlohmann::ordered_json::array();
    for (Eigen::Index r = 0; r < t.shape_basis->rows(); ++r)
      for (Eigen::Index c = 0; c < t.shape_basis->cols(); ++c) data.push_back((*t.shape_basis)(r, c));
  }
  return j;
}

inline HandTemplate template_from_json(const nlohmann::json& j) {
  auto vec3 = [](const nlohmann::json& a, const char* what) {
    require(a.is_array() && a.size() == 3, Errc::SchemaViolation, std::string(what) + " entries must have 3 values");
    return Eigen::Vector3d(a[0].get<double>(), a[1].get<double>(), a[2].get<double>());
  };
  try {
    HandTemplate t;
    t.parent = j.at("parents").get<std::vector<int>>();
    for (const auto& o : j.at("offsets")) t.offsets.push_back(vec3(o, "offsets"));
    if (j.contains("tip_parents")) t.tip_parent = j.at("tip_parents").get<std::vector<int>>();
    if (j.contains("tip_offsets"))
      for (const auto& o : j.at("tip_offsets")) t.tip_offsets.push_back(vec3(o, "tip_offsets"));
    if (j.contains("shape_basis") && !j["shape_basis"].is_null()) {
      const auto& b = j["shape_basis"];
      const auto rows = b.at("rows").get<Eigen::Index>();
      const auto cols = b.at("cols").get<Eigen::Index>();
      const auto data = b.at("data").get<std::vector<double>>();
      require(rows >= 0 && cols >= 0 && static_cast<std::size_t>(rows * cols) == data.size(), Errc::SchemaViolation,
              "shape_basis data size does not match rows x cols");
      Eigen::MatrixXd m(rows, cols);
      for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[static_cast<std::size_t>(r * cols + c)];
      t.shape_basis = std::move(m);
    }
    t.validate();
    return t;
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::SchemaViolation, std::string("hand template: ") + e.what());
  }
}

inline HandTemplate load_template(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::Io, "cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::SchemaViolation, path + ": " + e.what());
  }
  return template_from_json(j);
}

// ---------------------------------------------------------------------------
// Forward kinematics

struct HandPose {
  Eigen::MatrixX3d theta;  // joints x 3 Euler angles, radians
  Eigen::Vector3d trans = Eigen::Vector3d::Zero();
  HandSide side = HandSide::Right;

  static HandPose from_frame(const HandFrame& f, HandSide side) { return {f.theta, f.trans, side}; }
};

/// World-frame positions: joints first (row 0 is the root), then fingertips.
using JointSet = Eigen::MatrixX3d;

/// Reflection through the YZ plane, mapping a right-hand pose to the
/// equivalent left-hand pose and back.
inline HandPose mirror_pose(const HandPose& pose) {
  HandPose m = pose;
  m.theta.col(1) *= -1.0;
  m.theta.col(2) *= -1.0;
  m.trans.x() *= -1.0;
  m.side = pose.side == HandSide::Left ? HandSide::Right : HandSide::Left;
  return m;
}

class Kinematics {
 public:
  explicit Kinematics(HandTemplate tmpl, HandShape shape = {}) : template_(std::move(tmpl)) {
    template_.validate();
    require(shape.rho.allFinite(), Errc::NonFinite, "shape coefficients must be finite");
    order_ = template_.topological_order();
    right_ = template_.shaped_offsets(shape);
    left_ = right_;
    for (auto& o : left_) o.x() = -o.x();
  }

  const HandTemplate& hand_template() const noexcept { return template_; }

  const std::vector<Eigen::Vector3d>& offsets(HandSide side) const noexcept {
    return side == HandSide::Left ? left_ : right_;
  }

  JointSet forward(const HandPose& pose) const {
    const int n = template_.joint_count();
    require(pose.theta.rows() == n, Errc::DimensionMismatch,
            "pose has " + std::to_string(pose.theta.rows()) + " joints, template has " + std::to_string(n));
    const auto& off = offsets(pose.side);
    std::vector<Eigen::Matrix3d> global(static_cast<std::size_t>(n));
    JointSet points(template_.point_count(), 3);
    for (int j : order_) {
      const Eigen::Matrix3d local = euler_to_matrix(pose.theta.row(j).transpose());
      if (j == 0) {
        global[0] = local;
        points.row(0).setZero();
        continue;
      }
      const auto p = static_cast<std::size_t>(template_.parent[static_cast<std::size_t>(j)]);
      points.row(j) = points.row(static_cast<Eigen::Index>(p)) + (global[p] * off[static_cast<std::size_t>(j)]).transpose();
      global[static_cast<std::size_t>(j)] = global[p] * local;
    }
    for (std::size_t k = 0; k < template_.tip_parent.size(); ++k) {
      const auto p = static_cast<std::size_t>(template_.tip_parent[k]);
      const auto row = static_cast<Eigen::Index>(static_cast<std::size_t>(n) + k);
      points.row(row) = points.row(static_cast<Eigen::Index>(p)) + (global[p] * off[static_cast<std::size_t>(n) + k]).transpose();
    }
    // Root-relative chain first, translation applied once: the output for
    // trans t is bit-identical to the zero-translation output plus t.
    points.rowwise() += pose.trans.transpose();
    return points;
  }

  JointSet forward(const HandFrame& frame, HandSide side) const { return forward(HandPose::from_frame(frame, side)); }

 private:
  HandTemplate template_;
  std::vector<int> order_;
  std::vector<Eigen::Vector3d> right_;
  std::vector<Eigen::Vector3d> left_;
};

inline JointSet forward_kinematics(const HandPose& pose, const HandShape& shape, const HandTemplate& tmpl) {
  return Kinematics(tmpl, shape).forward(pose);
}

// ---------------------------------------------------------------------------
// Accelerations

struct JointAccelerations {
  std::vector<std::size_t> frames;        // centre frame n of each (n-1, n, n+1) triple
  std::vector<Eigen::MatrixX3d> values;   // per point, m/s^2
};

/// Second central differences of FK joint positions. Only frames whose two
/// neighbours are also visible contribute.
inline JointAccelerations joint_accelerations(const HandTrack& track, HandSide side, const Kinematics& kin) {
  require(track.size() >= 3, Errc::TooShort, "need at least 3 frames for accelerations");
  require(track.fps > 0.0, Errc::InvalidArgument, "fps must be positive");
  const double fps2 = track.fps * track.fps;
  std::vector<std::optional<JointSet>> pos(track.size());
  for (std::size_t i = 0; i < track.size(); ++i)
    if (track.frames[i]) pos[i] = kin.forward(*track.frames[i], side);
  JointAccelerations out;
  for (std::size_t n = 1; n + 1 < track.size(); ++n) {
    if (!pos[n - 1] || !pos[n] || !pos[n + 1]) continue;
    out.frames.push_back(n);
    out.values.push_back((*pos[n + 1] - 2.0 * *pos[n] + *pos[n - 1]) * fps2);
  }
  return out;
}

/// Running per-point sums of acceleration magnitudes, pooled across clips.
struct AccelerationSummary {
  Eigen::VectorXd magnitude_sum;
  std::size_t samples = 0;

  explicit AccelerationSummary(int points = kNumPoints) : magnitude_sum(Eigen::VectorXd::Zero(points)) {}

  void add(const JointAccelerations& acc) {
    for (const auto& a : acc.values) {
      require(a.rows() == magnitude_sum.size(), Errc::DimensionMismatch, "point count changed between clips");
      magnitude_sum += a.rowwise().norm();
      ++samples;
    }
  }

  /// Mean magnitude per point; zeros when no frame qualified.
  Eigen::VectorXd mean() const {
    if (samples == 0) return Eigen::VectorXd::Zero(magnitude_sum.size());
    return magnitude_sum / static_cast<double>(samples);
  }
};

}  // namespace pianomotion::hand
