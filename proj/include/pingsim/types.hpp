#pragma once

#include <Eigen/Core>

namespace pingsim {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr int kNumJoints = 9;
using JointVector = Eigen::Matrix<double, kNumJoints, 1>;

// Post-hit ball path in the xy plane: x = a1*y + b for y >= 0, x = a2*y + b for y < 0.
struct PiecewiseLinearXY {
  double a1 = 0.0;
  double a2 = 0.0;
  double b = 0.0;

  bool operator==(const PiecewiseLinearXY&) const = default;
};

// Ball position where it crosses the strike plane (cm).
struct StrikePoint {
  double x = 0.0;
  double z = 0.0;

  bool operator==(const StrikePoint&) const = default;
};

// Robot configuration: prismatic joints in metres, revolute joints in radians.
struct JointState {
  JointVector theta = JointVector::Zero();
  JointVector theta_dot = JointVector::Zero();
  double timestamp = 0.0;  // seconds, relative to the opponent's hit
};

}  // namespace pingsim
