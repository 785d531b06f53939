#pragma once

// 9-DOF kinematic model of a mobile base (X1, Y1) carrying a 7-axis arm
// (A1..A7), joint limit envelope, and the workspace velocity controller.
//
// Internally the joint space is SI: prismatic joints in metres, revolute joints
// in radians. Forward kinematics reports metres in the table frame; callers
// working in centimetres convert at the boundary.

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "pingsim/types.hpp"

namespace pingsim {

enum class JointType { Prismatic, Revolute };

struct JointLimit {
  std::string name;
  JointType type = JointType::Revolute;
  double min = 0.0;
  double max = 0.0;
  double velocity = 0.0;      // m/s or rad/s
  double acceleration = 0.0;  // m/s^2 or rad/s^2
};

struct JointLimits {
  std::array<JointLimit, kNumJoints> joints;

  JointVector min() const;
  JointVector max() const;
  JointVector velocity() const;
  JointVector acceleration() const;
  bool within_position(const JointVector& theta, double tol = 1e-9) const;

  // Effective KUKA LBR iiwa 14 + Ridgeback envelope.
  static JointLimits defaults();
};

// Revolute entries are read in degrees, prismatic ones in metres.
JointLimits limits_from_json(const nlohmann::json& j);
nlohmann::json limits_to_json(const JointLimits& limits);

struct JointDescriptor {
  std::string name;
  JointType type = JointType::Revolute;
  Vec3 axis = Vec3::UnitZ();       // in the joint frame
  Vec3 offset = Vec3::Zero();      // from the previous frame (m)
  Mat3 fixed_rotation = Mat3::Identity();
};

struct KinematicChain {
  std::array<JointDescriptor, kNumJoints> joints;
  Vec3 tool_offset = Vec3::Zero();          // flange to paddle centre (m)
  Vec3 paddle_normal_local = Vec3::UnitX();
  Vec3 ready_paddle_position{0.0, -1.40, 0.20};  // m, table frame
  JointVector ready_seed = JointVector::Zero();

  // Nominal LBR iiwa 14 R820 link offsets on a Ridgeback base placed 50 cm
  // behind the strike plane.
  static KinematicChain defaults();
};

KinematicChain chain_from_json(const nlohmann::json& j);
nlohmann::json chain_to_json(const KinematicChain& chain);

struct PaddleState {
  Vec3 position = Vec3::Zero();  // m
  Vec3 normal = Vec3::UnitY();
};

PaddleState forward_kinematics(const KinematicChain& chain, const JointVector& theta);
// Same, rejecting configurations outside the position limits.
PaddleState forward_kinematics(const KinematicChain& chain, const JointLimits& limits, const JointVector& theta);

using PositionJacobian = Eigen::Matrix<double, 3, kNumJoints>;
PositionJacobian spatial_jacobian(const KinematicChain& chain, const JointVector& theta);

struct MinNormSolution {
  Eigen::VectorXd theta_dot;
  double smallest_singular_value = 0.0;
};

// Moore-Penrose solution of J * theta_dot = U.
MinNormSolution min_norm_joint_velocity(const Eigen::MatrixXd& jacobian, const Eigen::VectorXd& workspace_velocity);

struct ConstrainedVelocity {
  JointVector theta_dot = JointVector::Zero();
  double beta = 0.0;
  // False when no shared scale satisfies every joint; each joint then brakes
  // towards rest as hard as its acceleration bound allows.
  bool direction_preserved = true;
};

// Largest beta in [-1, 1] with |beta*cmd| <= vmax and |beta*cmd - prev| <= amax*dt.
ConstrainedVelocity constrain_velocity(const JointVector& commanded, const JointVector& previous,
                                       const JointLimits& limits, double dt);

struct JointStep {
  JointVector theta = JointVector::Zero();
  JointVector velocity = JointVector::Zero();  // realised, after the position clamp
};

// theta + dt * alpha * theta_dot, clamped to the position limits.
JointStep step_joints(const JointVector& theta, const JointVector& theta_dot, double alpha,
                      const JointLimits& limits, double dt);

struct LimitAudit {
  int position = 0;
  int velocity = 0;
  int acceleration = 0;
  double worst_excess = 0.0;

  int total() const { return position + velocity + acceleration; }
};

// Checks each state of a control trace (consecutive states dt apart, starting
// from rest) against the envelope.
LimitAudit audit_trace(std::span<const JointState> trace, const JointLimits& limits, double dt,
                       double tol = 1e-9);

// Damped least-squares IK for the paddle position.
JointVector solve_position_ik(const KinematicChain& chain, const JointLimits& limits, const Vec3& target,
                              const JointVector& seed, int max_iterations = 500);

struct Robot {
  KinematicChain chain;
  JointLimits limits;
  JointVector ready = JointVector::Zero();

  static Robot make(KinematicChain chain, JointLimits limits);
  static Robot defaults();
};

Robot load_robot(const std::filesystem::path& limits_path, const std::filesystem::path& chain_path);

}  // namespace pingsim
