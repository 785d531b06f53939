#include "pingsim/robot.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include "pingsim/error.hpp"
#include "pingsim/segment_io.hpp"

namespace pingsim {

using nlohmann::json;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

JointLimit prismatic(const char* name, double range, double acc, double vel) {
  return {name, JointType::Prismatic, -range, range, vel, acc};
}

JointLimit revolute(const char* name, double range_deg, double acc_deg, double vel_deg) {
  return {name, JointType::Revolute, -range_deg * kDeg, range_deg * kDeg, vel_deg * kDeg, acc_deg * kDeg};
}

const char* type_name(JointType t) { return t == JointType::Prismatic ? "prismatic" : "revolute"; }

JointType parse_type(const std::string& s) {
  if (s == "prismatic") return JointType::Prismatic;
  if (s == "revolute") return JointType::Revolute;
  fail(ErrorCode::Config, "unknown joint type '" + s + "'");
}

Vec3 vec_from(const json& j) {
  if (!j.is_array() || j.size() != 3) fail(ErrorCode::Config, "expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Mat3 rpy(double roll, double pitch, double yaw) {
  return (Eigen::AngleAxisd(yaw, Vec3::UnitZ()) * Eigen::AngleAxisd(pitch, Vec3::UnitY()) *
          Eigen::AngleAxisd(roll, Vec3::UnitX()))
      .toRotationMatrix();
}

Vec3 to_rpy(const Mat3& r) {
  const Vec3 ypr = r.eulerAngles(2, 1, 0);
  return {ypr(2), ypr(1), ypr(0)};
}

}  // namespace

JointVector JointLimits::min() const {
  JointVector v;
  for (int i = 0; i < kNumJoints; ++i) v(i) = joints[i].min;
  return v;
}
JointVector JointLimits::max() const {
  JointVector v;
  for (int i = 0; i < kNumJoints; ++i) v(i) = joints[i].max;
  return v;
}
JointVector JointLimits::velocity() const {
  JointVector v;
  for (int i = 0; i < kNumJoints; ++i) v(i) = joints[i].velocity;
  return v;
}
JointVector JointLimits::acceleration() const {
  JointVector v;
  for (int i = 0; i < kNumJoints; ++i) v(i) = joints[i].acceleration;
  return v;
}

bool JointLimits::within_position(const JointVector& theta, double tol) const {
  for (int i = 0; i < kNumJoints; ++i)
    if (!(theta(i) >= joints[i].min - tol && theta(i) <= joints[i].max + tol)) return false;
  return true;
}

JointLimits JointLimits::defaults() {
  return {{prismatic("X1", 1.0, 15.0, 1.1), prismatic("Y1", 1.0, 15.0, 1.1),
           revolute("A1", 170, 3.69e3, 85), revolute("A2", 120, 3.47e3, 85),
           revolute("A3", 170, 7.42e3, 100), revolute("A4", 120, 1.37e4, 75),
           revolute("A5", 170, 3.79e4, 130), revolute("A6", 120, 3.81e5, 135),
           revolute("A7", 175, 5.72e5, 135)}};
}

JointLimits limits_from_json(const json& j) {
  if (j.value("version", 0) != 1) fail(ErrorCode::Config, "robot limits: missing or unsupported version");
  try {
    const json& arr = j.at("joints");
    if (arr.size() != kNumJoints) fail(ErrorCode::Config, "robot limits: expected 9 joints");
    JointLimits out;
    for (int i = 0; i < kNumJoints; ++i) {
      const json& e = arr[i];
      JointLimit l;
      l.name = e.at("name").get<std::string>();
      l.type = parse_type(e.at("type").get<std::string>());
      const double scale = l.type == JointType::Revolute ? kDeg : 1.0;
      l.min = e.at("position")[0].get<double>() * scale;
      l.max = e.at("position")[1].get<double>() * scale;
      l.velocity = e.at("velocity").get<double>() * scale;
      l.acceleration = e.at("acceleration").get<double>() * scale;
      if (!(l.min < l.max) || !(l.velocity > 0) || !(l.acceleration > 0))
        fail(ErrorCode::Config, "robot limits: invalid envelope for joint " + l.name);
      out.joints[i] = l;
    }
    return out;
  } catch (const json::exception& e) {
    fail(ErrorCode::Config, std::string("robot limits: ") + e.what());
  }
}

json limits_to_json(const JointLimits& limits) {
  json arr = json::array();
  for (const JointLimit& l : limits.joints) {
    const double scale = l.type == JointType::Revolute ? 1.0 / kDeg : 1.0;
    arr.push_back({{"name", l.name},
                   {"type", type_name(l.type)},
                   {"position", {l.min * scale, l.max * scale}},
                   {"velocity", l.velocity * scale},
                   {"acceleration", l.acceleration * scale}});
  }
  return {{"version", 1}, {"units", {{"prismatic", "m"}, {"revolute", "deg"}}}, {"joints", arr}};
}

KinematicChain KinematicChain::defaults() {
  KinematicChain c;
  auto joint = [](const char* name, JointType type, Vec3 axis, Vec3 offset) {
    JointDescriptor d;
    d.name = name;
    d.type = type;
    d.axis = axis;
    d.offset = offset;
    return d;
  };
  c.joints[0] = joint("X1", JointType::Prismatic, Vec3::UnitX(), Vec3(0.0, -1.90, -0.46));
  c.joints[1] = joint("Y1", JointType::Prismatic, Vec3::UnitY(), Vec3::Zero());
  c.joints[2] = joint("A1", JointType::Revolute, Vec3::UnitZ(), Vec3(0, 0, 0.1575));
  // Arm base yawed so that its x axis faces the opponent.
  c.joints[2].fixed_rotation = rpy(0, 0, 0.5 * std::numbers::pi);
  c.joints[3] = joint("A2", JointType::Revolute, Vec3::UnitY(), Vec3(0, 0, 0.2025));
  c.joints[4] = joint("A3", JointType::Revolute, Vec3::UnitZ(), Vec3(0, 0, 0.2045));
  c.joints[5] = joint("A4", JointType::Revolute, -Vec3::UnitY(), Vec3(0, 0, 0.2155));
  c.joints[6] = joint("A5", JointType::Revolute, Vec3::UnitZ(), Vec3(0, 0, 0.1845));
  c.joints[7] = joint("A6", JointType::Revolute, Vec3::UnitY(), Vec3(0, 0, 0.2155));
  c.joints[8] = joint("A7", JointType::Revolute, Vec3::UnitZ(), Vec3(0, 0, 0.0810));
  c.tool_offset = Vec3(0, 0, 0.195);
  c.paddle_normal_local = Vec3::UnitX();
  c.ready_paddle_position = Vec3(0.0, -1.40, 0.20);
  c.ready_seed << 0, 0, 0, -5 * kDeg, 0, -80 * kDeg, 0, 70 * kDeg, 0;
  return c;
}

KinematicChain chain_from_json(const json& j) {
  if (j.value("version", 0) != 1) fail(ErrorCode::Config, "robot chain: missing or unsupported version");
  try {
    const json& arr = j.at("joints");
    if (arr.size() != kNumJoints) fail(ErrorCode::Config, "robot chain: expected 9 joints");
    KinematicChain c;
    for (int i = 0; i < kNumJoints; ++i) {
      const json& e = arr[i];
      JointDescriptor d;
      d.name = e.at("name").get<std::string>();
      d.type = parse_type(e.at("type").get<std::string>());
      d.axis = vec_from(e.at("axis")).normalized();
      d.offset = vec_from(e.at("offset_m"));
      const Vec3 r = vec_from(e.value("fixed_rpy_deg", json::array({0, 0, 0}))) * kDeg;
      d.fixed_rotation = rpy(r.x(), r.y(), r.z());
      c.joints[i] = d;
    }
    c.tool_offset = vec_from(j.at("tool_offset_m"));
    c.paddle_normal_local = vec_from(j.at("paddle_normal_local")).normalized();
    const json& ready = j.at("ready");
    c.ready_paddle_position = vec_from(ready.at("paddle_position_cm")) / 100.0;
    const json& seed = ready.at("seed");
    if (seed.size() != kNumJoints) fail(ErrorCode::Config, "robot chain: ready seed needs 9 entries");
    for (int i = 0; i < kNumJoints; ++i)
      c.ready_seed(i) = seed[i].get<double>() * (c.joints[i].type == JointType::Revolute ? kDeg : 1.0);
    return c;
  } catch (const json::exception& e) {
    fail(ErrorCode::Config, std::string("robot chain: ") + e.what());
  }
}

json chain_to_json(const KinematicChain& chain) {
  json arr = json::array();
  for (const JointDescriptor& d : chain.joints)
    arr.push_back({{"name", d.name},
                   {"type", type_name(d.type)},
                   {"axis", vec_json(d.axis)},
                   {"offset_m", vec_json(d.offset)},
                   {"fixed_rpy_deg", vec_json(to_rpy(d.fixed_rotation) / kDeg)}});
  json seed = json::array();
  for (int i = 0; i < kNumJoints; ++i)
    seed.push_back(chain.ready_seed(i) / (chain.joints[i].type == JointType::Revolute ? kDeg : 1.0));
  return {{"version", 1},
          {"joints", arr},
          {"tool_offset_m", vec_json(chain.tool_offset)},
          {"paddle_normal_local", vec_json(chain.paddle_normal_local)},
          {"ready", {{"paddle_position_cm", vec_json(chain.ready_paddle_position * 100.0)}, {"seed", seed}}}};
}

namespace {

struct ChainFrames {
  std::array<Vec3, kNumJoints> origin;
  std::array<Vec3, kNumJoints> axis;
  Vec3 tip;
  Mat3 tip_rotation;
};

ChainFrames compose(const KinematicChain& chain, const JointVector& theta) {
  ChainFrames f;
  Mat3 r = Mat3::Identity();
  Vec3 p = Vec3::Zero();
  for (int i = 0; i < kNumJoints; ++i) {
    const JointDescriptor& d = chain.joints[i];
    p += r * d.offset;
    r = r * d.fixed_rotation;
    f.origin[i] = p;
    f.axis[i] = r * d.axis;
    if (d.type == JointType::Prismatic) p += f.axis[i] * theta(i);
    else r = r * Eigen::AngleAxisd(theta(i), d.axis).toRotationMatrix();
  }
  f.tip = p + r * chain.tool_offset;
  f.tip_rotation = r;
  return f;
}

}  // namespace

PaddleState forward_kinematics(const KinematicChain& chain, const JointVector& theta) {
  const ChainFrames f = compose(chain, theta);
  return {f.tip, f.tip_rotation * chain.paddle_normal_local};
}

PaddleState forward_kinematics(const KinematicChain& chain, const JointLimits& limits, const JointVector& theta) {
  if (!limits.within_position(theta))
    fail(ErrorCode::InvalidArgument, "forward_kinematics: configuration outside joint limits");
  return forward_kinematics(chain, theta);
}

PositionJacobian spatial_jacobian(const KinematicChain& chain, const JointVector& theta) {
  const ChainFrames f = compose(chain, theta);
  PositionJacobian j;
  for (int i = 0; i < kNumJoints; ++i)
    j.col(i) = chain.joints[i].type == JointType::Prismatic ? f.axis[i] : f.axis[i].cross(f.tip - f.origin[i]);
  return j;
}

MinNormSolution min_norm_joint_velocity(const Eigen::MatrixXd& jacobian, const Eigen::VectorXd& workspace_velocity) {
  require(jacobian.rows() == workspace_velocity.size(), "min_norm_joint_velocity: dimension mismatch");
  require(jacobian.allFinite() && workspace_velocity.allFinite(), "min_norm_joint_velocity: non-finite input");
  MinNormSolution out;
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(jacobian);
  out.theta_dot = cod.solve(workspace_velocity);
  const Eigen::MatrixXd gram = jacobian * jacobian.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
  out.smallest_singular_value = std::sqrt(std::max(0.0, eig.eigenvalues().minCoeff()));
  return out;
}

ConstrainedVelocity constrain_velocity(const JointVector& commanded, const JointVector& previous,
                                       const JointLimits& limits, double dt) {
  require(dt > 0.0, "constrain_velocity: dt must be positive");
  require(commanded.allFinite() && previous.allFinite(), "constrain_velocity: non-finite input");
  double lo = -1.0, hi = 1.0;
  bool feasible = true;
  for (int i = 0; i < kNumJoints; ++i) {
    const double c = commanded(i), p = previous(i);
    const double v = limits.joints[i].velocity;
    const double a = limits.joints[i].acceleration * dt;
    if (c == 0.0) {
      if (std::abs(p) > a) feasible = false;
      continue;
    }
    const double vb = v / std::abs(c);
    lo = std::max(lo, -vb);
    hi = std::min(hi, vb);
    const double b1 = (p - a) / c, b2 = (p + a) / c;
    lo = std::max(lo, std::min(b1, b2));
    hi = std::min(hi, std::max(b1, b2));
  }
  ConstrainedVelocity out;
  if (feasible && lo <= hi) {
    out.beta = hi;
    out.theta_dot = hi * commanded;
    return out;
  }
  // No common scale: brake each joint as hard as its acceleration allows.
  out.beta = 0.0;
  out.direction_preserved = false;
  for (int i = 0; i < kNumJoints; ++i) {
    const double a = limits.joints[i].acceleration * dt;
    const double p = previous(i);
    out.theta_dot(i) = std::clamp(0.0, p - a, p + a);
  }
  return out;
}

JointStep step_joints(const JointVector& theta, const JointVector& theta_dot, double alpha, const JointLimits& limits,
                      double dt) {
  require(alpha >= 0.0 && alpha <= 1.0, "step_joints: alpha must lie in [0, 1]");
  require(dt > 0.0, "step_joints: dt must be positive");
  JointStep s;
  const JointVector lo = limits.min(), hi = limits.max();
  for (int i = 0; i < kNumJoints; ++i) {
    s.theta(i) = std::min(std::max(theta(i) + dt * alpha * theta_dot(i), lo(i)), hi(i));
    s.velocity(i) = (s.theta(i) - theta(i)) / dt;
  }
  return s;
}

LimitAudit audit_trace(std::span<const JointState> trace, const JointLimits& limits, double dt, double tol) {
  LimitAudit audit;
  JointVector prev = JointVector::Zero();
  auto note = [&](int& counter, double excess) {
    if (excess > tol) {
      ++counter;
      audit.worst_excess = std::max(audit.worst_excess, excess);
    }
  };
  for (const JointState& s : trace) {
    for (int i = 0; i < kNumJoints; ++i) {
      const JointLimit& l = limits.joints[i];
      note(audit.position, std::max(l.min - s.theta(i), s.theta(i) - l.max));
      note(audit.velocity, std::abs(s.theta_dot(i)) - l.velocity);
      note(audit.acceleration, std::abs(s.theta_dot(i) - prev(i)) / dt - l.acceleration);
    }
    prev = s.theta_dot;
  }
  return audit;
}

JointVector solve_position_ik(const KinematicChain& chain, const JointLimits& limits, const Vec3& target,
                              const JointVector& seed, int max_iterations) {
  JointVector theta = seed.cwiseMax(limits.min()).cwiseMin(limits.max());
  const double damping = 1e-3;
  for (int it = 0; it < max_iterations; ++it) {
    const Vec3 err = target - forward_kinematics(chain, theta).position;
    if (err.norm() < 1e-12) break;
    const PositionJacobian j = spatial_jacobian(chain, theta);
    const Mat3 gram = j * j.transpose() + damping * damping * Mat3::Identity();
    JointVector step = j.transpose() * gram.ldlt().solve(err);
    const double biggest = step.cwiseAbs().maxCoeff();
    if (biggest > 0.2) step *= 0.2 / biggest;
    theta = (theta + step).cwiseMax(limits.min()).cwiseMin(limits.max());
  }
  const double residual = (target - forward_kinematics(chain, theta).position).norm();
  if (residual > 1e-6) fail(ErrorCode::Runtime, "solve_position_ik: target not reachable");
  return theta;
}

Robot Robot::make(KinematicChain chain, JointLimits limits) {
  Robot r;
  r.chain = std::move(chain);
  r.limits = std::move(limits);
  r.ready = solve_position_ik(r.chain, r.limits, r.chain.ready_paddle_position, r.chain.ready_seed);
  return r;
}

Robot Robot::defaults() {
  static const Robot robot = make(KinematicChain::defaults(), JointLimits::defaults());
  return robot;
}

Robot load_robot(const std::filesystem::path& limits_path, const std::filesystem::path& chain_path) {
  return Robot::make(chain_from_json(json::parse(read_text_file(chain_path))),
                     limits_from_json(json::parse(read_text_file(limits_path))));
}

}  // namespace pingsim
