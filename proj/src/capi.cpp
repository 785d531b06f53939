#include "pingsim/pingsim.h"

#include <exception>
#include <string>

#include "pingsim/error.hpp"
#include "pingsim/harness.hpp"
#include "pingsim/robot.hpp"
#include "pingsim/trajectory.hpp"

struct ps_experiment {
  pingsim::ExperimentSpec spec;
  std::string out;
};

namespace {

thread_local std::string g_last_error;

ps_status record(ps_status s, const std::string& msg) {
  g_last_error = msg;
  return s;
}

template <class F>
ps_status guarded(F&& f) {
  try {
    f();
    g_last_error.clear();
    return PS_OK;
  } catch (const pingsim::Error& e) {
    return record(static_cast<ps_status>(e.code()), e.what());
  } catch (const nlohmann::json::exception& e) {
    return record(PS_CONFIG, e.what());
  } catch (const std::exception& e) {
    return record(PS_INTERNAL, e.what());
  } catch (...) {
    return record(PS_INTERNAL, "unknown exception");
  }
}

const pingsim::Robot& default_robot() {
  static const pingsim::Robot robot = pingsim::Robot::defaults();
  return robot;
}

pingsim::JointVector joints(const double* theta) {
  pingsim::require(theta != nullptr, "theta is null");
  return Eigen::Map<const pingsim::JointVector>(theta);
}

pingsim::PiecewiseLinearXY params(const double* p) {
  pingsim::require(p != nullptr, "params is null");
  return {p[0], p[1], p[2]};
}

}  // namespace

extern "C" {

const char* ps_version(void) { return pingsim::kVersion; }

const char* ps_last_error(void) { return g_last_error.c_str(); }

const char* ps_status_name(ps_status status) {
  switch (status) {
    case PS_OK: return "ok";
    case PS_INVALID_ARGUMENT: return "invalid_argument";
    case PS_CONFIG: return "config";
    case PS_RUNTIME: return "runtime";
    case PS_IO: return "io";
    case PS_SINGULAR: return "singular";
    case PS_NO_STRIKE: return "no_strike";
    case PS_INTERNAL: return "internal";
  }
  return "unknown";
}

ps_status ps_experiment_load(const char* config_path, ps_experiment** out) {
  return guarded([&] {
    pingsim::require(config_path != nullptr && out != nullptr, "null argument");
    *out = nullptr;
    auto* exp = new ps_experiment{pingsim::load_spec(config_path), {}};
    *out = exp;
  });
}

ps_status ps_experiment_from_json(const char* json_text, const char* base_dir, ps_experiment** out) {
  return guarded([&] {
    pingsim::require(json_text != nullptr && out != nullptr, "null argument");
    *out = nullptr;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
      pingsim::fail(pingsim::ErrorCode::Config, e.what());
    }
    *out = new ps_experiment{pingsim::spec_from_json(j, base_dir ? base_dir : "."), {}};
  });
}

ps_status ps_experiment_set_seed(ps_experiment* exp, uint64_t seed) {
  return guarded([&] {
    pingsim::require(exp != nullptr, "experiment is null");
    exp->spec.seed = seed;
  });
}

ps_status ps_experiment_set_output(ps_experiment* exp, const char* out_dir) {
  return guarded([&] {
    pingsim::require(exp != nullptr && out_dir != nullptr, "null argument");
    exp->spec.out_dir = out_dir;
  });
}

ps_status ps_experiment_set_jobs(ps_experiment* exp, int jobs) {
  return guarded([&] {
    pingsim::require(exp != nullptr, "experiment is null");
    pingsim::require(jobs >= 1, "jobs must be >= 1");
    exp->spec.jobs = jobs;
  });
}

ps_status ps_experiment_output(ps_experiment* exp, const char** out_dir) {
  return guarded([&] {
    pingsim::require(exp != nullptr && out_dir != nullptr, "null argument");
    exp->out = exp->spec.out_dir.string();
    *out_dir = exp->out.c_str();
  });
}

ps_status ps_experiment_run(ps_experiment* exp, const char* command) {
  return guarded([&] {
    pingsim::require(exp != nullptr && command != nullptr, "null argument");
    pingsim::run_command(exp->spec, command);
  });
}

void ps_experiment_free(ps_experiment* exp) { delete exp; }

ps_status ps_robot_forward_kinematics(const double* theta, double* position, double* normal) {
  return guarded([&] {
    pingsim::require(position != nullptr, "position is null");
    const pingsim::PaddleState s = pingsim::forward_kinematics(default_robot().chain, joints(theta));
    Eigen::Map<pingsim::Vec3> pos(position);
    pos = s.position;
    if (normal) {
      Eigen::Map<pingsim::Vec3> n(normal);
      n = s.normal;
    }
  });
}

ps_status ps_robot_jacobian(const double* theta, double* jacobian) {
  return guarded([&] {
    pingsim::require(jacobian != nullptr, "jacobian is null");
    const pingsim::PositionJacobian j = pingsim::spatial_jacobian(default_robot().chain, joints(theta));
    Eigen::Map<Eigen::Matrix<double, 3, pingsim::kNumJoints, Eigen::RowMajor>> out(jacobian);
    out = j;
  });
}

ps_status ps_min_norm_solve(const double* jacobian, int rows, int cols, const double* u, double* x,
                            double* smallest_singular_value) {
  return guarded([&] {
    pingsim::require(jacobian && u && x, "null argument");
    pingsim::require(rows > 0 && cols > 0, "dimensions must be positive");
    using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    const Eigen::MatrixXd j = Eigen::Map<const RowMat>(jacobian, rows, cols);
    const pingsim::MinNormSolution s = pingsim::min_norm_joint_velocity(j, Eigen::Map<const Eigen::VectorXd>(u, rows));
    Eigen::Map<Eigen::VectorXd> out(x, cols);
    out = s.theta_dot;
    if (smallest_singular_value) *smallest_singular_value = s.smallest_singular_value;
  });
}

ps_status ps_classify_region(double strike_x_cm, ps_region* out) {
  return guarded([&] {
    pingsim::require(out != nullptr, "out is null");
    *out = static_cast<ps_region>(pingsim::classify_region(strike_x_cm));
  });
}

ps_status ps_strike_x(const double* p, double* out) {
  return guarded([&] {
    pingsim::require(out != nullptr, "out is null");
    *out = pingsim::strike_from_params(params(p));
  });
}

ps_status ps_trajectory_loss(const double* predicted, const double* truth, double* out) {
  return guarded([&] {
    pingsim::require(out != nullptr, "out is null");
    *out = pingsim::trajectory_loss(params(predicted), params(truth));
  });
}

}  // extern "C"
