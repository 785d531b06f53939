#include "pingsim/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "pingsim/error.hpp"
#include "pingsim/parallel.hpp"
#include "pingsim/rng.hpp"

namespace pingsim {

namespace {

constexpr double kCmPerM = 100.0;
constexpr double kFrameRate = 100.0;

}  // namespace

void validate(const SimConfig& c) {
  if (c.command_period < 1 || c.latency < 0) fail(ErrorCode::Config, "sim: periods must be positive integers");
  if (c.servo_start < 0 || c.servo_start % c.command_period != 0)
    fail(ErrorCode::Config, "sim: servo_start must be a non-negative multiple of the command period");
  if (c.anticipatory_start > 0 || -c.anticipatory_start >= kPredictionRows || c.anticipatory_start % c.command_period != 0)
    fail(ErrorCode::Config, "sim: anticipatory_start must be a multiple of the command period in (-30, 0]");
  if (!(c.paddle_radius > 0.0)) fail(ErrorCode::Config, "sim: paddle_radius must be positive");
  if (!(c.ball_noise >= 0.0)) fail(ErrorCode::Config, "sim: ball_noise must be >= 0");
}

ControllerPolicy servo_only_policy() { return {"servo_only", {PolicyKind::Baseline, 0.0, 0.0, AlphaMode::Constant}}; }

ControllerPolicy anticipatory_policy(double alpha1, double alpha2) {
  return {"anticipatory", {PolicyKind::BasicAnticipatory, alpha1, alpha2, AlphaMode::Constant}};
}

ControllerPolicy uncertainty_aware_policy(double alpha1, double alpha2) {
  return {"uncertainty_aware", {PolicyKind::UncertaintyAware, alpha1, alpha2, AlphaMode::Constant}};
}

double strike_crossing_frame(const Segment& seg) {
  const double plane = table().strike_plane_y;
  const auto& b = seg.post_hit_ball;
  for (std::size_t k = 0; k + 1 < b.size(); ++k) {
    if (b[k].y() >= plane && b[k + 1].y() < plane)
      return static_cast<double>(k) + (b[k].y() - plane) / (b[k].y() - b[k + 1].y());
  }
  fail(ErrorCode::NoStrike, "segment " + seg.id + " never crosses the strike plane");
}

TrialRecord run_trial(const Segment& seg, const ControllerPolicy& policy, const TrialInputs& inputs,
                      const Robot& robot, const SimConfig& config) {
  validate(config);
  const double crossing = strike_crossing_frame(seg);
  const int period = config.command_period;
  const double dt = period / kFrameRate;
  const bool anticipates = policy.alpha.kind != PolicyKind::Baseline;
  if (anticipates && !inputs.prediction)
    fail(ErrorCode::InvalidArgument, "run_trial: policy '" + policy.id + "' needs a prediction");
  if (!robot.limits.within_position(robot.ready)) fail(ErrorCode::InvalidArgument, "run_trial: robot ready pose outside limits");

  // Servo observations: the replayed ball with measurement noise.
  std::vector<TimedPosition> observed;
  {
    Rng rng(derive_seed(config.noise_seed, fnv1a(seg.id)));
    std::normal_distribution<double> n01(0.0, 1.0);
    for (std::size_t k = 0; k < seg.post_hit_ball.size(); ++k) {
      const Vec3 noise(n01(rng), n01(rng), n01(rng));
      observed.push_back({k / kFrameRate, seg.post_hit_ball[k] + config.ball_noise * noise});
    }
  }

  TrialRecord rec;
  rec.result.segment_id = seg.id;
  rec.result.controller_id = policy.id;
  rec.crossing_frame = crossing;

  // Goals, keyed by the frame at which they act.
  for (int b = config.anticipatory_start; b < crossing; b += period) {
    GoalEvent g;
    g.computed_at = b;
    g.effective_at = b + config.latency;
    g.last_observation = b;
    if (b < config.servo_start) {
      if (!anticipates) continue;
      const bool pre_hit = b < 0;
      if (pre_hit && !config.continuous_pre_hit && b != config.anticipatory_start) continue;
      if (!pre_hit && b != 0) continue;
      const int row = -std::min(b, 0);
      const PiecewiseLinearXY& p = inputs.prediction->at(row);
      g.source = GoalSource::Anticipatory;
      g.x = strike_from_params(p);
      g.z = config.pre_hit_z_goal;
      g.alpha = confidence_to_alpha(inputs.confidence[row], classify_region(g.x), policy.alpha,
                                    pre_hit ? Phase::PreHit : Phase::AtHit);
    } else {
      const int n_obs = std::min<int>(b + 1, static_cast<int>(observed.size()));
      try {
        const ServoEstimate est =
            fit_servo_estimate(std::span<const TimedPosition>(observed).subspan(0, n_obs), std::nullopt, config.servo);
        g.source = GoalSource::Servo;
        g.x = est.strike_point.x;
        g.z = est.strike_point.z;
        g.alpha = 1.0;
        g.last_observation = n_obs - 1;
      } catch (const Error&) {
        continue;  // keep the previous goal
      }
    }
    rec.goals.push_back(g);
  }

  // Control loop: the robot state changes only at command boundaries.
  JointVector theta = robot.ready;
  JointVector velocity = JointVector::Zero();
  const int first = config.anticipatory_start + config.latency;
  std::size_t next_goal = 0;
  const GoalEvent* active = nullptr;
  rec.result.joint_trace.push_back({theta, velocity, first / kFrameRate});

  JointVector theta_at_cross = theta;
  bool crossed = false;
  for (int c = first; !crossed; c += period) {
    while (next_goal < rec.goals.size() && rec.goals[next_goal].effective_at <= c) active = &rec.goals[next_goal++];

    const PaddleState paddle = forward_kinematics(robot.chain, theta);
    ControlStep step;
    step.frame = c;
    step.paddle = paddle.position * kCmPerM;
    JointVector command = JointVector::Zero();
    JointLimits envelope = robot.limits;
    if (active) {
      const Vec3 goal(active->x, table().strike_plane_y, active->z);
      step.goal = goal;
      step.alpha = active->alpha;
      const Eigen::Vector3d u = (goal - step.paddle) / kCmPerM / dt;
      const MinNormSolution mn = min_norm_joint_velocity(spatial_jacobian(robot.chain, theta), u);
      command = active->alpha * mn.theta_dot;
      for (JointLimit& l : envelope.joints) l.velocity *= active->alpha;
    }
    const ConstrainedVelocity cv = constrain_velocity(command, velocity, envelope, dt);
    step.beta = cv.beta;
    step.direction_preserved = cv.direction_preserved;
    const JointStep js = step_joints(theta, cv.theta_dot, 1.0, robot.limits, dt);
    rec.steps.push_back(step);

    if (crossing < c + period) {
      const double f = std::clamp((crossing - c) / period, 0.0, 1.0);
      theta_at_cross = theta + f * (js.theta - theta);
      crossed = true;
    }
    theta = js.theta;
    velocity = js.velocity;
    rec.result.joint_trace.push_back({theta, velocity, (c + period) / kFrameRate});
  }

  rec.paddle_at_crossing = forward_kinematics(robot.chain, theta_at_cross).position * kCmPerM;
  rec.ball_at_crossing = seg.strike_point;
  const double dx = rec.paddle_at_crossing.x() - seg.strike_point.x;
  const double dz = rec.paddle_at_crossing.z() - seg.strike_point.z;
  rec.result.end_distance_to_goal = std::hypot(dx, dz);
  rec.result.hit = rec.result.end_distance_to_goal <= config.paddle_radius;
  rec.audit = audit_trace(rec.result.joint_trace, robot.limits, dt);
  return rec;
}

namespace {

std::vector<TrialInputs> prepare_inputs(std::span<const Segment* const> segments, const Predictor* predictor,
                                        int jobs, const ConfidenceProvider& confidence) {
  std::vector<TrialInputs> inputs(segments.size());
  if (!predictor) return inputs;
  parallel_for(static_cast<int>(segments.size()), jobs, [&](int i) {
    inputs[i].prediction = predictor->predict(*segments[i]);
    if (confidence) inputs[i].confidence = confidence(*segments[i], *inputs[i].prediction);
  });
  return inputs;
}

std::vector<const Segment*> sorted_by_id(std::span<const Segment* const> segments) {
  std::vector<const Segment*> v(segments.begin(), segments.end());
  std::sort(v.begin(), v.end(), [](const Segment* a, const Segment* b) { return a->id < b->id; });
  return v;
}

}  // namespace

BenchmarkResult run_benchmark(std::span<const Segment* const> segments_in, std::span<const ControllerPolicy> policies,
                              const Predictor* predictor, const Robot& robot, const SimConfig& config, int jobs,
                              const ConfidenceProvider& confidence) {
  require(!segments_in.empty(), "run_benchmark: empty dataset");
  require(!policies.empty(), "run_benchmark: no policies");
  validate(config);
  const std::vector<const Segment*> segments = sorted_by_id(segments_in);
  const std::vector<TrialInputs> inputs = prepare_inputs(segments, predictor, jobs, confidence);

  BenchmarkResult out;
  for (const ControllerPolicy& policy : policies) {
    if (policy.alpha.kind != PolicyKind::Baseline && !predictor)
      fail(ErrorCode::Config, "run_benchmark: policy '" + policy.id + "' needs a predictor");
    const int n = static_cast<int>(segments.size());
    std::vector<std::optional<TrialRecord>> trials(n);
    std::vector<std::string> errors(n);
    parallel_for(n, jobs, [&](int i) {
      try {
        trials[i] = run_trial(*segments[i], policy, inputs[i], robot, config);
      } catch (const Error& e) {
        errors[i] = e.what();
      }
    });

    PolicyOutcome po;
    po.policy = policy;
    std::vector<TrialResult> results;
    for (int i = 0; i < n; ++i) {
      if (!trials[i]) {
        po.errors.emplace_back(segments[i]->id, errors[i]);
        continue;
      }
      po.regions.push_back(classify_region(segments[i]->strike_point.x));
      results.push_back(trials[i]->result);
      po.audit.position += trials[i]->audit.position;
      po.audit.velocity += trials[i]->audit.velocity;
      po.audit.acceleration += trials[i]->audit.acceleration;
      po.audit.worst_excess = std::max(po.audit.worst_excess, trials[i]->audit.worst_excess);
      po.trials.push_back(std::move(*trials[i]));
    }
    if (results.empty()) fail(ErrorCode::Runtime, "run_benchmark: every trial failed for policy '" + policy.id + "'");
    po.metrics = aggregate_metrics(results, po.regions);
    out.policies.push_back(std::move(po));
  }
  return out;
}

std::vector<std::pair<double, double>> alpha_grid(std::span<const double> alpha1, std::span<const double> alpha2) {
  std::vector<std::pair<double, double>> g;
  for (double a1 : alpha1)
    for (double a2 : alpha2) g.emplace_back(a1, a2);
  return g;
}

SweepResult sweep_alphas(std::span<const Segment* const> calibration, const ControllerPolicy& policy_template,
                         std::span<const std::pair<double, double>> grid, const Predictor* predictor,
                         const Robot& robot, const SimConfig& config, int jobs, const ConfidenceProvider& confidence) {
  if (calibration.empty()) fail(ErrorCode::InvalidArgument, "sweep_alphas: empty calibration set");
  require(!grid.empty(), "sweep_alphas: empty grid");
  for (const auto& [a1, a2] : grid)
    require(a1 >= 0.0 && a1 <= 1.0 && a2 >= 0.0 && a2 <= 1.0, "sweep_alphas: grid must lie in [0, 1]^2");
  validate(config);
  const std::vector<const Segment*> segments = sorted_by_id(calibration);
  const std::vector<TrialInputs> inputs = prepare_inputs(segments, predictor, jobs, confidence);

  SweepResult res;
  const int n = static_cast<int>(segments.size());
  for (const auto& [a1, a2] : grid) {
    ControllerPolicy p = policy_template;
    p.alpha.alpha1 = a1;
    p.alpha.alpha2 = a2;
    std::vector<std::optional<TrialResult>> results(n);
    parallel_for(n, jobs, [&](int i) {
      try {
        results[i] = run_trial(*segments[i], p, inputs[i], robot, config).result;
      } catch (const Error&) {
      }
    });
    SweepCell cell{a1, a2, 0, 0, std::nullopt};
    std::vector<double> d;
    for (const auto& r : results) {
      if (!r) continue;
      ++cell.trials;
      if (r->hit) {
        ++cell.hits;
        d.push_back(r->end_distance_to_goal);
      }
    }
    std::sort(d.begin(), d.end());
    if (!d.empty()) cell.mean_distance = mean(d);
    res.cells.push_back(cell);
  }

  const auto better = [](const SweepCell& a, const SweepCell& b) {
    if (a.hits != b.hits) return a.hits > b.hits;
    const double da = a.mean_distance.value_or(std::numeric_limits<double>::infinity());
    const double db = b.mean_distance.value_or(std::numeric_limits<double>::infinity());
    if (da != db) return da < db;
    if (a.alpha1 != b.alpha1) return a.alpha1 < b.alpha1;
    return a.alpha2 < b.alpha2;
  };
  const SweepCell* best = &res.cells.front();
  for (const SweepCell& c : res.cells)
    if (better(c, *best)) best = &c;
  res.alpha1 = best->alpha1;
  res.alpha2 = best->alpha2;
  return res;
}

}  // namespace pingsim
