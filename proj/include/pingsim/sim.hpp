#pragma once

// 100 Hz replay of a segment against the robot: 10 Hz goal updates that act
// after the communication latency, anticipatory goals before the hit and
// visual-servo goals after it, and interception scoring at the strike plane.

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pingsim/core.hpp"
#include "pingsim/predictor.hpp"
#include "pingsim/robot.hpp"
#include "pingsim/trajectory.hpp"
#include "pingsim/uncertainty.hpp"

namespace pingsim {

struct SimConfig {
  int command_period = 10;       // frames between goal updates
  int latency = 10;              // frames from goal computation to actuation
  int servo_start = 10;          // first servo goal computation
  int anticipatory_start = -10;  // first pre-hit goal computation
  bool continuous_pre_hit = false;  // refresh anticipatory goals every period before the hit
  double paddle_radius = 8.0;    // cm
  double pre_hit_z_goal = 20.0;  // cm above the table
  double ball_noise = 0.25;      // cm, servo observation noise
  std::uint64_t noise_seed = 0;
  ServoConfig servo;
};

void validate(const SimConfig& c);

struct ControllerPolicy {
  std::string id = "servo_only";
  AlphaPolicy alpha;
};

ControllerPolicy servo_only_policy();
ControllerPolicy anticipatory_policy(double alpha1 = 1.0, double alpha2 = 1.0);
ControllerPolicy uncertainty_aware_policy(double alpha1 = 0.6, double alpha2 = 1.0);

enum class GoalSource { Anticipatory, Servo };

struct GoalEvent {
  int computed_at = 0;       // frame
  int effective_at = 0;      // frame
  int last_observation = 0;  // newest frame index the goal depends on
  GoalSource source = GoalSource::Servo;
  double x = 0.0;            // cm
  double z = 0.0;
  double alpha = 1.0;
};

struct ControlStep {
  int frame = 0;
  double alpha = 0.0;
  double beta = 0.0;
  bool direction_preserved = true;
  Vec3 goal = Vec3::Zero();   // cm
  Vec3 paddle = Vec3::Zero(); // cm, at the start of the step
};

struct TrialRecord {
  TrialResult result;
  std::vector<GoalEvent> goals;
  std::vector<ControlStep> steps;
  double crossing_frame = 0.0;
  Vec3 paddle_at_crossing = Vec3::Zero();  // cm
  StrikePoint ball_at_crossing;
  LimitAudit audit;
};

// Anticipatory inputs for one segment.
struct TrialInputs {
  std::optional<PredictionMatrix> prediction;
  std::array<double, kPredictionRows> confidence{};

  TrialInputs() { confidence.fill(1.0); }
};

// Interpolated frame at which the recorded ball path first crosses the strike plane.
double strike_crossing_frame(const Segment& seg);

TrialRecord run_trial(const Segment& seg, const ControllerPolicy& policy, const TrialInputs& inputs,
                      const Robot& robot, const SimConfig& config);

// Per-row confidences for a segment's prediction; absent means constant 1.
using ConfidenceProvider =
    std::function<std::array<double, kPredictionRows>(const Segment&, const PredictionMatrix&)>;

struct PolicyOutcome {
  ControllerPolicy policy;
  std::vector<TrialRecord> trials;  // sorted by segment id
  std::vector<Region> regions;      // truth strike region per trial
  MetricsTable metrics;
  std::vector<std::pair<std::string, std::string>> errors;  // segment id, message
  LimitAudit audit;                 // summed over trials
};

struct BenchmarkResult {
  std::vector<PolicyOutcome> policies;
};

BenchmarkResult run_benchmark(std::span<const Segment* const> segments, std::span<const ControllerPolicy> policies,
                              const Predictor* predictor, const Robot& robot, const SimConfig& config, int jobs = 1,
                              const ConfidenceProvider& confidence = {});

struct SweepCell {
  double alpha1 = 0.0;
  double alpha2 = 0.0;
  int hits = 0;
  int trials = 0;
  std::optional<double> mean_distance;
};

struct SweepResult {
  std::vector<SweepCell> cells;  // grid order
  double alpha1 = 0.0;
  double alpha2 = 0.0;
};

std::vector<std::pair<double, double>> alpha_grid(std::span<const double> alpha1, std::span<const double> alpha2);

// Exhaustive grid search: most hits, then lower mean end distance, then lower alpha1.
SweepResult sweep_alphas(std::span<const Segment* const> calibration, const ControllerPolicy& policy_template,
                         std::span<const std::pair<double, double>> grid, const Predictor* predictor,
                         const Robot& robot, const SimConfig& config, int jobs = 1,
                         const ConfidenceProvider& confidence = {});

}  // namespace pingsim
