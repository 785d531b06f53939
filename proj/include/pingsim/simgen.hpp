#pragma once

// Synthetic exchange generator: a post-hit ball path drawn from the
// piecewise-linear model class, ballistic height with one table bounce, and a
// pre-hit opponent swing whose arm and paddle motion encode the shot intent.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pingsim/core.hpp"
#include "pingsim/geometry.hpp"
#include "pingsim/rng.hpp"
#include "pingsim/segment_io.hpp"

namespace pingsim {

struct OpponentIntent {
  double target_strike_x = 0.0;  // cm
  double bounce_y = -40.0;       // cm
  double spin_delta = 0.0;       // a2 - a1
  double swing_amplitude = 1.0;
  double sigma_obs = 1.0;        // cm, skeleton observation noise
};

// Nuisance parameters of a shot that carry no intent.
struct ShotKinematics {
  Vec3 hit_point{0.0, 170.0, 30.0};
  double speed_y = 700.0;            // cm/s towards the robot
  Vec3 incoming_velocity{0.0, 750.0, 0.0};  // x and y used; z is solved from the incoming bounce
  double incoming_bounce_time = -0.15;      // s, opponent-side bounce before the hit
};

struct GeneratorConfig {
  std::uint64_t seed = 1;
  int segment_count = 2226;
  std::array<double, 3> region_weights{41.0, 81.0, 101.0};  // left, center, right
  // Probability that the swing reveals the true intent, by region of the true target.
  std::array<double, 3> predictability{0.9, 0.9, 0.9};
  double decoy_x_mean = 18.0;   // habitual target shown by a non-revealing swing
  double decoy_x_std = 6.0;
  double gravity = 981.0;       // cm/s^2
  double restitution = 0.9;
  double sigma_obs = 1.0;       // cm
  double paddle_noise = 0.3;    // cm
  double paddle_rotation_noise = 0.01;  // rad
  double ball_noise = 0.25;     // cm, applied to servo observations
  bool triangulate = true;
  double pixel_noise = 0.5;
  double dropout_probability = 0.03;
  double dropout_threshold = 0.2;
  int pre_hit_frames = 40;
  int filter_window = 5;
  double spin_range = 0.1;
  std::array<double, 2> hit_x{-45.0, 45.0};
  std::array<double, 2> hit_y{150.0, 190.0};
  std::array<double, 2> hit_z{25.0, 50.0};
  std::array<double, 2> speed_y{450.0, 800.0};
  std::array<double, 2> bounce_y{-70.0, -10.0};
  std::array<double, 2> swing_amplitude{0.8, 1.2};
  double test_fraction = 0.2;
  double calibration_fraction = 0.1;
  int max_candidate_factor = 20;
};

GeneratorConfig generator_config_from_json(const nlohmann::json& j);
nlohmann::json generator_config_to_json(const GeneratorConfig& c);
void validate(const GeneratorConfig& c);

// Target x range of each region used when sampling intents.
std::array<double, 2> region_target_range(Region r);

OpponentIntent sample_intent(const GeneratorConfig& config, Region region, Rng& rng);
ShotKinematics sample_kinematics(const GeneratorConfig& config, Rng& rng);

// Raw candidate: pre-hit frames may hold NaN where tracking failed.
struct Candidate {
  Segment segment;
  OpponentIntent intent;
  ShotKinematics kinematics;
  Region region = Region::Center;
};

Candidate generate_candidate(const GeneratorConfig& config, const OpponentIntent& intent,
                             const ShotKinematics& kin, std::uint64_t seed, const std::string& id = "candidate");

struct Verdict {
  bool accept = true;
  int rule = 0;  // 1 skeleton tracking, 2 paddle tracking, 3 ball path
  std::string reason;
};

Verdict validity_filter(const Segment& candidate, double dropout_threshold = 0.2);

// Gap-fills and smooths the pre-hit frames, then refits the truth parameters.
Segment finalize_segment(Segment seg, int filter_window);

// Candidate -> filter -> finalized segment. Throws when the filter rejects.
Segment generate_segment(const GeneratorConfig& config, const OpponentIntent& intent, std::uint64_t seed);

Dataset generate_dataset(const GeneratorConfig& config, int jobs = 1);

}  // namespace pingsim
