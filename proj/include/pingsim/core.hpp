#pragma once

// Shared frame conventions, game state, segments and metric aggregation.
//
// Frame: origin at the table centre, x across the table width, y along its
// length with the opponent on +y, z up. All positions are in centimetres.

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "pingsim/types.hpp"

namespace pingsim {

struct TableGeometry {
  double width = 152.5;
  double length = 274.0;
  double strike_plane_y = -140.0;
  double region_boundary = 25.0;
  double net_height = 15.25;
  double ball_radius = 2.0;

  double half_width() const { return 0.5 * width; }
  double half_length() const { return 0.5 * length; }
};

inline const TableGeometry& table() {
  static const TableGeometry t{};
  return t;
}

enum class Region { Left = 0, Center = 1, Right = 2 };
inline constexpr std::array<Region, 3> kRegions{Region::Left, Region::Center, Region::Right};

// Left iff x < -25, Right iff x > 25, the closed interval [-25, 25] is Center.
Region classify_region(double x);
std::string_view region_name(Region r);
Region parse_region(std::string_view name);

inline constexpr int kPoseJoints = 8;
inline constexpr int kStateDim = 39;
using StateVector = Eigen::Matrix<double, kStateDim, 1>;

struct PaddlePose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
};

// One 100 Hz frame: opponent skeleton, paddle pose and ball position.
struct GameState {
  std::array<Vec3, kPoseJoints> pose_joints{};
  PaddlePose paddle;
  Vec3 ball = Vec3::Zero();
  int timestep = 0;  // frames relative to the hit (t = 0)

  GameState() { pose_joints.fill(Vec3::Zero()); }
};

bool is_valid_state(const GameState& s, double tol = 1e-9);

// 8 joints x (x,y,z), rotation row-major, translation, ball.
StateVector flatten_state(const GameState& s);
GameState unflatten_state(const StateVector& v, int timestep = 0);

struct Segment {
  std::string id;
  std::vector<GameState> frames;        // pre-hit frames, last one is the hit frame
  std::vector<Vec3> post_hit_ball;      // element k is the ball at t = k
  int hit_index = 0;                    // index into frames where t = 0
  PiecewiseLinearXY truth_params;
  StrikePoint strike_point;
  double bounce_y = 0.0;
  double fit_residual = 0.0;            // RMS x-residual of truth_params

  int timestep_of(int frame_index) const { return frame_index - hit_index; }
};

// Row-major L x 39 series of the pre-hit frames ending at t = -frames_before_hit.
Eigen::MatrixXd state_series(const Segment& seg, int frames_before_hit = 0);

struct TrialResult {
  std::string segment_id;
  std::string controller_id;
  bool hit = false;
  double end_distance_to_goal = 0.0;
  std::vector<JointState> joint_trace;
};

struct RegionStats {
  int count = 0;
  int hits = 0;
  // Undefined when the bucket has no hits.
  std::optional<double> mean_distance;
  std::optional<double> half_stddev;
};

struct MetricsTable {
  std::array<RegionStats, 3> by_region{};
  RegionStats all;
  std::string stddev_convention = "population";

  const RegionStats& region(Region r) const { return by_region[static_cast<int>(r)]; }
};

// Counts and end-distance statistics per region. Distances are averaged over
// hit trials only; the spread is half a population standard deviation.
MetricsTable aggregate_metrics(std::span<const TrialResult> results, std::span<const Region> regions);

// Median absolute strike-point x-error per prediction frame, split by region.
struct MedianErrorTable {
  std::vector<int> frames;
  // [frame][region index 0..2, 3 = all]
  std::vector<std::array<std::optional<double>, 4>> medians;
  std::string error_kind = "abs_x_at_strike_plane";
};

MedianErrorTable median_error_table(std::span<const int> frames,
                                    const std::vector<std::vector<double>>& errors_by_frame,
                                    std::span<const Region> regions);

double mean(std::span<const double> v);
double population_stddev(std::span<const double> v);
double median(std::vector<double> v);

}  // namespace pingsim
