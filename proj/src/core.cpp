#include "pingsim/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/LU>

#include "pingsim/error.hpp"

namespace pingsim {

Region classify_region(double x) {
  require(std::isfinite(x), "classify_region: x must be finite");
  const double edge = table().region_boundary;
  if (x < -edge) return Region::Left;
  if (x > edge) return Region::Right;
  return Region::Center;
}

std::string_view region_name(Region r) {
  switch (r) {
    case Region::Left: return "Left";
    case Region::Center: return "Center";
    case Region::Right: return "Right";
  }
  return "?";
}

Region parse_region(std::string_view name) {
  for (Region r : kRegions)
    if (region_name(r) == name) return r;
  fail(ErrorCode::InvalidArgument, "unknown region '" + std::string(name) + "'");
}

bool is_valid_state(const GameState& s, double tol) {
  const StateVector v = flatten_state(s);
  if (!v.allFinite()) return false;
  const Mat3& r = s.paddle.rotation;
  if ((r * r.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff() > tol) return false;
  return std::abs(r.determinant() - 1.0) <= tol;
}

StateVector flatten_state(const GameState& s) {
  StateVector v;
  int k = 0;
  for (const Vec3& j : s.pose_joints)
    for (int c = 0; c < 3; ++c) v[k++] = j[c];
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) v[k++] = s.paddle.rotation(r, c);
  for (int c = 0; c < 3; ++c) v[k++] = s.paddle.translation[c];
  for (int c = 0; c < 3; ++c) v[k++] = s.ball[c];
  return v;
}

GameState unflatten_state(const StateVector& v, int timestep) {
  GameState s;
  int k = 0;
  for (Vec3& j : s.pose_joints)
    for (int c = 0; c < 3; ++c) j[c] = v[k++];
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) s.paddle.rotation(r, c) = v[k++];
  for (int c = 0; c < 3; ++c) s.paddle.translation[c] = v[k++];
  for (int c = 0; c < 3; ++c) s.ball[c] = v[k++];
  s.timestep = timestep;
  return s;
}

Eigen::MatrixXd state_series(const Segment& seg, int frames_before_hit) {
  require(frames_before_hit >= 0, "state_series: frames_before_hit must be >= 0");
  const int last = seg.hit_index - frames_before_hit;
  require(last >= 0, "state_series: segment history too short");
  Eigen::MatrixXd x(last + 1, kStateDim);
  for (int i = 0; i <= last; ++i) x.row(i) = flatten_state(seg.frames[i]).transpose();
  return x;
}

double mean(std::span<const double> v) {
  require(!v.empty(), "mean of empty sample");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double population_stddev(std::span<const double> v) {
  require(!v.empty(), "stddev of empty sample");
  const double ref = v.front();
  double d = 0.0;
  for (double x : v) d += x - ref;
  d /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - ref - d) * (x - ref - d);
  return std::sqrt(ss / static_cast<double>(v.size()));
}

double median(std::vector<double> v) {
  require(!v.empty(), "median of empty sample");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

namespace {

RegionStats stats_for(const std::vector<const TrialResult*>& bucket) {
  RegionStats s;
  s.count = static_cast<int>(bucket.size());
  std::vector<double> d;
  for (const TrialResult* r : bucket) {
    if (!r->hit) continue;
    ++s.hits;
    d.push_back(r->end_distance_to_goal);
  }
  // Summation order must not depend on the input order.
  std::sort(d.begin(), d.end());
  if (!d.empty()) {
    s.mean_distance = mean(d);
    s.half_stddev = 0.5 * population_stddev(d);
  }
  return s;
}

}  // namespace

MetricsTable aggregate_metrics(std::span<const TrialResult> results, std::span<const Region> regions) {
  require(!results.empty(), "aggregate_metrics: no results");
  require(results.size() == regions.size(), "aggregate_metrics: results/regions size mismatch");
  std::array<std::vector<const TrialResult*>, 3> buckets;
  std::vector<const TrialResult*> all;
  for (std::size_t i = 0; i < results.size(); ++i) {
    require(results[i].end_distance_to_goal >= 0.0, "aggregate_metrics: negative distance");
    buckets[static_cast<int>(regions[i])].push_back(&results[i]);
    all.push_back(&results[i]);
  }
  MetricsTable t;
  for (int r = 0; r < 3; ++r) t.by_region[r] = stats_for(buckets[r]);
  t.all = stats_for(all);
  return t;
}

MedianErrorTable median_error_table(std::span<const int> frames,
                                    const std::vector<std::vector<double>>& errors_by_frame,
                                    std::span<const Region> regions) {
  require(frames.size() == errors_by_frame.size(), "median_error_table: frame count mismatch");
  MedianErrorTable t;
  t.frames.assign(frames.begin(), frames.end());
  for (const auto& errs : errors_by_frame) {
    require(errs.size() == regions.size(), "median_error_table: errors/regions size mismatch");
    std::array<std::vector<double>, 4> buckets;
    for (std::size_t i = 0; i < errs.size(); ++i) {
      buckets[static_cast<int>(regions[i])].push_back(errs[i]);
      buckets[3].push_back(errs[i]);
    }
    std::array<std::optional<double>, 4> row{};
    for (int r = 0; r < 4; ++r)
      if (!buckets[r].empty()) row[r] = median(buckets[r]);
    t.medians.push_back(row);
  }
  return t;
}

}  // namespace pingsim
