#include "pingsim/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include <Eigen/Geometry>

#include "pingsim/error.hpp"
#include "pingsim/parallel.hpp"
#include "pingsim/trajectory.hpp"

namespace pingsim {

using json = nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

template <typename T, std::size_t N>
std::array<T, N> read_array(const json& j, const char* key, std::array<T, N> fallback) {
  if (!j.contains(key)) return fallback;
  const auto v = j.at(key).get<std::vector<T>>();
  if (v.size() != N) fail(ErrorCode::Config, std::string("generator: '") + key + "' has the wrong length");
  std::array<T, N> out{};
  std::copy(v.begin(), v.end(), out.begin());
  return out;
}

void check_range(const std::array<double, 2>& r, const char* name) {
  if (!(r[0] <= r[1])) fail(ErrorCode::Config, std::string("generator: empty range '") + name + "'");
}

double uniform(Rng& rng, const std::array<double, 2>& r) {
  return std::uniform_real_distribution<double>(r[0], r[1])(rng);
}

Vec3 nan3() { return Vec3::Constant(kNaN); }

}  // namespace

GeneratorConfig generator_config_from_json(const json& j) {
  GeneratorConfig c;
  try {
    c.seed = j.value("seed", c.seed);
    c.segment_count = j.value("segment_count", c.segment_count);
    c.region_weights = read_array(j, "region_weights", c.region_weights);
    if (j.contains("predictability") && j.at("predictability").is_number())
      c.predictability.fill(j.at("predictability").get<double>());
    else
      c.predictability = read_array(j, "predictability", c.predictability);
    c.decoy_x_mean = j.value("decoy_x_mean", c.decoy_x_mean);
    c.decoy_x_std = j.value("decoy_x_std", c.decoy_x_std);
    c.gravity = j.value("gravity", c.gravity);
    c.restitution = j.value("restitution", c.restitution);
    c.sigma_obs = j.value("sigma_obs", c.sigma_obs);
    c.paddle_noise = j.value("paddle_noise", c.paddle_noise);
    c.paddle_rotation_noise = j.value("paddle_rotation_noise", c.paddle_rotation_noise);
    c.ball_noise = j.value("ball_noise", c.ball_noise);
    c.triangulate = j.value("triangulate", c.triangulate);
    c.pixel_noise = j.value("pixel_noise", c.pixel_noise);
    c.dropout_probability = j.value("dropout_probability", c.dropout_probability);
    c.dropout_threshold = j.value("dropout_threshold", c.dropout_threshold);
    c.pre_hit_frames = j.value("pre_hit_frames", c.pre_hit_frames);
    c.filter_window = j.value("filter_window", c.filter_window);
    c.spin_range = j.value("spin_range", c.spin_range);
    c.hit_x = read_array(j, "hit_x", c.hit_x);
    c.hit_y = read_array(j, "hit_y", c.hit_y);
    c.hit_z = read_array(j, "hit_z", c.hit_z);
    c.speed_y = read_array(j, "speed_y", c.speed_y);
    c.bounce_y = read_array(j, "bounce_y", c.bounce_y);
    c.swing_amplitude = read_array(j, "swing_amplitude", c.swing_amplitude);
    c.test_fraction = j.value("test_fraction", c.test_fraction);
    c.calibration_fraction = j.value("calibration_fraction", c.calibration_fraction);
    c.max_candidate_factor = j.value("max_candidate_factor", c.max_candidate_factor);
  } catch (const json::exception& e) {
    fail(ErrorCode::Config, std::string("generator config: ") + e.what());
  }
  validate(c);
  return c;
}

json generator_config_to_json(const GeneratorConfig& c) {
  return {{"seed", c.seed},
          {"segment_count", c.segment_count},
          {"region_weights", c.region_weights},
          {"predictability", c.predictability},
          {"decoy_x_mean", c.decoy_x_mean},
          {"decoy_x_std", c.decoy_x_std},
          {"gravity", c.gravity},
          {"restitution", c.restitution},
          {"sigma_obs", c.sigma_obs},
          {"paddle_noise", c.paddle_noise},
          {"paddle_rotation_noise", c.paddle_rotation_noise},
          {"ball_noise", c.ball_noise},
          {"triangulate", c.triangulate},
          {"pixel_noise", c.pixel_noise},
          {"dropout_probability", c.dropout_probability},
          {"dropout_threshold", c.dropout_threshold},
          {"pre_hit_frames", c.pre_hit_frames},
          {"filter_window", c.filter_window},
          {"spin_range", c.spin_range},
          {"hit_x", c.hit_x},
          {"hit_y", c.hit_y},
          {"hit_z", c.hit_z},
          {"speed_y", c.speed_y},
          {"bounce_y", c.bounce_y},
          {"swing_amplitude", c.swing_amplitude},
          {"test_fraction", c.test_fraction},
          {"calibration_fraction", c.calibration_fraction},
          {"max_candidate_factor", c.max_candidate_factor}};
}

void validate(const GeneratorConfig& c) {
  double total = 0.0;
  for (double w : c.region_weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) fail(ErrorCode::Config, "generator: region weights must be finite and >= 0");
    total += w;
  }
  if (!(total > 0.0)) fail(ErrorCode::Config, "generator: infeasible region mix (weights sum to zero)");
  for (double p : c.predictability)
    if (!(p >= 0.0 && p <= 1.0)) fail(ErrorCode::Config, "generator: predictability must lie in [0, 1]");
  if (c.segment_count < 1) fail(ErrorCode::Config, "generator: segment_count must be >= 1");
  if (!(c.restitution > 0.0 && c.restitution <= 1.0)) fail(ErrorCode::Config, "generator: restitution must lie in (0, 1]");
  if (!(c.gravity > 0.0)) fail(ErrorCode::Config, "generator: gravity must be positive");
  if (c.sigma_obs < 0 || c.paddle_noise < 0 || c.paddle_rotation_noise < 0 || c.ball_noise < 0 || c.pixel_noise < 0 ||
      c.decoy_x_std < 0)
    fail(ErrorCode::Config, "generator: noise scales must be >= 0");
  if (!(c.dropout_probability >= 0.0 && c.dropout_probability <= 1.0))
    fail(ErrorCode::Config, "generator: dropout_probability must lie in [0, 1]");
  if (!(c.dropout_threshold >= 0.0 && c.dropout_threshold <= 1.0))
    fail(ErrorCode::Config, "generator: dropout_threshold must lie in [0, 1]");
  if (c.pre_hit_frames < 1) fail(ErrorCode::Config, "generator: pre_hit_frames must be >= 1");
  if (c.filter_window < 1 || c.filter_window % 2 == 0 || c.filter_window > c.pre_hit_frames + 1)
    fail(ErrorCode::Config, "generator: filter_window must be odd and fit the pre-hit window");
  if (!(c.spin_range > 0.0)) fail(ErrorCode::Config, "generator: spin_range must be positive");
  check_range(c.hit_x, "hit_x");
  check_range(c.hit_y, "hit_y");
  check_range(c.hit_z, "hit_z");
  check_range(c.speed_y, "speed_y");
  check_range(c.bounce_y, "bounce_y");
  check_range(c.swing_amplitude, "swing_amplitude");
  if (!(c.speed_y[0] > 0.0)) fail(ErrorCode::Config, "generator: speed_y must be positive");
  if (!(c.hit_y[0] > c.bounce_y[1])) fail(ErrorCode::Config, "generator: hit must lie beyond the bounce range");
  if (c.test_fraction < 0 || c.calibration_fraction < 0 || c.test_fraction + c.calibration_fraction >= 1.0)
    fail(ErrorCode::Config, "generator: split fractions must leave a training split");
  if (c.max_candidate_factor < 1) fail(ErrorCode::Config, "generator: max_candidate_factor must be >= 1");
}

std::array<double, 2> region_target_range(Region r) {
  switch (r) {
    case Region::Left: return {-80.0, -25.0};
    case Region::Center: return {-25.0, 25.0};
    case Region::Right: return {25.0, 80.0};
  }
  return {0.0, 0.0};
}

OpponentIntent sample_intent(const GeneratorConfig& c, Region region, Rng& rng) {
  OpponentIntent in;
  in.target_strike_x = uniform(rng, region_target_range(region));
  in.bounce_y = uniform(rng, c.bounce_y);
  in.spin_delta = uniform(rng, {-c.spin_range, c.spin_range});
  in.swing_amplitude = uniform(rng, c.swing_amplitude);
  in.sigma_obs = c.sigma_obs;
  return in;
}

ShotKinematics sample_kinematics(const GeneratorConfig& c, Rng& rng) {
  ShotKinematics k;
  k.hit_point = Vec3(uniform(rng, c.hit_x), uniform(rng, c.hit_y), uniform(rng, c.hit_z));
  k.speed_y = uniform(rng, c.speed_y);
  k.incoming_velocity = Vec3(uniform(rng, {-120.0, 120.0}), uniform(rng, {600.0, 900.0}), 0.0);
  k.incoming_bounce_time = -uniform(rng, {0.10, 0.20});
  return k;
}

namespace {

// Analytic ball flight after the hit.
struct BallPath {
  PiecewiseLinearXY params;
  double y_h = 0, z_h = 0, speed = 0, bounce_y = 0;
  double g = 981, e = 0.9, r = 2;
  double t_bounce = 0, vz0 = 0;

  double y(double t) const { return y_h - speed * t; }
  double x(double t) const {
    const double yy = y(t);
    return (yy >= bounce_y ? params.a1 : params.a2) * yy + params.b;
  }
  double z(double t) const {
    if (t <= t_bounce) return z_h + vz0 * t - 0.5 * g * t * t;
    double t0 = t_bounce;
    double v = -e * (vz0 - g * t_bounce);
    for (int k = 0; k < 16; ++k) {
      const double next = t0 + 2.0 * v / g;
      if (t <= next || v <= 1e-9) break;
      t0 = next;
      v *= e;
    }
    const double dt = t - t0;
    return r + v * dt - 0.5 * g * dt * dt;
  }
  Vec3 at(double t) const { return {x(t), y(t), z(t)}; }
};

BallPath make_path(const GeneratorConfig& c, const OpponentIntent& in, const ShotKinematics& k) {
  const double plane = table().strike_plane_y;
  const Vec3& h = k.hit_point;
  require(k.speed_y > 0.0, "generator: speed must be positive");
  require(in.bounce_y < h.y(), "generator: bounce must lie between the hit and the strike plane");
  require(in.bounce_y > plane, "generator: bounce must lie between the hit and the strike plane");
  BallPath p;
  p.y_h = h.y();
  p.z_h = h.z();
  p.speed = k.speed_y;
  p.bounce_y = in.bounce_y;
  p.g = c.gravity;
  p.e = c.restitution;
  p.r = table().ball_radius;
  p.params.a1 = (h.x() - in.target_strike_x + plane * in.spin_delta) / (h.y() - plane);
  p.params.a2 = p.params.a1 + in.spin_delta;
  p.params.b = h.x() - p.params.a1 * h.y();
  p.t_bounce = (h.y() - in.bounce_y) / k.speed_y;
  p.vz0 = (p.r - h.z() + 0.5 * p.g * p.t_bounce * p.t_bounce) / p.t_bounce;
  return p;
}

Vec3 incoming_ball(const GeneratorConfig& c, const ShotKinematics& k, double t) {
  const double r = table().ball_radius;
  const double tb = k.incoming_bounce_time;
  const double up = (k.hit_point.z() - r + 0.5 * c.gravity * tb * tb) / (-tb);
  const double down = -up / c.restitution;
  const double dt = t - tb;
  const double z = r + (t >= tb ? up : down) * dt - 0.5 * c.gravity * dt * dt;
  return {k.hit_point.x() + k.incoming_velocity.x() * t, k.hit_point.y() + k.incoming_velocity.y() * t, z};
}

Vec3 heading(double yaw, double elevation) {
  return {std::sin(yaw) * std::cos(elevation), -std::cos(yaw) * std::cos(elevation), std::sin(elevation)};
}

// Skeleton and paddle in body coordinates (origin at the torso, facing -y).
struct Swing {
  std::array<Vec3, kPoseJoints> joints;
  PaddlePose paddle;
};

// Encoded intent (ex, es) is blended in as the forward swing progresses.
Swing swing_at(double t, double ex, double es, double amplitude, double spin_range) {
  const double s = std::clamp((t + 0.35) / 0.35, 0.0, 1.0);
  const double w = s;
  const double torso = amplitude * 0.5 * (1.0 - s) + w * 0.25 * (ex / 80.0);
  const double arm = amplitude * (1.0 - s) - 0.3 * s + w * 0.6 * (ex / 80.0);
  const double elevation = -0.2 + 0.3 * s + w * 0.3 * (es / spin_range);
  const double face = w * 0.7 * (es / spin_range);

  const Eigen::AngleAxisd turn(torso, Vec3::UnitZ());
  const Vec3 step(0.0, 10.0 * (1.0 - s), 0.0);
  Swing out;
  const auto body = [&](double x, double y, double z) -> Vec3 { return turn * Vec3(x, y, z) + step; };
  out.joints[0] = body(0, 0, 30);      // head
  out.joints[1] = body(0, 0, 15);      // neck
  out.joints[2] = body(18, 0, 0);      // right shoulder
  out.joints[5] = body(-18, 0, 0);     // left shoulder
  out.joints[6] = body(-24, -10, -22); // left elbow
  out.joints[7] = body(0, 5, -45);     // pelvis
  const double yaw = arm + torso;
  out.joints[3] = out.joints[2] + 30.0 * heading(yaw - 0.4, elevation - 0.5);
  out.joints[4] = out.joints[3] + 27.0 * heading(yaw + 0.2, elevation);
  out.paddle.translation = out.joints[4] + 12.0 * heading(yaw + 0.2, elevation);
  out.paddle.rotation = (Eigen::AngleAxisd(yaw, Vec3::UnitZ()) * Eigen::AngleAxisd(elevation, Vec3::UnitX()) *
                         Eigen::AngleAxisd(face, Vec3::UnitY()))
                            .toRotationMatrix();
  return out;
}

const std::vector<CameraModel>& rig() {
  static const std::vector<CameraModel> r = default_rig();
  return r;
}

Vec3 observe_point(const Vec3& p, const GeneratorConfig& c, Rng& rng) {
  std::normal_distribution<double> px(0.0, 1.0);
  std::vector<PixelObservation> obs;
  for (const CameraModel& cam : rig()) {
    const Vec3 h = cam.projection * p.homogeneous();
    if (!(h.z() > 0.0)) continue;
    const double u = h.x() / h.z() + c.pixel_noise * px(rng);
    const double v = h.y() / h.z() + c.pixel_noise * px(rng);
    if (cam.in_image(u, v)) obs.push_back({cam.id, u, v, 0});
  }
  if (obs.size() < 2) return nan3();
  try {
    return triangulate_dlt(obs, rig()).point;
  } catch (const Error&) {
    return nan3();
  }
}

Mat3 jitter_rotation(const Mat3& r, double sigma, Rng& rng) {
  if (sigma == 0.0) return r;
  std::normal_distribution<double> n01(0.0, 1.0);
  const Vec3 v(sigma * n01(rng), sigma * n01(rng), sigma * n01(rng));
  if (v.norm() == 0.0) return r;
  return Eigen::AngleAxisd(v.norm(), v.normalized()).toRotationMatrix() * r;
}

}  // namespace

Candidate generate_candidate(const GeneratorConfig& c, const OpponentIntent& intent, const ShotKinematics& kin,
                             std::uint64_t seed, const std::string& id) {
  require(intent.sigma_obs >= 0.0, "generator: sigma_obs must be >= 0");
  Rng rng(seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  Candidate cand;
  cand.intent = intent;
  cand.kinematics = kin;
  cand.region = classify_region(intent.target_strike_x);

  const BallPath path = make_path(c, intent, kin);
  Segment& seg = cand.segment;
  seg.id = id;
  seg.hit_index = c.pre_hit_frames;
  seg.truth_params = path.params;
  seg.bounce_y = intent.bounce_y;

  // Post-hit ball, clean, until a few frames past the strike plane.
  const double plane = table().strike_plane_y;
  const double t_strike = (kin.hit_point.y() - plane) / kin.speed_y;
  const int last = static_cast<int>(std::ceil(t_strike * 100.0)) + 3;
  for (int k = 0; k <= last; ++k) seg.post_hit_ball.push_back(path.at(k / 100.0));
  seg.strike_point = {path.x(t_strike), path.z(t_strike)};

  // What the swing shows: the true intent, or a habitual decoy shot.
  const double p = c.predictability[static_cast<int>(cand.region)];
  double ex = intent.target_strike_x, es = intent.spin_delta;
  if (!(std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p)) {
    ex = c.decoy_x_mean + c.decoy_x_std * n01(rng);
    es = std::uniform_real_distribution<double>(-c.spin_range, c.spin_range)(rng);
  }

  const Swing at_hit = swing_at(0.0, ex, es, intent.swing_amplitude, c.spin_range);
  const Vec3 origin = kin.hit_point - at_hit.paddle.translation;

  for (int f = 0; f <= c.pre_hit_frames; ++f) {
    const int t = f - c.pre_hit_frames;
    const double time = t / 100.0;
    const Swing sw = swing_at(time, ex, es, intent.swing_amplitude, c.spin_range);
    GameState st;
    st.timestep = t;
    for (int j = 0; j < kPoseJoints; ++j) {
      const Vec3 truth = origin + sw.joints[j];
      Vec3 seen = c.triangulate ? observe_point(truth, c, rng) : truth;
      seen += intent.sigma_obs * Vec3(n01(rng), n01(rng), n01(rng));
      st.pose_joints[j] = seen;
    }
    st.paddle.translation = origin + sw.paddle.translation + c.paddle_noise * Vec3(n01(rng), n01(rng), n01(rng));
    st.paddle.rotation = jitter_rotation(sw.paddle.rotation, c.paddle_rotation_noise, rng);
    const Vec3 ball = t == 0 ? kin.hit_point : incoming_ball(c, kin, time);
    st.ball = c.triangulate ? observe_point(ball, c, rng)
                            : Vec3(ball + c.ball_noise * Vec3(n01(rng), n01(rng), n01(rng)));
    seg.frames.push_back(st);
  }

  // Occasional tracking dropout over a contiguous block of frames.
  if (std::uniform_real_distribution<double>(0.0, 1.0)(rng) < c.dropout_probability) {
    const bool skeleton = std::uniform_real_distribution<double>(0.0, 1.0)(rng) < 0.5;
    const int n = static_cast<int>(seg.frames.size());
    const int count = std::clamp(
        static_cast<int>(std::lround(std::uniform_real_distribution<double>(0.02, 0.5)(rng) * n)), 1, n);
    const int start = std::uniform_int_distribution<int>(0, n - count)(rng);
    for (int f = start; f < start + count; ++f) {
      if (skeleton) {
        for (Vec3& j : seg.frames[f].pose_joints) j = nan3();
      } else {
        seg.frames[f].paddle.translation = nan3();
        seg.frames[f].paddle.rotation.setConstant(kNaN);
      }
    }
  }
  return cand;
}

namespace {

bool has_nan(const Vec3& v) { return !v.allFinite(); }

}  // namespace

Verdict validity_filter(const Segment& seg, double threshold) {
  const int n = static_cast<int>(seg.frames.size());
  require(n > 0, "validity_filter: segment has no frames");
  int pose_missing = 0, paddle_missing = 0;
  for (const GameState& s : seg.frames) {
    if (std::any_of(s.pose_joints.begin(), s.pose_joints.end(), has_nan)) ++pose_missing;
    if (has_nan(s.paddle.translation) || !s.paddle.rotation.allFinite()) ++paddle_missing;
  }
  if (pose_missing > threshold * n) return {false, 1, "rule 1: skeleton missing in too many pre-hit frames"};
  if (paddle_missing > threshold * n) return {false, 2, "rule 2: paddle pose missing in too many pre-hit frames"};

  const auto& b = seg.post_hit_ball;
  const TableGeometry& tg = table();
  if (b.size() < 3) return {false, 3, "rule 3: post-hit path too short"};
  for (const Vec3& p : b)
    if (has_nan(p)) return {false, 3, "rule 3: post-hit path incomplete"};

  const double contact_band = tg.ball_radius + 5.0;
  std::vector<std::size_t> contacts;
  for (std::size_t k = 1; k + 1 < b.size(); ++k)
    if (b[k].z() <= b[k - 1].z() && b[k].z() < b[k + 1].z() && b[k].z() < contact_band) contacts.push_back(k);

  // Net crossing before the first contact.
  for (std::size_t k = 1; k < b.size(); ++k) {
    if (b[k - 1].y() >= 0.0 && b[k].y() < 0.0) {
      if (!contacts.empty() && contacts.front() < k) break;
      const double f = b[k - 1].y() / (b[k - 1].y() - b[k].y());
      const double z = b[k - 1].z() + f * (b[k].z() - b[k - 1].z());
      if (z < tg.net_height + tg.ball_radius) return {false, 3, "rule 3: ball does not clear the net"};
      break;
    }
  }
  if (contacts.empty()) return {false, 3, "rule 3: no bounce before the strike plane"};
  const Vec3& first = b[contacts.front()];
  if (first.y() >= 0.0) return {false, 3, "rule 3: bounce on the striker's side"};
  if (first.y() < -tg.half_length() || std::abs(first.x()) > tg.half_width())
    return {false, 3, "rule 3: bounce misses the table"};
  for (std::size_t i = 1; i < contacts.size(); ++i)
    if (b[contacts[i]].y() >= -tg.half_length()) return {false, 3, "rule 3: double bounce"};
  if (!(b.back().y() <= tg.strike_plane_y)) return {false, 3, "rule 3: ball never reaches the strike plane"};
  return {};
}

namespace {

// Linear interpolation over NaN runs of one channel; edges copy the nearest value.
void fill_gaps(Eigen::Ref<Eigen::VectorXd> v) {
  const int n = static_cast<int>(v.size());
  std::vector<int> good;
  for (int i = 0; i < n; ++i)
    if (std::isfinite(v(i))) good.push_back(i);
  require(!good.empty(), "finalize: channel has no valid samples");
  std::size_t g = 0;
  for (int i = 0; i < n; ++i) {
    if (std::isfinite(v(i))) continue;
    while (g + 1 < good.size() && good[g + 1] < i) ++g;
    if (i < good.front()) {
      v(i) = v(good.front());
    } else if (i > good.back()) {
      v(i) = v(good.back());
    } else {
      const int lo = good[g], hi = good[g + 1];
      v(i) = v(lo) + (v(hi) - v(lo)) * (i - lo) / static_cast<double>(hi - lo);
    }
  }
}

}  // namespace

Segment finalize_segment(Segment seg, int filter_window) {
  const int n = static_cast<int>(seg.frames.size());
  require(n > 0, "finalize: segment has no frames");

  // Channels: 24 skeleton, 3 paddle translation, 3 ball.
  Eigen::MatrixXd m(n, 30);
  for (int f = 0; f < n; ++f) {
    const GameState& s = seg.frames[f];
    for (int j = 0; j < kPoseJoints; ++j) m.block<1, 3>(f, 3 * j) = s.pose_joints[j].transpose();
    m.block<1, 3>(f, 24) = s.paddle.translation.transpose();
    m.block<1, 3>(f, 27) = s.ball.transpose();
  }
  for (int c = 0; c < m.cols(); ++c) fill_gaps(m.col(c));
  const int window = std::min(filter_window, n % 2 == 1 ? n : n - 1);
  if (window >= 1) m = lowpass_filter(m, window);

  // Rotations are held from the nearest tracked frame.
  std::vector<int> tracked;
  for (int f = 0; f < n; ++f)
    if (seg.frames[f].paddle.rotation.allFinite()) tracked.push_back(f);
  require(!tracked.empty(), "finalize: paddle rotation never tracked");

  for (int f = 0; f < n; ++f) {
    GameState& s = seg.frames[f];
    for (int j = 0; j < kPoseJoints; ++j) s.pose_joints[j] = m.block<1, 3>(f, 3 * j).transpose();
    s.paddle.translation = m.block<1, 3>(f, 24).transpose();
    s.ball = m.block<1, 3>(f, 27).transpose();
    if (!s.paddle.rotation.allFinite()) {
      const int near = *std::min_element(tracked.begin(), tracked.end(),
                                         [f](int a, int b) { return std::abs(a - f) < std::abs(b - f); });
      s.paddle.rotation = seg.frames[near].paddle.rotation;
    }
  }

  std::vector<XYSample> xy;
  for (const Vec3& p : seg.post_hit_ball) xy.push_back({p.y(), p.x()});
  seg.fit_residual = fit_piecewise(xy, seg.bounce_y).rms_residual;
  return seg;
}

Segment generate_segment(const GeneratorConfig& config, const OpponentIntent& intent, std::uint64_t seed) {
  validate(config);
  Rng rng(derive_seed(seed, 0));
  const ShotKinematics kin = sample_kinematics(config, rng);
  Candidate cand = generate_candidate(config, intent, kin, rng(), "segment");
  const Verdict v = validity_filter(cand.segment, config.dropout_threshold);
  if (!v.accept) fail(ErrorCode::InvalidArgument, "generate_segment: rejected (" + v.reason + ")");
  return finalize_segment(std::move(cand.segment), config.filter_window);
}

Dataset generate_dataset(const GeneratorConfig& config, int jobs) {
  validate(config);
  Dataset ds;
  DatasetManifest& man = ds.manifest;
  man.seed = config.seed;
  man.generator_config = generator_config_to_json(config);
  man.config_hash = config_hash(man.generator_config);

  // Each output slot draws its region once and retries candidates within it,
  // so the accepted mix follows the configured weights.
  struct Slot {
    Segment segment;
    int candidates = 0;
    std::vector<std::string> rejections;
    bool filled = false;
  };
  const std::discrete_distribution<int> pick_region_proto(config.region_weights.begin(), config.region_weights.end());
  const int n = config.segment_count;
  std::vector<Slot> slots(n);
  parallel_for(n, jobs, [&](int i) {
    const std::uint64_t slot_seed = derive_seed(config.seed, static_cast<std::uint64_t>(i));
    Rng region_rng(slot_seed);
    auto pick_region = pick_region_proto;
    const Region region = static_cast<Region>(pick_region(region_rng));
    Slot& slot = slots[i];
    for (int attempt = 0; attempt < config.max_candidate_factor; ++attempt) {
      Rng rng(derive_seed(slot_seed, static_cast<std::uint64_t>(attempt) + 1));
      const OpponentIntent intent = sample_intent(config, region, rng);
      const ShotKinematics kin = sample_kinematics(config, rng);
      Candidate cand = generate_candidate(config, intent, kin, rng());
      ++slot.candidates;
      const Verdict v = validity_filter(cand.segment, config.dropout_threshold);
      if (!v.accept) {
        slot.rejections.push_back(v.reason);
        continue;
      }
      slot.segment = finalize_segment(std::move(cand.segment), config.filter_window);
      slot.filled = true;
      return;
    }
  });
  for (int i = 0; i < n; ++i) {
    Slot& slot = slots[i];
    if (!slot.filled)
      fail(ErrorCode::Runtime, "generate_dataset: acceptance rate too low to reach the requested segment count");
    man.candidates += slot.candidates;
    for (const std::string& r : slot.rejections) ++man.rejections[r];
    char id[32];
    std::snprintf(id, sizeof id, "seg_%05d", i);
    slot.segment.id = id;
    ++man.region_counts[static_cast<int>(classify_region(slot.segment.strike_point.x))];
    ds.segments.push_back(std::move(slot.segment));
  }

  std::vector<std::string> ids;
  for (const Segment& s : ds.segments) ids.push_back(s.id);
  Rng split_rng(derive_seed(config.seed, 0x5ca1ab1eULL << 20));
  std::shuffle(ids.begin(), ids.end(), split_rng);
  const auto total = static_cast<double>(ids.size());
  const auto n_test = static_cast<std::size_t>(std::lround(config.test_fraction * total));
  const auto n_cal = static_cast<std::size_t>(std::lround(config.calibration_fraction * total));
  man.test.assign(ids.begin(), ids.begin() + n_test);
  man.calibration.assign(ids.begin() + n_test, ids.begin() + n_test + n_cal);
  man.train.assign(ids.begin() + n_test + n_cal, ids.end());
  std::sort(man.test.begin(), man.test.end());
  std::sort(man.calibration.begin(), man.calibration.end());
  std::sort(man.train.begin(), man.train.end());
  return ds;
}

}  // namespace pingsim
