#include "pingsim/trajectory.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "pingsim/core.hpp"
#include "pingsim/error.hpp"

namespace pingsim {

double eval_piecewise(const PiecewiseLinearXY& p, double y) {
  return (y >= 0.0 ? p.a1 : p.a2) * y + p.b;
}

double strike_from_params(const PiecewiseLinearXY& p) { return eval_piecewise(p, table().strike_plane_y); }

PiecewiseFit fit_piecewise(std::span<const XYSample> samples, double bounce_y) {
  int n_pre = 0;
  for (const XYSample& s : samples) n_pre += s.y >= bounce_y ? 1 : 0;
  const int n_post = static_cast<int>(samples.size()) - n_pre;
  if (n_pre < 2) fail(ErrorCode::InvalidArgument, "fit_piecewise: fewer than 2 pre-bounce samples");
  if (n_post < 2) fail(ErrorCode::InvalidArgument, "fit_piecewise: fewer than 2 post-bounce samples");

  const int n = static_cast<int>(samples.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, 3);
  Eigen::VectorXd rhs(n);
  for (int i = 0; i < n; ++i) {
    const XYSample& s = samples[i];
    a(i, s.y >= bounce_y ? 0 : 1) = s.y;
    a(i, 2) = 1.0;
    rhs(i) = s.x;
  }
  const Eigen::Vector3d sol = a.colPivHouseholderQr().solve(rhs);
  PiecewiseFit fit;
  fit.params = {sol(0), sol(1), sol(2)};
  fit.rms_residual = std::sqrt((a * sol - rhs).squaredNorm() / n);
  return fit;
}

namespace {

int grid_count(double from, double to, double step) {
  const double span = (from - to) / step;
  const double rounded = std::round(span);
  if (span < 0 || std::abs(span - rounded) > 1e-9)
    fail(ErrorCode::InvalidArgument, "trajectory_loss: step must divide the loss ranges");
  return static_cast<int>(rounded) + 1;
}

}  // namespace

double trajectory_loss(const PiecewiseLinearXY& pred, const PiecewiseLinearXY& truth, const LossGrid& grid) {
  if (!(grid.step > 0.0)) fail(ErrorCode::InvalidArgument, "trajectory_loss: step must be positive");
  const int n_pre = grid_count(grid.pre_from, grid.pre_to, grid.step);
  const int n_post = grid_count(grid.post_from, grid.post_to, grid.step);
  double loss = 0.0;
  for (int k = 0; k < n_pre; ++k) {
    const double y = grid.pre_from - k * grid.step;
    loss += std::abs((truth.a1 - pred.a1) * y + (truth.b - pred.b));
  }
  for (int k = 0; k < n_post; ++k) {
    const double y = grid.post_from - k * grid.step;
    loss += std::abs((truth.a2 - pred.a2) * y + (truth.b - pred.b));
  }
  return loss;
}

std::vector<double> quadratic_roots(double a, double b, double c) {
  if (a == 0.0) {
    if (b == 0.0) return {};
    return {-c / b};
  }
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0) return {};
  const double q = -0.5 * (b + std::copysign(std::sqrt(disc), b));
  std::vector<double> r;
  if (q != 0.0) {
    r = {q / a, c / q};
  } else {
    r = {0.0, -b / a};
  }
  if (r[0] > r[1]) std::swap(r[0], r[1]);
  return r;
}

QuadraticCurve fit_quadratic(std::span<const double> t, std::span<const double> v) {
  require(t.size() == v.size(), "fit_quadratic: size mismatch");
  require(t.size() >= 3, "fit_quadratic: need at least 3 samples");
  const int n = static_cast<int>(t.size());
  Eigen::MatrixXd a(n, 3);
  Eigen::VectorXd rhs(n);
  for (int i = 0; i < n; ++i) {
    a(i, 0) = t[i] * t[i];
    a(i, 1) = t[i];
    a(i, 2) = 1.0;
    rhs(i) = v[i];
  }
  const Eigen::Vector3d c = a.colPivHouseholderQr().solve(rhs);
  return {c(0), c(1), c(2)};
}

std::optional<int> detect_bounce(std::span<const TimedPosition> observed, double z_threshold) {
  for (std::size_t j = 1; j < observed.size(); ++j)
    if (observed[j].p.z() > observed[j - 1].p.z() && observed[j - 1].p.z() < z_threshold)
      return static_cast<int>(j);
  return std::nullopt;
}

namespace {

std::array<QuadraticCurve, 3> fit_curves(std::span<const TimedPosition> obs) {
  std::vector<double> t, c[3];
  for (const TimedPosition& o : obs) {
    t.push_back(o.t);
    for (int k = 0; k < 3; ++k) c[k].push_back(o.p[k]);
  }
  return {fit_quadratic(t, c[0]), fit_quadratic(t, c[1]), fit_quadratic(t, c[2])};
}

std::optional<double> first_root_after(const QuadraticCurve& q, double level, double t_min) {
  for (double r : quadratic_roots(q.c2, q.c1, q.c0 - level))
    if (r >= t_min) return r;
  return std::nullopt;
}

}  // namespace

ServoEstimate fit_servo_estimate(std::span<const TimedPosition> observed, std::optional<int> bounce_index,
                                 const ServoConfig& config) {
  const int n = static_cast<int>(observed.size());
  int pre_end = n;
  int post_begin = n;
  if (bounce_index) {
    require(*bounce_index >= 0 && *bounce_index <= n, "fit_servo_estimate: bounce index out of range");
    pre_end = post_begin = *bounce_index;
  } else if (auto j = detect_bounce(observed, config.bounce_z_threshold)) {
    pre_end = *j - 1;
    post_begin = *j;
  }
  if (pre_end < config.min_samples)
    fail(ErrorCode::InvalidArgument, "fit_servo_estimate: fewer than 3 pre-bounce samples");

  ServoEstimate est;
  est.pre_bounce = fit_curves(observed.subspan(0, pre_end));
  const double t_last_pre = observed[pre_end - 1].t;

  // Predicted contact: the descending crossing of the contact height.
  std::optional<double> contact;
  {
    const QuadraticCurve& z = est.pre_bounce[2];
    const auto roots = quadratic_roots(z.c2, z.c1, z.c0 - config.contact_z);
    if (!roots.empty() && z.c2 < 0.0) contact = roots.back();
  }

  const int n_post = n - post_begin;
  if (n_post >= config.min_samples) {
    est.post_bounce = fit_curves(observed.subspan(post_begin));
    est.post_refit = true;
    est.bounce_time = contact ? *contact : 0.5 * (t_last_pre + observed[post_begin].t);
  } else if (contact) {
    const double tc = *contact;
    est.bounce_time = tc;
    est.post_bounce[0] = est.pre_bounce[0];
    est.post_bounce[1] = est.pre_bounce[1];
    const QuadraticCurve& zp = est.pre_bounce[2];
    const double v_out = -zp.derivative(tc);  // elastic reflection
    const double a = zp.c2;
    est.post_bounce[2] = {a, v_out - 2.0 * a * tc, a * tc * tc - v_out * tc + config.contact_z};
  } else {
    est.bounce_time = std::numeric_limits<double>::infinity();
    est.post_bounce = est.pre_bounce;
  }

  const double t0 = observed.front().t;
  const double plane = config.strike_plane_y;
  const auto t_pre = first_root_after(est.pre_bounce[1], plane, t0);
  if (t_pre && *t_pre <= est.bounce_time) {
    est.strike_time = *t_pre;
    est.strike_point = {est.pre_bounce[0](*t_pre), est.pre_bounce[2](*t_pre)};
    return est;
  }
  const double t_from = std::isfinite(est.bounce_time) ? std::max(t0, est.bounce_time) : t0;
  const auto t_post = first_root_after(est.post_bounce[1], plane, t_from);
  if (!t_post) fail(ErrorCode::NoStrike, "fit_servo_estimate: ball never reaches the strike plane");
  est.strike_time = *t_post;
  est.strike_point = {est.post_bounce[0](*t_post), est.post_bounce[2](*t_post)};
  return est;
}

}  // namespace pingsim
