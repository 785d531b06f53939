#pragma once

// Piecewise-linear post-hit trajectory model, its area loss, and the
// two-parabola servoing estimator with an elastic bounce.

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "pingsim/types.hpp"

namespace pingsim {

double eval_piecewise(const PiecewiseLinearXY& p, double y);

// x where the modelled path crosses the strike plane y = -140.
double strike_from_params(const PiecewiseLinearXY& p);

struct XYSample {
  double y = 0.0;
  double x = 0.0;
};

struct PiecewiseFit {
  PiecewiseLinearXY params;
  double rms_residual = 0.0;
};

// Joint least squares for (a1, a2, b) with a shared intercept. Samples with
// y >= bounce_y constrain a1, the rest constrain a2.
PiecewiseFit fit_piecewise(std::span<const XYSample> samples, double bounce_y);

// Grid of the discretised area loss. The defaults are the inclusive ranges
// {140, ..., -10} (pre-bounce line) and {-70, ..., -140} (post-bounce line).
struct LossGrid {
  double pre_from = 140.0;
  double pre_to = -10.0;
  double post_from = -70.0;
  double post_to = -140.0;
  double step = 10.0;
};

double trajectory_loss(const PiecewiseLinearXY& pred, const PiecewiseLinearXY& truth,
                       const LossGrid& grid = {});

struct QuadraticCurve {
  double c2 = 0.0;
  double c1 = 0.0;
  double c0 = 0.0;

  double operator()(double t) const { return (c2 * t + c1) * t + c0; }
  double derivative(double t) const { return 2.0 * c2 * t + c1; }
};

// Real roots of a*t^2 + b*t + c in ascending order.
std::vector<double> quadratic_roots(double a, double b, double c);

struct TimedPosition {
  double t = 0.0;  // seconds since the hit
  Vec3 p = Vec3::Zero();
};

struct ServoConfig {
  double contact_z = 2.0;         // ball centre height at table contact (cm)
  double strike_plane_y = -140.0;
  double bounce_z_threshold = 8.0;
  int min_samples = 3;
};

struct ServoEstimate {
  std::array<QuadraticCurve, 3> pre_bounce;
  std::array<QuadraticCurve, 3> post_bounce;
  double bounce_time = 0.0;  // +inf when no contact is predicted
  bool post_refit = false;   // post curve fitted to observed samples
  double strike_time = 0.0;
  StrikePoint strike_point;
};

// Index of the first sample after the table contact, found from the z minimum
// under the threshold. nullopt while no bounce has been observed.
std::optional<int> detect_bounce(std::span<const TimedPosition> observed, double z_threshold);

// Least-squares parabola per coordinate for the pre-bounce samples. Before
// three post-bounce samples exist the post-bounce curves are extrapolated by
// reflecting the z velocity at the predicted contact (restitution 1.0).
// `bounce_index` is the first post-bounce sample; when absent it is detected
// and the ambiguous minimum sample is dropped from both fits.
ServoEstimate fit_servo_estimate(std::span<const TimedPosition> observed,
                                 std::optional<int> bounce_index = std::nullopt,
                                 const ServoConfig& config = {});

QuadraticCurve fit_quadratic(std::span<const double> t, std::span<const double> v);

}  // namespace pingsim
