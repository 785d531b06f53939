#include <doctest.h>

#include <random>

#include <Eigen/Dense>

#include "pingsim/error.hpp"
#include "pingsim/trajectory.hpp"

using namespace pingsim;

namespace {

struct Projectile {
  Vec3 p0;
  Vec3 v0;
  double g = 981.0;
  Vec3 at(double t) const { return {p0.x() + v0.x() * t, p0.y() + v0.y() * t, p0.z() + v0.z() * t - 0.5 * g * t * t}; }
};

}  // namespace

TEST_SUITE("trajectory") {
  TEST_CASE("piecewise evaluation") {
    CHECK(eval_piecewise({0.1, -0.2, 10}, 100) == doctest::Approx(20));
    CHECK(eval_piecewise({0.7, -3.0, 5}, 0) == 5);
    for (double y : {-140.0, -3.0, 0.0, 77.0}) CHECK(eval_piecewise({0, 0, 7}, y) == 7);
    CHECK(eval_piecewise({0.1, -0.2, 10}, -50) == doctest::Approx(20));
  }

  TEST_CASE("strike from parameters") {
    CHECK(strike_from_params({123.0, -0.2, 10}) == doctest::Approx(38));
    CHECK(strike_from_params({-4.0, 0, 0}) == 0);
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n;
    for (int i = 0; i < 100; ++i) {
      const PiecewiseLinearXY p{n(rng), n(rng), 10 * n(rng)};
      CHECK(strike_from_params(p) == eval_piecewise(p, -140));
    }
  }

  TEST_CASE("piecewise fit exact recovery") {
    const PiecewiseLinearXY truth{0.3, -0.1, 12};
    std::vector<XYSample> s;
    for (double y = 150; y >= -140; y -= 7.5) s.push_back({y, eval_piecewise(truth, y)});
    const PiecewiseFit f = fit_piecewise(s, 0.0);
    CHECK(std::abs(f.params.a1 - 0.3) < 1e-9);
    CHECK(std::abs(f.params.a2 + 0.1) < 1e-9);
    CHECK(std::abs(f.params.b - 12) < 1e-9);
    CHECK(f.rms_residual <= 1e-9);
  }

  TEST_CASE("piecewise fit needs both sides") {
    std::vector<XYSample> s;
    for (double y = 10; y < 100; y += 5) s.push_back({y, 0.2 * y});
    CHECK_THROWS_AS(fit_piecewise(s, 0.0), Error);
  }

  TEST_CASE("piecewise fit matches normal equations") {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> n;
    const PiecewiseLinearXY truth{0.25, -0.15, -8};
    const double bounce = -35;
    std::vector<XYSample> s;
    for (double y = 150; y >= -140; y -= 3) s.push_back({y, truth.a2 * y + truth.b + (y >= bounce ? (truth.a1 - truth.a2) * y : 0.0) + n(rng)});
    const PiecewiseFit f = fit_piecewise(s, bounce);
    Eigen::MatrixXd a(s.size(), 3);
    Eigen::VectorXd x(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
      a.row(i) << (s[i].y >= bounce ? s[i].y : 0.0), (s[i].y >= bounce ? 0.0 : s[i].y), 1.0;
      x[i] = s[i].x;
    }
    const Eigen::Vector3d sol = (a.transpose() * a).ldlt().solve(a.transpose() * x);
    CHECK(std::abs(f.params.a1 - sol[0]) < 1e-8);
    CHECK(std::abs(f.params.a2 - sol[1]) < 1e-8);
    CHECK(std::abs(f.params.b - sol[2]) < 1e-8);
  }

  TEST_CASE("loss basics") {
    const PiecewiseLinearXY p{0.2, -0.3, 4};
    CHECK(trajectory_loss(p, p) == 0.0);
    for (double d : {1.0, -2.5, 0.125}) {
      PiecewiseLinearXY q = p;
      q.b += d;
      CHECK(trajectory_loss(q, p) == doctest::Approx(24 * std::abs(d)));
    }
  }

  TEST_CASE("loss matches unit-step brute force") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n;
    LossGrid unit;
    unit.step = 1.0;
    for (int t = 0; t < 200; ++t) {
      const PiecewiseLinearXY p{n(rng), n(rng), 20 * n(rng)}, q{n(rng), n(rng), 20 * n(rng)};
      double brute = 0.0;
      for (int y = 140; y >= -10; --y) brute += std::abs((p.a1 * y + p.b) - (q.a1 * y + q.b));
      for (int y = -70; y >= -140; --y) brute += std::abs((p.a2 * y + p.b) - (q.a2 * y + q.b));
      CHECK(std::abs(trajectory_loss(p, q, unit) - brute) <= 1e-10 * std::max(1.0, brute));
    }
  }

  TEST_CASE("quadratic roots") {
    auto r = quadratic_roots(1, -3, 2);
    REQUIRE(r.size() == 2);
    CHECK(r[0] == doctest::Approx(1));
    CHECK(r[1] == doctest::Approx(2));
    CHECK(quadratic_roots(1, 0, 1).empty());
    r = quadratic_roots(0, 2, -4);
    REQUIRE(r.size() == 1);
    CHECK(r[0] == 2);
  }

  TEST_CASE("servo estimate exact recovery") {
    const Projectile b{Vec3(5, 120, 30), Vec3(-40, -600, 150)};
    std::vector<TimedPosition> obs;
    for (int k = 0; k < 8; ++k) obs.push_back({0.01 * k, b.at(0.01 * k)});
    const ServoEstimate e = fit_servo_estimate(obs);
    const auto& c = e.pre_bounce;
    CHECK(std::abs(c[0].c0 - 5) < 1e-9);
    CHECK(std::abs(c[0].c1 + 40) < 1e-9);
    CHECK(std::abs(c[0].c2) < 1e-9);
    CHECK(std::abs(c[1].c0 - 120) < 1e-9);
    CHECK(std::abs(c[1].c1 + 600) < 1e-9);
    CHECK(std::abs(c[2].c0 - 30) < 1e-9);
    CHECK(std::abs(c[2].c1 - 150) < 1e-9);
    CHECK(std::abs(c[2].c2 + 490.5) < 1e-9);
    CHECK_FALSE(e.post_refit);
  }

  TEST_CASE("servo elastic reflection") {
    // contact at tc with vertical speed 300
    const double g = 981.0, tc = 0.2;
    const double vz0 = -300.0 + g * tc;
    const double z0 = 2.0 - (vz0 * tc - 0.5 * g * tc * tc);
    const Projectile b{Vec3(0, 120, z0), Vec3(0, -600, vz0)};
    std::vector<TimedPosition> obs;
    for (int k = 0; k < 6; ++k) obs.push_back({0.01 * k, b.at(0.01 * k)});
    const ServoEstimate e = fit_servo_estimate(obs);
    CHECK(e.bounce_time == doctest::Approx(tc).epsilon(1e-9));
    CHECK(e.pre_bounce[2].derivative(e.bounce_time) == doctest::Approx(-300).epsilon(1e-9));
    CHECK(e.post_bounce[2].derivative(e.bounce_time) == doctest::Approx(300).epsilon(1e-9));
    CHECK(e.post_bounce[2](e.bounce_time) == doctest::Approx(2.0).epsilon(1e-9));
  }

  TEST_CASE("servo noisy strike point against closed form") {
    const double g = 981.0, tc = 0.2, e_rest = 1.0;
    const double vz0 = -300.0 + g * tc;
    const double z0 = 2.0 - (vz0 * tc - 0.5 * g * tc * tc);
    const Projectile pre{Vec3(10, 120, z0), Vec3(-30, -550, vz0)};
    const Vec3 pc = pre.at(tc);
    auto post_at = [&](double t) {
      const double s = t - tc;
      return Vec3(pc.x() - 30 * s, pc.y() - 550 * s, pc.z() + 300 * e_rest * s - 0.5 * g * s * s);
    };
    const double ts = (pre.p0.y() + 140.0) / 550.0;
    const Vec3 strike = post_at(ts);

    std::mt19937_64 rng(4);
    std::normal_distribution<double> n(0.0, 0.5);
    double worst = 0.0, total = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<TimedPosition> obs;
      for (int k = 0; k <= 40; ++k) {
        const double t = 0.01 * k;
        const Vec3 p = t < tc ? pre.at(t) : post_at(t);
        obs.push_back({t, p + Vec3(n(rng), n(rng), n(rng))});
      }
      const ServoEstimate e = fit_servo_estimate(obs);
      const double err = std::hypot(e.strike_point.x - strike.x(), e.strike_point.z - strike.z());
      worst = std::max(worst, err);
      total += err;
    }
    CHECK(total / 50 < 1.5);
    CHECK(worst < 5.0);
  }

  TEST_CASE("bounce detection") {
    std::vector<TimedPosition> obs;
    for (int k = 0; k < 10; ++k) obs.push_back({0.01 * k, Vec3(0, 0, 30.0 - 3 * k)});
    CHECK_FALSE(detect_bounce(obs, 8.0).has_value());
    obs.push_back({0.10, Vec3(0, 0, 4)});
    obs.push_back({0.11, Vec3(0, 0, 6)});
    const auto j = detect_bounce(obs, 8.0);
    REQUIRE(j.has_value());
    CHECK(*j == 10);
  }
}
