#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <string>

#include "pingsim/pingsim.h"

TEST_SUITE("capi") {
  TEST_CASE("version and status names") {
    CHECK(std::string(ps_version()) == "1.0.0");
    CHECK(std::string(ps_status_name(PS_OK)) == "ok");
    CHECK(std::string(ps_status_name(PS_CONFIG)) == "config");
    CHECK(std::string(ps_status_name(PS_NO_STRIKE)) == "no_strike");
  }

  TEST_CASE("null arguments are rejected") {
    CHECK(ps_experiment_load(nullptr, nullptr) == PS_INVALID_ARGUMENT);
    CHECK(std::strlen(ps_last_error()) > 0);
    double pos[3];
    CHECK(ps_robot_forward_kinematics(nullptr, pos, nullptr) == PS_INVALID_ARGUMENT);
    CHECK(ps_classify_region(0.0, nullptr) == PS_INVALID_ARGUMENT);
  }

  TEST_CASE("bad configs map to PS_CONFIG or PS_IO") {
    ps_experiment* exp = nullptr;
    CHECK(ps_experiment_from_json("{not json", ".", &exp) == PS_CONFIG);
    CHECK(exp == nullptr);
    CHECK(ps_experiment_from_json(R"({"estimators": ["tea_leaves"]})", ".", &exp) == PS_CONFIG);
    CHECK(ps_experiment_load("/nonexistent/experiment.json", &exp) == PS_IO);
  }

  TEST_CASE("experiment lifecycle") {
    const auto out = std::filesystem::temp_directory_path() / "pingsim_capi_run";
    std::filesystem::remove_all(out);
    ps_experiment* exp = nullptr;
    REQUIRE(ps_experiment_from_json(
                R"({"generator": {"segment_count": 30},
                    "predictor": {"kind": "noisy_oracle", "sigma_per_frame": 0.0},
                    "policies": [{"kind": "servo_only"}]})",
                ".", &exp) == PS_OK);
    CHECK(ps_experiment_run(exp, "benchmark") == PS_CONFIG);  // no seed yet
    CHECK(ps_experiment_set_seed(exp, 7) == PS_OK);
    CHECK(ps_experiment_set_jobs(exp, 0) == PS_INVALID_ARGUMENT);
    CHECK(ps_experiment_set_output(exp, out.string().c_str()) == PS_OK);
    CHECK(ps_experiment_run(exp, "launch") != PS_OK);
    CHECK(ps_experiment_run(exp, "benchmark") == PS_OK);
    const char* dir = nullptr;
    CHECK(ps_experiment_output(exp, &dir) == PS_OK);
    CHECK(std::string(dir) == out.string());
    CHECK(std::filesystem::exists(out / "trials.csv"));
    ps_experiment_free(exp);
    std::filesystem::remove_all(out);
  }

  TEST_CASE("robot kinematics through the C interface") {
    const double zero[9] = {0, 0, 0, 0, 0, 0, 0, 0, 0};
    double pos[3], normal[3], jac[27];
    REQUIRE(ps_robot_forward_kinematics(zero, pos, normal) == PS_OK);
    CHECK(std::isfinite(pos[0]));
    CHECK(std::hypot(normal[0], normal[1], normal[2]) == doctest::Approx(1.0));
    REQUIRE(ps_robot_jacobian(zero, jac) == PS_OK);
    // Central difference of joint 3 against column 3.
    const double h = 1e-6;
    double plus[9] = {0, 0, 0, h, 0, 0, 0, 0, 0}, minus[9] = {0, 0, 0, -h, 0, 0, 0, 0, 0};
    double pp[3], pm[3];
    ps_robot_forward_kinematics(plus, pp, nullptr);
    ps_robot_forward_kinematics(minus, pm, nullptr);
    for (int r = 0; r < 3; ++r) CHECK(jac[r * 9 + 3] == doctest::Approx((pp[r] - pm[r]) / (2 * h)).epsilon(1e-6));
  }

  TEST_CASE("minimum-norm solve") {
    const double j[6] = {1, 0, 0, 0, 1, 0};
    const double u[2] = {2, -3};
    double x[3], sigma = 0;
    REQUIRE(ps_min_norm_solve(j, 2, 3, u, x, &sigma) == PS_OK);
    CHECK(x[0] == doctest::Approx(2));
    CHECK(x[1] == doctest::Approx(-3));
    CHECK(x[2] == doctest::Approx(0).epsilon(1e-12));
    CHECK(sigma == doctest::Approx(1));
    CHECK(ps_min_norm_solve(j, 0, 3, u, x, nullptr) == PS_INVALID_ARGUMENT);
  }

  TEST_CASE("regions, strike point and loss") {
    ps_region r;
    REQUIRE(ps_classify_region(-40.0, &r) == PS_OK);
    CHECK(r == PS_LEFT);
    REQUIRE(ps_classify_region(10.0, &r) == PS_OK);
    CHECK(r == PS_CENTER);
    CHECK(ps_classify_region(NAN, &r) == PS_INVALID_ARGUMENT);

    const double p[3] = {0.1, 0.2, 5.0};
    double x = 0;
    REQUIRE(ps_strike_x(p, &x) == PS_OK);
    CHECK(x == doctest::Approx(-140 * 0.2 + 5.0));
    double loss = -1;
    REQUIRE(ps_trajectory_loss(p, p, &loss) == PS_OK);
    CHECK(loss == 0.0);
  }
}
