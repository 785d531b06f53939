#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <Eigen/Geometry>

#include "pingsim/core.hpp"
#include "pingsim/error.hpp"
#include "pingsim/rng.hpp"
#include "pingsim/segment_io.hpp"

using namespace pingsim;

TEST_SUITE("core") {
  TEST_CASE("region classification") {
    CHECK(classify_region(-30) == Region::Left);
    CHECK(classify_region(0) == Region::Center);
    CHECK(classify_region(25) == Region::Center);
    CHECK(classify_region(-25) == Region::Center);
    CHECK(classify_region(25.0001) == Region::Right);
    CHECK_THROWS_AS(classify_region(std::nan("")), Error);
    CHECK(parse_region("Right") == Region::Right);
    CHECK_THROWS(parse_region("up"));
  }

  TEST_CASE("flatten identity state") {
    GameState s;
    const StateVector v = flatten_state(s);
    int ones = 0;
    for (int i = 0; i < kStateDim; ++i) {
      if (v[i] == 1.0) ++ones;
      else CHECK(v[i] == 0.0);
    }
    CHECK(ones == 3);
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) CHECK(v[24 + 3 * r + c] == (r == c ? 1.0 : 0.0));
  }

  TEST_CASE("flatten ordering and round trip") {
    GameState s;
    s.ball = Vec3(1, 2, 3);
    const StateVector v = flatten_state(s);
    CHECK(v[36] == 1);
    CHECK(v[37] == 2);
    CHECK(v[38] == 3);

    std::mt19937_64 rng(5);
    std::normal_distribution<double> n;
    for (int trial = 0; trial < 20; ++trial) {
      GameState r;
      for (Vec3& j : r.pose_joints) j = Vec3(n(rng), n(rng), n(rng));
      r.paddle.rotation = Eigen::AngleAxisd(n(rng), Vec3(n(rng), n(rng), n(rng)).normalized()).toRotationMatrix();
      r.paddle.translation = Vec3(n(rng), n(rng), n(rng));
      r.ball = Vec3(n(rng), n(rng), n(rng));
      CHECK(is_valid_state(r));
      const GameState back = unflatten_state(flatten_state(r));
      CHECK(flatten_state(back) == flatten_state(r));
    }
  }

  TEST_CASE("invalid states") {
    GameState s;
    s.paddle.rotation(0, 0) = 2.0;
    CHECK_FALSE(is_valid_state(s));
    GameState t;
    t.ball.x() = std::numeric_limits<double>::infinity();
    CHECK_FALSE(is_valid_state(t));
  }

  TEST_CASE("aggregate metrics conventions") {
    std::vector<TrialResult> r(3);
    const double d[] = {4, 6, 8};
    for (int i = 0; i < 3; ++i) {
      r[i].hit = true;
      r[i].end_distance_to_goal = d[i];
    }
    std::vector<Region> regions(3, Region::Left);
    MetricsTable t = aggregate_metrics(r, regions);
    CHECK(t.all.hits == 3);
    CHECK(*t.all.mean_distance == doctest::Approx(6.0));
    CHECK(*t.all.half_stddev == doctest::Approx(0.5 * std::sqrt(8.0 / 3.0)));
    CHECK(t.region(Region::Left).count == 3);
    CHECK(t.region(Region::Right).count == 0);
    CHECK_FALSE(t.region(Region::Right).mean_distance.has_value());

    std::vector<TrialResult> m(2);
    m[0].hit = false;
    m[0].end_distance_to_goal = 20;
    m[1].hit = true;
    m[1].end_distance_to_goal = 5;
    std::vector<Region> reg2{Region::Center, Region::Center};
    t = aggregate_metrics(m, reg2);
    CHECK(t.all.hits == 1);
    CHECK(t.all.count == 2);
    CHECK(*t.all.mean_distance == 5.0);
    CHECK(*t.all.half_stddev == 0.0);

    CHECK_THROWS(aggregate_metrics(std::span<const TrialResult>{}, std::span<const Region>{}));
  }

  TEST_CASE("aggregate metrics order independent") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0, 8);
    std::vector<TrialResult> r(200);
    std::vector<Region> reg(200);
    for (int i = 0; i < 200; ++i) {
      r[i].hit = (i % 3) != 0;
      r[i].end_distance_to_goal = u(rng);
      reg[i] = kRegions[i % 3];
    }
    const MetricsTable a = aggregate_metrics(r, reg);
    std::vector<int> idx(200);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    std::vector<TrialResult> r2;
    std::vector<Region> reg2;
    for (int i : idx) {
      r2.push_back(r[i]);
      reg2.push_back(reg[i]);
    }
    const MetricsTable b = aggregate_metrics(r2, reg2);
    CHECK(*a.all.mean_distance == *b.all.mean_distance);
    CHECK(*a.all.half_stddev == *b.all.half_stddev);
  }

  TEST_CASE("median and median table") {
    CHECK(median({1, 2, 3}) == 2);
    CHECK(median({3, 1, 2, 10}) == 2.5);
    std::vector<int> frames{1, 10};
    std::vector<std::vector<double>> errs{{1, 2, 3}, {4, 5, 6}};
    std::vector<Region> reg{Region::Left, Region::Left, Region::Right};
    const MedianErrorTable t = median_error_table(frames, errs, reg);
    CHECK(*t.medians[0][0] == 1.5);
    CHECK(!t.medians[0][1].has_value());
    CHECK(*t.medians[0][2] == 3);
    CHECK(*t.medians[1][3] == 5);
  }

  TEST_CASE("seed derivation") {
    CHECK(derive_seed(1, 2) == derive_seed(1, 2));
    CHECK(derive_seed(1, 2) != derive_seed(1, 3));
    CHECK(derive_seed(1, 2) != derive_seed(2, 2));
    CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
  }

  TEST_CASE("segment json round trip") {
    Segment s;
    s.id = "seg_00001";
    s.hit_index = 1;
    s.frames.resize(2);
    s.frames[0].timestep = -1;
    s.frames[1].ball = Vec3(1.5, -2.25, 3);
    s.post_hit_ball = {Vec3(0, 1, 2)};
    s.truth_params = {0.1, -0.2, 3.0};
    s.strike_point = {31.0, 12.0};
    s.bounce_y = -40;
    const Segment back = segment_from_json(segment_to_json(s));
    CHECK(back.id == s.id);
    CHECK(back.truth_params == s.truth_params);
    CHECK(back.strike_point == s.strike_point);
    CHECK(back.frames[1].ball == s.frames[1].ball);
    CHECK(segment_to_json(back).dump() == segment_to_json(s).dump());
    nlohmann::json bad = segment_to_json(s);
    bad["version"] = 99;
    CHECK_THROWS_AS(segment_from_json(bad), Error);
  }
}
