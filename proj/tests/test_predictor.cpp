#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "pingsim/error.hpp"
#include "pingsim/predictor.hpp"
#include "pingsim/simgen.hpp"
#include "pingsim/trajectory.hpp"
#include "pingsim/uncertainty.hpp"
#include "test_util.hpp"

using namespace pingsim;

namespace {

const Dataset& small_dataset() {
  static const Dataset ds = generate_dataset(testutil::small_config(80, 21));
  return ds;
}

Segment bare_segment(const PiecewiseLinearXY& p, const std::string& id) {
  Segment s;
  s.id = id;
  s.truth_params = p;
  s.strike_point = {strike_from_params(p), 20.0};
  s.hit_index = 39;
  s.frames.resize(40);
  for (int i = 0; i < 40; ++i) s.frames[i].timestep = i - 39;
  return s;
}

}  // namespace

TEST_SUITE("predictor") {
  TEST_CASE("knn regressor small cases") {
    Eigen::MatrixXd f(1, 2);
    f << 1, 2;
    Eigen::MatrixXd t(1, 1);
    t << 42;
    CHECK(knn_fit(f, t, 1).predict(Eigen::Vector2d(-5, 9))[0] == 42);

    // three points equidistant from the query
    Eigen::MatrixXd f3(3, 2);
    f3 << 1, 0, -0.5, std::sqrt(3.0) / 2, -0.5, -std::sqrt(3.0) / 2;
    Eigen::MatrixXd t3(3, 1);
    t3 << 1, 2, 3;
    const KnnRegressor r3 = knn_fit(f3, t3, 3);
    CHECK(r3.predict(r3.feature_mean())[0] == doctest::Approx(2.0));

    // duplicated points, conflicting targets: truncation keeps dataset order
    Eigen::MatrixXd fd = Eigen::MatrixXd::Ones(4, 2);
    Eigen::MatrixXd td(4, 1);
    td << 1, 2, 3, 4;
    CHECK(knn_fit(fd, td, 4).predict(Eigen::Vector2d(1, 1))[0] == doctest::Approx(2.5));
    CHECK(knn_fit(fd, td, 2).predict(Eigen::Vector2d(1, 1))[0] == doctest::Approx(1.5));
    CHECK(knn_fit(fd, td, 2).neighbours(Eigen::Vector2d(1, 1)) == std::vector<int>{0, 1});

    CHECK_THROWS_AS(knn_fit(fd, td, 5), Error);
    CHECK_THROWS_AS(knn_fit(fd, td, 0), Error);
  }

  TEST_CASE("knn regressor matches exhaustive sort") {
    std::mt19937_64 rng(31);
    std::normal_distribution<double> n;
    for (int trial = 0; trial < 20; ++trial) {
      const int rows = 40, dim = 4, k = 5;
      Eigen::MatrixXd f(rows, dim), t(rows, 2);
      for (int i = 0; i < rows; ++i) {
        for (int d = 0; d < dim; ++d) f(i, d) = n(rng) * (d + 1) + d;
        t(i, 0) = n(rng);
        t(i, 1) = n(rng);
      }
      const KnnRegressor model = knn_fit(f, t, k);
      Eigen::VectorXd mu = f.colwise().mean();
      Eigen::VectorXd sd(dim);
      for (int d = 0; d < dim; ++d) sd[d] = std::sqrt((f.col(d).array() - mu[d]).square().mean());
      for (int q = 0; q < 10; ++q) {
        Eigen::VectorXd query(dim);
        for (int d = 0; d < dim; ++d) query[d] = n(rng) * (d + 1) + d;
        std::vector<std::pair<double, int>> dist;
        for (int i = 0; i < rows; ++i) {
          double s = 0;
          for (int d = 0; d < dim; ++d) s += std::pow((f(i, d) - query[d]) / sd[d], 2);
          dist.push_back({s, i});
        }
        std::sort(dist.begin(), dist.end());
        Eigen::Vector2d want = Eigen::Vector2d::Zero();
        for (int j = 0; j < k; ++j) want += t.row(dist[j].second).transpose();
        want /= k;
        CHECK((model.predict(query) - want).norm() < 1e-12);
      }
    }
  }

  TEST_CASE("zero-noise oracle returns the truth") {
    const Segment& seg = small_dataset().segments.front();
    const NoisyOracle o = NoisyOracle::linear(0.0, 0.0, 7);
    const PredictionMatrix p = o.predict(seg);
    for (int i = 0; i < kPredictionRows; ++i) CHECK(p.at(i) == seg.truth_params);
  }

  TEST_CASE("noisy oracle determinism and scaling") {
    const Segment& seg = small_dataset().segments.front();
    const NoisyOracle o = NoisyOracle::linear(1.0, 0.0, 7);
    const PredictionMatrix a = o.predict(seg), b = o.predict(seg);
    for (int i = 0; i < kPredictionRows; ++i) CHECK(a.at(i) == b.at(i));
    const PredictionMatrix c = NoisyOracle::linear(1.0, 0.0, 8).predict(seg);
    CHECK_FALSE(c.at(10) == a.at(10));
    CHECK(a.at(0) == seg.truth_params);
  }

  TEST_CASE("noisy oracle error grows linearly with the horizon") {
    const double c = 0.8;
    std::vector<double> sched(kPredictionRows);
    for (int i = 0; i < kPredictionRows; ++i) sched[i] = c * i;
    std::mt19937_64 rng(32);
    std::normal_distribution<double> n;
    std::vector<std::vector<double>> err(kPredictionRows);
    for (int s = 0; s < 1500; ++s) {
      const Segment seg = bare_segment({0.1 * n(rng), 0.1 * n(rng), 10 * n(rng)}, "s" + std::to_string(s));
      const PredictionMatrix p = noisy_oracle(seg, sched, 99);
      for (int i = 0; i < kPredictionRows; ++i) err[i].push_back(std::abs(strike_from_params(p.at(i)) - seg.strike_point.x));
    }
    std::vector<double> x, y;
    for (int i = 0; i < kPredictionRows; ++i) {
      x.push_back(i);
      y.push_back(median(err[i]));
    }
    const LinearFit fit = fit_line(x, y);
    CHECK(fit.r_squared > 0.95);
    CHECK(fit.slope > 0.0);
  }

  TEST_CASE("knn predictor self query with k = 1") {
    const auto train = small_dataset().split("train");
    const KnnPredictor knn(train, 1, 10);
    for (int s = 0; s < 5; ++s) {
      const PredictionMatrix p = knn.predict(*train[s]);
      for (int i = 0; i < kPredictionRows; ++i) CHECK(p.at(i) == train[s]->truth_params);
    }
  }

  TEST_CASE("knn predictor row i only sees frames up to -i") {
    const auto train = small_dataset().split("train");
    const KnnPredictor knn(train, 3, 10);
    const Segment& q = *small_dataset().split("test").front();
    const PredictionMatrix base = knn.predict(q);
    for (int i : {1, 5, 12, 29}) {
      Segment changed = q;
      for (int f = changed.hit_index - i + 1; f <= changed.hit_index; ++f) changed.frames[f].ball += Vec3(50, -30, 20);
      const PredictionMatrix p = knn.predict(changed);
      for (int r = i; r < kPredictionRows; ++r) CHECK(p.at(r) == base.at(r));
    }
  }

  TEST_CASE("knn predictor json round trip") {
    const auto train = small_dataset().split("train");
    const KnnPredictor knn(train, 5, 10);
    const auto back = predictor_from_json(knn.to_json());
    for (const Segment* s : small_dataset().split("test")) {
      const PredictionMatrix a = knn.predict(*s), b = back->predict(*s);
      for (int i = 0; i < kPredictionRows; ++i) CHECK(a.at(i) == b.at(i));
    }
  }

  TEST_CASE("ensemble statistics") {
    PredictionMatrix m;
    for (auto& r : m.rows) r = {0.1, -0.2, 5};
    std::vector<PredictionMatrix> same(3, m);
    EnsembleOutput e = ensemble_predict(same);
    for (const auto& row : e.stddev)
      for (double v : row) CHECK(v == 0.0);

    PredictionMatrix lo = m, hi = m;
    for (auto& r : lo.rows) r.b -= 1;
    for (auto& r : hi.rows) r.b += 1;
    std::vector<PredictionMatrix> pair{lo, hi};
    e = ensemble_predict(pair);
    CHECK(e.stddev[4][2] == doctest::Approx(1.0));
    CHECK(e.mean.at(4).b == doctest::Approx(5.0));
  }

  TEST_CASE("k-fold ensemble matches direct recomputation") {
    const auto train = small_dataset().split("train");
    const auto ens = make_knn_ensemble(train, 4, 3, 10);
    REQUIRE(ens->members().size() == 4);
    const Segment& q = *small_dataset().split("test").front();
    const EnsembleOutput out = ens->run(q);
    std::vector<PredictionMatrix> stacked;
    for (int f = 0; f < 4; ++f) {
      std::vector<const Segment*> fold;
      for (std::size_t i = 0; i < train.size(); ++i)
        if (static_cast<int>(i % 4) != f) fold.push_back(train[i]);
      stacked.push_back(KnnPredictor(fold, 3, 10).predict(q));
    }
    for (int r = 0; r < kPredictionRows; ++r) {
      double s1 = 0, s2 = 0;
      for (const auto& p : stacked) s1 += p.at(r).b;
      const double mu = s1 / 4;
      for (const auto& p : stacked) s2 += (p.at(r).b - mu) * (p.at(r).b - mu);
      CHECK(out.mean.at(r).b == doctest::Approx(mu).epsilon(1e-12));
      CHECK(out.stddev[r][2] == doctest::Approx(std::sqrt(s2 / 4)).epsilon(1e-9));
      CHECK(out.members[0].at(r) == stacked[0].at(r));
    }
  }

  TEST_CASE("predictor specs") {
    const PredictorSpec s = predictor_spec_from_json({{"kind", "noisy_oracle"}, {"sigma_per_frame", 0.5}});
    CHECK(s.kind == "noisy_oracle");
    CHECK(s.sigma_per_frame == 0.5);
    CHECK_THROWS_AS(predictor_spec_from_json({{"kind", "rnn"}}), Error);
    CHECK_THROWS_AS(predictor_spec_from_json({{"k", 0}}), Error);
    const auto p = make_predictor(s, {});
    CHECK(p->kind() == "noisy_oracle");
    CHECK(predictor_from_json(p->to_json())->kind() == "noisy_oracle");
  }
}
