#include <doctest.h>

#include <cmath>
#include <random>

#include "pingsim/error.hpp"
#include "pingsim/predictor.hpp"
#include "pingsim/uncertainty.hpp"

using namespace pingsim;

TEST_SUITE("uncertainty") {
  TEST_CASE("knn error model") {
    Eigen::MatrixXd f(1, 3);
    f << 1, 2, 3;
    const std::vector<double> e{25.0};
    CHECK(knn_error_estimate(KnnErrorModel(f, e, 1), Eigen::Vector3d(1, 2, 3)) == 25.0);

    std::mt19937_64 rng(41);
    std::normal_distribution<double> n;
    Eigen::MatrixXd g(50, 3);
    for (int i = 0; i < 50; ++i)
      for (int d = 0; d < 3; ++d) g(i, d) = n(rng);
    const std::vector<double> flat(50, 25.0);
    const KnnErrorModel homo(g, flat, 5);
    for (int q = 0; q < 10; ++q) CHECK(homo.predict(Eigen::Vector3d(n(rng), n(rng), n(rng))) == doctest::Approx(25.0));

    std::vector<double> errs(50);
    for (double& v : errs) v = std::abs(n(rng)) * 10;
    const KnnErrorModel m(g, errs, 3);
    const Eigen::VectorXd mu = g.colwise().mean();
    Eigen::VectorXd sd(3);
    for (int d = 0; d < 3; ++d) sd[d] = std::sqrt((g.col(d).array() - mu[d]).square().mean());
    for (int q = 0; q < 20; ++q) {
      const Eigen::Vector3d x(n(rng), n(rng), n(rng));
      std::vector<std::pair<double, int>> dist;
      for (int i = 0; i < 50; ++i) dist.push_back({(((g.row(i).transpose() - x).array()) / sd.array()).matrix().squaredNorm(), i});
      std::sort(dist.begin(), dist.end());
      const double want = (errs[dist[0].second] + errs[dist[1].second] + errs[dist[2].second]) / 3;
      CHECK(m.predict(x) == doctest::Approx(want).epsilon(1e-12));
    }
  }

  TEST_CASE("ensemble uncertainty") {
    const std::vector<double> same{12, 12, 12};
    CHECK(ensemble_uncertainty(same) == 0.0);
    const std::vector<double> two{30, 40};
    CHECK(ensemble_uncertainty(two) == doctest::Approx(5.0));

    std::mt19937_64 rng(42);
    std::normal_distribution<double> n;
    std::vector<PredictionMatrix> members(5);
    for (auto& m : members)
      for (auto& r : m.rows) r = {0.1 * n(rng), 0.1 * n(rng), 5 * n(rng)};
    for (int i : {0, 7, 29}) {
      std::vector<double> xs;
      for (const auto& m : members) xs.push_back(-140 * m.at(i).a2 + m.at(i).b);
      double mu = 0, ss = 0;
      for (double x : xs) mu += x / 5;
      for (double x : xs) ss += (x - mu) * (x - mu) / 5;
      CHECK(ensemble_uncertainty(members, i) == doctest::Approx(std::sqrt(ss)).epsilon(1e-12));
    }
  }

  TEST_CASE("conformal quantile") {
    ConformalCalibration c({9, 1, 2, 3, 4, 5, 6, 7, 8}, 0.1);
    CHECK(c.half_width() == 9);
    const Interval iv = conformal_interval(c, 10);
    CHECK(iv.lo == 1);
    CHECK(iv.hi == 19);
    CHECK(ConformalCalibration({5}, 0.5).half_width() == 5);
    CHECK(ConformalCalibration({5}, 0.1).unbounded());
    CHECK_THROWS_AS(ConformalCalibration({}, 0.1), Error);
    CHECK_THROWS_AS(ConformalCalibration({1, 2}, 1.5), Error);
  }

  TEST_CASE("conformal coverage Monte Carlo") {
    std::mt19937_64 rng(43);
    std::student_t_distribution<double> heavy(3.0);
    for (double alpha : {0.1, 0.2}) {
      int covered = 0;
      const int trials = 2000;
      for (int t = 0; t < trials; ++t) {
        std::vector<double> scores(100);
        for (double& s : scores) s = std::abs(heavy(rng));
        const ConformalCalibration c(scores, alpha);
        const double pred = 3.0;
        covered += conformal_interval(c, pred).contains(pred + heavy(rng)) ? 1 : 0;
      }
      const double cov = static_cast<double>(covered) / trials;
      CHECK(cov >= 1 - alpha - 0.03);
      CHECK(cov <= 1 - alpha + 0.03 + 1.0 / 101);
    }
  }

  TEST_CASE("time to hit confidence") {
    CHECK(time_to_hit_confidence(0, 0.3) == 1.0);
    CHECK(time_to_hit_confidence(10, 0.1) == doctest::Approx(0.5));
    CHECK_THROWS(time_to_hit_confidence(-1, 0.1));
  }

  TEST_CASE("kappa from a linear noisy oracle") {
    std::vector<double> sched(kPredictionRows);
    for (int i = 0; i < kPredictionRows; ++i) sched[i] = 1.0 + 0.5 * i;
    std::mt19937_64 rng(44);
    std::normal_distribution<double> n;
    std::vector<std::vector<double>> err(kPredictionRows);
    for (int s = 0; s < 1000; ++s) {
      Segment seg;
      seg.id = "s" + std::to_string(s);
      seg.truth_params = {0.1 * n(rng), 0.1 * n(rng), 10 * n(rng)};
      seg.strike_point.x = -140 * seg.truth_params.a2 + seg.truth_params.b;
      const PredictionMatrix p = noisy_oracle(seg, sched, 5);
      for (int i = 0; i < kPredictionRows; ++i) err[i].push_back(std::abs(-140 * p.at(i).a2 + p.at(i).b - seg.strike_point.x));
    }
    std::vector<int> frames;
    std::vector<double> med;
    for (int i = 0; i < kPredictionRows; ++i) {
      frames.push_back(i);
      med.push_back(median(err[i]));
    }
    const HorizonFit fit = calibrate_time_to_hit(frames, med);
    CHECK(fit.kappa > 0);
    std::vector<double> x, y;
    for (int i = 0; i < kPredictionRows; ++i) {
      x.push_back(i);
      y.push_back(1.0 / time_to_hit_confidence(i, fit.kappa) - 1.0);
    }
    CHECK(fit_line(x, y).r_squared > 0.95);
    CHECK(fit.r_squared > 0.95);
  }

  TEST_CASE("rank correlation") {
    const std::vector<double> a{1, 2, 3, 4, 5}, b{10, 8, 6, 4, 2};
    CHECK(*spearman(a, b) == doctest::Approx(-1.0));
    CHECK(*pearson(a, b) == doctest::Approx(-1.0));
    const std::vector<double> ties{1, 2, 2, 3};
    const auto r = average_ranks(ties);
    CHECK(r[1] == 2.5);
    CHECK(r[2] == 2.5);
    const std::vector<double> flat{3, 3, 3, 3, 3};
    CHECK_FALSE(spearman(flat, b).has_value());
    const CorrelationReport rep = confidence_residual_diagnostics(flat, b);
    CHECK_FALSE(rep.pearson.has_value());
    CHECK_FALSE(rep.note.empty());
  }

  TEST_CASE("correlation estimate for a known generator") {
    std::mt19937_64 rng(45);
    std::normal_distribution<double> n;
    const double rho = 0.8;
    std::vector<double> x, y;
    for (int i = 0; i < 10000; ++i) {
      const double u = n(rng), v = n(rng);
      x.push_back(u);
      y.push_back(rho * u + std::sqrt(1 - rho * rho) * v);
    }
    CHECK(std::abs(*pearson(x, y) - rho) < 0.05);
    const double rs = 6.0 / 3.14159265358979323846 * std::asin(rho / 2);
    CHECK(std::abs(*spearman(x, y) - rs) < 0.05);
  }

  TEST_CASE("accumulator merge") {
    CorrelationAccumulator a, b;
    a.add(0.5, 3);
    b.add(0.2, 7);
    b.add(0.9, 1);
    a.merge(b);
    CHECK(a.size() == 3);
    CHECK(a.errors()[2] == 1);
  }

  TEST_CASE("scatter csv") {
    const std::vector<ScatterRow> rows{{"seg_00001", "conformal", 0.5, 2.0, 10}};
    CHECK(scatter_csv(rows) == "segment_id,estimator,confidence,abs_strike_error,frames_before_hit\nseg_00001,conformal,0.5,2,10\n");
  }

  TEST_CASE("confidence to alpha") {
    AlphaPolicy ua{PolicyKind::UncertaintyAware, 0.6, 1.0, AlphaMode::Constant};
    CHECK(confidence_to_alpha(1.0, classify_region(10), ua, Phase::PreHit) == 0.0);
    CHECK(confidence_to_alpha(1.0, classify_region(50), ua, Phase::PreHit) == 0.6);
    CHECK(confidence_to_alpha(1.0, Region::Center, ua, Phase::AtHit) == 1.0);
    AlphaPolicy basic{PolicyKind::BasicAnticipatory, 1.0, 1.0, AlphaMode::Constant};
    for (Region r : kRegions) CHECK(confidence_to_alpha(0.1, r, basic, Phase::PreHit) == 1.0);
    AlphaPolicy base{PolicyKind::Baseline, 0.0, 0.0, AlphaMode::Constant};
    CHECK(confidence_to_alpha(1.0, Region::Left, base, Phase::PreHit) == 0.0);
    AlphaPolicy scaled{PolicyKind::BasicAnticipatory, 0.8, 1.0, AlphaMode::ConfidenceScaled};
    CHECK(confidence_to_alpha(0.5, Region::Left, scaled, Phase::PreHit) == doctest::Approx(0.4));
    CHECK(confidence_to_alpha(2.0, Region::Left, scaled, Phase::PreHit) == doctest::Approx(0.8));
    CHECK(parse_policy_kind("basic") == PolicyKind::BasicAnticipatory);
    CHECK_THROWS(parse_policy_kind("fast"));
  }
}
