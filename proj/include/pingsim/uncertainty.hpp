#pragma once

// Confidence proxies for anticipatory predictions, their diagnostics, and the
// confidence -> speed mapping used by the controllers.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "pingsim/core.hpp"
#include "pingsim/predictor.hpp"

namespace pingsim {

inline double squash_uncertainty(double u) { return 1.0 / (1.0 + u); }

struct ConfidenceReport {
  std::string estimator;
  double confidence = 1.0;
  double raw_uncertainty = 0.0;  // cm, or unitless for time-to-hit
  std::optional<double> interval_half_width;
};

// kNN regression of the absolute strike error from input features.
class KnnErrorModel {
public:
  KnnErrorModel() = default;
  KnnErrorModel(const Eigen::MatrixXd& features, std::span<const double> abs_errors, int k);

  double predict(const Eigen::VectorXd& features) const;
  int dim() const { return regressor_.dim(); }

private:
  KnnRegressor regressor_;
};

double knn_error_estimate(const KnnErrorModel& model, const Eigen::VectorXd& features);

// Population standard deviation of the member strike points.
double ensemble_uncertainty(std::span<const double> member_strike_x);
double ensemble_uncertainty(std::span<const PredictionMatrix> members, int frames_before_hit);

class ConformalCalibration {
public:
  ConformalCalibration(std::vector<double> scores, double alpha);

  // The ceil((n+1)(1-alpha))-th smallest score; +inf when that rank exceeds n.
  double half_width() const { return q_; }
  bool unbounded() const;
  double alpha() const { return alpha_; }
  const std::vector<double>& scores() const { return scores_; }

private:
  std::vector<double> scores_;
  double alpha_;
  double q_;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double v) const { return v >= lo && v <= hi; }
  double width() const { return hi - lo; }
};

Interval conformal_interval(const ConformalCalibration& cal, double point_prediction);

// c(i) = 1 / (1 + kappa * i).
double time_to_hit_confidence(int frames_before_hit, double kappa);

struct HorizonFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  double kappa = 0.0;
};

// Line fit of median error against frames before the hit; kappa makes
// 1/c(i) - 1 proportional to the fitted error relative to its value at i = 0.
HorizonFit calibrate_time_to_hit(std::span<const int> frames, std::span<const double> median_errors);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};
LinearFit fit_line(std::span<const double> x, std::span<const double> y);

std::optional<double> pearson(std::span<const double> x, std::span<const double> y);
std::optional<double> spearman(std::span<const double> x, std::span<const double> y);
std::vector<double> average_ranks(std::span<const double> v);

// Paired samples that can be accumulated per worker and merged.
class CorrelationAccumulator {
public:
  void add(double confidence, double abs_error);
  void merge(const CorrelationAccumulator& other);
  std::size_t size() const { return confidence_.size(); }
  const std::vector<double>& confidences() const { return confidence_; }
  const std::vector<double>& errors() const { return error_; }

private:
  std::vector<double> confidence_;
  std::vector<double> error_;
};

struct CorrelationReport {
  int n = 0;
  std::optional<double> pearson;
  std::optional<double> spearman;
  std::string note;  // why a coefficient is undefined
};

CorrelationReport confidence_residual_diagnostics(std::span<const double> confidences,
                                                  std::span<const double> abs_errors);

struct ScatterRow {
  std::string segment_id;
  std::string estimator;
  double confidence = 0.0;
  double abs_strike_error = 0.0;
  int frames_before_hit = 0;
};

std::string scatter_csv(std::span<const ScatterRow> rows);

enum class PolicyKind { Baseline, BasicAnticipatory, UncertaintyAware };
enum class AlphaMode { Constant, ConfidenceScaled };
enum class Phase { PreHit, AtHit };

struct AlphaPolicy {
  PolicyKind kind = PolicyKind::Baseline;
  double alpha1 = 0.0;
  double alpha2 = 0.0;
  AlphaMode mode = AlphaMode::Constant;
};

std::string policy_kind_name(PolicyKind k);
PolicyKind parse_policy_kind(const std::string& name);

// Region is that of the predicted strike point.
double confidence_to_alpha(double confidence, Region region, const AlphaPolicy& policy, Phase phase);

}  // namespace pingsim
