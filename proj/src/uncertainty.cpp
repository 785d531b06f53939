#include "pingsim/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "pingsim/error.hpp"
#include "pingsim/trajectory.hpp"

namespace pingsim {

KnnErrorModel::KnnErrorModel(const Eigen::MatrixXd& features, std::span<const double> abs_errors, int k) {
  require(static_cast<Eigen::Index>(abs_errors.size()) == features.rows(), "knn error model: size mismatch");
  Eigen::MatrixXd targets(features.rows(), 1);
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    require(abs_errors[i] >= 0.0, "knn error model: errors must be non-negative");
    targets(i, 0) = abs_errors[i];
  }
  regressor_ = knn_fit(features, targets, k);
}

double KnnErrorModel::predict(const Eigen::VectorXd& features) const { return regressor_.predict(features)(0); }

double knn_error_estimate(const KnnErrorModel& model, const Eigen::VectorXd& features) {
  return model.predict(features);
}

double ensemble_uncertainty(std::span<const double> member_strike_x) {
  require(member_strike_x.size() >= 2, "ensemble_uncertainty: need at least 2 members");
  return population_stddev(member_strike_x);
}

double ensemble_uncertainty(std::span<const PredictionMatrix> members, int frames_before_hit) {
  std::vector<double> x;
  x.reserve(members.size());
  for (const PredictionMatrix& m : members) x.push_back(strike_from_params(m.at(frames_before_hit)));
  return ensemble_uncertainty(x);
}

ConformalCalibration::ConformalCalibration(std::vector<double> scores, double alpha)
    : scores_(std::move(scores)), alpha_(alpha) {
  require(!scores_.empty(), "conformal: empty calibration set");
  require(alpha > 0.0 && alpha < 1.0, "conformal: alpha must lie in (0, 1)");
  for (double s : scores_) require(std::isfinite(s) && s >= 0.0, "conformal: scores must be finite and >= 0");
  std::sort(scores_.begin(), scores_.end());
  const double n = static_cast<double>(scores_.size());
  // Guard against (n+1)(1-alpha) landing a hair above an integer.
  const auto rank = static_cast<std::size_t>(std::ceil((n + 1.0) * (1.0 - alpha) - 1e-9));
  q_ = rank > scores_.size() ? std::numeric_limits<double>::infinity() : scores_[std::max<std::size_t>(rank, 1) - 1];
}

bool ConformalCalibration::unbounded() const { return std::isinf(q_); }

Interval conformal_interval(const ConformalCalibration& cal, double point_prediction) {
  return {point_prediction - cal.half_width(), point_prediction + cal.half_width()};
}

double time_to_hit_confidence(int frames_before_hit, double kappa) {
  require(frames_before_hit >= 0, "time_to_hit_confidence: negative timestep");
  require(kappa >= 0.0, "time_to_hit_confidence: kappa must be >= 0");
  return 1.0 / (1.0 + kappa * frames_before_hit);
}

LinearFit fit_line(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size() && x.size() >= 2, "fit_line: need >= 2 paired samples");
  const double mx = mean(x), my = mean(y);
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  require(sxx > 0.0, "fit_line: x has zero variance");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return f;
}

HorizonFit calibrate_time_to_hit(std::span<const int> frames, std::span<const double> median_errors) {
  std::vector<double> x(frames.begin(), frames.end());
  const LinearFit line = fit_line(x, median_errors);
  HorizonFit h{line.slope, line.intercept, line.r_squared, 0.0};
  const double ref = line.intercept > 0.0 ? line.intercept : mean(median_errors);
  h.kappa = ref > 0.0 ? std::max(0.0, line.slope / ref) : 0.0;
  return h;
}

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size(), "pearson: size mismatch");
  if (x.size() < 2) return std::nullopt;
  const double mx = mean(x), my = mean(y);
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

std::optional<double> spearman(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size(), "spearman: size mismatch");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  return pearson(rx, ry);
}

void CorrelationAccumulator::add(double confidence, double abs_error) {
  confidence_.push_back(confidence);
  error_.push_back(abs_error);
}

void CorrelationAccumulator::merge(const CorrelationAccumulator& other) {
  confidence_.insert(confidence_.end(), other.confidence_.begin(), other.confidence_.end());
  error_.insert(error_.end(), other.error_.begin(), other.error_.end());
}

namespace {

bool constant(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [&](double a) { return a == v.front(); });
}

}  // namespace

CorrelationReport confidence_residual_diagnostics(std::span<const double> confidences,
                                                  std::span<const double> abs_errors) {
  require(confidences.size() == abs_errors.size(), "diagnostics: size mismatch");
  require(confidences.size() >= 3, "diagnostics: need at least 3 samples");
  CorrelationReport r;
  r.n = static_cast<int>(confidences.size());
  if (constant(confidences)) {
    r.note = "undefined: confidence has zero variance";
    return r;
  }
  if (constant(abs_errors)) {
    r.note = "undefined: residual has zero variance";
    return r;
  }
  r.pearson = pearson(confidences, abs_errors);
  r.spearman = spearman(confidences, abs_errors);
  return r;
}

std::string scatter_csv(std::span<const ScatterRow> rows) {
  std::ostringstream os;
  os.precision(10);
  os << "segment_id,estimator,confidence,abs_strike_error,frames_before_hit\n";
  for (const ScatterRow& r : rows)
    os << r.segment_id << ',' << r.estimator << ',' << r.confidence << ',' << r.abs_strike_error << ',' << r.frames_before_hit << '\n';
  return os.str();
}

std::string policy_kind_name(PolicyKind k) {
  switch (k) {
    case PolicyKind::Baseline: return "servo_only";
    case PolicyKind::BasicAnticipatory: return "anticipatory";
    case PolicyKind::UncertaintyAware: return "uncertainty_aware";
  }
  return "unknown";
}

PolicyKind parse_policy_kind(const std::string& name) {
  if (name == "servo_only" || name == "baseline") return PolicyKind::Baseline;
  if (name == "anticipatory" || name == "basic_anticipatory" || name == "basic") return PolicyKind::BasicAnticipatory;
  if (name == "uncertainty_aware") return PolicyKind::UncertaintyAware;
  fail(ErrorCode::Config, "unknown policy '" + name + "'");
}

double confidence_to_alpha(double confidence, Region region, const AlphaPolicy& policy, Phase phase) {
  require(policy.alpha1 >= 0.0 && policy.alpha1 <= 1.0, "alpha1 must lie in [0, 1]");
  require(policy.alpha2 >= 0.0 && policy.alpha2 <= 1.0, "alpha2 must lie in [0, 1]");
  if (policy.kind == PolicyKind::Baseline) return 0.0;
  const double scale = policy.mode == AlphaMode::ConfidenceScaled ? std::clamp(confidence, 0.0, 1.0) : 1.0;
  if (phase == Phase::AtHit) return policy.alpha2 * scale;
  if (policy.kind == PolicyKind::UncertaintyAware && region == Region::Center) return 0.0;
  return policy.alpha1 * scale;
}

}  // namespace pingsim
