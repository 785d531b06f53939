#pragma once

// Anticipatory predictors: pre-hit state series -> 30 rows of trajectory
// parameters, row i being the prediction issued i frames before the hit.

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "pingsim/core.hpp"

namespace pingsim {

inline constexpr int kPredictionRows = 30;

struct PredictionMatrix {
  std::array<PiecewiseLinearXY, kPredictionRows> rows{};

  const PiecewiseLinearXY& at(int frames_before_hit) const;
  bool all_finite() const;
};

// Generic k-nearest-neighbour regression with per-column z-scored features
// and an unweighted mean over the k closest rows (ties broken by row order).
class KnnRegressor {
public:
  KnnRegressor() = default;
  KnnRegressor(Eigen::MatrixXd features, Eigen::MatrixXd targets, int k);

  Eigen::VectorXd predict(const Eigen::VectorXd& query) const;
  std::vector<int> neighbours(const Eigen::VectorXd& query) const;

  int k() const { return k_; }
  int size() const { return static_cast<int>(standardized_.rows()); }
  int dim() const { return static_cast<int>(standardized_.cols()); }
  const Eigen::VectorXd& feature_mean() const { return mean_; }
  const Eigen::VectorXd& feature_scale() const { return scale_; }

private:
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> standardized_;
  Eigen::MatrixXd targets_;
  Eigen::VectorXd mean_;
  Eigen::VectorXd scale_;
  int k_ = 1;
};

KnnRegressor knn_fit(const Eigen::MatrixXd& features, const Eigen::MatrixXd& targets, int k);

class Predictor {
public:
  virtual ~Predictor() = default;
  virtual PredictionMatrix predict(const Segment& seg) const = 0;
  virtual std::string kind() const = 0;
  virtual nlohmann::json to_json() const = 0;
};

// Nearest neighbours over a fixed window of the last `window` frames ending at
// the prediction frame. Each of the 39 state dimensions is z-scored with
// statistics pooled over all training frames.
class KnnPredictor final : public Predictor {
public:
  KnnPredictor(std::span<const Segment* const> train, int k, int window = 10);

  PredictionMatrix predict(const Segment& seg) const override;
  // X is L x 39, last row at the hit.
  PredictionMatrix predict(const Eigen::MatrixXd& x) const;
  std::string kind() const override { return "knn"; }
  nlohmann::json to_json() const override;
  static std::unique_ptr<KnnPredictor> from_json(const nlohmann::json& j);

  int k() const { return k_; }
  int window() const { return window_; }
  int size() const { return static_cast<int>(targets_.size()); }

private:
  KnnPredictor() = default;
  void standardize();
  // Row-major (window) feature of the series for the prediction at frame i.
  Eigen::VectorXd window_feature(const Eigen::MatrixXd& standardized_series, int frames_before_hit) const;

  int k_ = 5;
  int window_ = 10;
  int history_ = 0;  // frames kept per training series
  Eigen::Matrix<double, kStateDim, 1> mean_;
  Eigen::Matrix<double, kStateDim, 1> scale_;
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> raw_;   // n x history*39
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> data_;  // standardised raw_
  std::vector<PiecewiseLinearXY> targets_;
  std::vector<std::string> ids_;
};

// Truth plus Gaussian noise of scale sigma_i on each row. Slopes are perturbed
// by sigma_i / 140 so that sigma_i is expressed in centimetres at the strike plane.
class NoisyOracle final : public Predictor {
public:
  explicit NoisyOracle(std::vector<double> sigma_schedule, std::uint64_t seed = 0);
  static NoisyOracle linear(double sigma_per_frame, double sigma0 = 0.0, std::uint64_t seed = 0);

  PredictionMatrix predict(const Segment& seg) const override;
  std::string kind() const override { return "noisy_oracle"; }
  nlohmann::json to_json() const override;

  const std::vector<double>& schedule() const { return sigma_; }

private:
  std::vector<double> sigma_;
  std::uint64_t seed_;
};

PredictionMatrix noisy_oracle(const Segment& seg, std::span<const double> sigma_schedule, std::uint64_t seed);

struct EnsembleOutput {
  PredictionMatrix mean;
  // Population standard deviation of (a1, a2, b) per row.
  std::array<std::array<double, 3>, kPredictionRows> stddev{};
  std::vector<PredictionMatrix> members;
};

EnsembleOutput ensemble_predict(std::span<const PredictionMatrix> member_outputs);
EnsembleOutput ensemble_predict(std::span<const std::shared_ptr<const Predictor>> members, const Segment& seg);

class EnsemblePredictor final : public Predictor {
public:
  explicit EnsemblePredictor(std::vector<std::shared_ptr<const Predictor>> members);

  PredictionMatrix predict(const Segment& seg) const override { return run(seg).mean; }
  EnsembleOutput run(const Segment& seg) const;
  std::string kind() const override { return "ensemble"; }
  nlohmann::json to_json() const override;

  const std::vector<std::shared_ptr<const Predictor>>& members() const { return members_; }

private:
  std::vector<std::shared_ptr<const Predictor>> members_;
};

// kNN members each trained with one of `folds` interleaved folds held out.
std::shared_ptr<EnsemblePredictor> make_knn_ensemble(std::span<const Segment* const> train, int folds, int k,
                                                     int window = 10);

struct PredictorSpec {
  std::string kind = "knn";  // knn | noisy_oracle | ensemble
  int k = 5;
  int window = 10;
  double sigma_per_frame = 1.0;
  double sigma0 = 0.0;
  int members = 5;
  std::uint64_t seed = 0;
};

PredictorSpec predictor_spec_from_json(const nlohmann::json& j);
nlohmann::json predictor_spec_to_json(const PredictorSpec& spec);
std::shared_ptr<const Predictor> make_predictor(const PredictorSpec& spec, std::span<const Segment* const> train);
std::shared_ptr<const Predictor> predictor_from_json(const nlohmann::json& j);

}  // namespace pingsim
