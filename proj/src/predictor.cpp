#include "pingsim/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>

#include "pingsim/error.hpp"
#include "pingsim/rng.hpp"

namespace pingsim {

using json = nlohmann::json;

const PiecewiseLinearXY& PredictionMatrix::at(int frames_before_hit) const {
  require(frames_before_hit >= 0 && frames_before_hit < kPredictionRows, "PredictionMatrix: row out of range");
  return rows[frames_before_hit];
}

bool PredictionMatrix::all_finite() const {
  return std::all_of(rows.begin(), rows.end(), [](const PiecewiseLinearXY& p) {
    return std::isfinite(p.a1) && std::isfinite(p.a2) && std::isfinite(p.b);
  });
}

namespace {

// Indices of the k smallest distances, ordered by (distance, index).
std::vector<int> k_smallest(const Eigen::VectorXd& d, int k) {
  std::vector<int> idx(d.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), [&](int a, int b) {
    if (d(a) != d(b)) return d(a) < d(b);
    return a < b;
  });
  idx.resize(k);
  return idx;
}

double safe_scale(double s) { return s > 1e-12 ? s : 1.0; }

json params_to_json(const PiecewiseLinearXY& p) { return json::array({p.a1, p.a2, p.b}); }

PiecewiseLinearXY params_from_json(const json& j) {
  require(j.is_array() && j.size() == 3, "expected [a1, a2, b]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

}  // namespace

KnnRegressor::KnnRegressor(Eigen::MatrixXd features, Eigen::MatrixXd targets, int k) : k_(k) {
  const Eigen::Index n = features.rows();
  require(n > 0, "knn_fit: empty dataset");
  require(targets.rows() == n, "knn_fit: feature/target row mismatch");
  require(k >= 1, "knn_fit: k must be >= 1");
  if (k > n) fail(ErrorCode::InvalidArgument, "knn_fit: k exceeds dataset size");
  require(features.allFinite() && targets.allFinite(), "knn_fit: non-finite input");

  mean_ = features.colwise().mean().transpose();
  scale_.resize(features.cols());
  for (Eigen::Index c = 0; c < features.cols(); ++c) {
    const double var = (features.col(c).array() - mean_(c)).square().mean();
    scale_(c) = safe_scale(std::sqrt(var));
  }
  standardized_ = ((features.rowwise() - mean_.transpose()).array().rowwise() / scale_.transpose().array()).matrix();
  targets_ = std::move(targets);
}

std::vector<int> KnnRegressor::neighbours(const Eigen::VectorXd& query) const {
  if (query.size() != standardized_.cols())
    fail(ErrorCode::InvalidArgument, "knn: feature dimension mismatch");
  const Eigen::RowVectorXd q = ((query - mean_).array() / scale_.array()).matrix().transpose();
  const Eigen::VectorXd d = (standardized_.rowwise() - q).rowwise().squaredNorm();
  return k_smallest(d, k_);
}

Eigen::VectorXd KnnRegressor::predict(const Eigen::VectorXd& query) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(targets_.cols());
  for (int i : neighbours(query)) out += targets_.row(i).transpose();
  return out / k_;
}

KnnRegressor knn_fit(const Eigen::MatrixXd& features, const Eigen::MatrixXd& targets, int k) {
  return KnnRegressor(features, targets, k);
}

// ---------------------------------------------------------------------------

namespace {

// Last `history` frames of the series, front-padded with its first frame.
Eigen::MatrixXd padded_tail(const Eigen::MatrixXd& x, int history) {
  const int l = static_cast<int>(x.rows());
  Eigen::MatrixXd out(history, kStateDim);
  for (int r = 0; r < history; ++r) {
    const int src = l - history + r;
    out.row(r) = x.row(std::max(src, 0));
  }
  return out;
}

}  // namespace

KnnPredictor::KnnPredictor(std::span<const Segment* const> train, int k, int window)
    : k_(k), window_(window), history_(kPredictionRows + window - 1) {
  require(!train.empty(), "KnnPredictor: empty training set");
  require(k >= 1, "KnnPredictor: k must be >= 1");
  require(window >= 1, "KnnPredictor: window must be >= 1");
  if (k > static_cast<int>(train.size())) fail(ErrorCode::InvalidArgument, "KnnPredictor: k exceeds dataset size");

  const int n = static_cast<int>(train.size());
  raw_.resize(n, static_cast<Eigen::Index>(history_) * kStateDim);
  for (int i = 0; i < n; ++i) {
    const Eigen::MatrixXd tail = padded_tail(state_series(*train[i], 0), history_);
    for (int r = 0; r < history_; ++r) raw_.row(i).segment(r * kStateDim, kStateDim) = tail.row(r);
    targets_.push_back(train[i]->truth_params);
    ids_.push_back(train[i]->id);
  }
  require(raw_.allFinite(), "KnnPredictor: non-finite training features");

  Eigen::Matrix<double, kStateDim, 1> sum = Eigen::Matrix<double, kStateDim, 1>::Zero();
  Eigen::Matrix<double, kStateDim, 1> sq = Eigen::Matrix<double, kStateDim, 1>::Zero();
  const double count = static_cast<double>(n) * history_;
  for (int i = 0; i < n; ++i)
    for (int r = 0; r < history_; ++r) sum += raw_.row(i).segment(r * kStateDim, kStateDim).transpose();
  mean_ = sum / count;
  for (int i = 0; i < n; ++i)
    for (int r = 0; r < history_; ++r)
      sq += (raw_.row(i).segment(r * kStateDim, kStateDim).transpose() - mean_).array().square().matrix();
  for (int c = 0; c < kStateDim; ++c) scale_(c) = safe_scale(std::sqrt(sq(c) / count));
  standardize();
}

void KnnPredictor::standardize() {
  data_.resize(raw_.rows(), raw_.cols());
  for (Eigen::Index i = 0; i < raw_.rows(); ++i)
    for (int r = 0; r < history_; ++r)
      data_.row(i).segment(r * kStateDim, kStateDim) =
          ((raw_.row(i).segment(r * kStateDim, kStateDim).transpose() - mean_).array() / scale_.array())
              .matrix()
              .transpose();
}

Eigen::VectorXd KnnPredictor::window_feature(const Eigen::MatrixXd& standardized_series, int frames_before_hit) const {
  // standardized_series has history_ rows, the last at the hit.
  const int end = history_ - 1 - frames_before_hit;
  Eigen::VectorXd f(static_cast<Eigen::Index>(window_) * kStateDim);
  for (int w = 0; w < window_; ++w) f.segment(w * kStateDim, kStateDim) = standardized_series.row(end - window_ + 1 + w).transpose();
  return f;
}

PredictionMatrix KnnPredictor::predict(const Eigen::MatrixXd& x) const {
  if (x.cols() != kStateDim) fail(ErrorCode::InvalidArgument, "knn predict: malformed state width");
  require(x.rows() >= 1, "knn predict: empty series");
  require(x.allFinite(), "knn predict: non-finite features");

  Eigen::MatrixXd s = padded_tail(x, history_);
  for (int r = 0; r < history_; ++r)
    s.row(r) = ((s.row(r).transpose() - mean_).array() / scale_.array()).matrix().transpose();

  const int l = static_cast<int>(x.rows());
  const int last_computable = std::min(l - 1, kPredictionRows - 1);
  const Eigen::Index len = static_cast<Eigen::Index>(window_) * kStateDim;

  PredictionMatrix out;
  for (int i = 0; i <= last_computable; ++i) {
    const Eigen::RowVectorXd q = window_feature(s, i).transpose();
    const Eigen::Index offset = static_cast<Eigen::Index>(history_ - window_ - i) * kStateDim;
    const Eigen::VectorXd d = (data_.middleCols(offset, len).rowwise() - q).rowwise().squaredNorm();
    PiecewiseLinearXY acc;
    for (int j : k_smallest(d, k_)) {
      acc.a1 += targets_[j].a1;
      acc.a2 += targets_[j].a2;
      acc.b += targets_[j].b;
    }
    out.rows[i] = {acc.a1 / k_, acc.a2 / k_, acc.b / k_};
  }
  for (int i = last_computable + 1; i < kPredictionRows; ++i) out.rows[i] = out.rows[last_computable];
  return out;
}

PredictionMatrix KnnPredictor::predict(const Segment& seg) const { return predict(state_series(seg, 0)); }

json KnnPredictor::to_json() const {
  json j{{"version", 1}, {"kind", "knn"}, {"k", k_}, {"window", window_}, {"history", history_}};
  j["mean"] = std::vector<double>(mean_.data(), mean_.data() + kStateDim);
  j["scale"] = std::vector<double>(scale_.data(), scale_.data() + kStateDim);
  json entries = json::array();
  for (std::size_t i = 0; i < targets_.size(); ++i) {
    const auto row = raw_.row(static_cast<Eigen::Index>(i));
    entries.push_back({{"id", ids_[i]},
                       {"target", params_to_json(targets_[i])},
                       {"series", std::vector<double>(row.data(), row.data() + row.size())}});
  }
  j["training"] = std::move(entries);
  return j;
}

std::unique_ptr<KnnPredictor> KnnPredictor::from_json(const json& j) {
  if (j.at("kind").get<std::string>() != "knn") fail(ErrorCode::Config, "model is not a knn predictor");
  std::unique_ptr<KnnPredictor> m(new KnnPredictor());
  m->k_ = j.at("k").get<int>();
  m->window_ = j.at("window").get<int>();
  m->history_ = j.at("history").get<int>();
  if (m->k_ < 1 || m->window_ < 1 || m->history_ != kPredictionRows + m->window_ - 1)
    fail(ErrorCode::Config, "knn model: inconsistent hyperparameters");
  const auto mean = j.at("mean").get<std::vector<double>>();
  const auto scale = j.at("scale").get<std::vector<double>>();
  if (mean.size() != kStateDim || scale.size() != kStateDim) fail(ErrorCode::Config, "knn model: bad statistics");
  for (int c = 0; c < kStateDim; ++c) {
    m->mean_(c) = mean[c];
    m->scale_(c) = scale[c];
  }
  const json& entries = j.at("training");
  const Eigen::Index width = static_cast<Eigen::Index>(m->history_) * kStateDim;
  m->raw_.resize(static_cast<Eigen::Index>(entries.size()), width);
  Eigen::Index i = 0;
  for (const json& e : entries) {
    const auto series = e.at("series").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(series.size()) != width) fail(ErrorCode::Config, "knn model: bad series width");
    m->raw_.row(i++) = Eigen::Map<const Eigen::RowVectorXd>(series.data(), width);
    m->targets_.push_back(params_from_json(e.at("target")));
    m->ids_.push_back(e.at("id").get<std::string>());
  }
  if (m->targets_.empty() || m->k_ > static_cast<int>(m->targets_.size()))
    fail(ErrorCode::Config, "knn model: k exceeds stored dataset");
  m->standardize();
  return m;
}

// ---------------------------------------------------------------------------

NoisyOracle::NoisyOracle(std::vector<double> sigma_schedule, std::uint64_t seed)
    : sigma_(std::move(sigma_schedule)), seed_(seed) {
  require(sigma_.size() == kPredictionRows, "noisy_oracle: schedule needs 30 entries");
  for (double s : sigma_) require(std::isfinite(s) && s >= 0.0, "noisy_oracle: sigma must be >= 0");
}

NoisyOracle NoisyOracle::linear(double sigma_per_frame, double sigma0, std::uint64_t seed) {
  std::vector<double> s(kPredictionRows);
  for (int i = 0; i < kPredictionRows; ++i) s[i] = sigma0 + sigma_per_frame * i;
  return NoisyOracle(std::move(s), seed);
}

PredictionMatrix noisy_oracle(const Segment& seg, std::span<const double> sigma_schedule, std::uint64_t seed) {
  require(sigma_schedule.size() == kPredictionRows, "noisy_oracle: schedule needs 30 entries");
  Rng rng(derive_seed(seed, fnv1a(seg.id)));
  std::normal_distribution<double> n01(0.0, 1.0);
  const double lever = -table().strike_plane_y;
  PredictionMatrix out;
  for (int i = 0; i < kPredictionRows; ++i) {
    const double s = sigma_schedule[i];
    require(s >= 0.0, "noisy_oracle: sigma must be >= 0");
    const double n1 = n01(rng), n2 = n01(rng), n3 = n01(rng);
    out.rows[i] = {seg.truth_params.a1 + s * n1 / lever, seg.truth_params.a2 + s * n2 / lever,
                   seg.truth_params.b + s * n3};
  }
  return out;
}

PredictionMatrix NoisyOracle::predict(const Segment& seg) const { return noisy_oracle(seg, sigma_, seed_); }

json NoisyOracle::to_json() const {
  return {{"version", 1}, {"kind", "noisy_oracle"}, {"sigma", sigma_}, {"seed", seed_}};
}

// ---------------------------------------------------------------------------

EnsembleOutput ensemble_predict(std::span<const PredictionMatrix> member_outputs) {
  const int m = static_cast<int>(member_outputs.size());
  require(m >= 2, "ensemble_predict: need at least 2 members");
  EnsembleOutput out;
  out.members.assign(member_outputs.begin(), member_outputs.end());
  for (int i = 0; i < kPredictionRows; ++i) {
    // Deviations from the first member keep identical members exact.
    const PiecewiseLinearXY& ref = member_outputs[0].rows[i];
    const std::array<double, 3> r{ref.a1, ref.a2, ref.b};
    std::array<double, 3> sum{}, sq{};
    for (const PredictionMatrix& p : member_outputs) {
      const std::array<double, 3> v{p.rows[i].a1, p.rows[i].a2, p.rows[i].b};
      for (int c = 0; c < 3; ++c) sum[c] += v[c] - r[c];
    }
    const std::array<double, 3> d{sum[0] / m, sum[1] / m, sum[2] / m};
    const std::array<double, 3> mu{r[0] + d[0], r[1] + d[1], r[2] + d[2]};
    for (const PredictionMatrix& p : member_outputs) {
      const std::array<double, 3> v{p.rows[i].a1, p.rows[i].a2, p.rows[i].b};
      for (int c = 0; c < 3; ++c) sq[c] += (v[c] - r[c] - d[c]) * (v[c] - r[c] - d[c]);
    }
    out.mean.rows[i] = {mu[0], mu[1], mu[2]};
    for (int c = 0; c < 3; ++c) out.stddev[i][c] = std::sqrt(sq[c] / m);
  }
  return out;
}

EnsembleOutput ensemble_predict(std::span<const std::shared_ptr<const Predictor>> members, const Segment& seg) {
  std::vector<PredictionMatrix> outs;
  outs.reserve(members.size());
  for (const auto& p : members) {
    require(p != nullptr, "ensemble_predict: null member");
    outs.push_back(p->predict(seg));
  }
  return ensemble_predict(outs);
}

EnsemblePredictor::EnsemblePredictor(std::vector<std::shared_ptr<const Predictor>> members)
    : members_(std::move(members)) {
  require(members_.size() >= 2, "ensemble: need at least 2 members");
}

EnsembleOutput EnsemblePredictor::run(const Segment& seg) const { return ensemble_predict(members_, seg); }

json EnsemblePredictor::to_json() const {
  json m = json::array();
  for (const auto& p : members_) m.push_back(p->to_json());
  return {{"version", 1}, {"kind", "ensemble"}, {"members", std::move(m)}};
}

std::shared_ptr<EnsemblePredictor> make_knn_ensemble(std::span<const Segment* const> train, int folds, int k,
                                                     int window) {
  require(folds >= 2, "ensemble: need at least 2 members");
  std::vector<std::shared_ptr<const Predictor>> members;
  for (int f = 0; f < folds; ++f) {
    std::vector<const Segment*> part;
    for (std::size_t i = 0; i < train.size(); ++i)
      if (static_cast<int>(i % folds) != f) part.push_back(train[i]);
    members.push_back(std::make_shared<KnnPredictor>(part, k, window));
  }
  return std::make_shared<EnsemblePredictor>(std::move(members));
}

// ---------------------------------------------------------------------------

PredictorSpec predictor_spec_from_json(const json& j) {
  PredictorSpec s;
  s.kind = j.value("kind", s.kind);
  s.k = j.value("k", s.k);
  s.window = j.value("window", s.window);
  s.sigma_per_frame = j.value("sigma_per_frame", s.sigma_per_frame);
  s.sigma0 = j.value("sigma0", s.sigma0);
  s.members = j.value("members", s.members);
  s.seed = j.value("seed", s.seed);
  if (s.kind != "knn" && s.kind != "noisy_oracle" && s.kind != "ensemble")
    fail(ErrorCode::Config, "predictor: unknown kind '" + s.kind + "'");
  if (s.k < 1) fail(ErrorCode::Config, "predictor: k must be >= 1");
  if (s.window < 1) fail(ErrorCode::Config, "predictor: window must be >= 1");
  if (s.sigma_per_frame < 0 || s.sigma0 < 0) fail(ErrorCode::Config, "predictor: sigma must be >= 0");
  if (s.kind == "ensemble" && s.members < 2) fail(ErrorCode::Config, "predictor: ensemble needs >= 2 members");
  return s;
}

json predictor_spec_to_json(const PredictorSpec& s) {
  return {{"kind", s.kind},         {"k", s.k},           {"window", s.window}, {"sigma_per_frame", s.sigma_per_frame},
          {"sigma0", s.sigma0},     {"members", s.members}, {"seed", s.seed}};
}

std::shared_ptr<const Predictor> make_predictor(const PredictorSpec& spec, std::span<const Segment* const> train) {
  if (spec.kind == "noisy_oracle")
    return std::make_shared<NoisyOracle>(NoisyOracle::linear(spec.sigma_per_frame, spec.sigma0, spec.seed));
  if (spec.kind == "knn") return std::make_shared<KnnPredictor>(train, spec.k, spec.window);
  if (spec.kind == "ensemble") return make_knn_ensemble(train, spec.members, spec.k, spec.window);
  fail(ErrorCode::Config, "predictor: unknown kind '" + spec.kind + "'");
}

std::shared_ptr<const Predictor> predictor_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "knn") return KnnPredictor::from_json(j);
  if (kind == "noisy_oracle")
    return std::make_shared<NoisyOracle>(j.at("sigma").get<std::vector<double>>(), j.value("seed", std::uint64_t{0}));
  if (kind == "ensemble") {
    std::vector<std::shared_ptr<const Predictor>> members;
    for (const json& m : j.at("members")) members.push_back(predictor_from_json(m));
    return std::make_shared<EnsemblePredictor>(std::move(members));
  }
  fail(ErrorCode::Config, "model: unknown kind '" + kind + "'");
}

}  // namespace pingsim
