#include "pingsim/harness.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "pingsim/error.hpp"
#include "pingsim/parallel.hpp"
#include "pingsim/uncertainty.hpp"

namespace pingsim {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

std::string fmt(double v, int precision = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

void write_json(const fs::path& path, const json& j) { write_text_file(path, j.dump(2) + "\n"); }

}  // namespace

ControllerPolicy policy_from_json(const json& j) {
  ControllerPolicy p;
  const std::string kind = j.at("kind").get<std::string>();
  p.alpha.kind = parse_policy_kind(kind);
  switch (p.alpha.kind) {
    case PolicyKind::Baseline: p = servo_only_policy(); break;
    case PolicyKind::BasicAnticipatory: p = anticipatory_policy(1.0, 1.0); break;
    case PolicyKind::UncertaintyAware: p = uncertainty_aware_policy(0.6, 1.0); break;
  }
  p.id = j.value("id", p.id);
  p.alpha.alpha1 = j.value("alpha1", p.alpha.alpha1);
  p.alpha.alpha2 = j.value("alpha2", p.alpha.alpha2);
  const std::string mode = j.value("mode", std::string("constant"));
  if (mode == "constant")
    p.alpha.mode = AlphaMode::Constant;
  else if (mode == "confidence")
    p.alpha.mode = AlphaMode::ConfidenceScaled;
  else
    fail(ErrorCode::Config, "policy: unknown mode '" + mode + "'");
  if (!(p.alpha.alpha1 >= 0 && p.alpha.alpha1 <= 1 && p.alpha.alpha2 >= 0 && p.alpha.alpha2 <= 1))
    fail(ErrorCode::Config, "policy '" + p.id + "': alphas must lie in [0, 1]");
  return p;
}

namespace {

SimConfig sim_from_json(const json& j) {
  SimConfig c;
  c.command_period = j.value("command_period", c.command_period);
  c.latency = j.value("latency", c.latency);
  c.servo_start = j.value("servo_start", c.servo_start);
  c.anticipatory_start = j.value("anticipatory_start", c.anticipatory_start);
  c.continuous_pre_hit = j.value("continuous_pre_hit", c.continuous_pre_hit);
  c.paddle_radius = j.value("paddle_radius", c.paddle_radius);
  c.pre_hit_z_goal = j.value("pre_hit_z_goal", c.pre_hit_z_goal);
  c.ball_noise = j.value("ball_noise", c.ball_noise);
  validate(c);
  return c;
}

}  // namespace

ExperimentSpec spec_from_json(const json& j, const fs::path& base_dir) {
  ExperimentSpec s;
  try {
    s.raw = j;
    if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("generator")) s.generator = generator_config_from_json(j.at("generator"));
    if (j.contains("dataset")) {
      const json& d = j.at("dataset");
      s.dataset_path = resolve(base_dir, d.is_string() ? d.get<std::string>() : d.at("path").get<std::string>());
    }
    if (j.contains("predictor")) s.predictor = predictor_spec_from_json(j.at("predictor"));
    if (j.contains("model")) s.model_path = resolve(base_dir, j.at("model").get<std::string>());
    if (j.contains("estimators")) s.estimators = j.at("estimators").get<std::vector<std::string>>();
    for (const std::string& e : s.estimators)
      if (e != "knn_error" && e != "ensemble" && e != "conformal" && e != "time_to_hit")
        fail(ErrorCode::Config, "unknown estimator '" + e + "'");
    if (j.contains("policies"))
      for (const json& p : j.at("policies")) s.policies.push_back(policy_from_json(p));
    if (j.contains("sweep")) {
      const json& sw = j.at("sweep");
      s.sweep_alpha1 = sw.value("alpha1", s.sweep_alpha1);
      s.sweep_alpha2 = sw.value("alpha2", s.sweep_alpha2);
      s.sweep_policy = sw.value("policy", s.sweep_policy);
      parse_policy_kind(s.sweep_policy);
    }
    if (j.contains("sim")) s.sim = sim_from_json(j.at("sim"));
    if (j.contains("robot")) {
      const json& r = j.at("robot");
      if (r.contains("limits")) s.robot_limits = resolve(base_dir, r.at("limits").get<std::string>());
      if (r.contains("chain")) s.robot_chain = resolve(base_dir, r.at("chain").get<std::string>());
    }
    if (j.contains("diagnose")) {
      const json& d = j.at("diagnose");
      s.diagnose_frames = d.value("frames", s.diagnose_frames);
      s.conformal_alpha = d.value("conformal_alpha", s.conformal_alpha);
      s.error_model_k = d.value("error_model_k", s.error_model_k);
      s.ensemble_members = d.value("ensemble_members", s.ensemble_members);
    }
    if (j.contains("output")) s.out_dir = resolve(base_dir, j.at("output").get<std::string>());
    s.jobs = j.value("jobs", s.jobs);
  } catch (const json::exception& e) {
    fail(ErrorCode::Config, std::string("experiment config: ") + e.what());
  }
  for (int f : s.diagnose_frames)
    if (f < 0 || f >= kPredictionRows) fail(ErrorCode::Config, "diagnose: frames must lie in [0, 29]");
  if (!(s.conformal_alpha > 0 && s.conformal_alpha < 1)) fail(ErrorCode::Config, "diagnose: conformal_alpha must lie in (0, 1)");
  if (s.error_model_k < 1) fail(ErrorCode::Config, "diagnose: error_model_k must be >= 1");
  if (s.ensemble_members < 2) fail(ErrorCode::Config, "diagnose: ensemble_members must be >= 2");
  if (s.jobs < 1) fail(ErrorCode::Config, "jobs must be >= 1");
  return s;
}

ExperimentSpec load_spec(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    fail(ErrorCode::Config, "cannot parse " + path.string() + ": " + e.what());
  }
  return spec_from_json(j, path.parent_path().empty() ? fs::path(".") : path.parent_path());
}

json provenance(const ExperimentSpec& spec, const std::string& command) {
  json hashed = spec.raw;
  hashed.erase("output");
  hashed.erase("jobs");
  hashed["seed"] = spec.seed.value_or(0);
  return {{"command", command},
          {"config_hash", config_hash(hashed)},
          {"seed", spec.seed.value_or(0)},
          {"version", std::string("pingsim ") + kVersion}};
}

std::string provenance_comment(const ExperimentSpec& spec, const std::string& command) {
  const json p = provenance(spec, command);
  return "# pingsim " + std::string(kVersion) + " command=" + command + " config_hash=" +
         p.at("config_hash").get<std::string>() + " seed=" + std::to_string(p.at("seed").get<std::uint64_t>()) + "\n";
}

namespace {

std::uint64_t require_seed(const ExperimentSpec& spec) {
  if (!spec.seed) fail(ErrorCode::Config, "a seed is required (config 'seed' or --seed)");
  return *spec.seed;
}

GeneratorConfig seeded_generator(const ExperimentSpec& spec) {
  GeneratorConfig g = spec.generator.value_or(GeneratorConfig{});
  g.seed = require_seed(spec);
  return g;
}

Dataset obtain_dataset(const ExperimentSpec& spec) {
  if (spec.dataset_path) {
    if (!fs::exists(*spec.dataset_path / "manifest.json"))
      fail(ErrorCode::Config, "dataset not found at " + spec.dataset_path->string());
    return read_dataset(*spec.dataset_path);
  }
  if (spec.generator) return generate_dataset(seeded_generator(spec), spec.jobs);
  fail(ErrorCode::Config, "experiment needs a 'dataset' path or a 'generator' section");
}

Robot obtain_robot(const ExperimentSpec& spec) {
  if (spec.robot_limits.has_value() != spec.robot_chain.has_value())
    fail(ErrorCode::Config, "robot: give both 'limits' and 'chain' or neither");
  if (spec.robot_limits) return load_robot(*spec.robot_limits, *spec.robot_chain);
  return Robot::defaults();
}

std::shared_ptr<const Predictor> obtain_predictor(const ExperimentSpec& spec, const Dataset& ds) {
  if (spec.model_path) {
    json j;
    try {
      j = json::parse(read_text_file(*spec.model_path));
    } catch (const json::parse_error& e) {
      fail(ErrorCode::Config, "cannot parse model: " + std::string(e.what()));
    }
    return predictor_from_json(j.contains("model") ? j.at("model") : j);
  }
  PredictorSpec ps = spec.predictor;
  ps.seed = require_seed(spec);
  const auto train = ds.split("train");
  if (ps.kind != "noisy_oracle" && train.empty()) fail(ErrorCode::Config, "dataset has no training split");
  return make_predictor(ps, train);
}

SimConfig seeded_sim(const ExperimentSpec& spec) {
  SimConfig c = spec.sim;
  c.noise_seed = require_seed(spec);
  return c;
}

}  // namespace

GenerateOutput cmd_generate(const ExperimentSpec& spec) {
  const GeneratorConfig g = seeded_generator(spec);
  Dataset ds = generate_dataset(g, spec.jobs);
  write_dataset(spec.out_dir, ds);
  return {spec.out_dir, ds.manifest};
}

fs::path cmd_fit(const ExperimentSpec& spec) {
  const Dataset ds = obtain_dataset(spec);
  const auto model = obtain_predictor(spec, ds);
  json out{{"provenance", provenance(spec, "fit")}, {"model", model->to_json()}};
  const fs::path path = spec.out_dir / "model.json";
  fs::create_directories(spec.out_dir);
  write_text_file(path, out.dump() + "\n");
  return path;
}

std::string trials_csv(const BenchmarkResult& result) {
  std::ostringstream os;
  os << "segment_id,policy,region,hit,end_distance_cm,crossing_frame,paddle_x,paddle_z,ball_x,ball_z\n";
  for (const PolicyOutcome& p : result.policies) {
    for (std::size_t i = 0; i < p.trials.size(); ++i) {
      const TrialRecord& t = p.trials[i];
      os << t.result.segment_id << ',' << p.policy.id << ',' << region_name(p.regions[i]) << ','
         << (t.result.hit ? 1 : 0) << ',' << fmt(t.result.end_distance_to_goal) << ',' << fmt(t.crossing_frame, 4)
         << ',' << fmt(t.paddle_at_crossing.x()) << ',' << fmt(t.paddle_at_crossing.z()) << ','
         << fmt(t.ball_at_crossing.x) << ',' << fmt(t.ball_at_crossing.z) << '\n';
    }
  }
  return os.str();
}

namespace {

json region_json(const RegionStats& s) {
  return {{"count", s.count},
          {"hits", s.hits},
          {"mean_distance", optional_number(s.mean_distance)},
          {"half_stddev", optional_number(s.half_stddev)}};
}

std::string region_row(const std::string& name, const RegionStats& s) {
  char buf[128];
  if (s.mean_distance)
    std::snprintf(buf, sizeof buf, "%-8s %6d %6d   %6.2f +- %.2f\n", name.c_str(), s.count, s.hits, *s.mean_distance,
                  *s.half_stddev);
  else
    std::snprintf(buf, sizeof buf, "%-8s %6d %6d   %6s\n", name.c_str(), s.count, s.hits, "n/a");
  return buf;
}

}  // namespace

json metrics_json(const BenchmarkResult& result) {
  json policies = json::array();
  for (const PolicyOutcome& p : result.policies) {
    json regions = json::object();
    for (Region r : kRegions) regions[std::string(region_name(r))] = region_json(p.metrics.region(r));
    json errors = json::array();
    for (const auto& [id, msg] : p.errors) errors.push_back({{"segment_id", id}, {"error", msg}});
    policies.push_back({{"id", p.policy.id},
                        {"kind", policy_kind_name(p.policy.alpha.kind)},
                        {"alpha1", p.policy.alpha.alpha1},
                        {"alpha2", p.policy.alpha.alpha2},
                        {"regions", regions},
                        {"all", region_json(p.metrics.all)},
                        {"stddev_convention", p.metrics.stddev_convention},
                        {"limit_violations",
                         {{"position", p.audit.position}, {"velocity", p.audit.velocity}, {"acceleration", p.audit.acceleration}}},
                        {"trial_errors", errors}});
  }
  return {{"policies", policies}};
}

std::string metrics_table_text(const BenchmarkResult& result) {
  std::ostringstream os;
  for (const PolicyOutcome& p : result.policies) {
    char head[160];
    std::snprintf(head, sizeof head, "%s (alpha1 = %.2f, alpha2 = %.2f)\n", p.policy.id.c_str(), p.policy.alpha.alpha1,
                  p.policy.alpha.alpha2);
    os << head;
    os << "Region    Total  # hit   End-dist (cm, mean +- half std)\n";
    for (Region r : kRegions) os << region_row(std::string(region_name(r)), p.metrics.region(r));
    os << region_row("All", p.metrics.all) << '\n';
  }
  return os.str();
}

BenchmarkResult cmd_benchmark(const ExperimentSpec& spec) {
  if (spec.policies.empty()) fail(ErrorCode::Config, "benchmark: the policy list is empty");
  const Dataset ds = obtain_dataset(spec);
  const auto test = ds.split("test");
  if (test.empty()) fail(ErrorCode::Config, "benchmark: dataset has no test split");
  const bool needs_predictor = std::any_of(spec.policies.begin(), spec.policies.end(),
                                           [](const ControllerPolicy& p) { return p.alpha.kind != PolicyKind::Baseline; });
  std::shared_ptr<const Predictor> predictor;
  if (needs_predictor) predictor = obtain_predictor(spec, ds);
  const Robot robot = obtain_robot(spec);
  BenchmarkResult res = run_benchmark(test, spec.policies, predictor.get(), robot, seeded_sim(spec), spec.jobs);

  fs::create_directories(spec.out_dir);
  write_text_file(spec.out_dir / "trials.csv", provenance_comment(spec, "benchmark") + trials_csv(res));
  json m = metrics_json(res);
  m["provenance"] = provenance(spec, "benchmark");
  write_json(spec.out_dir / "metrics.json", m);
  write_text_file(spec.out_dir / "metrics.txt", provenance_comment(spec, "benchmark") + metrics_table_text(res));
  return res;
}

namespace {

Eigen::VectorXd window_features(const Segment& seg, int frames_before_hit, int window) {
  const Eigen::MatrixXd x = state_series(seg, frames_before_hit);
  Eigen::VectorXd f(static_cast<Eigen::Index>(window) * kStateDim);
  const int l = static_cast<int>(x.rows());
  for (int w = 0; w < window; ++w) f.segment(w * kStateDim, kStateDim) = x.row(std::max(l - window + w, 0)).transpose();
  return f;
}

double abs_strike_error(const PredictionMatrix& p, int row, const Segment& seg) {
  return std::abs(strike_from_params(p.at(row)) - seg.strike_point.x);
}

}  // namespace

json cmd_diagnose(const ExperimentSpec& spec) {
  if (spec.estimators.empty()) fail(ErrorCode::Config, "diagnose: the estimator set is empty");
  const Dataset ds = obtain_dataset(spec);
  const auto cal = ds.split("calibration");
  const auto test = ds.split("test");
  if (cal.empty()) fail(ErrorCode::Config, "diagnose: dataset has no calibration split");
  if (test.empty()) fail(ErrorCode::Config, "diagnose: dataset has no test split");
  const auto predictor = obtain_predictor(spec, ds);

  const auto predict_all = [&](const std::vector<const Segment*>& segs) {
    std::vector<PredictionMatrix> out(segs.size());
    parallel_for(static_cast<int>(segs.size()), spec.jobs, [&](int i) { out[i] = predictor->predict(*segs[i]); });
    return out;
  };
  const auto cal_pred = predict_all(cal);
  const auto test_pred = predict_all(test);

  // Median error per frame before the hit.
  std::vector<int> frames(kPredictionRows);
  std::vector<std::vector<double>> test_err(kPredictionRows), cal_err(kPredictionRows);
  std::vector<Region> test_regions;
  for (const Segment* s : test) test_regions.push_back(classify_region(s->strike_point.x));
  for (int f = 0; f < kPredictionRows; ++f) {
    frames[f] = f;
    for (std::size_t i = 0; i < test.size(); ++i) test_err[f].push_back(abs_strike_error(test_pred[i], f, *test[i]));
    for (std::size_t i = 0; i < cal.size(); ++i) cal_err[f].push_back(abs_strike_error(cal_pred[i], f, *cal[i]));
  }
  const MedianErrorTable table = median_error_table(frames, test_err, test_regions);
  {
    std::ostringstream os;
    os << provenance_comment(spec, "diagnose") << "frames_before_hit,Left,Center,Right,All\n";
    for (std::size_t f = 0; f < table.frames.size(); ++f) {
      os << table.frames[f];
      for (const auto& v : table.medians[f]) os << ',' << (v ? fmt(*v) : std::string("nan"));
      os << '\n';
    }
    fs::create_directories(spec.out_dir);
    write_text_file(spec.out_dir / "median_error_by_frame.csv", os.str());
  }

  json report{{"provenance", provenance(spec, "diagnose")}, {"estimators", json::object()}};
  std::vector<double> cal_medians;
  for (const auto& e : cal_err) cal_medians.push_back(median(e));

  std::shared_ptr<EnsemblePredictor> ensemble;
  std::vector<EnsembleOutput> ensemble_out;

  for (const std::string& name : spec.estimators) {
    std::vector<ScatterRow> rows;
    CorrelationAccumulator acc;
    json details = json::object();
    for (int f : spec.diagnose_frames) {
      std::vector<double> conf(test.size());
      if (name == "knn_error") {
        const int window = spec.predictor.window;
        Eigen::MatrixXd feats(static_cast<Eigen::Index>(cal.size()), static_cast<Eigen::Index>(window) * kStateDim);
        for (std::size_t i = 0; i < cal.size(); ++i) feats.row(static_cast<Eigen::Index>(i)) = window_features(*cal[i], f, window).transpose();
        const KnnErrorModel model(feats, cal_err[f], std::min<int>(spec.error_model_k, static_cast<int>(cal.size())));
        for (std::size_t i = 0; i < test.size(); ++i)
          conf[i] = squash_uncertainty(knn_error_estimate(model, window_features(*test[i], f, window)));
      } else if (name == "ensemble") {
        if (!ensemble) {
          const auto train = ds.split("train");
          if (static_cast<int>(train.size()) < spec.ensemble_members)
            fail(ErrorCode::Config, "diagnose: training split too small for the ensemble");
          ensemble = make_knn_ensemble(train, spec.ensemble_members, spec.predictor.k, spec.predictor.window);
          ensemble_out.resize(test.size());
          parallel_for(static_cast<int>(test.size()), spec.jobs, [&](int i) { ensemble_out[i] = ensemble->run(*test[i]); });
        }
        std::vector<double> widths;
        for (std::size_t i = 0; i < test.size(); ++i) {
          const double u = ensemble_uncertainty(ensemble_out[i].members, f);
          conf[i] = squash_uncertainty(u);
          widths.push_back(2.0 * u);
        }
        details[std::to_string(f)] = {{"mean_interval_width", mean(widths)}};
      } else if (name == "conformal") {
        const ConformalCalibration calib(cal_err[f], spec.conformal_alpha);
        const double q = calib.half_width();
        int covered = 0;
        for (std::size_t i = 0; i < test.size(); ++i) {
          conf[i] = squash_uncertainty(q);
          const Interval iv = conformal_interval(calib, strike_from_params(test_pred[i].at(f)));
          covered += iv.contains(test[i]->strike_point.x) ? 1 : 0;
        }
        details[std::to_string(f)] = {{"alpha", spec.conformal_alpha},
                                      {"half_width", calib.unbounded() ? json("inf") : json(q)},
                                      {"width", calib.unbounded() ? json("inf") : json(2.0 * q)},
                                      {"test_coverage", static_cast<double>(covered) / test.size()}};
      } else {
        const HorizonFit fit = calibrate_time_to_hit(frames, cal_medians);
        for (std::size_t i = 0; i < test.size(); ++i) conf[i] = time_to_hit_confidence(f, fit.kappa);
        details["fit"] = {{"slope", fit.slope}, {"intercept", fit.intercept}, {"r_squared", fit.r_squared}, {"kappa", fit.kappa}};
      }
      for (std::size_t i = 0; i < test.size(); ++i) {
        rows.push_back({test[i]->id, name, conf[i], test_err[f][i], f});
        acc.add(conf[i], test_err[f][i]);
      }
    }
    std::ostringstream os;
    os << provenance_comment(spec, "diagnose") << scatter_csv(rows);
    write_text_file(spec.out_dir / ("scatter_" + name + ".csv"), os.str());
    const CorrelationReport cr = confidence_residual_diagnostics(acc.confidences(), acc.errors());
    details["n"] = cr.n;
    details["pearson"] = optional_number(cr.pearson);
    details["spearman"] = optional_number(cr.spearman);
    if (!cr.note.empty()) details["note"] = cr.note;
    report["estimators"][name] = details;
  }
  write_json(spec.out_dir / "diagnostics.json", report);
  return report;
}

SweepResult cmd_sweep(const ExperimentSpec& spec) {
  const Dataset ds = obtain_dataset(spec);
  const auto cal = ds.split("calibration");
  if (cal.empty()) fail(ErrorCode::Config, "sweep: dataset has no calibration split");
  const auto predictor = obtain_predictor(spec, ds);
  const Robot robot = obtain_robot(spec);
  std::vector<double> a1 = spec.sweep_alpha1, a2 = spec.sweep_alpha2;
  const std::vector<double> steps{0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
  if (a1.empty()) a1 = steps;
  if (a2.empty()) a2 = steps;
  ControllerPolicy tmpl;
  tmpl.alpha.kind = parse_policy_kind(spec.sweep_policy);
  tmpl.id = policy_kind_name(tmpl.alpha.kind);
  const auto grid = alpha_grid(a1, a2);
  const SweepResult res = sweep_alphas(cal, tmpl, grid, predictor.get(), robot, seeded_sim(spec), spec.jobs);

  std::ostringstream os;
  os << provenance_comment(spec, "sweep") << "alpha1,alpha2,hits,trials,mean_distance_cm\n";
  for (const SweepCell& c : res.cells)
    os << fmt(c.alpha1, 3) << ',' << fmt(c.alpha2, 3) << ',' << c.hits << ',' << c.trials << ','
       << (c.mean_distance ? fmt(*c.mean_distance) : std::string("nan")) << '\n';
  fs::create_directories(spec.out_dir);
  write_text_file(spec.out_dir / "sweep_grid.csv", os.str());
  write_json(spec.out_dir / "sweep_result.json", {{"provenance", provenance(spec, "sweep")},
                                                  {"policy", tmpl.id},
                                                  {"alpha1", res.alpha1},
                                                  {"alpha2", res.alpha2},
                                                  {"cells", res.cells.size()}});
  return res;
}

void run_command(const ExperimentSpec& spec, const std::string& command) {
  if (command == "generate")
    cmd_generate(spec);
  else if (command == "fit")
    cmd_fit(spec);
  else if (command == "benchmark")
    cmd_benchmark(spec);
  else if (command == "diagnose")
    cmd_diagnose(spec);
  else if (command == "sweep")
    cmd_sweep(spec);
  else
    fail(ErrorCode::InvalidArgument, "unknown command '" + command + "'");
}

}  // namespace pingsim
