#include <doctest.h>

#include <filesystem>
#include <sstream>
#include <string>

#include <json.hpp>

#include "pingsim/error.hpp"
#include "pingsim/harness.hpp"
#include "pingsim/segment_io.hpp"

using namespace pingsim;
using nlohmann::json;

namespace {

std::filesystem::path scratch(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("pingsim_harness_" + name);
  std::filesystem::remove_all(p);
  return p;
}

json small_experiment(const std::filesystem::path& out) {
  return json{{"seed", 4},
              {"generator", {{"segment_count", 60}}},
              {"predictor", {{"kind", "noisy_oracle"}, {"sigma_per_frame", 0.0}, {"sigma0", 0.0}}},
              {"policies", json::array({{{"id", "servo_only"}, {"kind", "servo_only"}},
                                        {{"id", "anticipatory"}, {"kind", "anticipatory"}}})},
              {"output", out.string()}};
}

int data_lines(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int n = 0;
  while (std::getline(in, line))
    if (!line.empty() && line[0] != '#') ++n;
  return n;
}

ErrorCode code_of(const json& j) {
  try {
    spec_from_json(j);
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Runtime;
}

}  // namespace

TEST_SUITE("harness") {
  TEST_CASE("spec validation") {
    const json base = small_experiment("out");
    CHECK_NOTHROW(spec_from_json(base));

    json j = base;
    j["estimators"] = {"crystal_ball"};
    CHECK(code_of(j) == ErrorCode::Config);

    j = base;
    j["policies"] = {{{"id", "p"}, {"kind", "anticipatory"}, {"alpha1", 1.5}}};
    CHECK(code_of(j) == ErrorCode::Config);

    j = base;
    j["predictor"] = {{"kind", "oracle_of_delphi"}};
    CHECK(code_of(j) == ErrorCode::Config);

    j = base;
    j["generator"]["region_weights"] = {0, 0, 0};
    CHECK(code_of(j) == ErrorCode::Config);

    j = base;
    j["sim"] = {{"paddle_radius", -1.0}};
    CHECK(code_of(j) == ErrorCode::Config);
  }

  TEST_CASE("a seed is required") {
    json j = small_experiment(scratch("noseed"));
    j.erase("seed");
    const ExperimentSpec spec = spec_from_json(j);
    CHECK_FALSE(spec.seed.has_value());
    try {
      cmd_generate(spec);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::Config);
    }
  }

  TEST_CASE("policy presets and overrides") {
    const ControllerPolicy ua = policy_from_json({{"kind", "uncertainty_aware"}});
    CHECK(ua.alpha.kind == PolicyKind::UncertaintyAware);
    CHECK(ua.alpha.alpha1 == 0.6);
    CHECK(ua.alpha.alpha2 == 1.0);
    const ControllerPolicy a = policy_from_json({{"id", "slow"}, {"kind", "anticipatory"}, {"alpha1", 0.3}});
    CHECK(a.id == "slow");
    CHECK(a.alpha.alpha1 == 0.3);
    CHECK(policy_from_json({{"kind", "servo_only"}}).alpha.kind == PolicyKind::Baseline);
  }

  TEST_CASE("provenance ignores output and jobs") {
    ExperimentSpec a = spec_from_json(small_experiment("out_a"));
    ExperimentSpec b = spec_from_json(small_experiment("out_b"));
    b.jobs = 4;
    CHECK(provenance(a, "benchmark") == provenance(b, "benchmark"));
    b.seed = 99;
    CHECK(provenance(a, "benchmark") != provenance(b, "benchmark"));
    CHECK(provenance_comment(a, "sweep").rfind("# pingsim 1.0.0 command=sweep", 0) == 0);
  }

  TEST_CASE("sweep writes the full default grid") {
    const auto out = scratch("sweep");
    const ExperimentSpec spec = spec_from_json(small_experiment(out));
    const SweepResult r = cmd_sweep(spec);
    CHECK(r.cells.size() == 36);
    const std::string csv = read_text_file(out / "sweep_grid.csv");
    CHECK(data_lines(csv) == 37);  // header + 36 cells
    CHECK(csv.find("alpha1,alpha2,hits,trials,mean_distance_cm") != std::string::npos);
    const json res = json::parse(read_text_file(out / "sweep_result.json"));
    CHECK(res.contains("alpha1"));
    std::filesystem::remove_all(out);
  }

  TEST_CASE("benchmark files and rerun determinism") {
    const auto out = scratch("bench");
    const ExperimentSpec spec = spec_from_json(small_experiment(out));
    const BenchmarkResult r = cmd_benchmark(spec);
    REQUIRE(r.policies.size() == 2);
    const std::string trials = read_text_file(out / "trials.csv");
    const std::string metrics = read_text_file(out / "metrics.json");
    CHECK(trials.find("segment_id,policy,region,hit,end_distance_cm") != std::string::npos);
    CHECK(data_lines(trials) == 1 + 2 * r.policies[0].metrics.all.count);
    const json m = json::parse(metrics);
    CHECK(m.at("policies").size() == 2);
    for (const char* kind : {"position", "velocity", "acceleration"})
      CHECK(m.at("policies")[0].at("limit_violations").at(kind) == 0);

    cmd_benchmark(spec);
    CHECK(read_text_file(out / "trials.csv") == trials);
    CHECK(read_text_file(out / "metrics.json") == metrics);
    std::filesystem::remove_all(out);
  }

  TEST_CASE("benchmark without policies is a config error") {
    json j = small_experiment(scratch("nopol"));
    j["policies"] = json::array();
    try {
      cmd_benchmark(spec_from_json(j));
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::Config);
    }
  }

  TEST_CASE("diagnose needs estimators") {
    const ExperimentSpec spec = spec_from_json(small_experiment(scratch("noest")));
    try {
      cmd_diagnose(spec);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::Config);
    }
  }

  TEST_CASE("perfect predictor leaves correlations undefined") {
    const auto out = scratch("diag");
    json j = small_experiment(out);
    j["estimators"] = {"conformal", "time_to_hit"};
    j["diagnose"] = {{"frames", {1, 10}}};
    const json report = cmd_diagnose(spec_from_json(j));
    for (const char* name : {"conformal", "time_to_hit"}) {
      const json& e = report.at("estimators").at(name);
      CHECK(e.at("pearson").is_null());
      CHECK(e.at("spearman").is_null());
      CHECK_FALSE(e.at("note").get<std::string>().empty());
    }
    CHECK(std::filesystem::exists(out / "median_error_by_frame.csv"));
    CHECK(std::filesystem::exists(out / "scatter_conformal.csv"));
    std::filesystem::remove_all(out);
  }

  TEST_CASE("unknown command") {
    const ExperimentSpec spec = spec_from_json(small_experiment(scratch("unknown")));
    CHECK_THROWS_AS(run_command(spec, "launch"), Error);
  }
}
