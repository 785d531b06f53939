#pragma once

// Experiment commands: generate, fit, benchmark, diagnose, sweep. Each one is
// a pure function of (spec, seed) to files in the output directory.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pingsim/predictor.hpp"
#include "pingsim/segment_io.hpp"
#include "pingsim/sim.hpp"
#include "pingsim/simgen.hpp"

namespace pingsim {

inline constexpr const char* kVersion = "1.0.0";

struct ExperimentSpec {
  std::optional<std::uint64_t> seed;
  std::optional<GeneratorConfig> generator;
  std::optional<std::filesystem::path> dataset_path;
  PredictorSpec predictor;
  std::optional<std::filesystem::path> model_path;
  std::vector<std::string> estimators;
  std::vector<ControllerPolicy> policies;
  std::vector<double> sweep_alpha1;
  std::vector<double> sweep_alpha2;
  std::string sweep_policy = "uncertainty_aware";
  SimConfig sim;
  std::optional<std::filesystem::path> robot_limits;
  std::optional<std::filesystem::path> robot_chain;
  std::vector<int> diagnose_frames{10};
  double conformal_alpha = 0.1;
  int error_model_k = 5;
  int ensemble_members = 5;
  std::filesystem::path out_dir = "out";
  int jobs = 1;
  nlohmann::json raw = nlohmann::json::object();
};

// Relative paths resolve against base_dir.
ExperimentSpec spec_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = ".");
ExperimentSpec load_spec(const std::filesystem::path& path);

// Config hash (output directory and job count excluded), seed and version.
nlohmann::json provenance(const ExperimentSpec& spec, const std::string& command);
std::string provenance_comment(const ExperimentSpec& spec, const std::string& command);

struct GenerateOutput {
  std::filesystem::path dataset_dir;
  DatasetManifest manifest;
};

GenerateOutput cmd_generate(const ExperimentSpec& spec);
std::filesystem::path cmd_fit(const ExperimentSpec& spec);
BenchmarkResult cmd_benchmark(const ExperimentSpec& spec);
nlohmann::json cmd_diagnose(const ExperimentSpec& spec);
SweepResult cmd_sweep(const ExperimentSpec& spec);

// Dispatch by name; throws on unknown commands.
void run_command(const ExperimentSpec& spec, const std::string& command);

std::string trials_csv(const BenchmarkResult& result);
std::string metrics_table_text(const BenchmarkResult& result);
nlohmann::json metrics_json(const BenchmarkResult& result);
ControllerPolicy policy_from_json(const nlohmann::json& j);

}  // namespace pingsim
