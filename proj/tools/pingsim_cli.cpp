#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "pingsim/pingsim.h"

namespace {

int exit_code(ps_status s) {
  switch (s) {
    case PS_OK: return 0;
    case PS_INVALID_ARGUMENT:
    case PS_CONFIG: return 2;
    default: return 3;
  }
}

int report(ps_status s, const std::string& command) {
  if (s != PS_OK)
    std::cerr << "{\"command\": \"" << command << "\", \"status\": \"" << ps_status_name(s) << "\", \"error\": \""
              << ps_last_error() << "\"}\n";
  return exit_code(s);
}

void print_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (in) std::cout << in.rdbuf();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Table-tennis anticipatory control simulator"};
  app.set_version_flag("--version", std::string(ps_version()));
  app.require_subcommand(1);

  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  int jobs = 0;
  for (const char* name : {"generate", "fit", "benchmark", "diagnose", "sweep"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config, "experiment JSON")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "master seed");
    sub->add_option("--out", out, "output directory");
    sub->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  ps_experiment* exp = nullptr;
  ps_status s = ps_experiment_load(config.c_str(), &exp);
  if (s == PS_OK && seed) s = ps_experiment_set_seed(exp, *seed);
  if (s == PS_OK && !out.empty()) s = ps_experiment_set_output(exp, out.c_str());
  if (s == PS_OK && jobs > 0) s = ps_experiment_set_jobs(exp, jobs);
  if (s == PS_OK) s = ps_experiment_run(exp, command.c_str());
  const char* out_dir = nullptr;
  if (s == PS_OK) s = ps_experiment_output(exp, &out_dir);
  const int code = report(s, command);
  if (s == PS_OK) {
    const std::filesystem::path dir(out_dir);
    if (command == "benchmark")
      print_file(dir / "metrics.txt");
    else if (command == "sweep")
      print_file(dir / "sweep_result.json");
    else if (command == "diagnose")
      print_file(dir / "median_error_by_frame.csv");
    else if (command == "generate")
      std::cout << "dataset written to " << dir.string() << "\n";
    else
      std::cout << "model written to " << (dir / "model.json").string() << "\n";
  }
  ps_experiment_free(exp);
  return code;
}
