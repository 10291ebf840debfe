#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace blsat::cli {

using json = nlohmann::ordered_json;

// Validated experiment description. `params` holds every command key with
// defaults filled in; it is echoed verbatim into the report.
struct ExperimentConfig {
  std::string command;
  json params;
  std::optional<std::uint64_t> seed;
  int threads = 0;  // 0: machine parallelism
  std::filesystem::path base_dir;  // relative "file" paths resolve here
};

// Rejects unknown keys and type errors with ErrorCode::ConfigError; the
// message starts with the key path, e.g. "$.functions[1].kind".
ExperimentConfig parse_config(const std::string& document, const std::filesystem::path& base_dir = {});

const std::vector<std::string>& command_names();
bool is_stochastic(const std::string& command, const json& params);

struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

struct GridOutput {
  std::string name;
  std::string text;  // GridFunction text format
};

struct ExperimentReport {
  std::string command;
  json config;
  json results = json::object();
  json residuals = json::object();
  std::vector<Table> tables;
  std::vector<GridOutput> grids;
  json provenance = json::object();
  int exit_code = 0;

  json to_json() const;
};

// Threads resolved from the config and BLSAT_THREADS.
int effective_threads(const ExperimentConfig& cfg);

ExperimentReport execute(const ExperimentConfig& cfg);

// report.json plus <table>.csv and <grid>.grid files.
void write_outputs(const ExperimentReport& report, const std::filesystem::path& dir);

// Non-finite values become the strings "inf", "-inf", "nan".
json number(double v);

int exit_code_for(const std::exception& e);

int run(int argc, char** argv);

}  // namespace blsat::cli
