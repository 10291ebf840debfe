#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "blsat/error.hpp"
#include "blsat_cli/cli.hpp"

namespace blsat::cli {

namespace {

std::string read_file(const std::filesystem::path& p) {
  std::ifstream is(p);
  if (!is) throw Error(ErrorCode::ConfigError, "$: cannot open config " + p.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Brascamp-Lieb, Santalo and barycenter experiments"};
  app.set_version_flag("--version", BLSAT_VERSION);
  app.require_subcommand(1);

  std::string config_path, out_dir;
  for (const auto& name : command_names()) {
    auto* sub = app.add_subcommand(name, "run the " + name + " experiment");
    sub->add_option("--config", config_path, "JSON config file")->required();
    sub->add_option("--out", out_dir, "directory for report.json and CSV/grid files");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    const std::filesystem::path path(config_path);
    auto text = read_file(path);
    // The subcommand supplies the command when the file omits it.
    auto doc = json::parse(text, nullptr, false);
    if (doc.is_object()) {
      if (!doc.contains("command")) {
        doc["command"] = command;
        text = doc.dump();
      } else if (doc["command"] != command) {
        throw Error(ErrorCode::ConfigError, "$.command: config is for '" + doc["command"].dump() +
                                                "' but the subcommand is '" + command + "'");
      }
    }
    const auto cfg = parse_config(text, path.parent_path());
    const auto report = execute(cfg);
    if (out_dir.empty()) {
      std::cout << report.to_json().dump(2) << "\n";
    } else {
      write_outputs(report, out_dir);
      std::cerr << "blsat: wrote " << (std::filesystem::path(out_dir) / "report.json").string() << "\n";
    }
    return report.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "blsat: " << e.what() << "\n";
    return exit_code_for(e);
  }
}

}  // namespace blsat::cli
