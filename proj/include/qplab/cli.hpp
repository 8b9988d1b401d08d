#pragma once

#include <exception>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qplab/config.hpp"
#include "qplab/run.hpp"

namespace qplab {

/// Exit codes of `qplab`.
enum ExitCode : int { exit_ok = 0, exit_failure = 1, exit_config = 2, exit_module = 3 };

inline std::vector<long long> parse_schedule(const std::string& s) {
  std::vector<long long> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    std::size_t used = 0;
    long long n = 0;
    try {
      n = std::stoll(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size() || n < 1)
      throw ConfigInvalid("--schedule: expected comma-separated positive integers, got '" + s + "'");
    out.push_back(n);
  }
  if (out.empty()) throw ConfigInvalid("--schedule: empty");
  return out;
}

/// `qplab <command> [--config FILE] [--seed N] [--threads N] [--out DIR] [--schedule a,b,...]`.
/// Without --config the built-in defaults for the command are used. Command
/// line values override the file, and the result is validated as a whole.
inline int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"qplab: transfer-matrix, Lyapunov exponent and localization experiments for quasi-periodic "
               "Schroedinger operators"};
  app.footer(output_columns_help());
  std::string command, config_path, out_dir, schedule;
  std::optional<long long> seed, threads;
  app.add_option("command", command, "lyapunov | ldt | green | pave | localize | lowerbound | recursion")
      ->required()
      ->check(CLI::IsMember(command_names()));
  app.add_option("--config", config_path, "JSON config (schema_version 1) or a manifest.json to re-run");
  app.add_option("--seed", seed, "random seed");
  app.add_option("--threads", threads, "worker threads (results do not depend on it)");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--schedule", schedule, "comma-separated scales, replaces the config's n list");
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return exit_ok;
  } catch (const CLI::ParseError& e) {
    err << "ConfigInvalid: " << e.what() << "\n";
    return exit_config;
  }

  try {
    json j;
    if (config_path.empty()) {
      j = to_json(default_config(*parse_command(command)));
    } else {
      std::ifstream in(config_path, std::ios::binary);
      if (!in) throw ConfigInvalid("$: cannot read config file '" + config_path + "'");
      std::ostringstream ss;
      ss << in.rdbuf();
      try {
        j = json::parse(ss.str());
      } catch (const json::parse_error& e) {
        throw ConfigInvalid(std::string("$: malformed JSON (") + e.what() + ")");
      }
      if (is_manifest(j)) j = json(j["config"]);
      if (!j.is_object()) throw ConfigInvalid("$: expected an object");
      if (j.contains("command") && j["command"] != command)
        throw ConfigInvalid("$.command: config is for '" + j["command"].dump() + "', not '" + command + "'");
      j["command"] = command;
    }
    if (seed) j["seed"] = *seed;
    if (threads) j["threads"] = *threads;
    if (!out_dir.empty()) j["output"] = out_dir;
    if (!schedule.empty()) j["n"] = parse_schedule(schedule);
    const ExperimentConfig cfg = parse_config(j);
    const RunReport rep = run(cfg);
    out << "qplab " << command << ": wrote";
    for (const auto& f : rep.outputs) out << ' ' << (rep.directory / f).string();
    out << " (" << rep.wall_time << " s)\n";
    return exit_ok;
  } catch (const ConfigInvalid& e) {
    err << e.what() << "\n";
    return exit_config;
  } catch (const error& e) {
    err << e.what() << "\n";
    return exit_module;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_failure;
  }
}

}  // namespace qplab
