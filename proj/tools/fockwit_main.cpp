// Command-line front end: runs one scenario from a JSON config file, with
// every config key mirrored by a flag (flags win).

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "fockwit/scenarios.hpp"
#include "fockwit/version.hpp"

namespace {

std::filesystem::path resolve_config_path(const std::string& name) {
  std::filesystem::path path(name);
  if (std::filesystem::exists(path)) return path;
  if (path.is_relative()) {
    if (const char* dir = std::getenv("FOCKWIT_CONFIG_DIR")) {
      const std::filesystem::path fallback = std::filesystem::path(dir) / path;
      if (std::filesystem::exists(fallback)) return fallback;
    }
  }
  throw fockwit::config_error("config file not found: " + name);
}

std::pair<std::string, std::string> split_key_value(const std::string& kv,
                                                    const char* flag) {
  const auto eq = kv.find('=');
  if (eq == std::string::npos || eq == 0)
    throw fockwit::config_error(std::string(flag) + " expects key=value, got \"" + kv +
                                "\"");
  return {kv.substr(0, eq), kv.substr(eq + 1)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fockwit: nonclassicality witnesses for bipartite bosonic states"};
  app.set_version_flag("--version", std::string("fockwit ") + fockwit::version);

  auto* run = app.add_subcommand("run", "run a scenario and write its report");
  std::string config_file, scenario, output, format;
  std::vector<int> cutoff;
  std::optional<long> samples;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> tolerance_kv, param_kv;

  run->add_option("-c,--config", config_file,
                  "JSON config file (searched in $FOCKWIT_CONFIG_DIR if relative)");
  run->add_option("-s,--scenario", scenario,
                  "number-correlated | gaussian-p | point-mixture-commutator | "
                  "perturbation | conditioning | sweep");
  run->add_option("--cutoff", cutoff, "Fock levels per mode (one or two values)")
      ->delimiter(',');
  run->add_option("--samples", samples, "Monte-Carlo sample count");
  run->add_option("--seed", seed, "RNG seed");
  run->add_option("--tolerance", tolerance_kv, "tolerance override, key=value")
      ->take_all();
  run->add_option("--param", param_kv, "scenario parameter, key=value")->take_all();
  run->add_option("-o,--output", output, "report path (default: stdout)");
  run->add_option("--format", format, "json | csv");
  run->require_subcommand(0, 1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help / --version
    app.exit(e);
    return 2;
  }

  if (!run->parsed()) {
    std::cerr << app.help() << std::endl;
    return 2;
  }

  try {
    nlohmann::json doc = nlohmann::json::object();
    if (!config_file.empty()) {
      std::ifstream in(resolve_config_path(config_file));
      try {
        in >> doc;
      } catch (const nlohmann::json::exception& e) {
        throw fockwit::config_error(std::string("cannot parse config: ") + e.what());
      }
    }
    // flags override file values
    if (!scenario.empty()) doc["scenario"] = scenario;
    if (!cutoff.empty()) doc["cutoff"] = cutoff;
    if (samples) doc["samples"] = *samples;
    if (seed) doc["seed"] = *seed;
    if (!output.empty()) doc["output"] = output;
    if (!format.empty()) doc["format"] = format;
    for (const std::string& kv : tolerance_kv) {
      const auto [key, value] = split_key_value(kv, "--tolerance");
      try {
        doc["tolerances"][key] = std::stod(value);
      } catch (const std::exception&) {
        throw fockwit::config_error("--tolerance " + key + ": not a number");
      }
    }
    for (const std::string& kv : param_kv) {
      const auto [key, value] = split_key_value(kv, "--param");
      try {
        std::size_t used = 0;
        const double num = std::stod(value, &used);
        if (used == value.size())
          doc["params"][key] = num;
        else
          doc["params"][key] = value;
      } catch (const std::exception&) {
        doc["params"][key] = value;
      }
    }
    const fockwit::ScenarioConfig config = fockwit::ScenarioConfig::from_json(doc);
    return fockwit::run_to_output(config);
  } catch (const fockwit::config_error& e) {
    std::cerr << "fockwit: config error: " << e.what() << std::endl;
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "fockwit: error: " << e.what() << std::endl;
    return 3;
  }
}
