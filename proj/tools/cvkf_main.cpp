#include <cstdint>
#include <exception>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "cvkf/config.hpp"
#include "cvkf/experiment.hpp"
#include "cvkf/models.hpp"

namespace {

// Failure channel of `run`: one JSON object per line on stderr so callers
// can parse the reason without scraping free text.
void emit_error_record(const std::string& stage, const std::string& what) {
  std::string escaped;
  escaped.reserve(what.size() + 8);
  for (char c : what) {
    if (c == '"' || c == '\\') {
      escaped += '\\';
      escaped += c;
    } else if (c == '\n') {
      escaped += "\\n";
    } else {
      escaped += c;
    }
  }
  std::cerr << "{\"stage\": \"" << stage << "\", \"error\": \"" << escaped
            << "\"}\n";
}

int cmd_run(const std::string& config_path, const std::string& output_dir,
            bool has_seed, std::uint64_t seed) {
  cvkf::ExperimentConfig cfg;
  try {
    cfg = cvkf::parse_config_file(config_path);
    if (!output_dir.empty()) cfg.output_directory = output_dir;
    if (has_seed) cfg.seed = seed;
  } catch (const std::exception& e) {
    emit_error_record("config", e.what());
    return 2;
  }
  try {
    const cvkf::ExperimentResult result = cvkf::run_experiment(cfg);
    std::cout << "wrote " << result.output_directory << " ("
              << result.steps << " steps)\n";
    for (const auto& [token, metrics] : result.metrics) {
      std::cout << "  " << token << ": rmse " << metrics.rmse
                << ", mean nees " << metrics.nees_mean;
      if (metrics.flagged_steps > 0) {
        std::cout << ", " << metrics.flagged_steps << " flagged step(s)";
      }
      std::cout << "\n";
    }
    return 0;
  } catch (const std::exception& e) {
    emit_error_record("run", e.what());
    return 1;
  }
}

int cmd_validate(const std::string& config_path) {
  try {
    const cvkf::ExperimentConfig cfg = cvkf::parse_config_file(config_path);
    std::cout << cvkf::emit_config(cfg);
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

int cmd_scenarios() {
  for (const cvkf::ScenarioInfo& info : cvkf::builtin_scenarios()) {
    std::cout << info.name << "\n  " << info.summary << "\n";
    for (const std::string& param : info.params) {
      std::cout << "    " << param << "\n";
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"continuous-time variational Gaussian filtering"};
  app.require_subcommand(1);

  std::string config_path;
  std::string output_dir;
  std::uint64_t seed = 0;

  CLI::App* run = app.add_subcommand("run", "run an experiment config");
  run->add_option("config", config_path, "config file")->required();
  run->add_option("--output-dir", output_dir, "override [output] directory");
  CLI::Option* seed_opt =
      run->add_option("--seed", seed, "override [experiment] seed");

  CLI::App* validate =
      app.add_subcommand("validate", "parse a config and print its "
                                     "canonical form");
  validate->add_option("config", config_path, "config file")->required();

  CLI::App* scenarios =
      app.add_subcommand("scenarios", "list built-in scenarios");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (run->parsed()) {
    return cmd_run(config_path, output_dir, seed_opt->count() > 0, seed);
  }
  if (validate->parsed()) {
    return cmd_validate(config_path);
  }
  if (scenarios->parsed()) {
    return cmd_scenarios();
  }
  return 2;
}
