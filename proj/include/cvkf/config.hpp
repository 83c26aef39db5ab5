// Experiment configuration: a small INI dialect with sections, '#'
// comments, and strict validation. Parsing resolves every default, so a
// config can be echoed back in canonical form; echo -> parse -> echo is
// byte-identical.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cvkf/expectation.hpp"
#include "cvkf/filter.hpp"
#include "cvkf/fixed_point.hpp"
#include "cvkf/models.hpp"

namespace cvkf {

struct ExperimentConfig {
  // [experiment]
  std::string scenario = "linear-1d";
  double dt = 0.01;
  double horizon = 1.0;
  std::uint64_t seed = 0;

  // [scenario], fully resolved against the scenario's defaults
  ScenarioParams scenario_params;

  // [prior]; cov holds the diagonal of the prior covariance
  std::vector<double> prior_mean;
  std::vector<double> prior_cov;
  std::vector<double> x0;

  // [expectation]
  ExpectationMethod method;

  // [filter]
  std::vector<std::string> filter_kinds = {"cvkf"};
  PropagationKind propagation = PropagationKind::Explicit;
  UpdateKind update = UpdateKind::Precision;
  FixedPointConfig fixed_point;

  // [oracle]; 0 disables the particle reference
  std::int64_t oracle_particles = 0;

  // [output]
  std::string output_directory = "out";
};

// Defaults for the given scenario name, dimensions resolved.
ExperimentConfig default_config(const std::string& scenario = "linear-1d");

// Parses and validates config text. Errors carry 1-based line numbers and
// the offending key. The returned config has every default filled in.
ExperimentConfig parse_config(const std::string& text);

ExperimentConfig parse_config_file(const std::string& path);

// Canonical text form: fixed section and key order, shortest round-trip
// number formatting, every key present.
std::string emit_config(const ExperimentConfig& cfg);

// Turns the resolved filter tokens into runnable kinds.
std::vector<FilterKind> filter_kinds_of(const ExperimentConfig& cfg);

}  // namespace cvkf
