// End-to-end experiment: simulate truth, run the configured filters and
// optional particle reference, write CSV and JSON outputs.
//
// Everything written except timing.json is a pure function of the config,
// so reruns produce byte-identical artifacts. timing.json carries the wall
// time and sits outside that guarantee.
#pragma once

#include <map>
#include <string>

#include "cvkf/config.hpp"
#include "cvkf/simulation.hpp"

namespace cvkf {

struct ExperimentResult {
  std::string output_directory;
  std::map<std::string, FilterMetrics> metrics;  // keyed by filter token
  std::int64_t steps = 0;
};

// Runs the experiment and writes, under cfg.output_directory:
//   truth.csv           simulated state path
//   belief_<kind>.csv   belief trajectory per filter
//   metrics.json        metrics plus the canonical config echo
//   timing.json         wall time, excluded from determinism
// Throws on any failure; partial outputs may remain.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

}  // namespace cvkf
