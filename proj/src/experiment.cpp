#include "cvkf/experiment.hpp"

#include <charconv>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace cvkf {

namespace {

std::string fmt(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) return "0";
  return std::string(buf, ptr);
}

std::string json_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size() + 8);
  for (char c : s) {
    switch (c) {
      case '"':
        out += "\\\"";
        break;
      case '\\':
        out += "\\\\";
        break;
      case '\n':
        out += "\\n";
        break;
      case '\t':
        out += "\\t";
        break;
      case '\r':
        out += "\\r";
        break;
      default:
        out += c;
    }
  }
  return out;
}

std::string json_array(const std::vector<double>& values) {
  std::string out = "[";
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ", ";
    out += fmt(values[i]);
  }
  out += "]";
  return out;
}

void write_file(const std::filesystem::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot write '" + path.string() + "'");
  }
  out << body;
  if (!out) {
    throw std::runtime_error("write failed for '" + path.string() + "'");
  }
}

std::string truth_csv(const TruthTrace& truth, int dim) {
  const int obs_dim =
      truth.records.empty() ? 0 : static_cast<int>(truth.records[0].dz.size());
  std::string out = "t";
  for (int i = 1; i <= dim; ++i) out += ",x" + std::to_string(i);
  for (int i = 1; i <= obs_dim; ++i) out += ",dz" + std::to_string(i);
  out += "\n";
  for (std::size_t k = 0; k < truth.times.size(); ++k) {
    out += fmt(truth.times[k]);
    for (int i = 0; i < dim; ++i) out += "," + fmt(truth.states[k](i));
    // Row k carries the increment observed over the step starting at t_k;
    // no step starts at the final time, so its dz cells are zero.
    for (int i = 0; i < obs_dim; ++i) {
      out += ",";
      out += k < truth.records.size() ? fmt(truth.records[k].dz(i)) : "0";
    }
    out += "\n";
  }
  return out;
}

std::string belief_csv(const BeliefTrajectory& traj, int dim) {
  std::string out = "t";
  for (int i = 1; i <= dim; ++i) out += ",mu" + std::to_string(i);
  for (int i = 1; i <= dim; ++i) {
    for (int j = i; j <= dim; ++j) {
      out += ",p" + std::to_string(i) + std::to_string(j);
    }
  }
  out += ",floored\n";
  for (std::size_t k = 0; k < traj.beliefs.size(); ++k) {
    out += fmt(traj.times[k]);
    const GaussianBelief& q = traj.beliefs[k];
    for (int i = 0; i < dim; ++i) out += "," + fmt(q.mean()(i));
    for (int i = 0; i < dim; ++i) {
      for (int j = i; j < dim; ++j) out += "," + fmt(q.cov()(i, j));
    }
    const bool floored = k > 0 && traj.flags[k - 1].floored;
    out += floored ? ",1\n" : ",0\n";
  }
  return out;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  const auto t_start = std::chrono::steady_clock::now();

  const Scenario scenario = make_scenario(cfg.scenario, cfg.scenario_params);
  const int d = scenario.dynamics.dim;

  const Eigen::VectorXd prior_mean =
      Eigen::Map<const Eigen::VectorXd>(cfg.prior_mean.data(), d);
  const Eigen::VectorXd prior_cov_diag =
      Eigen::Map<const Eigen::VectorXd>(cfg.prior_cov.data(), d);
  const Eigen::VectorXd x0 = Eigen::Map<const Eigen::VectorXd>(cfg.x0.data(), d);
  const GaussianBelief prior(prior_mean,
                             prior_cov_diag.asDiagonal().toDenseMatrix());

  const TruthTrace truth = simulate_truth(
      scenario.dynamics, scenario.observation, x0, cfg.horizon, cfg.dt,
      cfg.seed);
  const auto steps = static_cast<std::int64_t>(truth.records.size());

  const std::vector<FilterKind> kinds = filter_kinds_of(cfg);
  std::vector<BeliefTrajectory> trajectories;
  trajectories.reserve(kinds.size());
  for (const FilterKind& kind : kinds) {
    trajectories.push_back(run_filter(kind, scenario, prior, truth.records,
                                      cfg.method, cfg.fixed_point));
  }

  // Optional particle reference: cloud moments per step plus the gap of
  // every filter mean against the cloud mean.
  std::vector<GaussianBelief> oracle_beliefs;
  std::int64_t oracle_resamples = 0;
  std::int64_t oracle_underflows = 0;
  double oracle_ess_min = 0.0;
  if (cfg.oracle_particles > 0) {
    ParticleEnsemble ens =
        init_ensemble(prior, cfg.oracle_particles, cfg.seed);
    oracle_beliefs.reserve(truth.records.size() + 1);
    oracle_beliefs.push_back(prior);
    oracle_ess_min = static_cast<double>(cfg.oracle_particles);
    for (const ObservationRecord& rec : truth.records) {
      ParticleStepInfo pinfo;
      ens = particle_oracle_step(ens, scenario.dynamics, scenario.observation,
                                 rec, &pinfo);
      oracle_beliefs.push_back(ensemble_moments(ens));
      oracle_ess_min = std::min(oracle_ess_min, pinfo.ess);
      if (pinfo.resampled) ++oracle_resamples;
      if (pinfo.underflow) ++oracle_underflows;
    }
  }

  const std::filesystem::path dir(cfg.output_directory);
  std::filesystem::create_directories(dir);

  write_file(dir / "truth.csv", truth_csv(truth, d));

  ExperimentResult result;
  result.output_directory = cfg.output_directory;
  result.steps = steps;

  std::string filters_json;
  for (std::size_t f = 0; f < kinds.size(); ++f) {
    const std::string& token = cfg.filter_kinds[f];
    const BeliefTrajectory& traj = trajectories[f];
    write_file(dir / ("belief_" + token + ".csv"), belief_csv(traj, d));

    const FilterMetrics metrics = compute_metrics(traj, truth);
    result.metrics[token] = metrics;

    if (!filters_json.empty()) filters_json += ",\n";
    filters_json += "    \"" + token + "\": {\n";
    filters_json += "      \"rmse\": " + fmt(metrics.rmse) + ",\n";
    filters_json += "      \"nees_mean\": " + fmt(metrics.nees_mean) + ",\n";
    filters_json +=
        "      \"flagged_steps\": " + std::to_string(metrics.flagged_steps);
    if (!oracle_beliefs.empty()) {
      std::vector<double> gap(traj.beliefs.size());
      for (std::size_t k = 0; k < traj.beliefs.size(); ++k) {
        gap[k] =
            (traj.beliefs[k].mean() - oracle_beliefs[k].mean()).norm();
      }
      filters_json += ",\n      \"oracle_mean_gap\": " + json_array(gap);
    }
    filters_json += "\n    }";
  }

  std::string json = "{\n";
  json += "  \"schema\": \"cvkf-metrics-v1\",\n";
  json += "  \"scenario\": \"" + json_escape(cfg.scenario) + "\",\n";
  json += "  \"seed\": " + std::to_string(cfg.seed) + ",\n";
  json += "  \"dt\": " + fmt(cfg.dt) + ",\n";
  json += "  \"horizon\": " + fmt(cfg.horizon) + ",\n";
  json += "  \"steps\": " + std::to_string(steps) + ",\n";
  json += "  \"filters\": {\n" + filters_json + "\n  },\n";
  if (!oracle_beliefs.empty()) {
    json += "  \"oracle\": {\n";
    json += "    \"particles\": " + std::to_string(cfg.oracle_particles) +
            ",\n";
    json += "    \"ess_min\": " + fmt(oracle_ess_min) + ",\n";
    json += "    \"resamples\": " + std::to_string(oracle_resamples) + ",\n";
    json += "    \"underflow_steps\": " + std::to_string(oracle_underflows) +
            "\n";
    json += "  },\n";
  }
  json += "  \"config_echo\": \"" + json_escape(emit_config(cfg)) + "\"\n";
  json += "}\n";
  write_file(dir / "metrics.json", json);

  const auto t_end = std::chrono::steady_clock::now();
  const double seconds =
      std::chrono::duration<double>(t_end - t_start).count();
  write_file(dir / "timing.json",
             "{\n  \"wall_time_seconds\": " + fmt(seconds) + "\n}\n");

  return result;
}

}  // namespace cvkf
