#include "cvkf/simulation.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace cvkf {

namespace {

std::mt19937_64 stream_engine(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{seed, stream};
  return std::mt19937_64(seq);
}

Eigen::MatrixXd noise_sqrt(const Eigen::MatrixXd& r, const char* who) {
  Eigen::LLT<Eigen::MatrixXd> llt(r);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument(std::string(who) +
                                ": observation noise is not positive definite");
  }
  return llt.matrixL();
}

}  // namespace

TruthTrace simulate_truth(const PotentialModel& dyn,
                          const ObservationModel& obs,
                          const Eigen::VectorXd& x0, double horizon,
                          double dt, std::uint64_t seed) {
  validate_model(dyn);
  validate_model(obs);
  if (x0.size() != dyn.dim) {
    throw std::invalid_argument("simulate_truth: x0 dimension mismatch");
  }
  if (!(dt > 0.0) || !(horizon > 0.0) || horizon < dt) {
    throw std::invalid_argument(
        "simulate_truth: need 0 < dt <= horizon");
  }

  const auto steps = static_cast<std::int64_t>(std::llround(horizon / dt));
  if (std::abs(static_cast<double>(steps) * dt - horizon) > 1e-9 * horizon) {
    throw std::invalid_argument(
        "simulate_truth: horizon must be an integer multiple of dt");
  }
  const int d = dyn.dim;
  const int m = obs.obs_dim;
  const Eigen::MatrixXd r_sqrt = noise_sqrt(obs.noise, "simulate_truth");
  const double state_scale = std::sqrt(2.0 * dyn.epsilon * dt);
  const double obs_scale = std::sqrt(dt);

  auto state_engine = stream_engine(seed, 0);
  auto obs_engine = stream_engine(seed, 1);
  std::normal_distribution<double> normal(0.0, 1.0);

  TruthTrace trace;
  trace.seed = seed;
  trace.times.reserve(steps + 1);
  trace.states.reserve(steps + 1);
  trace.records.reserve(steps);

  Eigen::VectorXd x = x0;
  trace.times.push_back(0.0);
  trace.states.push_back(x);
  Eigen::VectorXd xi(d), eta(m);
  for (std::int64_t k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    for (int i = 0; i < m; ++i) eta(i) = normal(obs_engine);
    ObservationRecord rec;
    rec.t = t;
    rec.dt = dt;
    rec.dz = obs.h(x) * dt + obs_scale * (r_sqrt * eta);
    trace.records.push_back(std::move(rec));

    for (int i = 0; i < d; ++i) xi(i) = normal(state_engine);
    x = x - dyn.grad(x) * dt + state_scale * xi;
    if (!x.allFinite()) {
      throw std::runtime_error("simulate_truth: state diverged at step " +
                               std::to_string(k));
    }
    trace.times.push_back(static_cast<double>(k + 1) * dt);
    trace.states.push_back(x);
  }
  return trace;
}

ParticleEnsemble init_ensemble(const GaussianBelief& prior,
                               std::int64_t count, std::uint64_t seed) {
  if (count < 2) {
    throw std::invalid_argument("init_ensemble: need at least two particles");
  }
  const int d = prior.dim();
  const Eigen::MatrixXd l = matrix_sqrt_psd(prior.cov());
  auto engine = stream_engine(seed, 2);
  std::normal_distribution<double> normal(0.0, 1.0);

  ParticleEnsemble ens;
  ens.particles.resize(count, d);
  ens.log_weights = Eigen::VectorXd::Zero(count);
  Eigen::VectorXd u(d);
  for (std::int64_t k = 0; k < count; ++k) {
    for (int i = 0; i < d; ++i) u(i) = normal(engine);
    ens.particles.row(k) = (prior.mean() + l * u).transpose();
  }
  ens.seed = engine();
  return ens;
}

ParticleEnsemble particle_oracle_step(const ParticleEnsemble& ensemble,
                                      const PotentialModel& dyn,
                                      const ObservationModel& obs,
                                      const ObservationRecord& record,
                                      ParticleStepInfo* info) {
  const auto n = ensemble.particles.rows();
  const int d = static_cast<int>(ensemble.particles.cols());
  if (n < 2 || ensemble.log_weights.size() != n) {
    throw std::invalid_argument("particle_oracle_step: malformed ensemble");
  }
  if (d != dyn.dim || d != obs.state_dim) {
    throw std::invalid_argument("particle_oracle_step: dimension mismatch");
  }
  const double dt = record.dt;
  if (!(dt > 0.0)) {
    throw std::invalid_argument("particle_oracle_step: dt must be positive");
  }
  Eigen::LLT<Eigen::MatrixXd> rllt(obs.noise * dt);
  if (rllt.info() != Eigen::Success) {
    throw std::invalid_argument(
        "particle_oracle_step: observation noise is not positive definite");
  }

  std::mt19937_64 engine(ensemble.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double state_scale = std::sqrt(2.0 * dyn.epsilon * dt);

  ParticleEnsemble out;
  out.particles.resize(n, d);
  out.log_weights = ensemble.log_weights;

  Eigen::VectorXd x(d), xi(d);
  for (Eigen::Index k = 0; k < n; ++k) {
    x = ensemble.particles.row(k).transpose();
    for (int i = 0; i < d; ++i) xi(i) = normal(engine);
    x = x - dyn.grad(x) * dt + state_scale * xi;
    const Eigen::VectorXd resid = record.dz - obs.h(x) * dt;
    out.log_weights(k) += -0.5 * resid.dot(rllt.solve(resid));
    out.particles.row(k) = x.transpose();
  }
  if (!out.log_weights.allFinite()) {
    throw std::runtime_error("particle_oracle_step: non-finite log-weights");
  }

  const double top = out.log_weights.maxCoeff();
  const Eigen::ArrayXd shifted = (out.log_weights.array() - top).exp();
  const double total = shifted.sum();
  const Eigen::ArrayXd w = shifted / total;
  const double ess = 1.0 / (w * w).sum();

  // Underflow: at most one particle still carries non-negligible weight.
  Eigen::Index live = 0;
  for (Eigen::Index k = 0; k < n; ++k) {
    if (out.log_weights(k) - top > -700.0) ++live;
  }
  const bool underflow = live <= 1;

  const bool resample = underflow || ess < 0.5 * static_cast<double>(n);
  if (resample) {
    // Systematic resampling: one uniform offset, n evenly spaced probes
    // through the cumulative weights.
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    const double offset = uniform(engine);
    Eigen::MatrixXd resampled(n, d);
    double cum = w(0);
    Eigen::Index j = 0;
    for (Eigen::Index k = 0; k < n; ++k) {
      const double probe =
          (static_cast<double>(k) + offset) / static_cast<double>(n);
      while (cum < probe && j + 1 < n) {
        ++j;
        cum += w(j);
      }
      resampled.row(k) = out.particles.row(j);
    }
    out.particles = std::move(resampled);
    out.log_weights.setZero();
  }

  out.seed = engine();
  if (info) {
    info->ess = ess;
    info->resampled = resample;
    info->underflow = underflow;
  }
  return out;
}

GaussianBelief ensemble_moments(const ParticleEnsemble& ensemble) {
  const auto n = ensemble.particles.rows();
  const int d = static_cast<int>(ensemble.particles.cols());
  if (n < 2) {
    throw std::invalid_argument("ensemble_moments: need at least two particles");
  }
  const double top = ensemble.log_weights.maxCoeff();
  const Eigen::ArrayXd shifted = (ensemble.log_weights.array() - top).exp();
  const Eigen::VectorXd w = (shifted / shifted.sum()).matrix();

  const Eigen::VectorXd mean = ensemble.particles.transpose() * w;
  const double wsq = w.squaredNorm();
  if (wsq >= 1.0 - 1e-12) {
    throw std::invalid_argument(
        "ensemble_moments: weights collapsed onto a single particle");
  }
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::VectorXd delta =
        ensemble.particles.row(k).transpose() - mean;
    cov += w(k) * delta * delta.transpose();
  }
  cov /= (1.0 - wsq);
  return GaussianBelief(mean, cov);
}

FilterMetrics compute_metrics(const BeliefTrajectory& traj,
                              const TruthTrace& truth) {
  const std::size_t count = std::min(traj.beliefs.size(), truth.states.size());
  if (count == 0) {
    throw std::invalid_argument("compute_metrics: empty inputs");
  }
  FilterMetrics metrics;
  metrics.nees.reserve(count);
  double sq_sum = 0.0;
  double nees_sum = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    const Eigen::VectorXd err = truth.states[i] - traj.beliefs[i].mean();
    sq_sum += err.squaredNorm();
    // Singular covariances are eigen-floored rather than fatal: the step is
    // counted as degenerate and the NEES uses the floored inverse.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(traj.beliefs[i].cov());
    if (es.info() != Eigen::Success) {
      throw std::runtime_error(
          "compute_metrics: eigendecomposition failed at step " +
          std::to_string(i));
    }
    const double floor =
        std::max(es.eigenvalues().cwiseAbs().maxCoeff(), 1.0) * 1e-12;
    if (es.eigenvalues().minCoeff() < floor) ++metrics.flagged_steps;
    const Eigen::VectorXd lifted = es.eigenvalues().cwiseMax(floor);
    const Eigen::VectorXd rotated = es.eigenvectors().transpose() * err;
    const double nees =
        (rotated.array().square() / lifted.array()).sum();
    metrics.nees.push_back(nees);
    nees_sum += nees;
  }
  metrics.rmse = std::sqrt(sq_sum / static_cast<double>(count));
  metrics.nees_mean = nees_sum / static_cast<double>(count);
  for (const StepFlags& f : traj.flags) {
    if (f.floored) ++metrics.flagged_steps;
  }
  return metrics;
}

}  // namespace cvkf
