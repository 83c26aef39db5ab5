// Ground-truth simulation, the bootstrap particle reference, and summary
// metrics. Everything here is seeded and deterministic for a fixed
// platform and standard library.
#pragma once

#include <cstdint>
#include <vector>

#include "cvkf/filter.hpp"
#include "cvkf/gaussian.hpp"
#include "cvkf/models.hpp"
#include "cvkf/record.hpp"

namespace cvkf {

struct TruthTrace {
  std::vector<double> times;            // 0, dt, ..., horizon
  std::vector<Eigen::VectorXd> states;  // one per time
  std::vector<ObservationRecord> records;
  std::uint64_t seed = 0;
};

// Euler-Maruyama simulation of state and accumulated observation
// increments:
//   x_{k+1} = x_k - grad V(x_k) dt + sqrt(2 eps dt) xi_k
//   dz_k    = h(x_k) dt + sqrt(dt) R^1/2 eta_k
// State and observation noise come from two independent streams derived
// from the seed, so the same state path is observed identically at any
// observation noise level.
TruthTrace simulate_truth(const PotentialModel& dyn,
                          const ObservationModel& obs,
                          const Eigen::VectorXd& x0, double horizon,
                          double dt, std::uint64_t seed);

// Weighted particle cloud. seed is the stream used for the next step; each
// step hands a freshly drawn successor seed to its output so a chain of
// steps is reproducible from the initial seed alone.
struct ParticleEnsemble {
  Eigen::MatrixXd particles;  // count x dim, one row per particle
  Eigen::VectorXd log_weights;
  std::uint64_t seed = 0;
};

ParticleEnsemble init_ensemble(const GaussianBelief& prior,
                               std::int64_t count, std::uint64_t seed);

struct ParticleStepInfo {
  double ess = 0.0;
  bool resampled = false;
  bool underflow = false;
};

// Bootstrap step: propagate every particle by Euler-Maruyama, add the
// increment log-likelihood log N(dz; h(x) dt, R dt) at the propagated
// position, then systematically resample when the effective sample size
// drops below half the particle count. A cloud whose weights have
// collapsed (every log-weight 700 nats below the best) is resampled
// unconditionally and flagged.
ParticleEnsemble particle_oracle_step(const ParticleEnsemble& ensemble,
                                      const PotentialModel& dyn,
                                      const ObservationModel& obs,
                                      const ObservationRecord& record,
                                      ParticleStepInfo* info = nullptr);

// Weighted mean and covariance of the cloud, with the covariance scaled by
// 1 / (1 - sum w_i^2) to undo small-sample shrinkage.
GaussianBelief ensemble_moments(const ParticleEnsemble& ensemble);

struct FilterMetrics {
  double rmse = 0.0;
  double nees_mean = 0.0;
  std::vector<double> nees;  // one per compared time
  int flagged_steps = 0;
};

// Error metrics of a belief trajectory against the simulated truth:
// rmse of the mean error and the normalized estimation error squared
// (x - mu)' P^-1 (x - mu) whose average should sit near the state
// dimension for a consistent filter. Near-singular covariances are
// eigen-floored instead of fatal; flagged_steps counts them together with
// the trajectory's own degeneracy flags.
FilterMetrics compute_metrics(const BeliefTrajectory& traj,
                              const TruthTrace& truth);

}  // namespace cvkf
