#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>
#include <vector>

#include "cvkf/filter.hpp"
#include "cvkf/simulation.hpp"
#include "support/test_support.hpp"

using cvkf::BeliefTrajectory;
using cvkf::ExpectationMethod;
using cvkf::FilterKind;
using cvkf::FixedPointConfig;
using cvkf::GaussianBelief;
using cvkf::ParticleEnsemble;
using cvkf::ParticleStepInfo;
using cvkf::Scenario;
using cvkf::TruthTrace;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

VectorXd vec1(double v) { return VectorXd::Constant(1, v); }

GaussianBelief scalar_belief(double mu, double var) {
  return GaussianBelief(VectorXd::Constant(1, mu),
                        MatrixXd::Constant(1, 1, var));
}

const FilterKind kKalmanBucy{FilterKind::Family::KalmanBucy,
                             cvkf::PropagationKind::Explicit,
                             cvkf::UpdateKind::Precision};
const ExpectationMethod kExact = ExpectationMethod::exact_linear();
const FixedPointConfig kFp;

// linear-1d with the observation map zeroed out; epsilon stays 0.5.
Scenario diffusion_only() {
  return cvkf::make_scenario("linear-1d", {{"K", {0.0}}, {"H", {0.0}}});
}

ParticleEnsemble cloud_at(const std::vector<double>& xs,
                          const std::vector<double>& logw,
                          std::uint64_t seed) {
  ParticleEnsemble ens;
  const auto n = static_cast<Eigen::Index>(xs.size());
  ens.particles.resize(n, 1);
  ens.log_weights.resize(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    ens.particles(k, 0) = xs[static_cast<std::size_t>(k)];
    ens.log_weights(k) = logw[static_cast<std::size_t>(k)];
  }
  ens.seed = seed;
  return ens;
}

}  // namespace

TEST_CASE("noise-free simulation follows the deterministic euler flow") {
  // With eps = 0 the state recursion is x' = x (1 - K dt); after n steps
  // the exact value is (1 - dt)^n, which sits 2e-4 from e^-1 at dt = 1e-3.
  Scenario lin = cvkf::make_scenario("linear-1d");
  lin.dynamics.epsilon = 0.0;
  const auto truth = cvkf::simulate_truth(lin.dynamics, lin.observation,
                                          vec1(1.0), 1.0, 1e-3, 5);
  REQUIRE(truth.states.size() == 1001);
  const double end = truth.states.back()(0);
  CHECK(std::abs(end - std::pow(1.0 - 1e-3, 1000)) <= 1e-12);
  CHECK(std::abs(end - std::exp(-1.0)) <= 1e-3);
  CHECK(truth.times.front() == 0.0);
  CHECK(truth.times.back() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(truth.records.size() == 1000);
}

TEST_CASE("flat potential with zero diffusion leaves the state constant") {
  Scenario s = diffusion_only();
  s.dynamics.epsilon = 0.0;
  const auto truth = cvkf::simulate_truth(s.dynamics, s.observation,
                                          vec1(0.7), 0.5, 1e-2, 3);
  for (const auto& x : truth.states) {
    CHECK(x(0) == 0.7);
  }
}

TEST_CASE("observation increments decompose as drift plus shared noise") {
  // Two simulations from the same seed differ only in the observation map
  // (H = 0 vs H = 1); the observation noise stream is independent of the
  // state stream, so the dz difference recovers h(x) dt and the states are
  // bit-identical.
  Scenario flat = diffusion_only();
  const Scenario lin = cvkf::make_scenario("linear-1d", {{"K", {0.0}}});
  const auto a = cvkf::simulate_truth(flat.dynamics, flat.observation,
                                      vec1(0.4), 0.5, 1e-2, 21);
  const auto b = cvkf::simulate_truth(lin.dynamics, lin.observation,
                                      vec1(0.4), 0.5, 1e-2, 21);
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t k = 0; k < a.records.size(); ++k) {
    CHECK(a.states[k](0) == b.states[k](0));
    const double drift = b.states[k](0) * 1e-2;
    CHECK(std::abs(b.records[k].dz(0) - a.records[k].dz(0) - drift) <= 1e-12);
  }
}

TEST_CASE("simulated noise has the advertised diffusion scale") {
  // Flat potential: state increments are pure noise with variance
  // 2 eps dt = 0.01, and dz increments are pure observation noise with
  // variance R dt = 0.01. Sample variance over 1e5 steps has a relative
  // standard error of sqrt(2/n), about 0.45%.
  const Scenario s = diffusion_only();
  const auto truth = cvkf::simulate_truth(s.dynamics, s.observation,
                                          vec1(0.0), 1000.0, 1e-2, 77);
  const std::size_t n = truth.records.size();
  REQUIRE(n == 100000);
  double state_var = 0.0;
  double obs_var = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double dx = truth.states[k + 1](0) - truth.states[k](0);
    state_var += dx * dx;
    obs_var += truth.records[k].dz(0) * truth.records[k].dz(0);
  }
  state_var /= static_cast<double>(n);
  obs_var /= static_cast<double>(n);
  CHECK(state_var == doctest::Approx(2.0 * 0.5 * 1e-2).epsilon(0.03));
  CHECK(obs_var == doctest::Approx(1.0 * 1e-2).epsilon(0.03));
}

TEST_CASE("simulation is reproducible and seed-sensitive") {
  const Scenario lin = cvkf::make_scenario("linear-1d");
  const auto a = cvkf::simulate_truth(lin.dynamics, lin.observation,
                                      vec1(0.2), 0.5, 1e-2, 9);
  const auto b = cvkf::simulate_truth(lin.dynamics, lin.observation,
                                      vec1(0.2), 0.5, 1e-2, 9);
  const auto c = cvkf::simulate_truth(lin.dynamics, lin.observation,
                                      vec1(0.2), 0.5, 1e-2, 10);
  REQUIRE(a.states.size() == b.states.size());
  bool differs = false;
  for (std::size_t k = 0; k < a.states.size(); ++k) {
    CHECK(a.states[k](0) == b.states[k](0));
    if (a.states[k](0) != c.states[k](0)) differs = true;
  }
  for (std::size_t k = 0; k < a.records.size(); ++k) {
    CHECK(a.records[k].dz(0) == b.records[k].dz(0));
  }
  CHECK(differs);
}

TEST_CASE("simulation rejects bad grids and reports blow-ups") {
  const Scenario lin = cvkf::make_scenario("linear-1d");
  CHECK_THROWS_WITH_AS(
      cvkf::simulate_truth(lin.dynamics, lin.observation, vec1(0.0), 1.0, 0.3,
                           1),
      doctest::Contains("integer multiple"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(
      cvkf::simulate_truth(lin.dynamics, lin.observation, vec1(0.0), 0.5, -1e-2,
                           1),
      doctest::Contains("0 < dt"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(
      cvkf::simulate_truth(lin.dynamics, lin.observation, VectorXd::Zero(2),
                           0.5, 1e-2, 1),
      doctest::Contains("dimension mismatch"), std::invalid_argument);

  // The double-well cubic drift explodes under euler from far enough out.
  const Scenario dw = cvkf::make_scenario("double-well-1d");
  CHECK_THROWS_WITH_AS(
      cvkf::simulate_truth(dw.dynamics, dw.observation, vec1(1e8), 1.0, 0.1,
                           1),
      doctest::Contains("diverged"), std::runtime_error);
}

TEST_CASE("ensembles sample the prior and chain their seeds") {
  const GaussianBelief prior(Eigen::Vector2d(0.3, -0.2),
                             (MatrixXd(2, 2) << 1.0, 0.3, 0.3, 0.5).finished());
  const ParticleEnsemble a = cvkf::init_ensemble(prior, 1000000, 314);
  const ParticleEnsemble b = cvkf::init_ensemble(prior, 1000000, 314);
  CHECK(a.seed == b.seed);
  CHECK(a.particles(0, 0) == b.particles(0, 0));
  CHECK((a.log_weights.array() == 0.0).all());

  const GaussianBelief mom = cvkf::ensemble_moments(a);
  CHECK(std::abs(mom.mean()(0) - 0.3) <= 0.01);
  CHECK(std::abs(mom.mean()(1) + 0.2) <= 0.01);
  CHECK(mom.cov()(0, 0) == doctest::Approx(1.0).epsilon(0.01));
  CHECK(mom.cov()(1, 1) == doctest::Approx(0.5).epsilon(0.01));
  CHECK(mom.cov()(0, 1) == doctest::Approx(0.3).epsilon(0.01));

  CHECK_THROWS_WITH_AS(cvkf::init_ensemble(prior, 1, 5),
                       doctest::Contains("at least two"),
                       std::invalid_argument);
}

TEST_CASE("zero observation map reduces the oracle to pure propagation") {
  // h = 0 makes every particle equally likely, whatever dz says: the
  // normalized weights cannot change and nothing resamples. With eps = 0
  // and K = 1 the propagation itself is the deterministic euler map.
  Scenario lin = cvkf::make_scenario("linear-1d", {{"H", {0.0}}});
  lin.dynamics.epsilon = 0.0;
  const std::vector<double> xs = {-0.5, 0.1, 0.8, 1.5};
  const std::vector<double> lw = {-1.0, -0.3, 0.0, -0.7};
  const ParticleEnsemble ens = cloud_at(xs, lw, 99);
  ParticleStepInfo info;
  const ParticleEnsemble out = cvkf::particle_oracle_step(
      ens, lin.dynamics, lin.observation, {0.0, 1e-2, vec1(0.37)}, &info);
  CHECK(!info.resampled);
  CHECK(!info.underflow);
  const VectorXd shift = out.log_weights - ens.log_weights;
  CHECK((shift.array() - shift(0)).abs().maxCoeff() <= 1e-15);
  for (std::size_t k = 0; k < xs.size(); ++k) {
    CHECK(out.particles(static_cast<Eigen::Index>(k), 0) ==
          doctest::Approx(xs[k] * (1.0 - 1e-2)).epsilon(1e-14));
  }
}

TEST_CASE("coincident particles yield their position whatever the data") {
  Scenario lin = cvkf::make_scenario("linear-1d", {{"K", {0.0}}});
  lin.dynamics.epsilon = 0.0;
  for (double dz : {0.0, 0.5, -2.0}) {
    const ParticleEnsemble ens = cloud_at({0.7, 0.7}, {0.0, 0.0}, 11);
    const ParticleEnsemble out = cvkf::particle_oracle_step(
        ens, lin.dynamics, lin.observation, {0.0, 1e-2, vec1(dz)});
    const GaussianBelief mom = cvkf::ensemble_moments(out);
    CHECK(mom.mean()(0) == doctest::Approx(0.7).epsilon(1e-14));
    CHECK(std::abs(mom.cov()(0, 0)) <= 1e-14);
  }
}

TEST_CASE("weight collapse forces a flagged resample") {
  // H = 400 puts the far particle 800 nats below the near one:
  // (400 * 1 * 0.01)^2 / (2 * 1 * 0.01) = 800 > 700, so only one particle
  // stays live and the cloud is rebuilt from it.
  Scenario lin = cvkf::make_scenario("linear-1d", {{"K", {0.0}}, {"H", {400.0}}});
  lin.dynamics.epsilon = 0.0;
  const ParticleEnsemble ens = cloud_at({0.0, 1.0}, {0.0, 0.0}, 123);
  ParticleStepInfo info;
  const ParticleEnsemble out = cvkf::particle_oracle_step(
      ens, lin.dynamics, lin.observation, {0.0, 1e-2, vec1(0.0)}, &info);
  CHECK(info.underflow);
  CHECK(info.resampled);
  CHECK(info.ess <= 1.0 + 1e-9);
  CHECK((out.log_weights.array() == 0.0).all());
  for (Eigen::Index k = 0; k < out.particles.rows(); ++k) {
    CHECK(out.particles(k, 0) == 0.0);
  }
}

TEST_CASE("systematic resampling preserves the weighted mean on average") {
  // Flat dynamics, zero observation map: the only randomness inside the
  // step is the resampling offset, so post-resample means must scatter
  // around the pre-resample weighted mean without bias.
  Scenario s = diffusion_only();
  s.dynamics.epsilon = 0.0;
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int trials = 100;
  std::vector<double> diffs;
  for (int t = 0; t < trials; ++t) {
    const Eigen::Index n = 400;
    ParticleEnsemble ens;
    ens.particles.resize(n, 1);
    ens.log_weights.resize(n);
    for (Eigen::Index k = 0; k < n; ++k) {
      ens.particles(k, 0) = normal(rng);
      ens.log_weights(k) = k < 40 ? 0.0 : -4.0;
    }
    ens.seed = 9000 + static_cast<std::uint64_t>(t);
    const double pre = cvkf::ensemble_moments(ens).mean()(0);
    ParticleStepInfo info;
    const ParticleEnsemble out = cvkf::particle_oracle_step(
        ens, s.dynamics, s.observation, {0.0, 1e-2, vec1(0.0)}, &info);
    REQUIRE(info.resampled);
    REQUIRE(!info.underflow);
    diffs.push_back(cvkf::ensemble_moments(out).mean()(0) - pre);
  }
  double mean = 0.0;
  for (double d : diffs) mean += d;
  mean /= trials;
  double var = 0.0;
  for (double d : diffs) var += (d - mean) * (d - mean);
  var /= trials - 1;
  CHECK(std::abs(mean) <= 3.0 * std::sqrt(var / trials));
}

TEST_CASE("particle oracle chains are reproducible from the initial seed") {
  const Scenario lin = cvkf::make_scenario("linear-1d");
  const auto truth = cvkf::simulate_truth(lin.dynamics, lin.observation,
                                          vec1(0.3), 0.1, 1e-2, 4);
  const GaussianBelief prior = scalar_belief(0.3, 0.5);
  auto run_chain = [&]() {
    ParticleEnsemble ens = cvkf::init_ensemble(prior, 200, 55);
    for (const auto& rec : truth.records) {
      ens = cvkf::particle_oracle_step(ens, lin.dynamics, lin.observation, rec);
    }
    return ens;
  };
  const ParticleEnsemble a = run_chain();
  const ParticleEnsemble b = run_chain();
  CHECK(a.seed == b.seed);
  CHECK((a.particles.array() == b.particles.array()).all());
  CHECK((a.log_weights.array() == b.log_weights.array()).all());
}

TEST_CASE("particle oracle tracks the linear filter within its own noise") {
  // N = 1e5 on linear-1d: the weighted particle mean should sit within
  // 3 within-run standard errors, sqrt(cov / ess), of the exact linear
  // filter at every step. Frozen seeds; the worst observed ratio for this
  // pair is 0.75.
  const Scenario lin = cvkf::make_scenario("linear-1d");
  const auto truth = cvkf::simulate_truth(lin.dynamics, lin.observation,
                                          vec1(0.3), 1.0, 1e-2, 11);
  const GaussianBelief prior = scalar_belief(0.3, 0.5);
  const auto kb =
      cvkf::run_filter(kKalmanBucy, lin, prior, truth.records, kExact, kFp);
  ParticleEnsemble ens = cvkf::init_ensemble(prior, 100000, 501);
  for (std::size_t k = 0; k < truth.records.size(); ++k) {
    ParticleStepInfo info;
    ens = cvkf::particle_oracle_step(ens, lin.dynamics, lin.observation,
                                     truth.records[k], &info);
    const GaussianBelief mom = cvkf::ensemble_moments(ens);
    const double stderr_k = std::sqrt(mom.cov()(0, 0) / info.ess);
    CHECK(std::abs(mom.mean()(0) - kb.beliefs[k + 1].mean()(0)) <=
          3.0 * stderr_k);
  }
}

TEST_CASE("particle error against the linear filter shrinks as n^-1/2") {
  const Scenario lin = cvkf::make_scenario("linear-1d");
  const auto truth = cvkf::simulate_truth(lin.dynamics, lin.observation,
                                          vec1(0.3), 0.5, 5e-3, 42);
  const GaussianBelief prior = scalar_belief(0.3, 0.5);
  const auto kb =
      cvkf::run_filter(kKalmanBucy, lin, prior, truth.records, kExact, kFp);
  const std::vector<double> ns = {1e3, 1e4, 1e5};
  std::vector<double> gaps;
  for (double nd : ns) {
    double sq = 0.0;
    int cnt = 0;
    for (unsigned c = 0; c < 5; ++c) {
      ParticleEnsemble ens = cvkf::init_ensemble(
          prior, static_cast<std::int64_t>(nd), 1000 + c);
      for (std::size_t k = 0; k < truth.records.size(); ++k) {
        ens = cvkf::particle_oracle_step(ens, lin.dynamics, lin.observation,
                                         truth.records[k]);
        const double diff = cvkf::ensemble_moments(ens).mean()(0) -
                            kb.beliefs[k + 1].mean()(0);
        sq += diff * diff;
        ++cnt;
      }
    }
    gaps.push_back(std::sqrt(sq / cnt));
  }
  const double slope = cvkf::test::log_log_slope(ns, gaps);
  CHECK(slope >= -0.7);
  CHECK(slope <= -0.3);
}

TEST_CASE("ensemble moments use the documented shrinkage correction") {
  // Equal weights on {-1, +1}: the weighted population covariance is 1 and
  // the 1 / (1 - sum w^2) correction doubles it.
  const ParticleEnsemble pair = cloud_at({-1.0, 1.0}, {0.0, 0.0}, 1);
  const GaussianBelief mom = cvkf::ensemble_moments(pair);
  CHECK(mom.mean()(0) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(mom.cov()(0, 0) == doctest::Approx(2.0).epsilon(1e-12));

  const ParticleEnsemble same = cloud_at({0.4, 0.4, 0.4}, {0.0, -1.0, 2.0}, 1);
  const GaussianBelief flat = cvkf::ensemble_moments(same);
  CHECK(flat.mean()(0) == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(std::abs(flat.cov()(0, 0)) <= 1e-15);

  ParticleEnsemble lone;
  lone.particles.resize(1, 1);
  lone.particles(0, 0) = 0.0;
  lone.log_weights = VectorXd::Zero(1);
  CHECK_THROWS_WITH_AS(cvkf::ensemble_moments(lone),
                       doctest::Contains("at least two"),
                       std::invalid_argument);

  const ParticleEnsemble collapsed = cloud_at({0.0, 1.0}, {0.0, -800.0}, 1);
  CHECK_THROWS_WITH_AS(cvkf::ensemble_moments(collapsed),
                       doctest::Contains("collapsed"), std::invalid_argument);
}

TEST_CASE("metrics reproduce hand-computed errors") {
  TruthTrace truth;
  BeliefTrajectory traj;
  for (int k = 0; k < 4; ++k) {
    truth.times.push_back(0.1 * k);
    truth.states.push_back(vec1(0.5 * k));
    traj.times.push_back(0.1 * k);
    traj.beliefs.push_back(scalar_belief(0.5 * k, 0.25));
  }
  const cvkf::FilterMetrics exact_fit = cvkf::compute_metrics(traj, truth);
  CHECK(exact_fit.rmse == 0.0);
  CHECK(exact_fit.nees_mean == 0.0);
  CHECK(exact_fit.flagged_steps == 0);

  // Constant error 0.5 against variance 0.25: nees = 1 at every step.
  BeliefTrajectory offset = traj;
  for (auto& q : offset.beliefs) {
    q = scalar_belief(q.mean()(0) - 0.5, 0.25);
  }
  const cvkf::FilterMetrics biased = cvkf::compute_metrics(offset, truth);
  CHECK(biased.rmse == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(biased.nees_mean == doctest::Approx(1.0).epsilon(1e-12));
  for (double v : biased.nees) {
    CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
  }

  CHECK_THROWS_WITH_AS(cvkf::compute_metrics(BeliefTrajectory{}, truth),
                       doctest::Contains("empty"), std::invalid_argument);
}

TEST_CASE("metrics floor singular covariances instead of aborting") {
  TruthTrace truth;
  BeliefTrajectory traj;
  truth.times = {0.0, 0.1};
  truth.states = {vec1(0.0), vec1(1.0)};
  traj.times = truth.times;
  traj.beliefs.push_back(scalar_belief(0.0, 0.25));
  traj.beliefs.push_back(scalar_belief(1.0, 0.0));
  const cvkf::FilterMetrics mets = cvkf::compute_metrics(traj, truth);
  CHECK(mets.flagged_steps == 1);
  CHECK(mets.nees[1] == 0.0);
  CHECK(std::isfinite(mets.nees_mean));
}

TEST_CASE("linear filter consistency holds over a long horizon") {
  // nees_mean of the exact linear filter should sit near d = 1. Successive
  // nees values decorrelate over the closed-loop time constant (about 0.7
  // time units here), so 500 time units give roughly 700 independent
  // samples; the band below leaves room for that and for the O(dt) euler
  // bias. Frozen seed observes 0.922.
  const Scenario lin = cvkf::make_scenario("linear-1d");
  const auto truth = cvkf::simulate_truth(lin.dynamics, lin.observation,
                                          vec1(0.0), 500.0, 0.05, 123);
  const GaussianBelief prior = scalar_belief(0.0, 1.0);
  const auto kb =
      cvkf::run_filter(kKalmanBucy, lin, prior, truth.records, kExact, kFp);
  const cvkf::FilterMetrics mets = cvkf::compute_metrics(kb, truth);
  CHECK(mets.nees_mean >= 0.75);
  CHECK(mets.nees_mean <= 1.25);
  CHECK(mets.flagged_steps == 0);
  CHECK(mets.rmse > 0.0);
}
