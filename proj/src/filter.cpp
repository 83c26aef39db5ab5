#include "cvkf/filter.hpp"

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace cvkf {

std::string to_string(const FilterKind& kind) {
  switch (kind.family) {
    case FilterKind::Family::KalmanBucy:
      return "kalman-bucy";
    case FilterKind::Family::PropagationOnly:
      return "propagation-only";
    case FilterKind::Family::UpdateOnly:
      return "update-only";
    case FilterKind::Family::Cvkf:
      break;
  }
  std::string name = "cvkf-";
  name += kind.propagation == PropagationKind::Explicit ? "explicit" : "implicit";
  name += "-";
  switch (kind.update) {
    case UpdateKind::Precision:
      name += "precision";
      break;
    case UpdateKind::Covariance:
      name += "covariance";
      break;
    case UpdateKind::NaturalGradient:
      name += "natural-gradient";
      break;
  }
  return name;
}

GaussianBelief cvkf_step(const GaussianBelief& q, const PotentialModel& dyn,
                         const ObservationModel& obs,
                         const Eigen::VectorXd& dz, double dt,
                         const ExpectationMethod& method,
                         const FixedPointConfig& fp,
                         PropagationKind propagation, UpdateKind update,
                         StepInfo* info) {
  StepInfo prop_info;
  GaussianBelief predicted =
      propagation == PropagationKind::Explicit
          ? jko_step_explicit(q, dyn, dt, method, &prop_info)
          : jko_step_implicit(q, dyn, dt, method, fp, &prop_info);

  StepInfo up_info;
  GaussianBelief posterior = [&] {
    switch (update) {
      case UpdateKind::Precision:
        return lmmr_step_precision(predicted, obs, dz, dt, method, fp,
                                   &up_info);
      case UpdateKind::Covariance:
        return lmmr_step_covariance(predicted, obs, dz, dt, method, fp,
                                    &up_info);
      case UpdateKind::NaturalGradient:
        return natural_gradient_step(predicted, obs, dz, dt, method, fp,
                                     &up_info);
    }
    throw std::invalid_argument("cvkf_step: unknown update kind");
  }();

  if (info) {
    info->iterations = prop_info.iterations + up_info.iterations;
    info->residual = std::max(prop_info.residual, up_info.residual);
    info->converged = prop_info.converged && up_info.converged;
    info->floored = prop_info.floored || up_info.floored;
  }
  return posterior;
}

GaussianBelief kalman_bucy_step(const GaussianBelief& q,
                                const LinearModelPair& lin,
                                const Eigen::VectorXd& dz, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw std::invalid_argument("kalman_bucy_step: dt must be positive");
  }
  const int d = q.dim();
  if (lin.f.rows() != d || lin.g.cols() != d || dz.size() != lin.g.rows()) {
    throw std::invalid_argument("kalman_bucy_step: dimension mismatch");
  }
  Eigen::LLT<Eigen::MatrixXd> rllt(lin.r);
  if (rllt.info() != Eigen::Success) {
    throw std::invalid_argument(
        "kalman_bucy_step: observation noise is not positive definite");
  }

  const Eigen::MatrixXd gain = q.cov() * lin.g.transpose();
  const Eigen::VectorXd innovation = dz - lin.g * q.mean() * dt;
  const Eigen::VectorXd mu =
      q.mean() + lin.f * q.mean() * dt + gain * rllt.solve(innovation);

  const Eigen::MatrixXd fp = lin.f * q.cov();
  const Eigen::MatrixXd gp = gain * rllt.solve(gain.transpose());
  const Eigen::MatrixXd cov =
      q.cov() + dt * (fp + fp.transpose() - gp +
                      2.0 * lin.epsilon *
                          Eigen::MatrixXd::Identity(d, d));
  return GaussianBelief(mu, cov);
}

RiccatiTrajectory riccati_reference(const LinearModelPair& lin,
                                    const Eigen::MatrixXd& p0, double horizon,
                                    double dt) {
  if (!(dt > 0.0) || !(horizon > 0.0)) {
    throw std::invalid_argument("riccati_reference: need positive dt, horizon");
  }
  const int d = static_cast<int>(p0.rows());
  Eigen::LLT<Eigen::MatrixXd> rllt(lin.r);
  if (rllt.info() != Eigen::Success) {
    throw std::invalid_argument(
        "riccati_reference: observation noise is not positive definite");
  }
  const Eigen::MatrixXd grg =
      lin.g.transpose() * rllt.solve(lin.g);

  auto rhs = [&](const Eigen::MatrixXd& p) -> Eigen::MatrixXd {
    const Eigen::MatrixXd fp = lin.f * p;
    return fp + fp.transpose() - p * grg * p +
           2.0 * lin.epsilon * Eigen::MatrixXd::Identity(d, d);
  };

  const auto steps = static_cast<std::int64_t>(std::llround(horizon / dt));
  RiccatiTrajectory out;
  out.times.reserve(steps + 1);
  out.covariances.reserve(steps + 1);
  Eigen::MatrixXd p = 0.5 * (p0 + p0.transpose());
  out.times.push_back(0.0);
  out.covariances.push_back(p);
  for (std::int64_t k = 0; k < steps; ++k) {
    const Eigen::MatrixXd k1 = rhs(p);
    const Eigen::MatrixXd k2 = rhs(p + 0.5 * dt * k1);
    const Eigen::MatrixXd k3 = rhs(p + 0.5 * dt * k2);
    const Eigen::MatrixXd k4 = rhs(p + dt * k3);
    p += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    p = 0.5 * (p + p.transpose());
    out.times.push_back(static_cast<double>(k + 1) * dt);
    out.covariances.push_back(p);
  }
  return out;
}

BeliefTrajectory run_filter(const FilterKind& kind, const Scenario& scenario,
                            const GaussianBelief& prior,
                            const std::vector<ObservationRecord>& records,
                            const ExpectationMethod& method,
                            const FixedPointConfig& fp) {
  if (records.empty()) {
    BeliefTrajectory out;
    out.times.push_back(0.0);
    out.beliefs.push_back(prior);
    return out;
  }
  const double dt = records.front().dt;
  if (!(dt > 0.0)) {
    throw std::invalid_argument("run_filter: dt must be positive");
  }
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (std::abs(records[i].dt - dt) > 1e-9 * dt) {
      throw std::invalid_argument(
          "run_filter: records must share a uniform dt, record " +
          std::to_string(i) + " differs");
    }
    if (i > 0 && !(records[i].t > records[i - 1].t)) {
      throw std::invalid_argument(
          "run_filter: record times must be strictly increasing");
    }
  }
  if (kind.family == FilterKind::Family::KalmanBucy && !scenario.linear) {
    throw std::invalid_argument(
        "run_filter: kalman-bucy requires a linear scenario");
  }

  BeliefTrajectory out;
  out.times.reserve(records.size() + 1);
  out.beliefs.reserve(records.size() + 1);
  out.flags.reserve(records.size());
  out.times.push_back(records.front().t);
  out.beliefs.push_back(prior);

  GaussianBelief q = prior;
  for (std::size_t i = 0; i < records.size(); ++i) {
    StepInfo info;
    try {
      switch (kind.family) {
        case FilterKind::Family::Cvkf:
          q = cvkf_step(q, scenario.dynamics, scenario.observation,
                        records[i].dz, records[i].dt, method, fp,
                        kind.propagation, kind.update, &info);
          break;
        case FilterKind::Family::KalmanBucy:
          q = kalman_bucy_step(q, *scenario.linear, records[i].dz,
                               records[i].dt);
          break;
        case FilterKind::Family::PropagationOnly:
          q = kind.propagation == PropagationKind::Explicit
                  ? jko_step_explicit(q, scenario.dynamics, records[i].dt,
                                      method, &info)
                  : jko_step_implicit(q, scenario.dynamics, records[i].dt,
                                      method, fp, &info);
          break;
        case FilterKind::Family::UpdateOnly:
          switch (kind.update) {
            case UpdateKind::Precision:
              q = lmmr_step_precision(q, scenario.observation, records[i].dz,
                                      records[i].dt, method, fp, &info);
              break;
            case UpdateKind::Covariance:
              q = lmmr_step_covariance(q, scenario.observation, records[i].dz,
                                       records[i].dt, method, fp, &info);
              break;
            case UpdateKind::NaturalGradient:
              q = natural_gradient_step(q, scenario.observation,
                                        records[i].dz, records[i].dt, method,
                                        fp, &info);
              break;
          }
          break;
      }
    } catch (const std::exception& e) {
      throw std::runtime_error("run_filter: step " + std::to_string(i) +
                               " failed: " + e.what());
    }
    if (!q.mean().allFinite() || !q.cov().allFinite()) {
      throw std::runtime_error("run_filter: non-finite belief at step " +
                               std::to_string(i));
    }
    out.times.push_back(records[i].t + records[i].dt);
    out.beliefs.push_back(q);
    out.flags.push_back({info.floored, info.iterations});
  }
  return out;
}

}  // namespace cvkf
