#include "cvkf/propagation.hpp"

#include <cmath>
#include <stdexcept>

namespace cvkf {

namespace {

void check_dt(double dt, const char* who) {
  if (!(dt >= 0.0) || !std::isfinite(dt)) {
    throw std::invalid_argument(std::string(who) +
                                ": dt must be finite and nonnegative");
  }
}

GaussianBelief apply_drift(const GaussianBelief& q, const DriftStats& stats,
                           double dt, double epsilon) {
  const int d = q.dim();
  const Eigen::VectorXd mu = q.mean() + dt * stats.b;
  const Eigen::MatrixXd ap = stats.a * q.cov();
  const Eigen::MatrixXd cov =
      q.cov() + dt * (ap + ap.transpose()) +
      2.0 * epsilon * dt * Eigen::MatrixXd::Identity(d, d);
  return GaussianBelief(mu, cov);
}

}  // namespace

GaussianBelief jko_step_explicit(const GaussianBelief& q,
                                 const PotentialModel& model, double dt,
                                 const ExpectationMethod& method,
                                 StepInfo* info) {
  check_dt(dt, "jko_step_explicit");
  validate_model(model);
  if (dt == 0.0) {
    if (info) *info = StepInfo{};
    return q;
  }
  const DriftStats stats = drift_stats(model, q, method);
  GaussianBelief out = apply_drift(q, stats, dt, model.epsilon);
  if (info) {
    info->iterations = 0;
    info->residual = 0.0;
    info->converged = true;
    info->floored = out.floored();
  }
  return out;
}

GaussianBelief jko_step_implicit(const GaussianBelief& q,
                                 const PotentialModel& model, double dt,
                                 const ExpectationMethod& method,
                                 const FixedPointConfig& fp, StepInfo* info) {
  check_dt(dt, "jko_step_implicit");
  validate_model(model);
  validate(fp);

  bool floored = false;
  GaussianBelief cur = jko_step_explicit(q, model, dt, method);
  floored |= cur.floored();

  for (int iter = 1; iter <= fp.max_iter; ++iter) {
    const DriftStats stats = drift_stats(model, cur, method);
    const GaussianBelief cand = apply_drift(q, stats, dt, model.epsilon);
    floored |= cand.floored();
    const double residual =
        std::max((cand.mean() - cur.mean()).cwiseAbs().maxCoeff(),
                 (cand.cov() - cur.cov()).cwiseAbs().maxCoeff());
    if (residual <= fp.tol) {
      if (info) {
        info->iterations = iter;
        info->residual = residual;
        info->converged = true;
        info->floored = floored;
      }
      return cand;
    }
    if (iter == fp.max_iter) {
      throw FixedPointError("jko_step_implicit: no convergence", iter,
                            residual);
    }
    const Eigen::VectorXd mu =
        (1.0 - fp.damping) * cur.mean() + fp.damping * cand.mean();
    const Eigen::MatrixXd cov =
        (1.0 - fp.damping) * cur.cov() + fp.damping * cand.cov();
    cur = GaussianBelief(mu, cov);
    floored |= cur.floored();
  }
  throw FixedPointError("jko_step_implicit: no convergence", fp.max_iter, 0.0);
}

double jko_objective(const GaussianBelief& q_cand,
                     const GaussianBelief& q_prev,
                     const PotentialModel& model, double dt,
                     const ExpectationMethod& method) {
  if (!(dt > 0.0)) {
    throw std::invalid_argument("jko_objective: dt must be positive");
  }
  validate_model(model);

  double expected_v = 0.0;
  if (method.kind == ExpectationMethod::Kind::ExactLinear) {
    if (!model.quadratic_form) {
      throw std::invalid_argument(
          "jko_objective: exact-linear requires a declared quadratic "
          "potential");
    }
    const Eigen::MatrixXd& k = *model.quadratic_form;
    expected_v = 0.5 * (q_cand.mean().dot(k * q_cand.mean()) +
                        (k * q_cand.cov()).trace());
  } else {
    expected_v = expect(
        [&](const Eigen::VectorXd& x) { return model.potential(x); }, q_cand,
        method);
  }

  const double neg_entropy = -gaussian_entropy(q_cand);
  const double penalty =
      bures_wasserstein_distance_sq(q_cand, q_prev) / (2.0 * dt);
  return expected_v + model.epsilon * neg_entropy + penalty;
}

}  // namespace cvkf
