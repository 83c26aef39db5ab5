#include "cvkf/update.hpp"

#include <cmath>
#include <stdexcept>

namespace cvkf {

namespace {

void check_inputs(const GaussianBelief& q, const ObservationModel& model,
                  const Eigen::VectorXd& dz, double dt, const char* who) {
  validate_model(model);
  if (q.dim() != model.state_dim) {
    throw std::invalid_argument(std::string(who) + ": belief dim " +
                                std::to_string(q.dim()) + " vs model dim " +
                                std::to_string(model.state_dim));
  }
  if (dz.size() != model.obs_dim) {
    throw std::invalid_argument(std::string(who) + ": dz size mismatch");
  }
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw std::invalid_argument(std::string(who) + ": dt must be positive");
  }
}

Eigen::MatrixXd precision_of(const Eigen::MatrixXd& cov, const char* who) {
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument(std::string(who) +
                                ": covariance is not positive definite");
  }
  return llt.solve(Eigen::MatrixXd::Identity(cov.rows(), cov.cols()));
}

// E_q[hess log p] through the Gaussian integration-by-parts identity,
// using the expected cross term dh centered on q's own mean.
Eigen::MatrixXd expected_loglik_hessian(const GaussianBelief& q,
                                        const Eigen::MatrixXd& dh,
                                        const char* who) {
  const Eigen::MatrixXd lambda = precision_of(q.cov(), who);
  const Eigen::MatrixXd raw = lambda * dh;
  return 0.5 * (raw + raw.transpose());
}

// Inverts a precision matrix, eigen-flooring it first when it went
// indefinite during iteration. Sets *floored accordingly.
Eigen::MatrixXd invert_precision(const Eigen::MatrixXd& lambda,
                                 bool* floored) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
      0.5 * (lambda + lambda.transpose()));
  if (es.info() != Eigen::Success) {
    throw std::runtime_error("invert_precision: eigendecomposition failed");
  }
  const double biggest = es.eigenvalues().cwiseAbs().maxCoeff();
  const double floor = std::max(biggest, 1.0) * 1e-12;
  if (es.eigenvalues().minCoeff() <= 0.0) *floored = true;
  const Eigen::VectorXd lifted = es.eigenvalues().cwiseMax(floor);
  return es.eigenvectors() * lifted.cwiseInverse().asDiagonal() *
         es.eigenvectors().transpose();
}

struct Iterate {
  Eigen::VectorXd mu;
  Eigen::MatrixXd cov;
};

// Shared damped-substitution loop. step maps the current iterate belief to
// the next candidate; mixing happens on (mean, covariance).
template <class StepFn>
GaussianBelief solve_fixed_point(GaussianBelief init, StepFn&& step,
                                 const FixedPointConfig& fp, const char* who,
                                 bool* floored_io, StepInfo* info) {
  GaussianBelief cur = std::move(init);
  for (int iter = 1; iter <= fp.max_iter; ++iter) {
    const Iterate cand = step(cur);
    const double residual =
        std::max((cand.mu - cur.mean()).cwiseAbs().maxCoeff(),
                 (cand.cov - cur.cov()).cwiseAbs().maxCoeff());
    if (residual <= fp.tol) {
      GaussianBelief out(cand.mu, cand.cov);
      *floored_io |= out.floored();
      if (info) {
        info->iterations = iter;
        info->residual = residual;
        info->converged = true;
        info->floored = *floored_io;
      }
      return out;
    }
    if (iter == fp.max_iter) {
      throw FixedPointError(std::string(who) + ": no convergence", iter,
                            residual);
    }
    const Eigen::VectorXd mu =
        (1.0 - fp.damping) * cur.mean() + fp.damping * cand.mu;
    const Eigen::MatrixXd cov =
        (1.0 - fp.damping) * cur.cov() + fp.damping * cand.cov;
    cur = GaussianBelief(mu, cov);
    *floored_io |= cur.floored();
  }
  throw FixedPointError(std::string(who) + ": no convergence", fp.max_iter,
                        0.0);
}

}  // namespace

GaussianBelief lmmr_step_precision(const GaussianBelief& q,
                                   const ObservationModel& model,
                                   const Eigen::VectorXd& dz, double dt,
                                   const ExpectationMethod& method,
                                   const FixedPointConfig& fp,
                                   StepInfo* info) {
  check_inputs(q, model, dz, dt, "lmmr_step_precision");
  validate(fp);
  const Eigen::MatrixXd lambda_prior =
      precision_of(q.cov(), "lmmr_step_precision");
  bool floored = false;

  auto candidate_from = [&](const GaussianBelief& ref) {
    const UpdateStats stats =
        update_stats(model, ref, ref.mean(), dz, dt, method);
    const Eigen::MatrixXd hess =
        expected_loglik_hessian(ref, stats.dh, "lmmr_step_precision");
    Iterate next;
    next.mu = q.mean() + q.cov() * stats.dc;
    next.cov = invert_precision(lambda_prior - hess, &floored);
    return next;
  };

  const Iterate first = candidate_from(q);
  GaussianBelief init(first.mu, first.cov);
  floored |= init.floored();
  return solve_fixed_point(std::move(init), candidate_from, fp,
                           "lmmr_step_precision", &floored, info);
}

GaussianBelief lmmr_step_covariance(const GaussianBelief& q,
                                    const ObservationModel& model,
                                    const Eigen::VectorXd& dz, double dt,
                                    const ExpectationMethod& method,
                                    const FixedPointConfig& fp,
                                    StepInfo* info) {
  check_inputs(q, model, dz, dt, "lmmr_step_covariance");
  validate(fp);
  bool floored = false;

  auto candidate_from = [&](const GaussianBelief& ref) {
    const UpdateStats stats =
        update_stats(model, ref, q.mean(), dz, dt, method);
    Iterate next;
    next.mu = q.mean() + q.cov() * stats.dc;
    next.cov = q.cov() + 0.5 * (stats.dh * q.cov()) +
               0.5 * (q.cov() * stats.dh.transpose());
    return next;
  };

  const Iterate first = candidate_from(q);
  GaussianBelief init(first.mu, first.cov);
  floored |= init.floored();
  return solve_fixed_point(std::move(init), candidate_from, fp,
                           "lmmr_step_covariance", &floored, info);
}

GaussianBelief natural_gradient_step(const GaussianBelief& q,
                                     const ObservationModel& model,
                                     const Eigen::VectorXd& dz, double dt,
                                     const ExpectationMethod& method,
                                     const FixedPointConfig& fp,
                                     StepInfo* info) {
  check_inputs(q, model, dz, dt, "natural_gradient_step");
  validate(fp);
  const int d = q.dim();
  const Eigen::VectorXd theta0 = to_param_vector(q);
  const Eigen::MatrixXd fisher = fisher_matrix(q);
  Eigen::LLT<Eigen::MatrixXd> fisher_llt(fisher);
  if (fisher_llt.info() != Eigen::Success) {
    throw std::invalid_argument(
        "natural_gradient_step: Fisher matrix is not positive definite");
  }
  bool floored = false;

  // Gradient of the expected negative increment log-likelihood in
  // (mean, vech cov) coordinates: the mean block is -E[score]; the
  // covariance block is -0.5 E[hess log p] with off-diagonal entries
  // doubled because vech carries each of them once.
  auto gradient_at = [&](const GaussianBelief& ref) {
    const UpdateStats stats =
        update_stats(model, ref, ref.mean(), dz, dt, method);
    const Eigen::MatrixXd hess =
        expected_loglik_hessian(ref, stats.dh, "natural_gradient_step");
    const Eigen::MatrixXd grad_cov = -0.5 * hess;
    Eigen::VectorXd g(param_dim(d));
    g.head(d) = -stats.dc;
    int k = d;
    for (int i = 0; i < d; ++i) {
      for (int j = i; j < d; ++j) {
        g(k++) = (i == j) ? grad_cov(i, i) : 2.0 * grad_cov(i, j);
      }
    }
    return g;
  };

  auto candidate_theta = [&](const GaussianBelief& ref) -> Eigen::VectorXd {
    return theta0 - fisher_llt.solve(gradient_at(ref));
  };

  Eigen::VectorXd theta_cur = candidate_theta(q);
  GaussianBelief cur = from_param_vector(theta_cur, d);
  floored |= cur.floored();

  for (int iter = 1; iter <= fp.max_iter; ++iter) {
    const Eigen::VectorXd theta_cand = candidate_theta(cur);
    const double residual = (theta_cand - theta_cur).cwiseAbs().maxCoeff();
    if (residual <= fp.tol) {
      GaussianBelief out = from_param_vector(theta_cand, d);
      floored |= out.floored();
      if (info) {
        info->iterations = iter;
        info->residual = residual;
        info->converged = true;
        info->floored = floored;
      }
      return out;
    }
    if (iter == fp.max_iter) {
      throw FixedPointError("natural_gradient_step: no convergence", iter,
                            residual);
    }
    theta_cur = (1.0 - fp.damping) * theta_cur + fp.damping * theta_cand;
    cur = from_param_vector(theta_cur, d);
    floored |= cur.floored();
  }
  throw FixedPointError("natural_gradient_step: no convergence", fp.max_iter,
                        0.0);
}

double lmmr_objective(const GaussianBelief& q_cand,
                      const GaussianBelief& q_prev,
                      const ObservationModel& model,
                      const Eigen::VectorXd& dz, double dt,
                      const ExpectationMethod& method) {
  check_inputs(q_cand, model, dz, dt, "lmmr_objective");
  Eigen::LLT<Eigen::MatrixXd> rllt(model.noise);
  if (rllt.info() != Eigen::Success) {
    throw std::invalid_argument(
        "lmmr_objective: observation noise is not positive definite");
  }

  double data_term = 0.0;
  if (method.kind == ExpectationMethod::Kind::ExactLinear) {
    if (!model.linear_map) {
      throw std::invalid_argument(
          "lmmr_objective: exact-linear requires a declared linear "
          "observation");
    }
    const Eigen::MatrixXd& h = *model.linear_map;
    const Eigen::VectorXd resid = dz - h * q_cand.mean() * dt;
    const Eigen::MatrixXd hph = h * q_cand.cov() * h.transpose();
    data_term = 0.5 / dt *
                (resid.dot(rllt.solve(resid)) +
                 dt * dt * rllt.solve(hph).trace());
  } else {
    data_term = expect(
        [&](const Eigen::VectorXd& x) {
          const Eigen::VectorXd resid = dz - model.h(x) * dt;
          return 0.5 / dt * resid.dot(rllt.solve(resid));
        },
        q_cand, method);
  }
  return data_term + kl_divergence(q_cand, q_prev);
}

}  // namespace cvkf
