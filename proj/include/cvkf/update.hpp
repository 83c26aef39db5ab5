// Measurement updates for an observation increment dz accumulated over dt.
// All three schemes are implicit in the posterior and solved by damped
// substitution; they agree to first order in dt and differ at O(dt^2).
//
//   precision    mu' = mu + P E_q'[score],  P'^-1 = P^-1 - E_q'[hess log p]
//   covariance   mu' = mu + P dc,  P' = P + (dh P + P dh')/2, dh centered
//                on the pre-update mean
//   natural-gradient  one preconditioned step theta' = theta - F^-1 g(q')
//                in (mean, vech cov) coordinates
//
// score and hess log p refer to the increment likelihood
// N(dz; h(x) dt, R dt); the Hessian expectation is evaluated through the
// Gaussian identity E[hess f] = P^-1 E[(x - mu) grad f'], which needs no
// second derivatives of h.
#pragma once

#include "cvkf/expectation.hpp"
#include "cvkf/fixed_point.hpp"
#include "cvkf/gaussian.hpp"
#include "cvkf/models.hpp"

namespace cvkf {

GaussianBelief lmmr_step_precision(const GaussianBelief& q,
                                   const ObservationModel& model,
                                   const Eigen::VectorXd& dz, double dt,
                                   const ExpectationMethod& method,
                                   const FixedPointConfig& fp,
                                   StepInfo* info = nullptr);

GaussianBelief lmmr_step_covariance(const GaussianBelief& q,
                                    const ObservationModel& model,
                                    const Eigen::VectorXd& dz, double dt,
                                    const ExpectationMethod& method,
                                    const FixedPointConfig& fp,
                                    StepInfo* info = nullptr);

GaussianBelief natural_gradient_step(const GaussianBelief& q,
                                     const ObservationModel& model,
                                     const Eigen::VectorXd& dz, double dt,
                                     const ExpectationMethod& method,
                                     const FixedPointConfig& fp,
                                     StepInfo* info = nullptr);

// Variational objective the updates descend:
//   E_q[0.5 (dz - h dt)' (R dt)^-1 (dz - h dt)] + KL(q || q_prev).
double lmmr_objective(const GaussianBelief& q_cand,
                      const GaussianBelief& q_prev,
                      const ObservationModel& model,
                      const Eigen::VectorXd& dz, double dt,
                      const ExpectationMethod& method);

}  // namespace cvkf
