// Prediction steps: discrete-time moves of the belief under the dynamics
// alone, derived from the Wasserstein gradient flow of the free energy
//   E_q[V] + eps E_q[log q].
//
// With b = -E_q[grad V] and A = -E_q[hess V] the explicit step is the
// Euler discretization of
//   d mu/dt = b,   dP/dt = A P + P A' + 2 eps I,
// and the implicit step solves the same algebra with both expectations
// taken under the unknown end-of-step belief.
#pragma once

#include "cvkf/expectation.hpp"
#include "cvkf/fixed_point.hpp"
#include "cvkf/gaussian.hpp"
#include "cvkf/models.hpp"

namespace cvkf {

GaussianBelief jko_step_explicit(const GaussianBelief& q,
                                 const PotentialModel& model, double dt,
                                 const ExpectationMethod& method,
                                 StepInfo* info = nullptr);

// Damped substitution on
//   mu' = mu + dt b(q'),
//   P'  = P + dt (A(q') P + P A(q')') + 2 eps dt I,
// initialized at the explicit step. Throws FixedPointError when the
// residual fails to reach fp.tol within fp.max_iter sweeps.
GaussianBelief jko_step_implicit(const GaussianBelief& q,
                                 const PotentialModel& model, double dt,
                                 const ExpectationMethod& method,
                                 const FixedPointConfig& fp,
                                 StepInfo* info = nullptr);

// Free energy plus movement penalty,
//   E_q[V] + eps E_q[log q] + d_bw^2(q, q_prev) / (2 dt),
// the quantity the implicit step descends. dt may be +infinity to drop
// the movement penalty and score the free energy alone.
double jko_objective(const GaussianBelief& q_cand,
                     const GaussianBelief& q_prev,
                     const PotentialModel& model, double dt,
                     const ExpectationMethod& method);

}  // namespace cvkf
