// Gaussian expectation engine. Every propagation and update step funnels
// its integrals through one of four interchangeable methods:
//
//   exact-linear   closed forms, valid only for models that declare
//                  linear structure (quadratic_form / linear_map)
//   unscented      2d+1 sigma points, kappa defaults to 3 - d
//   gauss-hermite  tensorized probabilists' rule, order 2..10, dim <= 4
//   monte-carlo    seeded mt19937_64 draws, deterministic reduction
//
// A NodeSet is built once per filter step and shared by every integrand
// evaluated in that step. Reductions over nodes use a fixed pairwise
// summation tree so results do not depend on evaluation order.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>

#include "cvkf/gaussian.hpp"
#include "cvkf/models.hpp"

namespace cvkf {

struct ExpectationMethod {
  enum class Kind { ExactLinear, Unscented, GaussHermite, MonteCarlo };

  static constexpr double kAutoKappa =
      std::numeric_limits<double>::quiet_NaN();

  Kind kind = Kind::Unscented;
  double kappa = kAutoKappa;  // NaN resolves to 3 - dim at node build
  int gh_order = 5;
  std::int64_t mc_samples = 10000;
  std::uint64_t mc_seed = 0;

  static ExpectationMethod exact_linear();
  static ExpectationMethod unscented(double kappa = kAutoKappa);
  static ExpectationMethod gauss_hermite(int order);
  static ExpectationMethod monte_carlo(std::int64_t samples,
                                       std::uint64_t seed);
};

const char* to_string(ExpectationMethod::Kind kind);

struct NodeSet {
  Eigen::MatrixXd points;   // dim x count, one column per node
  Eigen::VectorXd weights;  // count entries, sum to 1
};

// Builds the node set for q under the given method. exact-linear yields a
// single node at the mean. Throws std::invalid_argument for out-of-range
// settings (gh_order outside 2..10, gauss-hermite beyond dim 4,
// nonpositive mc_samples, dim + kappa <= 0).
NodeSet build_node_set(const GaussianBelief& q, const ExpectationMethod& m);

namespace detail {

inline void check_finite(double v, const char* who) {
  if (!std::isfinite(v)) {
    throw std::runtime_error(std::string(who) +
                             ": integrand produced non-finite values");
  }
}

template <class Derived>
void check_finite(const Eigen::MatrixBase<Derived>& m, const char* who) {
  if (!m.allFinite()) {
    throw std::runtime_error(std::string(who) +
                             ": integrand produced non-finite values");
  }
}

// Fixed-shape pairwise reduction; the split points depend only on the
// index range, never on the values.
template <class T, class F>
T pairwise_sum(std::int64_t lo, std::int64_t hi, F&& term) {
  if (hi - lo <= 8) {
    T acc = term(lo);
    for (std::int64_t i = lo + 1; i < hi; ++i) acc += term(i);
    return acc;
  }
  const std::int64_t mid = lo + (hi - lo) / 2;
  T left = pairwise_sum<T, F>(lo, mid, std::forward<F>(term));
  T right = pairwise_sum<T, F>(mid, hi, std::forward<F>(term));
  left += right;
  return left;
}

}  // namespace detail

// Weighted expectation of f over an existing node set.
template <class F>
auto expect_nodes(F&& f, const NodeSet& ns) {
  using R = std::decay_t<decltype(f(std::declval<const Eigen::VectorXd&>()))>;
  const std::int64_t n = ns.weights.size();
  if (n <= 0) {
    throw std::invalid_argument("expect_nodes: empty node set");
  }
  R out = detail::pairwise_sum<R>(0, n, [&](std::int64_t i) -> R {
    const Eigen::VectorXd x = ns.points.col(i);
    return R(ns.weights(i) * f(x));
  });
  detail::check_finite(out, "expect");
  return out;
}

// E_q[f]. Under exact-linear this evaluates f at the mean, which is exact
// precisely for affine integrands; the closed-form drift and update stats
// below are the exact-linear path for everything quadratic.
template <class F>
auto expect(F&& f, const GaussianBelief& q, const ExpectationMethod& m) {
  if (m.kind == ExpectationMethod::Kind::ExactLinear) {
    using R = std::decay_t<decltype(f(q.mean()))>;
    R out = f(q.mean());
    detail::check_finite(out, "expect");
    return out;
  }
  return expect_nodes(std::forward<F>(f), build_node_set(q, m));
}

// Expected drift pieces of the propagation flow:
//   b = -E_q[grad V],  A = -E_q[hess V]  (symmetrized).
struct DriftStats {
  Eigen::VectorXd b;
  Eigen::MatrixXd a;
};

DriftStats drift_stats(const PotentialModel& model, const GaussianBelief& q,
                       const ExpectationMethod& m);

// Expected measurement pieces for an observation increment dz over dt:
//   dc = E_q[ jac(x)' R^-1 (dz - h(x) dt) ]
//   dh = E_q[ (x - mu_ref) (dz - h(x) dt)' R^-1 jac(x) ]
// mu_ref is the centering point for dh; the covariance-form update centers
// on the pre-update mean while the precision form centers on the current
// iterate.
struct UpdateStats {
  Eigen::VectorXd dc;
  Eigen::MatrixXd dh;
};

UpdateStats update_stats(const ObservationModel& model,
                         const GaussianBelief& q,
                         const Eigen::VectorXd& mu_ref,
                         const Eigen::VectorXd& dz, double dt,
                         const ExpectationMethod& m);

}  // namespace cvkf
