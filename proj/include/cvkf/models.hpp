// Dynamics and observation models, plus the built-in scenario catalog.
//
// Dynamics follow the overdamped Langevin form
//   dx = -grad V(x) dt + sqrt(2 eps) dW,
// observations accumulate as increments
//   dz = h(x) dt + R^1/2 dB.
#pragma once

#include <Eigen/Dense>

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace cvkf {

struct PotentialModel {
  int dim = 0;
  std::function<double(const Eigen::VectorXd&)> potential;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> grad;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> hess;
  double epsilon = 0.0;  // diffusion intensity, noise covariance 2*eps*I
  // Set when V(x) = 0.5 x' K x with constant symmetric PSD K; enables the
  // exact-linear expectation path.
  std::optional<Eigen::MatrixXd> quadratic_form;
};

struct ObservationModel {
  int state_dim = 0;
  int obs_dim = 0;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> h;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> jac;
  Eigen::MatrixXd noise;  // R, symmetric positive definite
  // Set when h(x) = H x; enables the exact-linear expectation path.
  std::optional<Eigen::MatrixXd> linear_map;
};

// Matrices of the equivalent linear-Gaussian system dx = F x dt + ...,
// dz = G x dt + ..., available when both model halves are linear. Used by
// the Kalman-Bucy reference filter.
struct LinearModelPair {
  Eigen::MatrixXd f;
  Eigen::MatrixXd g;
  double epsilon = 0.0;
  Eigen::MatrixXd r;
};

struct Scenario {
  std::string name;
  PotentialModel dynamics;
  ObservationModel observation;
  std::optional<LinearModelPair> linear;
};

// Throw std::invalid_argument when a model is malformed (bad dimensions,
// missing callables, negative epsilon, non-SPD noise).
void validate_model(const PotentialModel& m);
void validate_model(const ObservationModel& m);

using ScenarioParams = std::map<std::string, std::vector<double>>;

struct ScenarioInfo {
  std::string name;
  std::string summary;
  std::vector<std::string> params;  // "key: meaning (default ...)" lines
};

const std::vector<ScenarioInfo>& builtin_scenarios();

// Canonical defaults for a scenario's parameters; throws on unknown names.
ScenarioParams default_scenario_params(const std::string& name);

// Defaults overlaid with the given overrides. Unknown keys and wrong
// arities throw std::invalid_argument naming the offending entry.
ScenarioParams resolve_scenario_params(const std::string& name,
                                       const ScenarioParams& overrides);

// Builds a built-in scenario by name. Unknown names, unknown parameter
// keys, wrong parameter arity, and out-of-range values all throw
// std::invalid_argument naming the offending entry.
//
//   linear-1d       V = 0.5 K x^2, h = H x          (K, epsilon, R, H)
//   linear-2d       diagonal quadratic V, h = x     (K, epsilon, R)
//   double-well-1d  V = x^4/4 - x^2/2, h = x        (epsilon, R)
//   bearings-2d     quadratic V, h = atan2(x2, x1)  (K, epsilon, R)
Scenario make_scenario(const std::string& name,
                       const ScenarioParams& params = {});

}  // namespace cvkf
