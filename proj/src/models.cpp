#include "cvkf/models.hpp"

#include <cmath>
#include <stdexcept>

namespace cvkf {

namespace {

void check_spd(const Eigen::MatrixXd& m, const std::string& what) {
  if (m.rows() != m.cols()) {
    throw std::invalid_argument(what + " is not square");
  }
  if (!m.isApprox(m.transpose(), 1e-12)) {
    throw std::invalid_argument(what + " is not symmetric");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument(what + " is not positive definite");
  }
}

double scalar_of(const ScenarioParams& params, const std::string& key) {
  return params.at(key).front();
}

void require_positive(double v, const std::string& what) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw std::invalid_argument(what + " must be positive");
  }
}

void require_nonnegative(double v, const std::string& what) {
  if (!(v >= 0.0) || !std::isfinite(v)) {
    throw std::invalid_argument(what + " must be nonnegative");
  }
}

PotentialModel quadratic_potential(const Eigen::MatrixXd& k, double epsilon) {
  PotentialModel m;
  m.dim = static_cast<int>(k.rows());
  m.epsilon = epsilon;
  m.quadratic_form = 0.5 * (k + k.transpose());
  const Eigen::MatrixXd ks = *m.quadratic_form;
  m.potential = [ks](const Eigen::VectorXd& x) {
    return 0.5 * x.dot(ks * x);
  };
  m.grad = [ks](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    return ks * x;
  };
  m.hess = [ks](const Eigen::VectorXd& x) -> Eigen::MatrixXd {
    (void)x;
    return ks;
  };
  return m;
}

ObservationModel linear_observation(const Eigen::MatrixXd& h,
                                    const Eigen::MatrixXd& r) {
  ObservationModel m;
  m.state_dim = static_cast<int>(h.cols());
  m.obs_dim = static_cast<int>(h.rows());
  m.noise = r;
  m.linear_map = h;
  m.h = [h](const Eigen::VectorXd& x) -> Eigen::VectorXd { return h * x; };
  m.jac = [h](const Eigen::VectorXd& x) -> Eigen::MatrixXd {
    (void)x;
    return h;
  };
  return m;
}

Scenario make_linear_1d(const ScenarioParams& p) {
  const double k = scalar_of(p, "K");
  const double epsilon = scalar_of(p, "epsilon");
  const double r = scalar_of(p, "R");
  const double h = scalar_of(p, "H");
  require_nonnegative(k, "linear-1d: K");
  require_positive(epsilon, "linear-1d: epsilon");
  require_positive(r, "linear-1d: R");

  Scenario s;
  s.name = "linear-1d";
  s.dynamics = quadratic_potential(Eigen::MatrixXd::Constant(1, 1, k), epsilon);
  s.observation = linear_observation(Eigen::MatrixXd::Constant(1, 1, h),
                                     Eigen::MatrixXd::Constant(1, 1, r));
  LinearModelPair lin;
  lin.f = Eigen::MatrixXd::Constant(1, 1, -k);
  lin.g = Eigen::MatrixXd::Constant(1, 1, h);
  lin.epsilon = epsilon;
  lin.r = Eigen::MatrixXd::Constant(1, 1, r);
  s.linear = lin;
  return s;
}

Scenario make_linear_2d(const ScenarioParams& p) {
  const std::vector<double>& k = p.at("K");
  const double epsilon = scalar_of(p, "epsilon");
  const std::vector<double>& r = p.at("R");
  require_nonnegative(k[0], "linear-2d: K");
  require_nonnegative(k[1], "linear-2d: K");
  require_positive(epsilon, "linear-2d: epsilon");
  require_positive(r[0], "linear-2d: R");
  require_positive(r[1], "linear-2d: R");

  const Eigen::MatrixXd kd = Eigen::Vector2d(k[0], k[1]).asDiagonal();
  const Eigen::MatrixXd rd = Eigen::Vector2d(r[0], r[1]).asDiagonal();
  Scenario s;
  s.name = "linear-2d";
  s.dynamics = quadratic_potential(kd, epsilon);
  s.observation = linear_observation(Eigen::MatrixXd::Identity(2, 2), rd);
  LinearModelPair lin;
  lin.f = -kd;
  lin.g = Eigen::MatrixXd::Identity(2, 2);
  lin.epsilon = epsilon;
  lin.r = rd;
  s.linear = lin;
  return s;
}

Scenario make_double_well_1d(const ScenarioParams& p) {
  const double epsilon = scalar_of(p, "epsilon");
  const double r = scalar_of(p, "R");
  require_positive(epsilon, "double-well-1d: epsilon");
  require_positive(r, "double-well-1d: R");

  Scenario s;
  s.name = "double-well-1d";
  PotentialModel& m = s.dynamics;
  m.dim = 1;
  m.epsilon = epsilon;
  m.potential = [](const Eigen::VectorXd& x) {
    const double v = x(0);
    return 0.25 * v * v * v * v - 0.5 * v * v;
  };
  m.grad = [](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    const double v = x(0);
    return Eigen::VectorXd::Constant(1, v * v * v - v);
  };
  m.hess = [](const Eigen::VectorXd& x) -> Eigen::MatrixXd {
    const double v = x(0);
    return Eigen::MatrixXd::Constant(1, 1, 3.0 * v * v - 1.0);
  };
  s.observation = linear_observation(Eigen::MatrixXd::Identity(1, 1),
                                     Eigen::MatrixXd::Constant(1, 1, r));
  return s;
}

Scenario make_bearings_2d(const ScenarioParams& p) {
  const std::vector<double>& k = p.at("K");
  const double epsilon = scalar_of(p, "epsilon");
  const double r = scalar_of(p, "R");
  require_nonnegative(k[0], "bearings-2d: K");
  require_nonnegative(k[1], "bearings-2d: K");
  require_positive(epsilon, "bearings-2d: epsilon");
  require_positive(r, "bearings-2d: R");

  Scenario s;
  s.name = "bearings-2d";
  s.dynamics =
      quadratic_potential(Eigen::Vector2d(k[0], k[1]).asDiagonal(), epsilon);

  ObservationModel& o = s.observation;
  o.state_dim = 2;
  o.obs_dim = 1;
  o.noise = Eigen::MatrixXd::Constant(1, 1, r);
  o.h = [](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    if (x.squaredNorm() < 1e-16) {
      throw std::domain_error("bearings-2d: bearing undefined at the origin");
    }
    return Eigen::VectorXd::Constant(1, std::atan2(x(1), x(0)));
  };
  o.jac = [](const Eigen::VectorXd& x) -> Eigen::MatrixXd {
    const double rsq = x.squaredNorm();
    if (rsq < 1e-16) {
      throw std::domain_error("bearings-2d: bearing undefined at the origin");
    }
    Eigen::MatrixXd j(1, 2);
    j(0, 0) = -x(1) / rsq;
    j(0, 1) = x(0) / rsq;
    return j;
  };
  return s;
}

}  // namespace

void validate_model(const PotentialModel& m) {
  if (m.dim <= 0) {
    throw std::invalid_argument("PotentialModel: dim must be positive");
  }
  if (!m.potential || !m.grad || !m.hess) {
    throw std::invalid_argument("PotentialModel: missing callables");
  }
  if (!(m.epsilon >= 0.0) || !std::isfinite(m.epsilon)) {
    throw std::invalid_argument("PotentialModel: epsilon must be >= 0");
  }
  if (m.quadratic_form &&
      (m.quadratic_form->rows() != m.dim || m.quadratic_form->cols() != m.dim)) {
    throw std::invalid_argument("PotentialModel: quadratic_form shape");
  }
}

void validate_model(const ObservationModel& m) {
  if (m.state_dim <= 0 || m.obs_dim <= 0) {
    throw std::invalid_argument("ObservationModel: dims must be positive");
  }
  if (!m.h || !m.jac) {
    throw std::invalid_argument("ObservationModel: missing callables");
  }
  if (m.noise.rows() != m.obs_dim || m.noise.cols() != m.obs_dim) {
    throw std::invalid_argument("ObservationModel: noise shape");
  }
  check_spd(m.noise, "ObservationModel noise");
  if (m.linear_map && (m.linear_map->rows() != m.obs_dim ||
                       m.linear_map->cols() != m.state_dim)) {
    throw std::invalid_argument("ObservationModel: linear_map shape");
  }
}

const std::vector<ScenarioInfo>& builtin_scenarios() {
  static const std::vector<ScenarioInfo> infos = {
      {"linear-1d",
       "scalar Ornstein-Uhlenbeck state with linear observation",
       {"K: potential curvature, V = 0.5 K x^2 (default 1)",
        "epsilon: diffusion intensity (default 0.5)",
        "R: observation noise variance (default 1)",
        "H: observation gain, h = H x (default 1)"}},
      {"linear-2d",
       "two independent Ornstein-Uhlenbeck states observed directly",
       {"K: two curvatures, diagonal quadratic potential (default 1, 2)",
        "epsilon: diffusion intensity (default 0.5)",
        "R: two observation noise variances (default 1, 1)"}},
      {"double-well-1d",
       "bistable quartic potential V = x^4/4 - x^2/2, direct observation",
       {"epsilon: diffusion intensity (default 0.5)",
        "R: observation noise variance (default 1)"}},
      {"bearings-2d",
       "planar state under a quadratic potential, observed by bearing angle",
       {"K: two curvatures, diagonal quadratic potential (default 1, 1)",
        "epsilon: diffusion intensity (default 0.5)",
        "R: bearing noise variance (default 0.05)"}},
  };
  return infos;
}

ScenarioParams default_scenario_params(const std::string& name) {
  if (name == "linear-1d") {
    return {{"K", {1.0}}, {"epsilon", {0.5}}, {"R", {1.0}}, {"H", {1.0}}};
  }
  if (name == "linear-2d") {
    return {{"K", {1.0, 2.0}}, {"epsilon", {0.5}}, {"R", {1.0, 1.0}}};
  }
  if (name == "double-well-1d") {
    return {{"epsilon", {0.5}}, {"R", {1.0}}};
  }
  if (name == "bearings-2d") {
    return {{"K", {1.0, 1.0}}, {"epsilon", {0.5}}, {"R", {0.05}}};
  }
  throw std::invalid_argument("unknown scenario '" + name + "'");
}

ScenarioParams resolve_scenario_params(const std::string& name,
                                       const ScenarioParams& overrides) {
  ScenarioParams out = default_scenario_params(name);
  for (const auto& [key, values] : overrides) {
    auto it = out.find(key);
    if (it == out.end()) {
      throw std::invalid_argument("scenario '" + name +
                                  "' has no parameter '" + key + "'");
    }
    if (values.size() != it->second.size()) {
      throw std::invalid_argument(
          "scenario parameter '" + key + "' expects " +
          std::to_string(it->second.size()) + " value(s), got " +
          std::to_string(values.size()));
    }
    for (double v : values) {
      if (!std::isfinite(v)) {
        throw std::invalid_argument("scenario parameter '" + key +
                                    "' has a non-finite value");
      }
    }
    it->second = values;
  }
  return out;
}

Scenario make_scenario(const std::string& name, const ScenarioParams& params) {
  const ScenarioParams resolved = resolve_scenario_params(name, params);
  Scenario s;
  if (name == "linear-1d") {
    s = make_linear_1d(resolved);
  } else if (name == "linear-2d") {
    s = make_linear_2d(resolved);
  } else if (name == "double-well-1d") {
    s = make_double_well_1d(resolved);
  } else {
    s = make_bearings_2d(resolved);
  }
  validate_model(s.dynamics);
  validate_model(s.observation);
  return s;
}

}  // namespace cvkf
