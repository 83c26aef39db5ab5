#include "cvkf/expectation.hpp"

#include <random>
#include <string>
#include <vector>

namespace cvkf {

ExpectationMethod ExpectationMethod::exact_linear() {
  ExpectationMethod m;
  m.kind = Kind::ExactLinear;
  return m;
}

ExpectationMethod ExpectationMethod::unscented(double kappa) {
  ExpectationMethod m;
  m.kind = Kind::Unscented;
  m.kappa = kappa;
  return m;
}

ExpectationMethod ExpectationMethod::gauss_hermite(int order) {
  ExpectationMethod m;
  m.kind = Kind::GaussHermite;
  m.gh_order = order;
  return m;
}

ExpectationMethod ExpectationMethod::monte_carlo(std::int64_t samples,
                                                 std::uint64_t seed) {
  ExpectationMethod m;
  m.kind = Kind::MonteCarlo;
  m.mc_samples = samples;
  m.mc_seed = seed;
  return m;
}

const char* to_string(ExpectationMethod::Kind kind) {
  switch (kind) {
    case ExpectationMethod::Kind::ExactLinear:
      return "exact-linear";
    case ExpectationMethod::Kind::Unscented:
      return "unscented";
    case ExpectationMethod::Kind::GaussHermite:
      return "gauss-hermite";
    case ExpectationMethod::Kind::MonteCarlo:
      return "monte-carlo";
  }
  return "unknown";
}

namespace {

// Covariance factor L with L L' = P. Cholesky when P is strictly positive
// definite, symmetric eigen square root once the PSD floor has produced
// exact zeros.
Eigen::MatrixXd covariance_factor(const Eigen::MatrixXd& p) {
  Eigen::LLT<Eigen::MatrixXd> llt(p);
  if (llt.info() == Eigen::Success) {
    return llt.matrixL();
  }
  return matrix_sqrt_psd(p);
}

// 1-d probabilists' Gauss-Hermite rule via the Jacobi matrix: nodes are
// its eigenvalues, weights the squared first eigenvector components.
void gauss_hermite_1d(int order, Eigen::VectorXd* nodes,
                      Eigen::VectorXd* weights) {
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(order, order);
  for (int k = 1; k < order; ++k) {
    const double off = std::sqrt(static_cast<double>(k));
    jacobi(k, k - 1) = off;
    jacobi(k - 1, k) = off;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi);
  if (es.info() != Eigen::Success) {
    throw std::runtime_error("gauss_hermite_1d: eigendecomposition failed");
  }
  *nodes = es.eigenvalues();
  *weights = es.eigenvectors().row(0).transpose().array().square();
}

NodeSet unscented_nodes(const GaussianBelief& q, double kappa_in) {
  const int d = q.dim();
  const double kappa =
      std::isnan(kappa_in) ? 3.0 - static_cast<double>(d) : kappa_in;
  const double spread = static_cast<double>(d) + kappa;
  if (!(spread > 0.0)) {
    throw std::invalid_argument(
        "unscented: dim + kappa must be positive, got " +
        std::to_string(spread));
  }
  const Eigen::MatrixXd l = covariance_factor(q.cov());
  const double scale = std::sqrt(spread);

  NodeSet ns;
  ns.points.resize(d, 2 * d + 1);
  ns.weights.resize(2 * d + 1);
  ns.points.col(0) = q.mean();
  ns.weights(0) = kappa / spread;
  for (int i = 0; i < d; ++i) {
    const Eigen::VectorXd offset = scale * l.col(i);
    ns.points.col(1 + 2 * i) = q.mean() + offset;
    ns.points.col(2 + 2 * i) = q.mean() - offset;
    ns.weights(1 + 2 * i) = 0.5 / spread;
    ns.weights(2 + 2 * i) = 0.5 / spread;
  }
  return ns;
}

NodeSet gauss_hermite_nodes(const GaussianBelief& q, int order) {
  const int d = q.dim();
  if (order < 2 || order > 10) {
    throw std::invalid_argument("gauss-hermite: order must be in 2..10, got " +
                                std::to_string(order));
  }
  if (d > 4) {
    throw std::invalid_argument(
        "gauss-hermite: tensorized rule limited to dim <= 4, got " +
        std::to_string(d));
  }
  Eigen::VectorXd nodes1d, weights1d;
  gauss_hermite_1d(order, &nodes1d, &weights1d);

  std::int64_t count = 1;
  for (int i = 0; i < d; ++i) count *= order;

  const Eigen::MatrixXd l = covariance_factor(q.cov());
  NodeSet ns;
  ns.points.resize(d, count);
  ns.weights.resize(count);
  std::vector<int> digit(d, 0);
  for (std::int64_t k = 0; k < count; ++k) {
    Eigen::VectorXd u(d);
    double w = 1.0;
    for (int i = 0; i < d; ++i) {
      u(i) = nodes1d(digit[i]);
      w *= weights1d(digit[i]);
    }
    ns.points.col(k) = q.mean() + l * u;
    ns.weights(k) = w;
    for (int i = 0; i < d; ++i) {
      if (++digit[i] < order) break;
      digit[i] = 0;
    }
  }
  return ns;
}

NodeSet monte_carlo_nodes(const GaussianBelief& q, std::int64_t samples,
                          std::uint64_t seed) {
  if (samples < 1) {
    throw std::invalid_argument("monte-carlo: need at least one sample");
  }
  const int d = q.dim();
  const Eigen::MatrixXd l = covariance_factor(q.cov());
  std::mt19937_64 engine(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  NodeSet ns;
  ns.points.resize(d, samples);
  ns.weights =
      Eigen::VectorXd::Constant(samples, 1.0 / static_cast<double>(samples));
  Eigen::VectorXd u(d);
  for (std::int64_t k = 0; k < samples; ++k) {
    for (int i = 0; i < d; ++i) u(i) = normal(engine);
    ns.points.col(k) = q.mean() + l * u;
  }
  return ns;
}

struct StatsAccum {
  Eigen::VectorXd dc;
  Eigen::MatrixXd dh;
  StatsAccum& operator+=(const StatsAccum& o) {
    dc += o.dc;
    dh += o.dh;
    return *this;
  }
};

}  // namespace

NodeSet build_node_set(const GaussianBelief& q, const ExpectationMethod& m) {
  switch (m.kind) {
    case ExpectationMethod::Kind::ExactLinear: {
      NodeSet ns;
      ns.points = q.mean();
      ns.weights = Eigen::VectorXd::Ones(1);
      return ns;
    }
    case ExpectationMethod::Kind::Unscented:
      return unscented_nodes(q, m.kappa);
    case ExpectationMethod::Kind::GaussHermite:
      return gauss_hermite_nodes(q, m.gh_order);
    case ExpectationMethod::Kind::MonteCarlo:
      return monte_carlo_nodes(q, m.mc_samples, m.mc_seed);
  }
  throw std::invalid_argument("build_node_set: unknown method kind");
}

DriftStats drift_stats(const PotentialModel& model, const GaussianBelief& q,
                       const ExpectationMethod& m) {
  if (q.dim() != model.dim) {
    throw std::invalid_argument("drift_stats: belief dim " +
                                std::to_string(q.dim()) + " vs model dim " +
                                std::to_string(model.dim));
  }
  DriftStats out;
  if (m.kind == ExpectationMethod::Kind::ExactLinear) {
    if (!model.quadratic_form) {
      throw std::invalid_argument(
          "drift_stats: exact-linear requires a declared quadratic potential");
    }
    out.b = -(*model.quadratic_form) * q.mean();
    out.a = -(*model.quadratic_form);
    return out;
  }
  const NodeSet ns = build_node_set(q, m);
  out.b = -expect_nodes(
      [&](const Eigen::VectorXd& x) { return model.grad(x); }, ns);
  Eigen::MatrixXd eh = expect_nodes(
      [&](const Eigen::VectorXd& x) { return model.hess(x); }, ns);
  out.a = -0.5 * (eh + eh.transpose());
  return out;
}

UpdateStats update_stats(const ObservationModel& model,
                         const GaussianBelief& q,
                         const Eigen::VectorXd& mu_ref,
                         const Eigen::VectorXd& dz, double dt,
                         const ExpectationMethod& m) {
  if (q.dim() != model.state_dim) {
    throw std::invalid_argument("update_stats: belief dim " +
                                std::to_string(q.dim()) + " vs model dim " +
                                std::to_string(model.state_dim));
  }
  if (dz.size() != model.obs_dim) {
    throw std::invalid_argument("update_stats: dz has " +
                                std::to_string(dz.size()) +
                                " entries, expected " +
                                std::to_string(model.obs_dim));
  }
  if (mu_ref.size() != model.state_dim) {
    throw std::invalid_argument("update_stats: mu_ref dimension mismatch");
  }
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw std::invalid_argument("update_stats: dt must be positive");
  }
  if (!dz.allFinite()) {
    throw std::invalid_argument("update_stats: non-finite dz");
  }
  Eigen::LLT<Eigen::MatrixXd> rllt(model.noise);
  if (rllt.info() != Eigen::Success) {
    throw std::invalid_argument(
        "update_stats: observation noise is not positive definite");
  }

  UpdateStats out;
  if (m.kind == ExpectationMethod::Kind::ExactLinear) {
    if (!model.linear_map) {
      throw std::invalid_argument(
          "update_stats: exact-linear requires a declared linear observation");
    }
    const Eigen::MatrixXd& h = *model.linear_map;
    const Eigen::VectorXd resid = dz - h * q.mean() * dt;
    out.dc = h.transpose() * rllt.solve(resid);
    // E[(x - mu_ref)(dz - Hx dt)'] expands through the second moment
    // P + mu mu' of q; everything else is bookkeeping.
    const Eigen::MatrixXd second =
        q.cov() + q.mean() * q.mean().transpose() -
        mu_ref * q.mean().transpose();
    const Eigen::MatrixXd cross =
        (q.mean() - mu_ref) * dz.transpose() -
        second * h.transpose() * dt;
    out.dh = cross * rllt.solve(h);
    detail::check_finite(out.dc, "update_stats");
    detail::check_finite(out.dh, "update_stats");
    return out;
  }

  const NodeSet ns = build_node_set(q, m);
  StatsAccum acc = detail::pairwise_sum<StatsAccum>(
      0, ns.weights.size(), [&](std::int64_t i) {
        const Eigen::VectorXd x = ns.points.col(i);
        const Eigen::VectorXd resid = dz - model.h(x) * dt;
        const Eigen::MatrixXd j = model.jac(x);
        const Eigen::VectorXd rinv_resid = rllt.solve(resid);
        StatsAccum term;
        term.dc = ns.weights(i) * (j.transpose() * rinv_resid);
        term.dh = ns.weights(i) *
                  ((x - mu_ref) * (rinv_resid.transpose() * j));
        return term;
      });
  out.dc = std::move(acc.dc);
  out.dh = std::move(acc.dh);
  detail::check_finite(out.dc, "update_stats");
  detail::check_finite(out.dh, "update_stats");
  return out;
}

}  // namespace cvkf
