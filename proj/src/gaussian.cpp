#include "cvkf/gaussian.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace cvkf {

namespace {

constexpr double kFloorScale = 1e-12;
// Eigenvalue drop tolerated before a lift counts as genuine indefiniteness.
constexpr double kIndefiniteBudget = 1e-10;

}  // namespace

GaussianBelief::GaussianBelief(Eigen::VectorXd mean, const Eigen::MatrixXd& cov)
    : mean_(std::move(mean)) {
  const auto d = mean_.size();
  if (d <= 0) {
    throw std::invalid_argument("GaussianBelief: empty mean");
  }
  if (cov.rows() != d || cov.cols() != d) {
    throw std::invalid_argument("GaussianBelief: covariance is " +
                                std::to_string(cov.rows()) + "x" +
                                std::to_string(cov.cols()) + ", expected " +
                                std::to_string(d) + "x" + std::to_string(d));
  }
  if (!mean_.allFinite() || !cov.allFinite()) {
    throw std::invalid_argument("GaussianBelief: non-finite entries");
  }

  Eigen::MatrixXd sym = 0.5 * (cov + cov.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  if (es.info() != Eigen::Success) {
    throw std::runtime_error("GaussianBelief: eigendecomposition failed");
  }
  const double scale = std::max(sym.trace(), 0.0) / static_cast<double>(d);
  const double floor = kFloorScale * scale;
  const Eigen::VectorXd lifted = es.eigenvalues().cwiseMax(floor);
  floored_ = es.eigenvalues().minCoeff() < -kIndefiniteBudget * (1.0 + scale);
  cov_ = es.eigenvectors() * lifted.asDiagonal() * es.eigenvectors().transpose();
  cov_ = 0.5 * (cov_ + cov_.transpose());
}

double kl_divergence(const GaussianBelief& q, const GaussianBelief& r) {
  if (q.dim() != r.dim()) {
    throw std::invalid_argument("kl_divergence: dimension mismatch");
  }
  const int d = q.dim();
  Eigen::LLT<Eigen::MatrixXd> llt_r(r.cov());
  if (llt_r.info() != Eigen::Success) {
    throw std::invalid_argument(
        "kl_divergence: r covariance is not positive definite");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es_q(q.cov());
  if (es_q.info() != Eigen::Success || es_q.eigenvalues().minCoeff() <= 0.0) {
    throw std::invalid_argument("kl_divergence: q covariance is singular");
  }

  double logdet_r = 0.0;
  const Eigen::MatrixXd& l = llt_r.matrixLLT();
  for (int i = 0; i < d; ++i) logdet_r += 2.0 * std::log(l(i, i));
  const double logdet_q = es_q.eigenvalues().array().log().sum();

  const Eigen::VectorXd delta = r.mean() - q.mean();
  const double trace_term = llt_r.solve(q.cov()).trace();
  const double quad_term = delta.dot(llt_r.solve(delta));
  const double kl =
      0.5 * (trace_term + quad_term - d + logdet_r - logdet_q);
  return std::max(kl, 0.0);
}

Eigen::MatrixXd matrix_sqrt_psd(const Eigen::MatrixXd& m) {
  Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  if (es.info() != Eigen::Success) {
    throw std::runtime_error("matrix_sqrt_psd: eigendecomposition failed");
  }
  return es.eigenvectors() *
         es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
         es.eigenvectors().transpose();
}

double bures_wasserstein_distance_sq(const GaussianBelief& q,
                                     const GaussianBelief& r) {
  if (q.dim() != r.dim()) {
    throw std::invalid_argument(
        "bures_wasserstein_distance_sq: dimension mismatch");
  }
  const Eigen::MatrixXd a = matrix_sqrt_psd(q.cov());
  Eigen::MatrixXd inner = a * r.cov() * a;
  inner = 0.5 * (inner + inner.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(inner);
  if (es.info() != Eigen::Success) {
    throw std::runtime_error(
        "bures_wasserstein_distance_sq: eigendecomposition failed");
  }
  const double cross = es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  const double dist = (q.mean() - r.mean()).squaredNorm() + q.cov().trace() +
                      r.cov().trace() - 2.0 * cross;
  return std::max(dist, 0.0);
}

double gaussian_entropy(const GaussianBelief& q) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(q.cov());
  if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() <= 0.0) {
    throw std::invalid_argument("gaussian_entropy: singular covariance");
  }
  const double logdet = es.eigenvalues().array().log().sum();
  const double d = static_cast<double>(q.dim());
  return 0.5 * (d * std::log(2.0 * std::numbers::pi) + d + logdet);
}

int param_dim(int dim) {
  if (dim <= 0) throw std::invalid_argument("param_dim: dim must be positive");
  return dim + dim * (dim + 1) / 2;
}

Eigen::VectorXd to_param_vector(const GaussianBelief& q) {
  const int d = q.dim();
  Eigen::VectorXd theta(param_dim(d));
  theta.head(d) = q.mean();
  int k = d;
  for (int i = 0; i < d; ++i) {
    for (int j = i; j < d; ++j) {
      theta(k++) = q.cov()(i, j);
    }
  }
  return theta;
}

GaussianBelief from_param_vector(const Eigen::VectorXd& theta, int dim) {
  if (theta.size() != param_dim(dim)) {
    throw std::invalid_argument("from_param_vector: theta has " +
                                std::to_string(theta.size()) +
                                " entries, expected " +
                                std::to_string(param_dim(dim)));
  }
  Eigen::MatrixXd cov(dim, dim);
  int k = dim;
  for (int i = 0; i < dim; ++i) {
    for (int j = i; j < dim; ++j) {
      cov(i, j) = theta(k);
      cov(j, i) = theta(k);
      ++k;
    }
  }
  return GaussianBelief(theta.head(dim), cov);
}

Eigen::MatrixXd fisher_matrix(const GaussianBelief& q) {
  const int d = q.dim();
  Eigen::LLT<Eigen::MatrixXd> llt(q.cov());
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument(
        "fisher_matrix: covariance is not positive definite");
  }
  const Eigen::MatrixXd lambda =
      llt.solve(Eigen::MatrixXd::Identity(d, d));

  const int m = d * (d + 1) / 2;
  std::vector<Eigen::MatrixXd> basis;
  basis.reserve(m);
  for (int i = 0; i < d; ++i) {
    for (int j = i; j < d; ++j) {
      Eigen::MatrixXd s = Eigen::MatrixXd::Zero(d, d);
      s(i, j) += 1.0;
      s(j, i) += 1.0;
      if (i == j) s(i, i) = 1.0;
      basis.push_back(std::move(s));
    }
  }

  Eigen::MatrixXd f = Eigen::MatrixXd::Zero(d + m, d + m);
  f.topLeftCorner(d, d) = lambda;
  std::vector<Eigen::MatrixXd> prods(m);
  for (int a = 0; a < m; ++a) prods[a] = lambda * basis[a];
  for (int a = 0; a < m; ++a) {
    for (int b = a; b < m; ++b) {
      const double v = 0.5 * (prods[a] * prods[b]).trace();
      f(d + a, d + b) = v;
      f(d + b, d + a) = v;
    }
  }
  return f;
}

double kl_quadratic_residual(const GaussianBelief& q,
                             const Eigen::VectorXd& delta) {
  const int d = q.dim();
  if (delta.size() != param_dim(d)) {
    throw std::invalid_argument("kl_quadratic_residual: delta has " +
                                std::to_string(delta.size()) +
                                " entries, expected " +
                                std::to_string(param_dim(d)));
  }
  const Eigen::VectorXd theta = to_param_vector(q) + delta;
  const GaussianBelief perturbed = from_param_vector(theta, d);
  if (perturbed.floored()) {
    throw std::invalid_argument(
        "kl_quadratic_residual: perturbation breaks positive definiteness");
  }
  const Eigen::MatrixXd f = fisher_matrix(q);
  return kl_divergence(perturbed, q) - 0.5 * delta.dot(f * delta);
}

}  // namespace cvkf
