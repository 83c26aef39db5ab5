// Gaussian beliefs and the geometry used throughout the filter:
// KL divergence, squared Bures-Wasserstein distance, and the Fisher
// information matrix of the (mean, vech covariance) parameterization.
#pragma once

#include <Eigen/Dense>

namespace cvkf {

// N(mean, cov). Construction symmetrizes the covariance and raises any
// eigenvalue below 1e-12 * trace / dim to that floor so downstream
// factorizations stay usable. floored() reports whether an eigenvalue had
// to be lifted by more than a roundoff budget, i.e. the input was
// genuinely indefinite rather than merely asymmetric at machine precision.
class GaussianBelief {
 public:
  GaussianBelief(Eigen::VectorXd mean, const Eigen::MatrixXd& cov);

  int dim() const { return static_cast<int>(mean_.size()); }
  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::MatrixXd& cov() const { return cov_; }
  bool floored() const { return floored_; }

 private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd cov_;
  bool floored_ = false;
};

// KL(q || r). Throws std::invalid_argument on dimension mismatch, a
// non-invertible r covariance, or a singular q covariance.
double kl_divergence(const GaussianBelief& q, const GaussianBelief& r);

// Squared Bures-Wasserstein distance
//   |mu_q - mu_r|^2 + tr(P_q + P_r - 2 (P_q^1/2 P_r P_q^1/2)^1/2),
// computed through symmetric eigendecompositions with eigenvalues clamped
// at zero before the square roots.
double bures_wasserstein_distance_sq(const GaussianBelief& q,
                                     const GaussianBelief& r);

// Symmetric PSD square root with negative eigenvalues clamped to zero.
Eigen::MatrixXd matrix_sqrt_psd(const Eigen::MatrixXd& m);

// Differential entropy 0.5 * log det(2 pi e P).
double gaussian_entropy(const GaussianBelief& q);

// Parameter vector theta = [mean; vech(cov)] where vech stacks the upper
// triangle row by row: (0,0), (0,1), ..., (0,d-1), (1,1), ... (d-1,d-1).
// All Fisher-matrix and natural-gradient code uses this ordering.
int param_dim(int dim);
Eigen::VectorXd to_param_vector(const GaussianBelief& q);
GaussianBelief from_param_vector(const Eigen::VectorXd& theta, int dim);

// Fisher information in the parameterization above: block diagonal with
// P^-1 for the mean block and F(a,b) = 0.5 tr(P^-1 S_a P^-1 S_b) for the
// covariance block, S_a the symmetric basis matrix of vech entry a
// (E_ii on the diagonal, E_ij + E_ji off it). Requires strictly positive
// definite covariance.
Eigen::MatrixXd fisher_matrix(const GaussianBelief& q);

// KL(q+delta || q) - 0.5 * delta' F(q) delta, the remainder beyond the
// quadratic model of KL at q. Throws if the perturbed covariance is not
// positive semidefinite.
double kl_quadratic_residual(const GaussianBelief& q,
                             const Eigen::VectorXd& delta);

}  // namespace cvkf
