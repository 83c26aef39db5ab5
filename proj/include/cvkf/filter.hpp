// Filter recursions: the fused predict-update step, full trajectory runs,
// and the Kalman-Bucy / Riccati references used to validate the linear
// case.
#pragma once

#include <string>
#include <vector>

#include "cvkf/expectation.hpp"
#include "cvkf/fixed_point.hpp"
#include "cvkf/gaussian.hpp"
#include "cvkf/models.hpp"
#include "cvkf/propagation.hpp"
#include "cvkf/record.hpp"
#include "cvkf/update.hpp"

namespace cvkf {

enum class PropagationKind { Explicit, Implicit };
enum class UpdateKind { Precision, Covariance, NaturalGradient };

// What runs at each step of a trajectory.
struct FilterKind {
  enum class Family {
    Cvkf,             // propagation then measurement update
    KalmanBucy,       // linear reference recursion
    PropagationOnly,  // dynamics only, observations ignored
    UpdateOnly        // measurement updates only, static state
  };
  Family family = Family::Cvkf;
  PropagationKind propagation = PropagationKind::Explicit;
  UpdateKind update = UpdateKind::Precision;
};

std::string to_string(const FilterKind& kind);

// One fused filter step: propagate q through dt, then assimilate dz.
GaussianBelief cvkf_step(const GaussianBelief& q, const PotentialModel& dyn,
                         const ObservationModel& obs,
                         const Eigen::VectorXd& dz, double dt,
                         const ExpectationMethod& method,
                         const FixedPointConfig& fp,
                         PropagationKind propagation, UpdateKind update,
                         StepInfo* info = nullptr);

// Euler discretization of the Kalman-Bucy equations:
//   mu' = mu + F mu dt + P G' R^-1 (dz - G mu dt)
//   P'  = P + (F P + P F' - P G' R^-1 G P + 2 eps I) dt
GaussianBelief kalman_bucy_step(const GaussianBelief& q,
                                const LinearModelPair& lin,
                                const Eigen::VectorXd& dz, double dt);

struct RiccatiTrajectory {
  std::vector<double> times;
  std::vector<Eigen::MatrixXd> covariances;
};

// Classic fourth-order Runge-Kutta integration of the Riccati equation
//   dP/dt = F P + P F' - P G' R^-1 G P + 2 eps I
// on a uniform fine grid; the reference the Euler covariance is compared
// against.
RiccatiTrajectory riccati_reference(const LinearModelPair& lin,
                                    const Eigen::MatrixXd& p0, double horizon,
                                    double dt);

struct StepFlags {
  bool floored = false;
  int iterations = 0;
};

// Belief at t=0 plus one belief per assimilated record.
struct BeliefTrajectory {
  std::vector<double> times;
  std::vector<GaussianBelief> beliefs;
  std::vector<StepFlags> flags;  // one entry per step taken
};

// Runs a filter over a record sequence. Records must be in time order with
// a uniform positive dt. Propagation failures and non-finite beliefs abort
// with the step index in the exception message.
BeliefTrajectory run_filter(const FilterKind& kind, const Scenario& scenario,
                            const GaussianBelief& prior,
                            const std::vector<ObservationRecord>& records,
                            const ExpectationMethod& method,
                            const FixedPointConfig& fp);

}  // namespace cvkf
