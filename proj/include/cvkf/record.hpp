#pragma once

#include <Eigen/Dense>

namespace cvkf {

// One accumulated observation increment: dz gathered over [t, t + dt).
struct ObservationRecord {
  double t = 0.0;
  double dt = 0.0;
  Eigen::VectorXd dz;
};

}  // namespace cvkf
