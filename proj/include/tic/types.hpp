#pragma once

#include <Eigen/Core>

namespace tic {

using Index = Eigen::Index;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

/// Path-major storage: one row per path, one column per time node.
using PathMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Maximum number of control components supported by the simulation core.
/// All worked problems use one control (portfolio amount) or two
/// (portfolio amount, consumption rate).
constexpr int kMaxControls = 2;

/// Control vector with fixed capacity and no heap allocation.
using Control = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxControls, 1>;

inline Control control1(double u) {
  Control c(1);
  c[0] = u;
  return c;
}

inline Control control2(double u0, double u1) {
  Control c(2);
  c[0] = u0;
  c[1] = u1;
  return c;
}

/// Optimization sense of a reward functional.
enum class Sense { Maximize, Minimize };

}  // namespace tic
