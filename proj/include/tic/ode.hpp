#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>

#include "tic/types.hpp"

namespace tic {

/// First-order system dy/dt = rhs(t, y).
struct OdeSystem {
  Index dim = 0;
  std::function<VecX(double, const VecX&)> rhs;
};

/// Dense fixed-step solution with a linear interpolating evaluator.
struct OdeSolution {
  VecX times;   // strictly increasing, uniform
  MatX values;  // (steps + 1) x dim, row i holds y(times[i])

  /// Linear interpolation between nodes; exact at nodes. Arguments outside
  /// the integration interval are clamped to the nearest endpoint.
  VecX eval(double t) const {
    const Index n = times.size();
    if (t <= times[0]) return values.row(0);
    if (t >= times[n - 1]) return values.row(n - 1);
    const double dt = times[1] - times[0];
    const auto i = static_cast<Index>((t - times[0]) / dt);
    const Index lo = std::min(i, n - 2);
    const double w = (t - times[lo]) / (times[lo + 1] - times[lo]);
    return (1.0 - w) * values.row(lo).transpose() +
           w * values.row(lo + 1).transpose();
  }

  double eval(double t, Index component) const { return eval(t)[component]; }
};

/// Integrates y' = rhs(t, y) backward from y(T) = terminal down to t0 with
/// classical fourth-order Runge-Kutta on a uniform grid.
inline OdeSolution integrate_terminal(const OdeSystem& system,
                                      const VecX& terminal, double t0,
                                      double T, Index steps) {
  if (!(t0 < T)) throw std::invalid_argument("integrate_terminal: t0 >= T");
  if (steps < 1) throw std::invalid_argument("integrate_terminal: steps < 1");
  if (terminal.size() != system.dim) {
    throw std::invalid_argument(
        "integrate_terminal: terminal size does not match system dim");
  }

  OdeSolution sol;
  const Index n = steps + 1;
  sol.times = VecX::LinSpaced(n, t0, T);
  sol.values.resize(n, system.dim);
  sol.values.row(n - 1) = terminal;

  const double h = -(T - t0) / static_cast<double>(steps);
  VecX y = terminal;
  for (Index i = n - 1; i > 0; --i) {
    const double t = sol.times[i];
    const VecX k1 = system.rhs(t, y);
    const VecX k2 = system.rhs(t + 0.5 * h, y + 0.5 * h * k1);
    const VecX k3 = system.rhs(t + 0.5 * h, y + 0.5 * h * k2);
    const VecX k4 = system.rhs(t + h, y + h * k3);
    y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!y.allFinite()) {
      throw std::runtime_error("integrate_terminal: non-finite state at t=" +
                               std::to_string(sol.times[i - 1]));
    }
    sol.values.row(i - 1) = y;
  }
  return sol;
}

}  // namespace tic
