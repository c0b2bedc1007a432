#pragma once

#include "tic/hjb_grid.hpp"
#include "tic/lq.hpp"
#include "tic/mean_variance.hpp"

namespace tic {

/// Mean-variance portfolio problem as a grid problem (anchor-free F, G).
inline ExtendedProblem mv_extended_problem(const MvParams& p, double u_lo,
                                           double u_hi) {
  ExtendedProblem problem;
  problem.model = mv_wealth_model(p, u_lo, u_hi);
  const double gamma = p.gamma;
  problem.F = [gamma](double, double y) { return y - 0.5 * gamma * y * y; };
  problem.G = [gamma](double, double m) { return 0.5 * gamma * m * m; };
  problem.sense = Sense::Maximize;
  return problem;
}

/// Wealth-dependent risk aversion gamma(x) = gamma/x (anchored F, G).
inline ExtendedProblem mv_wealth_extended_problem(const MvParams& p,
                                                  double u_lo, double u_hi) {
  ExtendedProblem problem;
  problem.model = mv_wealth_model(p, u_lo, u_hi);
  const double gamma = p.gamma;
  problem.F = [gamma](double xa, double y) {
    return y - 0.5 * (gamma / xa) * y * y;
  };
  problem.G = [gamma](double xa, double m) {
    return 0.5 * (gamma / xa) * m * m;
  };
  problem.sense = Sense::Maximize;
  return problem;
}

/// Time-inconsistent regulator as a grid problem (anchored F, running H,
/// minimization).
inline ExtendedProblem lq_extended_problem(const LqParams& p, double u_lo,
                                           double u_hi) {
  ExtendedProblem problem;
  problem.model = lq_model(p, u_lo, u_hi);
  const double gamma = p.gamma;
  problem.F = [gamma](double xa, double y) {
    return 0.5 * gamma * (y - xa) * (y - xa);
  };
  problem.H = [](double, double, double, double u) { return 0.5 * u * u; };
  problem.sense = Sense::Minimize;
  return problem;
}

}  // namespace tic
