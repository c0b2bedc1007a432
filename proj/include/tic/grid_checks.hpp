#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "tic/hjb_grid.hpp"

namespace tic {

/// Grid-sampled running cost K(t, x, u) of the standard (time-consistent)
/// problem equivalent to the solved one, together with the value field of a
/// dynamic-programming sweep over K.
struct EquivalentStandard {
  VecX times, xs, us;
  MatX dp_V;                   // nt x nx, from the standard Bellman sweep
  std::vector<Index> k_levels;  // time levels at which K was retained
  std::vector<MatX> K;          // one nx x nu slice per retained level
  double max_interior_rel_dev = 0.0;  // DP value against the solved V
};

/// Assembles K(t,x,u) = H - A^u f(.,.,x) + A^u f^x - A^u (G o g) + G_y A^u g
/// from the solved equilibrium fields (re-generated level by level with the
/// frozen control) and runs a standard backward sweep over it. For the
/// sampled K the spatial derivatives are central (the assembly is a
/// diagnostic, not a marching stencil), while the Bellman sweep itself keeps
/// the solver's upwind scheme.
inline EquivalentStandard build_equivalent_standard(
    const ExtendedProblem& problem, const GridSolution& solution,
    const GridSpec& grid, Index keep_levels = 33) {
  problem.validate();
  grid.validate();
  if (solution.f_t0.size() == 0) {
    throw std::invalid_argument(
        "build_equivalent_standard: needs a solve_extended solution");
  }
  const Index nt = solution.times.size();
  const Index nx = solution.xs.size();
  const Index ny = solution.ys.size();
  const Index nu = solution.us.size();
  const double dt = solution.dt(), dx = solution.dx();
  const bool maximize = problem.sense == Sense::Maximize;
  const bool has_G = static_cast<bool>(problem.G);
  const bool has_H = static_cast<bool>(problem.H);
  const auto blends = detail::anchor_blends(solution.xs, solution.ys);
  const bool shared = (ny == nx);

  EquivalentStandard out;
  out.times = solution.times;
  out.xs = solution.xs;
  out.us = solution.us;
  out.dp_V.resize(nt, nx);

  const Index stride = std::max<Index>(1, (nt - 1) / std::max<Index>(
                                               1, keep_levels - 1));

  // Terminal fields, as in the solver.
  VecX g(nx), fdiag(nx), Gg(nx), dpV(nx);
  MatX f_next(nx, ny), f_cur(nx, ny);
  for (Index i = 0; i < nx; ++i) {
    const double x = solution.xs[i];
    g[i] = problem.k_of(x);
    for (Index j = 0; j < ny; ++j) {
      f_next(i, j) = problem.F(solution.ys[j], x);
    }
    fdiag[i] = problem.F(x, x);
    Gg[i] = has_G ? problem.G(x, g[i]) : 0.0;
    dpV[i] = fdiag[i] + Gg[i];
  }
  out.dp_V.row(nt - 1) = dpV;

  detail::FieldDerivs dg, dfd, dGg, ddp;
  VecX g_new(nx), fdiag_new(nx), Gg_new(nx), dp_new(nx);

  for (Index level = nt - 2; level >= 0; --level) {
    const double t_new = solution.times[level];
    dg.compute(g, dx);
    dfd.compute(fdiag, dx);
    if (has_G) dGg.compute(Gg, dx);
    ddp.compute(dpV, dx);

    // Regenerate f, g one step with the frozen equilibrium control.
    for (Index i = 0; i < nx; ++i) {
      const double x = solution.xs[i];
      const double u_star = solution.u_hat(level, i);
      const Control uc = control1(u_star);
      const double mu = problem.model.drift(t_new, x, uc);
      const double sd = problem.model.diffusion(t_new, x, uc);
      const double sig2 = sd * sd;
      g_new[i] = g[i] + dt * dg.generator(i, mu, sig2);
      for (Index j = 0; j < ny; ++j) {
        const auto cd = detail::column_derivs(f_next, i, j, dx);
        double source = 0.0;
        if (has_H) source = problem.H(solution.ys[j], t_new, x, u_star);
        f_cur(i, j) = f_next(i, j) + dt * (cd.generator(mu, sig2) + source);
      }
    }
    for (Index i = 0; i < nx; ++i) {
      fdiag_new[i] = shared ? f_cur(i, i)
                            : detail::blended_value(
                                  f_cur, i, blends[static_cast<std::size_t>(i)]);
      Gg_new[i] = has_G ? problem.G(solution.xs[i], g_new[i]) : 0.0;
    }

    const bool keep = (level % stride == 0) || level == 0;
    MatX k_slice;
    if (keep) k_slice.resize(nx, nu);

    // K at this level and the Bellman step over it.
    for (Index i = 0; i < nx; ++i) {
      const double x = solution.xs[i];
      const auto fcol =
          shared ? detail::column_derivs(f_next, i, i, dx)
                 : detail::blended_column_derivs(
                       f_next, i, blends[static_cast<std::size_t>(i)], dx);
      const double fnext_diag =
          shared ? f_next(i, i)
                 : detail::blended_value(f_next, i,
                                         blends[static_cast<std::size_t>(i)]);
      const double gy =
          has_G ? detail::wrapper_slope_m(problem.G, x, g[i]) : 0.0;

      const auto K_at = [&](double uval) {
        const Control u = control1(uval);
        const double mu = problem.model.drift(t_new, x, u);
        const double sd = problem.model.diffusion(t_new, x, u);
        const double sig2 = sd * sd;
        const auto central = [&](const detail::FieldDerivs& d) {
          return mu * d.central(i) + 0.5 * sig2 * d.d2[i];
        };
        double kv = 0.0;
        if (has_H) kv += problem.H(x, t_new, x, uval);
        kv -= (fdiag[i] - fdiag_new[i]) / dt + central(dfd);
        kv += (fnext_diag - fdiag_new[i]) / dt + mu * 0.5 *
                                                      (fcol.fwd + fcol.bwd) +
              0.5 * sig2 * fcol.d2;
        if (has_G) {
          kv -= (Gg[i] - Gg_new[i]) / dt + central(dGg);
          kv += gy * ((g[i] - g_new[i]) / dt + central(dg));
        }
        return kv;
      };

      if (keep) {
        for (Index j = 0; j < nu; ++j) k_slice(i, j) = K_at(solution.us[j]);
      }

      // Standard explicit Bellman step with upwind transport and K as the
      // running reward.
      const auto objective = [&](double uval) {
        const Control u = control1(uval);
        const double mu = problem.model.drift(t_new, x, u);
        const double sd = problem.model.diffusion(t_new, x, u);
        return ddp.generator(i, mu, sd * sd) + K_at(uval);
      };
      Index best = 0;
      double best_val = objective(solution.us[0]);
      for (Index j = 1; j < nu; ++j) {
        const double val = objective(solution.us[j]);
        if (maximize ? (val > best_val) : (val < best_val)) {
          best_val = val;
          best = j;
        }
      }
      const double lo = solution.us[std::max<Index>(best - 1, 0)];
      const double hi = solution.us[std::min<Index>(best + 1, nu - 1)];
      const double u_dp = detail::golden_refine(
          objective, lo, hi, solution.us[best], best_val, maximize);
      dp_new[i] = dpV[i] + dt * objective(u_dp);
    }

    if (keep) {
      out.k_levels.push_back(level);
      out.K.push_back(std::move(k_slice));
    }

    g = g_new;
    fdiag = fdiag_new;
    Gg = Gg_new;
    std::swap(f_next, f_cur);
    dpV = dp_new;
    out.dp_V.row(level) = dpV;
  }

  // Interior agreement between the Bellman value over K and the solved V.
  const Index lo_i = nx / 4, hi_i = nx - nx / 4;
  double v_scale = 0.0;
  for (Index level = 0; level < nt; ++level) {
    for (Index i = lo_i; i < hi_i; ++i) {
      v_scale = std::max(v_scale, std::abs(solution.V(level, i)));
    }
  }
  double max_dev = 0.0;
  for (Index level = 0; level < nt; ++level) {
    for (Index i = lo_i; i < hi_i; ++i) {
      const double ref = std::max(std::abs(solution.V(level, i)),
                                  0.01 * v_scale);
      max_dev = std::max(
          max_dev, std::abs(out.dp_V(level, i) - solution.V(level, i)) / ref);
    }
  }
  out.max_interior_rel_dev = max_dev;
  return out;
}

/// Result of the multiplicative-reweighting invariance check.
struct ScalingReport {
  double argmax_agreement = 0.0;  // fraction of interior nodes within one
                                  // control-grid step
  double max_ratio_dev = 0.0;     // max |V_w / (w V) - 1| on the interior
};

/// Solves the problem reweighted by a positive function of the anchor state
/// (F, G and H all scaled by weight(x_anchor)) and reports how well the
/// control field and the ratio V_w / (w V) match the invariance prediction.
inline ScalingReport scaling_check(const ExtendedProblem& problem,
                                   const std::function<double(double)>& weight,
                                   const GridSpec& grid) {
  problem.validate();
  grid.validate();
  const VecX xs = VecX::LinSpaced(grid.nx, grid.x_lo, grid.x_hi);
  for (Index i = 0; i < xs.size(); ++i) {
    if (!(weight(xs[i]) > 0.0)) {
      throw std::invalid_argument("scaling_check: weight must be positive");
    }
  }

  ExtendedProblem weighted = problem;
  weighted.F = [F = problem.F, weight](double xa, double y) {
    return weight(xa) * F(xa, y);
  };
  if (problem.G) {
    weighted.G = [G = problem.G, weight](double xa, double m) {
      return weight(xa) * G(xa, m);
    };
  }
  if (problem.H) {
    weighted.H = [H = problem.H, weight](double xa, double s, double y,
                                         double u) {
      return weight(xa) * H(xa, s, y, u);
    };
  }

  const GridSolution base = solve_extended(problem, grid);
  const GridSolution scaled = solve_extended(weighted, grid);

  const Index nt = base.times.size(), nx = base.xs.size();
  const Index lo_i = nx / 4, hi_i = nx - nx / 4;
  const double du = base.us[1] - base.us[0];

  Index hits = 0, total = 0;
  double max_dev = 0.0;
  for (Index level = 0; level < nt; ++level) {
    for (Index i = lo_i; i < hi_i; ++i) {
      ++total;
      if (std::abs(scaled.u_hat(level, i) - base.u_hat(level, i)) <=
          du + 1e-12) {
        ++hits;
      }
      const double denom = weight(base.xs[i]) * base.V(level, i);
      if (std::abs(denom) > 1e-10) {
        max_dev = std::max(
            max_dev, std::abs(scaled.V(level, i) / denom - 1.0));
      }
    }
  }
  ScalingReport report;
  report.argmax_agreement =
      static_cast<double>(hits) / static_cast<double>(total);
  report.max_ratio_dev = max_dev;
  return report;
}

}  // namespace tic
