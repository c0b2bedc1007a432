#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "tic/reward.hpp"
#include "tic/sde.hpp"
#include "tic/types.hpp"

namespace tic {

/// Rectangular space-time-control grid for the finite-difference solver.
struct GridSpec {
  double x_lo = 0.0;
  double x_hi = 1.0;
  Index nx = 101;  // state nodes
  Index nt = 0;    // time nodes; 0 defers to cfl_time_nodes
  Index nu = 51;   // control nodes over [control_lo, control_hi]
  Index ny = 0;    // anchor nodes; 0 shares the state grid

  void validate() const {
    if (!(x_lo < x_hi)) throw std::invalid_argument("GridSpec: x_lo >= x_hi");
    if (nx < 4) throw std::invalid_argument("GridSpec: nx < 4");
    if (nu < 2) throw std::invalid_argument("GridSpec: nu < 2");
    if (nt != 0 && nt < 2) throw std::invalid_argument("GridSpec: nt < 2");
    if (ny != 0 && ny < 2) throw std::invalid_argument("GridSpec: ny < 2");
  }
};

/// Problem data for the coupled value system: terminal reward F(x_anchor, y),
/// wrapper G(x_anchor, m) of the expected terminal transform m = E[k(X_T)],
/// and running reward H(x_anchor, s, y, u). Anchors are state-only here; the
/// Monte Carlo estimators support time anchors as well, but a grid field per
/// (anchor time, anchor state) pair is not representable, and none of the
/// worked problems needs one.
struct ExtendedProblem {
  ControlModel model;  // scalar control
  std::function<double(double, double)> F;
  std::function<double(double, double)> G;  // may be absent
  std::function<double(double)> k;          // defaults to identity
  std::function<double(double, double, double, double)> H;  // may be absent
  Sense sense = Sense::Maximize;

  double k_of(double y) const { return k ? k(y) : y; }

  void validate() const {
    model.validate();
    if (model.control_dim() != 1) {
      throw std::invalid_argument(
          "ExtendedProblem: grid solver needs a scalar control");
    }
    if (!F) throw std::invalid_argument("ExtendedProblem: F is required");
  }

  /// The same reward seen by the Monte Carlo estimators.
  RewardSpec reward_spec() const {
    RewardSpec spec;
    spec.terminal = [F = F](double, double xa, double y) { return F(xa, y); };
    if (G) {
      spec.wrapper = [G = G](double, double xa, double m) { return G(xa, m); };
    }
    if (k) spec.terminal_transform = k;
    if (H) {
      spec.running = [H = H](double, double xa, double s, double y,
                             const Control& u) { return H(xa, s, y, u[0]); };
    }
    spec.sense = sense;
    return spec;
  }
};

struct GridDiagnostics {
  double dt = 0.0;
  double dx = 0.0;
  double cfl_margin = 0.0;  // >= 1 when the step satisfies both bounds
  Index boundary_influence_nodes = 0;
};

/// Discrete solution fields. Time runs along rows (row 0 is t = 0, the last
/// row is the terminal condition). f is kept as its diagonal f(t, x, x) for
/// all levels plus the full anchor plane at t = 0; solve_simplified leaves
/// both f members empty.
struct GridSolution {
  VecX times, xs, ys, us;
  MatX V, g, u_hat, f_diag;  // nt x nx
  MatX f_t0;                 // nx x ny
  GridDiagnostics diagnostics;

  double dt() const { return times[1] - times[0]; }
  double dx() const { return xs[1] - xs[0]; }

  double interp(const MatX& field, double t, double x) const {
    const Index nt = times.size(), nx = xs.size();
    const double tt = std::min(std::max(t, times[0]), times[nt - 1]);
    const double xx = std::min(std::max(x, xs[0]), xs[nx - 1]);
    const Index it =
        std::min<Index>(static_cast<Index>((tt - times[0]) / dt()), nt - 2);
    const Index ix =
        std::min<Index>(static_cast<Index>((xx - xs[0]) / dx()), nx - 2);
    const double wt = (tt - times[it]) / dt();
    const double wx = (xx - xs[ix]) / dx();
    return (1 - wt) * ((1 - wx) * field(it, ix) + wx * field(it, ix + 1)) +
           wt * ((1 - wx) * field(it + 1, ix) + wx * field(it + 1, ix + 1));
  }

  double value(double t, double x) const { return interp(V, t, x); }
  double g_value(double t, double x) const { return interp(g, t, x); }
  double control(double t, double x) const { return interp(u_hat, t, x); }

  /// Feedback law interpolated from the computed control field.
  FeedbackLaw control_law() const {
    struct Table {
      VecX times, xs;
      MatX u;
    };
    auto table = std::make_shared<Table>(Table{times, xs, u_hat});
    return scalar_law([table](double t, double x) {
      const Index nt = table->times.size(), nx = table->xs.size();
      const double dt = table->times[1] - table->times[0];
      const double dx = table->xs[1] - table->xs[0];
      const double tt =
          std::min(std::max(t, table->times[0]), table->times[nt - 1]);
      const double xx = std::min(std::max(x, table->xs[0]), table->xs[nx - 1]);
      const Index it = std::min<Index>(
          static_cast<Index>((tt - table->times[0]) / dt), nt - 2);
      const Index ix = std::min<Index>(
          static_cast<Index>((xx - table->xs[0]) / dx), nx - 2);
      const double wt = (tt - table->times[it]) / dt;
      const double wx = (xx - table->xs[ix]) / dx;
      return (1 - wt) * ((1 - wx) * table->u(it, ix) +
                         wx * table->u(it, ix + 1)) +
             wt * ((1 - wx) * table->u(it + 1, ix) +
                   wx * table->u(it + 1, ix + 1));
    });
  }
};

namespace detail {

/// One-sided first differences and the second difference of a grid field;
/// boundary curvature linearly extrapolates the neighboring second
/// differences.
struct FieldDerivs {
  VecX fwd, bwd, d2;

  void compute(const VecX& v, double dx) {
    const Index n = v.size();
    fwd.resize(n);
    bwd.resize(n);
    d2.resize(n);
    for (Index i = 0; i + 1 < n; ++i) fwd[i] = (v[i + 1] - v[i]) / dx;
    for (Index i = 1; i < n; ++i) bwd[i] = (v[i] - v[i - 1]) / dx;
    fwd[n - 1] = bwd[n - 1];
    bwd[0] = fwd[0];
    for (Index i = 1; i + 1 < n; ++i) {
      d2[i] = (v[i + 1] - 2.0 * v[i] + v[i - 1]) / (dx * dx);
    }
    d2[0] = 2.0 * d2[1] - d2[2];
    d2[n - 1] = 2.0 * d2[n - 2] - d2[n - 3];
  }

  double upwind(Index i, double mu) const { return mu >= 0 ? fwd[i] : bwd[i]; }

  /// mu d/dx + (1/2) sigma^2 d^2/dx^2 at node i (upwind first derivative).
  double generator(Index i, double mu, double sig2) const {
    return mu * upwind(i, mu) + 0.5 * sig2 * d2[i];
  }

  double central(Index i) const { return 0.5 * (fwd[i] + bwd[i]); }
};

/// Spatial derivatives of one anchor column of the f plane at one node.
struct ColumnDerivs {
  double fwd = 0, bwd = 0, d2 = 0;

  double upwind(double mu) const { return mu >= 0 ? fwd : bwd; }
  double generator(double mu, double sig2) const {
    return mu * upwind(mu) + 0.5 * sig2 * d2;
  }
};

inline ColumnDerivs column_derivs(const MatX& f, Index row, Index col,
                                  double dx) {
  const Index n = f.rows();
  const auto second = [&](Index i) {
    return (f(i + 1, col) - 2.0 * f(i, col) + f(i - 1, col)) / (dx * dx);
  };
  ColumnDerivs d;
  if (row + 1 < n) d.fwd = (f(row + 1, col) - f(row, col)) / dx;
  if (row > 0) d.bwd = (f(row, col) - f(row - 1, col)) / dx;
  if (row == 0) d.bwd = d.fwd;
  if (row + 1 == n) d.fwd = d.bwd;
  if (row == 0) {
    d.d2 = 2.0 * second(1) - second(2);
  } else if (row + 1 == n) {
    d.d2 = 2.0 * second(n - 2) - second(n - 3);
  } else {
    d.d2 = second(row);
  }
  return d;
}

/// Anchor-interpolation weights placing each state node on the anchor grid.
struct AnchorBlend {
  Index j = 0;
  double w = 0.0;  // value at x = (1-w) column j + w column j+1
};

inline std::vector<AnchorBlend> anchor_blends(const VecX& xs, const VecX& ys) {
  std::vector<AnchorBlend> blends(static_cast<std::size_t>(xs.size()));
  const double dy = ys[1] - ys[0];
  for (Index i = 0; i < xs.size(); ++i) {
    const double pos = (xs[i] - ys[0]) / dy;
    Index j = static_cast<Index>(std::floor(pos));
    j = std::min(std::max<Index>(j, 0), ys.size() - 2);
    blends[static_cast<std::size_t>(i)] = {j, pos - static_cast<double>(j)};
  }
  return blends;
}

inline ColumnDerivs blended_column_derivs(const MatX& f, Index row,
                                          const AnchorBlend& blend,
                                          double dx) {
  const ColumnDerivs a = column_derivs(f, row, blend.j, dx);
  const ColumnDerivs b = column_derivs(f, row, blend.j + 1, dx);
  const double w = blend.w;
  return {(1 - w) * a.fwd + w * b.fwd, (1 - w) * a.bwd + w * b.bwd,
          (1 - w) * a.d2 + w * b.d2};
}

inline double blended_value(const MatX& f, Index row, const AnchorBlend& b) {
  return (1 - b.w) * f(row, b.j) + b.w * f(row, b.j + 1);
}

inline double wrapper_slope_m(const std::function<double(double, double)>& G,
                              double xa, double m) {
  const double step = 1e-6 * std::max(1.0, std::abs(m));
  return (G(xa, m + step) - G(xa, m - step)) / (2.0 * step);
}

inline double wrapper_curvature_m(
    const std::function<double(double, double)>& G, double xa, double m) {
  const double step = 1e-5 * std::max(1.0, std::abs(m));
  return (G(xa, m + step) - 2.0 * G(xa, m) + G(xa, m - step)) / (step * step);
}

/// Golden-section refinement of a bracketed scalar optimum; keeps the
/// incumbent when refinement does not improve on it.
template <class Objective>
double golden_refine(Objective&& phi, double lo, double hi, double u0,
                     double phi0, bool maximize, int iters = 36) {
  constexpr double inv_gr = 0.6180339887498949;
  double a = lo, b = hi;
  double c = b - inv_gr * (b - a);
  double d = a + inv_gr * (b - a);
  double fc = phi(c), fd = phi(d);
  for (int it = 0; it < iters; ++it) {
    const bool pick_left = maximize ? (fc > fd) : (fc < fd);
    if (pick_left) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_gr * (b - a);
      fc = phi(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_gr * (b - a);
      fd = phi(d);
    }
  }
  const double u_ref = 0.5 * (a + b);
  const double f_ref = phi(u_ref);
  const bool better = maximize ? (f_ref > phi0) : (f_ref < phi0);
  return better ? u_ref : u0;
}

struct CoefficientCache {
  MatX mu, sig2;  // nx x nu

  void fill(const ControlModel& model, const VecX& xs, const VecX& us,
            double t) {
    mu.resize(xs.size(), us.size());
    sig2.resize(xs.size(), us.size());
    for (Index j = 0; j < us.size(); ++j) {
      const Control u = control1(us[j]);
      for (Index i = 0; i < xs.size(); ++i) {
        mu(i, j) = model.drift(t, xs[i], u);
        const double s = model.diffusion(t, xs[i], u);
        sig2(i, j) = s * s;
      }
    }
  }
};

struct SweepSetup {
  VecX times, xs, ys, us;
  double dt = 0.0, dx = 0.0;
  GridDiagnostics diagnostics;
};

inline SweepSetup make_setup(const ExtendedProblem& problem,
                             const GridSpec& grid, bool with_anchors,
                             Index nt_nodes) {
  SweepSetup s;
  const double T = problem.model.horizon;
  s.times = VecX::LinSpaced(nt_nodes, 0.0, T);
  s.xs = VecX::LinSpaced(grid.nx, grid.x_lo, grid.x_hi);
  if (with_anchors) {
    const Index ny = grid.ny > 0 ? grid.ny : grid.nx;
    s.ys = (ny == grid.nx) ? s.xs : VecX::LinSpaced(ny, grid.x_lo, grid.x_hi);
  }
  s.us = VecX::LinSpaced(grid.nu, problem.model.control_lo[0],
                         problem.model.control_hi[0]);
  s.dt = s.times[1] - s.times[0];
  s.dx = s.xs[1] - s.xs[0];

  double max_sig2 = 0.0, max_mu = 0.0;
  Index bind_sig = 0, bind_mu = 0;
  for (double t : {0.0, 0.5 * T, T}) {
    for (Index j = 0; j < s.us.size(); ++j) {
      const Control u = control1(s.us[j]);
      for (Index i = 0; i < s.xs.size(); ++i) {
        const double sd = problem.model.diffusion(t, s.xs[i], u);
        if (sd * sd > max_sig2) {
          max_sig2 = sd * sd;
          bind_sig = i;
        }
        const double mu = std::abs(problem.model.drift(t, s.xs[i], u));
        if (mu > max_mu) {
          max_mu = mu;
          bind_mu = i;
        }
      }
    }
  }
  double margin = std::numeric_limits<double>::infinity();
  if (max_sig2 > 0.0) {
    margin = std::min(margin, 0.9 * s.dx * s.dx / (max_sig2 * s.dt));
    if (s.dt > 0.9 * s.dx * s.dx / max_sig2 * (1.0 + 1e-12)) {
      throw std::runtime_error(
          "grid: CFL violation (diffusion) binding at x=" +
          std::to_string(s.xs[bind_sig]) +
          "; need dt <= " + std::to_string(0.9 * s.dx * s.dx / max_sig2));
    }
  }
  if (max_mu > 0.0) {
    margin = std::min(margin, 0.9 * s.dx / (max_mu * s.dt));
    if (s.dt > 0.9 * s.dx / max_mu * (1.0 + 1e-12)) {
      throw std::runtime_error(
          "grid: CFL violation (drift) binding at x=" +
          std::to_string(s.xs[bind_mu]) +
          "; need dt <= " + std::to_string(0.9 * s.dx / max_mu));
    }
  }
  s.diagnostics.dt = s.dt;
  s.diagnostics.dx = s.dx;
  s.diagnostics.cfl_margin = margin;
  s.diagnostics.boundary_influence_nodes = static_cast<Index>(
      std::ceil((T * max_mu + 3.0 * std::sqrt(T * max_sig2)) / s.dx));
  return s;
}

}  // namespace detail

/// Smallest admissible number of time nodes under the explicit-scheme bounds
/// dt <= 0.9 dx^2 / max sigma^2 and dt <= 0.9 dx / max |mu| (coefficients
/// sampled over the grid, the control range and a few times).
inline Index cfl_time_nodes(const ExtendedProblem& problem,
                            const GridSpec& grid) {
  problem.validate();
  grid.validate();
  const double dx = (grid.x_hi - grid.x_lo) / static_cast<double>(grid.nx - 1);
  const VecX xs = VecX::LinSpaced(grid.nx, grid.x_lo, grid.x_hi);
  const VecX us = VecX::LinSpaced(grid.nu, problem.model.control_lo[0],
                                  problem.model.control_hi[0]);
  double max_sig2 = 0.0, max_mu = 0.0;
  const double T = problem.model.horizon;
  for (double t : {0.0, 0.5 * T, T}) {
    for (Index j = 0; j < us.size(); ++j) {
      const Control u = control1(us[j]);
      for (Index i = 0; i < xs.size(); ++i) {
        const double s = problem.model.diffusion(t, xs[i], u);
        max_sig2 = std::max(max_sig2, s * s);
        max_mu = std::max(max_mu, std::abs(problem.model.drift(t, xs[i], u)));
      }
    }
  }
  double dt_max = T;
  if (max_sig2 > 0.0) dt_max = std::min(dt_max, 0.9 * dx * dx / max_sig2);
  if (max_mu > 0.0) dt_max = std::min(dt_max, 0.9 * dx / max_mu);
  return static_cast<Index>(std::ceil(T / dt_max)) + 1;
}

/// Backward sweep of the coupled value system. At each time level the
/// control optimizing the discretized expression
///   A^u V - A^u f(.,.,x) + A^u f^x - A^u (G o g) + G_y(x, g) A^u g + H
/// is found by exhaustive search over the control grid followed by a
/// golden-section pass, ties broken toward the lowest control index; V,
/// every anchor column of f, and g are then stepped one explicit Euler step
/// with that control.
inline GridSolution solve_extended(const ExtendedProblem& problem,
                                   const GridSpec& grid) {
  problem.validate();
  grid.validate();
  const Index nt = grid.nt > 0 ? grid.nt : cfl_time_nodes(problem, grid);
  auto setup = detail::make_setup(problem, grid, true, nt);
  const Index nx = setup.xs.size(), ny = setup.ys.size(),
              nu = setup.us.size();
  const double dt = setup.dt, dx = setup.dx;
  const bool maximize = problem.sense == Sense::Maximize;
  const bool has_G = static_cast<bool>(problem.G);
  const bool has_H = static_cast<bool>(problem.H);
  const auto blends = detail::anchor_blends(setup.xs, setup.ys);
  const bool shared_anchors = (ny == nx);

  GridSolution sol;
  sol.times = setup.times;
  sol.xs = setup.xs;
  sol.ys = setup.ys;
  sol.us = setup.us;
  sol.diagnostics = setup.diagnostics;
  sol.V.resize(nt, nx);
  sol.g.resize(nt, nx);
  sol.u_hat.resize(nt, nx);
  sol.f_diag.resize(nt, nx);

  // Terminal conditions, evaluated exactly.
  VecX V(nx), g(nx), fdiag(nx), Gg(nx);
  MatX f_next(nx, ny), f_cur(nx, ny);
  for (Index i = 0; i < nx; ++i) {
    const double x = setup.xs[i];
    g[i] = problem.k_of(x);
    for (Index j = 0; j < ny; ++j) f_next(i, j) = problem.F(setup.ys[j], x);
    fdiag[i] = problem.F(x, x);
    Gg[i] = has_G ? problem.G(x, g[i]) : 0.0;
    V[i] = fdiag[i] + Gg[i];
  }
  sol.V.row(nt - 1) = V;
  sol.g.row(nt - 1) = g;
  sol.f_diag.row(nt - 1) = fdiag;

  detail::FieldDerivs dV, dg, dfd, dGg;
  detail::CoefficientCache coef;
  VecX u_level(nx), V_new(nx), g_new(nx), fdiag_new(nx), Gg_new(nx);

  const auto diag_derivs = [&](Index i) {
    return shared_anchors
               ? detail::column_derivs(f_next, i, i, dx)
               : detail::blended_column_derivs(
                     f_next, i, blends[static_cast<std::size_t>(i)], dx);
  };

  // Control optimization at one node against the level-(t+dt) fields.
  const auto optimize_node = [&](Index i, double t_new) {
    const double x = setup.xs[i];
    const double gy =
        has_G ? detail::wrapper_slope_m(problem.G, x, g[i]) : 0.0;
    const detail::ColumnDerivs fcol = diag_derivs(i);

    const auto objective_at = [&](double mu, double sig2, double uval) {
      double val = dV.generator(i, mu, sig2);
      val -= dfd.generator(i, mu, sig2);
      val += fcol.generator(mu, sig2);
      if (has_G) {
        val -= dGg.generator(i, mu, sig2);
        val += gy * dg.generator(i, mu, sig2);
      }
      if (has_H) val += problem.H(x, t_new, x, uval);
      return val;
    };
    const auto objective = [&](double uval) {
      const Control u = control1(uval);
      const double mu = problem.model.drift(t_new, x, u);
      const double sd = problem.model.diffusion(t_new, x, u);
      return objective_at(mu, sd * sd, uval);
    };

    Index best = 0;
    double best_val =
        objective_at(coef.mu(i, 0), coef.sig2(i, 0), setup.us[0]);
    for (Index j = 1; j < nu; ++j) {
      const double val =
          objective_at(coef.mu(i, j), coef.sig2(i, j), setup.us[j]);
      if (maximize ? (val > best_val) : (val < best_val)) {
        best_val = val;
        best = j;
      }
    }
    const double lo = setup.us[std::max<Index>(best - 1, 0)];
    const double hi = setup.us[std::min<Index>(best + 1, nu - 1)];
    return detail::golden_refine(objective, lo, hi, setup.us[best], best_val,
                                 maximize);
  };

  // Controls on the terminal row: the same optimization against the
  // terminal fields, without stepping.
  {
    const double t_term = setup.times[nt - 1];
    dV.compute(V, dx);
    dg.compute(g, dx);
    dfd.compute(fdiag, dx);
    if (has_G) dGg.compute(Gg, dx);
    coef.fill(problem.model, setup.xs, setup.us, t_term);
    for (Index i = 0; i < nx; ++i) u_level[i] = optimize_node(i, t_term);
    sol.u_hat.row(nt - 1) = u_level;
  }

  for (Index level = nt - 2; level >= 0; --level) {
    const double t_new = setup.times[level];
    dV.compute(V, dx);
    dg.compute(g, dx);
    dfd.compute(fdiag, dx);
    if (has_G) dGg.compute(Gg, dx);
    coef.fill(problem.model, setup.xs, setup.us, t_new);

    for (Index i = 0; i < nx; ++i) {
      const double x = setup.xs[i];
      const double u_star = optimize_node(i, t_new);
      u_level[i] = u_star;

      const Control uc = control1(u_star);
      const double mu = problem.model.drift(t_new, x, uc);
      const double sd = problem.model.diffusion(t_new, x, uc);
      const double sig2 = sd * sd;

      g_new[i] = g[i] + dt * dg.generator(i, mu, sig2);

      for (Index j = 0; j < ny; ++j) {
        const auto cd = detail::column_derivs(f_next, i, j, dx);
        double source = 0.0;
        if (has_H) source = problem.H(setup.ys[j], t_new, x, u_star);
        f_cur(i, j) = f_next(i, j) + dt * (cd.generator(mu, sig2) + source);
      }
    }

    for (Index i = 0; i < nx; ++i) {
      fdiag_new[i] =
          shared_anchors
              ? f_cur(i, i)
              : detail::blended_value(f_cur, i,
                                      blends[static_cast<std::size_t>(i)]);
      Gg_new[i] = has_G ? problem.G(setup.xs[i], g_new[i]) : 0.0;
    }

    // V step from the discretized value equation; the generator terms of the
    // already-stepped fields enter with their exact discrete time
    // differences, so the identity V = f(t,x,x) + G(x, g(t,x)) propagates at
    // rounding level from the terminal row.
    for (Index i = 0; i < nx; ++i) {
      const double x = setup.xs[i];
      const Control uc = control1(u_level[i]);
      const double mu = problem.model.drift(t_new, x, uc);
      const double sd = problem.model.diffusion(t_new, x, uc);
      const double sig2 = sd * sd;
      const detail::ColumnDerivs fcol = diag_derivs(i);
      const double fnext_diag =
          shared_anchors
              ? f_next(i, i)
              : detail::blended_value(f_next, i,
                                      blends[static_cast<std::size_t>(i)]);
      const double gy =
          has_G ? detail::wrapper_slope_m(problem.G, x, g[i]) : 0.0;

      double v = V[i] + dt * dV.generator(i, mu, sig2);
      if (has_H) v += dt * problem.H(x, t_new, x, u_level[i]);
      v -= (fdiag[i] + dt * dfd.generator(i, mu, sig2)) - fdiag_new[i];
      v += (fnext_diag + dt * fcol.generator(mu, sig2)) - fdiag_new[i];
      if (has_G) {
        v -= (Gg[i] + dt * dGg.generator(i, mu, sig2)) - Gg_new[i];
        v += gy * ((g[i] + dt * dg.generator(i, mu, sig2)) - g_new[i]);
      }
      V_new[i] = v;
      if (!std::isfinite(v)) {
        throw std::runtime_error("solve_extended: non-finite V at t=" +
                                 std::to_string(t_new) +
                                 " x=" + std::to_string(x));
      }
    }

    V = V_new;
    g = g_new;
    fdiag = fdiag_new;
    Gg = Gg_new;
    std::swap(f_next, f_cur);

    sol.V.row(level) = V;
    sol.g.row(level) = g;
    sol.u_hat.row(level) = u_level;
    sol.f_diag.row(level) = fdiag;
  }

  sol.f_t0 = f_next;

  // With no G term the value must coincide with the f diagonal (the reduced
  // system); a violation indicates a scheme bug, not a modelling issue.
  if (!has_G) {
    const double scale = 1.0 + sol.V.cwiseAbs().maxCoeff();
    const double dev = (sol.V - sol.f_diag).cwiseAbs().maxCoeff();
    if (dev > 1e-9 * scale) {
      throw std::logic_error(
          "solve_extended: V deviates from the f diagonal with G absent");
    }
  }
  return sol;
}

/// Reduced sweep for problems whose F and G carry no anchor argument:
///   sup_u { A^u V - (1/2) sigma^2(x,u) G''(g) g_x^2 } = 0
/// with the g equation unchanged; the f family is not needed.
inline GridSolution solve_simplified(const ExtendedProblem& problem,
                                     const GridSpec& grid) {
  problem.validate();
  grid.validate();
  {
    const double probes[] = {grid.x_lo, 0.5 * (grid.x_lo + grid.x_hi),
                             grid.x_hi};
    for (double y : probes) {
      const double f1 = problem.F(grid.x_lo, y);
      const double f2 = problem.F(grid.x_hi, y);
      if (std::abs(f1 - f2) > 1e-10 * (1.0 + std::abs(f1))) {
        throw std::invalid_argument("solve_simplified: F depends on anchor");
      }
      if (problem.G) {
        const double g1 = problem.G(grid.x_lo, y);
        const double g2 = problem.G(grid.x_hi, y);
        if (std::abs(g1 - g2) > 1e-10 * (1.0 + std::abs(g1))) {
          throw std::invalid_argument("solve_simplified: G depends on anchor");
        }
      }
    }
  }

  const Index nt = grid.nt > 0 ? grid.nt : cfl_time_nodes(problem, grid);
  auto setup = detail::make_setup(problem, grid, false, nt);
  const Index nx = setup.xs.size(), nu = setup.us.size();
  const double dt = setup.dt, dx = setup.dx;
  const bool maximize = problem.sense == Sense::Maximize;
  const bool has_G = static_cast<bool>(problem.G);
  const bool has_H = static_cast<bool>(problem.H);
  const double x_any = setup.xs[0];  // anchors verified irrelevant

  GridSolution sol;
  sol.times = setup.times;
  sol.xs = setup.xs;
  sol.us = setup.us;
  sol.diagnostics = setup.diagnostics;
  sol.V.resize(nt, nx);
  sol.g.resize(nt, nx);
  sol.u_hat.resize(nt, nx);

  VecX V(nx), g(nx);
  for (Index i = 0; i < nx; ++i) {
    const double x = setup.xs[i];
    g[i] = problem.k_of(x);
    V[i] = problem.F(x_any, x) + (has_G ? problem.G(x_any, g[i]) : 0.0);
  }
  sol.V.row(nt - 1) = V;
  sol.g.row(nt - 1) = g;

  detail::FieldDerivs dV, dg;
  detail::CoefficientCache coef;
  VecX u_level(nx), V_new(nx), g_new(nx);

  const auto optimize_node = [&](Index i, double t_new) {
    const double x = setup.xs[i];
    const double gpp =
        has_G ? detail::wrapper_curvature_m(problem.G, x_any, g[i]) : 0.0;
    const double gx = dg.central(i);
    const double correction = gpp * gx * gx;

    const auto objective_at = [&](double mu, double sig2, double uval) {
      double val = dV.generator(i, mu, sig2) - 0.5 * sig2 * correction;
      if (has_H) val += problem.H(x_any, t_new, x, uval);
      return val;
    };
    const auto objective = [&](double uval) {
      const Control u = control1(uval);
      const double mu = problem.model.drift(t_new, x, u);
      const double sd = problem.model.diffusion(t_new, x, u);
      return objective_at(mu, sd * sd, uval);
    };

    Index best = 0;
    double best_val =
        objective_at(coef.mu(i, 0), coef.sig2(i, 0), setup.us[0]);
    for (Index j = 1; j < nu; ++j) {
      const double val =
          objective_at(coef.mu(i, j), coef.sig2(i, j), setup.us[j]);
      if (maximize ? (val > best_val) : (val < best_val)) {
        best_val = val;
        best = j;
      }
    }
    const double lo = setup.us[std::max<Index>(best - 1, 0)];
    const double hi = setup.us[std::min<Index>(best + 1, nu - 1)];
    return detail::golden_refine(objective, lo, hi, setup.us[best], best_val,
                                 maximize);
  };

  {
    const double t_term = setup.times[nt - 1];
    dV.compute(V, dx);
    dg.compute(g, dx);
    coef.fill(problem.model, setup.xs, setup.us, t_term);
    for (Index i = 0; i < nx; ++i) u_level[i] = optimize_node(i, t_term);
    sol.u_hat.row(nt - 1) = u_level;
  }

  for (Index level = nt - 2; level >= 0; --level) {
    const double t_new = setup.times[level];
    dV.compute(V, dx);
    dg.compute(g, dx);
    coef.fill(problem.model, setup.xs, setup.us, t_new);

    for (Index i = 0; i < nx; ++i) {
      const double x = setup.xs[i];
      const double u_star = optimize_node(i, t_new);
      u_level[i] = u_star;
      const Control uc = control1(u_star);
      const double mu = problem.model.drift(t_new, x, uc);
      const double sd = problem.model.diffusion(t_new, x, uc);
      const double sig2 = sd * sd;
      const double gpp =
          has_G ? detail::wrapper_curvature_m(problem.G, x_any, g[i]) : 0.0;
      const double gx = dg.central(i);

      g_new[i] = g[i] + dt * dg.generator(i, mu, sig2);
      double v = V[i] + dt * (dV.generator(i, mu, sig2) -
                              0.5 * sig2 * gpp * gx * gx);
      if (has_H) v += dt * problem.H(x_any, t_new, x, u_star);
      V_new[i] = v;
      if (!std::isfinite(v)) {
        throw std::runtime_error("solve_simplified: non-finite V at t=" +
                                 std::to_string(t_new) +
                                 " x=" + std::to_string(x));
      }
    }

    V = V_new;
    g = g_new;
    sol.V.row(level) = V;
    sol.g.row(level) = g;
    sol.u_hat.row(level) = u_level;
  }
  return sol;
}

}  // namespace tic
