#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <vector>

#include "tic/discount.hpp"
#include "tic/ode.hpp"
#include "tic/quadrature.hpp"
#include "tic/reward.hpp"
#include "tic/sde.hpp"

namespace tic {

/// Equilibrium of the log-utility investment/consumption problem with a
/// general discount weight phi:
///   V(t,x) = a(t) ln x + d(t),
///   c_hat(t,x) = x / a(t),   u_hat(t,x) = ((alpha - r)/sigma^2) x,
/// where a(t) = phi(T-t) + int_0^{T-t} phi(s) ds and d integrates the
/// non-logarithmic remainder of the value equation backward from d(T) = 0.
struct LogConsumptionSolution {
  double alpha = 0.0, r = 0.0, sigma = 0.0, T = 0.0;
  DiscountFn disc;
  Index steps = 0;

  std::function<double(double)> a;
  std::function<double(double)> d;
  FeedbackLaw c_hat;  // consumption rate
  FeedbackLaw u_hat;  // dollar amount in the risky asset
  FeedbackLaw joint;  // (u, c) for simulation
  std::function<double(double, double)> V;

  /// Drift coefficient of ln X along the equilibrium path:
  /// b(t) = r + beta^2/(2 sigma^2) - 1/a(t).
  std::function<double(double)> b_coef;
  /// Cumulative integral B(t) = int_0^t b(s) ds.
  std::function<double(double)> B_cum;
};

/// Wealth dynamics with investment u[0] and consumption u[1]:
/// dX = [r X + (alpha - r) u - c] dt + sigma u dW, on X > 0.
inline ControlModel log_consumption_model(double alpha, double r, double sigma,
                                          double T) {
  ControlModel m;
  const double beta = alpha - r;
  m.drift = [r, beta](double, double x, const Control& u) {
    return r * x + beta * u[0] - u[1];
  };
  m.diffusion = [sigma](double, double, const Control& u) {
    return sigma * u[0];
  };
  m.control_lo = control2(-1e6, 1e-12);
  m.control_hi = control2(1e6, 1e6);
  m.horizon = T;
  m.positive_state = true;
  return m;
}

/// Discounted log reward: H = phi(s - t) ln c_s, F = phi(T - t) ln X_T.
inline RewardSpec log_consumption_reward_spec(const DiscountFn& disc,
                                              double T) {
  RewardSpec spec;
  spec.running = [phi = disc.phi](double ta, double, double s, double,
                                  const Control& u) {
    return phi(s - ta) * std::log(u[1]);
  };
  spec.terminal = [phi = disc.phi, T](double ta, double, double y) {
    return phi(T - ta) * std::log(y);
  };
  return spec;
}

namespace detail {

/// Dense tables for a, ln a, b and B on a uniform grid, shared by the
/// d-integration and the residual evaluator.
struct LogConsumptionTables {
  double T = 0.0;
  double beta_sq_over_2sig2 = 0.0;
  double r = 0.0;
  VecX times;  // fine grid, odd node count
  VecX a, ln_a, b, B;

  double interp(const VecX& v, double t) const {
    const Index n = times.size();
    if (t <= 0.0) return v[0];
    if (t >= T) return v[n - 1];
    const double h = times[1] - times[0];
    const Index i = std::min<Index>(static_cast<Index>(t / h), n - 2);
    const double w = (t - times[i]) / h;
    return (1.0 - w) * v[i] + w * v[i + 1];
  }
};

inline LogConsumptionTables build_log_consumption_tables(
    double alpha, double r, double sigma, double T, const DiscountFn& disc,
    Index steps) {
  LogConsumptionTables tab;
  tab.T = T;
  tab.r = r;
  const double beta = alpha - r;
  tab.beta_sq_over_2sig2 = beta * beta / (2.0 * sigma * sigma);

  const Index n_fine = 2 * steps;  // even interval count, odd node count
  const Index n = n_fine + 1;
  tab.times = VecX::LinSpaced(n, 0.0, T);
  const double h = T / static_cast<double>(n_fine);

  // Cumulative integral of phi with per-interval Simpson (direct midpoint
  // evaluations of phi).
  VecX iphi(n);
  iphi[0] = 0.0;
  for (Index j = 0; j + 1 < n; ++j) {
    const double t0 = tab.times[j];
    iphi[j + 1] = iphi[j] + h / 6.0 *
                                (disc.phi(t0) + 4.0 * disc.phi(t0 + 0.5 * h) +
                                 disc.phi(t0 + h));
  }

  // a(t) = phi(T - t) + int_0^{T-t} phi; the uniform grid maps T - t_j onto
  // node n-1-j, so no interpolation enters.
  tab.a.resize(n);
  tab.ln_a.resize(n);
  tab.b.resize(n);
  for (Index j = 0; j < n; ++j) {
    tab.a[j] = disc.phi(tab.times[n - 1 - j]) + iphi[n - 1 - j];
    if (!(tab.a[j] > 0.0)) {
      throw std::runtime_error(
          "solve_log_consumption: a(t) <= 0, consumption undefined");
    }
    tab.ln_a[j] = std::log(tab.a[j]);
    tab.b[j] = r + tab.beta_sq_over_2sig2 - 1.0 / tab.a[j];
  }

  // B(t) = int_0^t b: Simpson on node pairs for even nodes; the half-panel
  // closed three-point rule fills the odd nodes at matching order.
  tab.B.resize(n);
  tab.B[0] = 0.0;
  for (Index j = 0; j + 2 < n; j += 2) {
    tab.B[j + 1] = tab.B[j] + h / 12.0 *
                                  (5.0 * tab.b[j] + 8.0 * tab.b[j + 1] -
                                   tab.b[j + 2]);
    tab.B[j + 2] =
        tab.B[j] + h / 3.0 * (tab.b[j] + 4.0 * tab.b[j + 1] + tab.b[j + 2]);
  }
  return tab;
}

/// int_t^T phi'(s - t) [B(s) - B(t) - ln a(s)] ds by composite Simpson on
/// the tabulated fields.
inline double history_integral(const LogConsumptionTables& tab,
                               const DiscountFn& disc, double t) {
  const double span = tab.T - t;
  if (!(span > 0.0)) return 0.0;
  const int panels =
      std::max(16, std::min(768, static_cast<int>(span / tab.T * 512) + 1));
  const double Bt = tab.interp(tab.B, t);
  return composite_simpson(
      [&](double s) {
        return disc.phi_prime(s - t) *
               (tab.interp(tab.B, s) - Bt - tab.interp(tab.ln_a, s));
      },
      t, tab.T, panels);
}

}  // namespace detail

inline LogConsumptionSolution solve_log_consumption(double alpha, double r,
                                                    double sigma, double T,
                                                    const DiscountFn& disc,
                                                    Index steps = 2000) {
  if (!(sigma > 0.0)) {
    throw std::invalid_argument("solve_log_consumption: sigma <= 0");
  }
  if (!(T > 0.0)) throw std::invalid_argument("solve_log_consumption: T <= 0");
  if (steps < 2) {
    throw std::invalid_argument("solve_log_consumption: steps < 2");
  }
  disc.validate(T);

  auto tab = std::make_shared<detail::LogConsumptionTables>(
      detail::build_log_consumption_tables(alpha, r, sigma, T, disc, steps));
  const double beta = alpha - r;

  // Remaining (non-logarithmic) terms of the value equation give the d-ODE;
  // the MC value check certifies the assembly.
  OdeSystem d_system;
  d_system.dim = 1;
  d_system.rhs = [tab, disc](double t, const VecX& y) {
    (void)y;
    const double a = tab->interp(tab->a, t);
    const double BT_minus_Bt =
        tab->B[tab->B.size() - 1] - tab->interp(tab->B, t);
    const double rest = a * tab->r + a * tab->beta_sq_over_2sig2 - 1.0 -
                        tab->interp(tab->ln_a, t) +
                        detail::history_integral(*tab, disc, t) +
                        disc.phi_prime(tab->T - t) * BT_minus_Bt;
    VecX dy(1);
    dy[0] = -rest;
    return dy;
  };
  VecX terminal(1);
  terminal[0] = 0.0;
  auto d_sol = std::make_shared<OdeSolution>(
      integrate_terminal(d_system, terminal, 0.0, T, steps));

  LogConsumptionSolution s;
  s.alpha = alpha;
  s.r = r;
  s.sigma = sigma;
  s.T = T;
  s.disc = disc;
  s.steps = steps;
  s.a = [tab](double t) { return tab->interp(tab->a, t); };
  s.d = [d_sol](double t) { return d_sol->eval(t, 0); };
  s.b_coef = [tab](double t) { return tab->interp(tab->b, t); };
  s.B_cum = [tab](double t) { return tab->interp(tab->B, t); };
  s.c_hat = scalar_law([a = s.a](double t, double x) { return x / a(t); });
  s.u_hat = scalar_law(
      [beta, sigma](double, double x) { return beta / (sigma * sigma) * x; });
  s.joint = joint_law(s.u_hat, s.c_hat);
  s.V = [a = s.a, d = s.d](double t, double x) {
    return a(t) * std::log(x) + d(t);
  };
  return s;
}

/// Left-hand side of the equilibrium value equation at (t, x), evaluated
/// with the computed (a, d) and the conditional-expectation representations
/// of the history terms. Derivatives of a and d are taken by finite
/// differences from the solution itself, so a correct solution drives the
/// residual to zero at the scheme's order.
inline double hjb_residual_log(const LogConsumptionSolution& s, double t,
                               double x) {
  if (!(t >= 0.0) || !(t < s.T)) {
    throw std::invalid_argument("hjb_residual_log: t outside [0, T)");
  }
  if (!(x > 0.0)) throw std::invalid_argument("hjb_residual_log: x <= 0");

  const double dt = s.T / static_cast<double>(s.steps);
  const auto fd = [&](const std::function<double(double)>& f) {
    const double lo = std::max(0.0, t - dt);
    const double hi = std::min(s.T, t + dt);
    return (f(hi) - f(lo)) / (hi - lo);
  };
  const double a_dot = fd(s.a);
  const double d_dot = fd(s.d);

  const double beta = s.alpha - s.r;
  const double q = beta * beta / (s.sigma * s.sigma);
  const double a = s.a(t);
  const double ln_x = std::log(x);

  // Generator applied to V = a ln x + d along (u_hat, c_hat).
  const double gen_V =
      a_dot * ln_x + d_dot + a * s.r + a * q - 1.0 - 0.5 * a * q;
  // Running reward at the optimum: ln(c_hat) = ln x - ln a.
  const double reward = ln_x - std::log(a);

  const double BT = s.B_cum(s.T);
  const double Bt = s.B_cum(t);
  const int panels = std::max(
      16, std::min(768, static_cast<int>((s.T - t) / s.T * 512) + 1));
  const double history = composite_simpson(
      [&](double u) {
        return s.disc.phi_prime(u - t) *
               (ln_x + s.B_cum(u) - Bt - std::log(s.a(u)));
      },
      t, s.T, panels);
  const double terminal_term =
      s.disc.phi_prime(s.T - t) * (ln_x + BT - Bt);

  return gen_V + reward + history + terminal_term;
}

}  // namespace tic
