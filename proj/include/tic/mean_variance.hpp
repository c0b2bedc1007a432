#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>

#include "tic/ode.hpp"
#include "tic/reward.hpp"
#include "tic/sde.hpp"

namespace tic {

/// Market parameters for the dynamic mean-variance problems: risky drift
/// alpha, short rate r, volatility sigma, risk aversion gamma, horizon T.
struct MvParams {
  double alpha = 0.08;
  double r = 0.03;
  double sigma = 0.2;
  double gamma = 2.0;
  double T = 1.0;

  double beta() const { return alpha - r; }

  void validate() const {
    if (!(sigma > 0.0)) throw std::invalid_argument("MvParams: sigma <= 0");
    if (!(gamma > 0.0)) throw std::invalid_argument("MvParams: gamma <= 0");
    if (!(T > 0.0)) throw std::invalid_argument("MvParams: T <= 0");
  }
};

/// Wealth dynamics dX = [rX + (alpha - r) u] dt + sigma u dW with the dollar
/// amount u in the risky asset as the control.
inline ControlModel mv_wealth_model(const MvParams& p, double u_lo = -100.0,
                                    double u_hi = 100.0,
                                    bool positive_state = false) {
  p.validate();
  ControlModel m;
  const double r = p.r, beta = p.beta(), sigma = p.sigma;
  m.drift = [r, beta](double, double x, const Control& u) {
    return r * x + beta * u[0];
  };
  m.diffusion = [sigma](double, double, const Control& u) {
    return sigma * u[0];
  };
  m.control_lo = control1(u_lo);
  m.control_hi = control1(u_hi);
  m.horizon = p.T;
  m.positive_state = positive_state;
  return m;
}

/// Mean-variance reward E[X_T] - (gamma/2) Var[X_T] written as
/// F(y) = y - (gamma/2) y^2 plus G(m) = (gamma/2) m^2; both anchor-free.
inline RewardSpec mv_reward_spec(double gamma) {
  RewardSpec spec;
  spec.terminal = [gamma](double, double, double y) {
    return y - 0.5 * gamma * y * y;
  };
  spec.wrapper = [gamma](double, double, double m) {
    return 0.5 * gamma * m * m;
  };
  return spec;
}

/// Wealth-dependent risk aversion gamma(x) = gamma / x: the anchor state
/// enters both F and G.
inline RewardSpec mv_wealth_reward_spec(double gamma) {
  RewardSpec spec;
  spec.terminal = [gamma](double, double xa, double y) {
    return y - 0.5 * (gamma / xa) * y * y;
  };
  spec.wrapper = [gamma](double, double xa, double m) {
    return 0.5 * (gamma / xa) * m * m;
  };
  return spec;
}

/// Closed-form solution of the constant-risk-aversion problem.
struct MvSolution {
  MvParams params;
  std::function<double(double)> A, B, a, b;
  FeedbackLaw u_hat;
  std::function<double(double, double)> V;  // equilibrium value
  std::function<double(double, double)> g;  // E_{t,x}[X_T] under u_hat
};

/// u_hat(t,x) = (1/gamma) ((alpha-r)/sigma^2) e^{-r(T-t)},
/// V(t,x)     = e^{r(T-t)} x + (alpha-r)^2 / (2 gamma sigma^2) (T-t),
/// g(t,x)     = e^{r(T-t)} x + (alpha-r)^2 / (gamma sigma^2) (T-t).
inline MvSolution solve_mv(const MvParams& p) {
  p.validate();
  const double r = p.r, T = p.T, gamma = p.gamma;
  const double lambda = p.beta() / (p.sigma * p.sigma);  // (alpha-r)/sigma^2
  const double rate = p.beta() * lambda;                 // (alpha-r)^2/sigma^2

  MvSolution s;
  s.params = p;
  s.A = [r, T](double t) { return std::exp(r * (T - t)); };
  s.a = s.A;
  s.B = [rate, gamma, T](double t) { return rate / (2.0 * gamma) * (T - t); };
  s.b = [rate, gamma, T](double t) { return rate / gamma * (T - t); };
  s.u_hat = scalar_law([lambda, gamma, r, T](double t, double) {
    return lambda / gamma * std::exp(-r * (T - t));
  });
  s.V = [A = s.A, B = s.B](double t, double x) { return A(t) * x + B(t); };
  s.g = [a = s.a, b = s.b](double t, double x) { return a(t) * x + b(t); };
  return s;
}

/// Numerical solution of the gamma(x) = gamma/x variant. The coefficient
/// pair (a, b) of g(t,x) = a(t) x and E[X_T^2] = b(t) x^2 solves a coupled
/// nonlinear system with b in denominators; b must stay positive.
struct MvWealthSolution {
  MvParams params;
  OdeSolution ab;  // columns [a, b]
  std::function<double(double)> a, b;
  std::function<double(double)> control_slope;  // u_hat(t,x)/x
  FeedbackLaw u_hat;
  std::function<double(double, double)> V;
};

inline MvWealthSolution solve_mv_wealth(const MvParams& p, Index steps = 2000) {
  p.validate();
  const double r = p.r, beta = p.beta(), sigma = p.sigma, gamma = p.gamma;

  const auto slope_of = [beta, sigma, gamma](double a, double b) {
    return beta / (gamma * sigma * sigma) * (a + gamma * (a * a - b)) / b;
  };

  OdeSystem system;
  system.dim = 2;
  system.rhs = [r, beta, sigma, slope_of](double t, const VecX& y) {
    const double a = y[0], b = y[1];
    if (!(b > 0.0)) {
      throw std::runtime_error(
          "solve_mv_wealth: b(t) <= 0 at t=" + std::to_string(t) +
          " (singular coefficient system)");
    }
    const double c = slope_of(a, b);
    VecX dy(2);
    dy[0] = -(r + beta * c) * a;
    dy[1] = -(2.0 * (r + beta * c) + sigma * sigma * c * c) * b;
    return dy;
  };

  VecX terminal(2);
  terminal << 1.0, 1.0;

  MvWealthSolution s;
  s.params = p;
  s.ab = integrate_terminal(system, terminal, 0.0, p.T, steps);
  for (Index i = 0; i < s.ab.values.rows(); ++i) {
    if (!(s.ab.values(i, 1) > 0.0)) {
      throw std::runtime_error("solve_mv_wealth: b(t) <= 0 at t=" +
                               std::to_string(s.ab.times[i]));
    }
  }
  auto sol = std::make_shared<OdeSolution>(s.ab);
  s.a = [sol](double t) { return sol->eval(t, 0); };
  s.b = [sol](double t) { return sol->eval(t, 1); };
  s.control_slope = [sol, slope_of](double t) {
    const VecX y = sol->eval(t);
    return slope_of(y[0], y[1]);
  };
  s.u_hat = scalar_law(
      [slope = s.control_slope](double t, double x) { return slope(t) * x; });
  s.V = [sol, gamma](double t, double x) {
    const VecX y = sol->eval(t);
    return (y[0] + 0.5 * gamma * (y[0] * y[0] - y[1])) * x;
  };
  return s;
}

/// Running cost kernel of the standard time-consistent problem equivalent
/// to the constant-gamma mean-variance problem:
///   K(s, u) = -(gamma sigma^2 / 2) e^{2 r (T - s)} u^2.
inline std::function<double(double, double)> equivalent_standard_objective(
    const MvParams& p) {
  p.validate();
  const double gamma = p.gamma, sigma = p.sigma, r = p.r, T = p.T;
  return [gamma, sigma, r, T](double s, double u) {
    return -0.5 * gamma * sigma * sigma * std::exp(2.0 * r * (T - s)) * u * u;
  };
}

}  // namespace tic
