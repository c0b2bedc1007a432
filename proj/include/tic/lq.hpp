#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <utility>
#include <vector>

#include "tic/ode.hpp"
#include "tic/reward.hpp"
#include "tic/sde.hpp"

namespace tic {

/// Time-inconsistent linear-quadratic regulator: state dX = [a X + b u] dt
/// + sigma dW, cost E[(1/2) int u^2 ds] + (gamma/2) E[(X_T - x)^2] with the
/// moving target anchored at the current state; minimization problem.
struct LqParams {
  double a = 0.0;
  double b = 1.0;
  double sigma = 0.1;
  double gamma = 1.0;
  double T = 1.0;

  void validate() const {
    if (!(T > 0.0)) throw std::invalid_argument("LqParams: T <= 0");
    if (!(gamma > 0.0)) throw std::invalid_argument("LqParams: gamma <= 0");
    if (b == 0.0) throw std::invalid_argument("LqParams: b == 0");
  }
};

inline ControlModel lq_model(const LqParams& p, double u_lo = -50.0,
                             double u_hi = 50.0) {
  p.validate();
  ControlModel m;
  const double a = p.a, b = p.b, sigma = p.sigma;
  m.drift = [a, b](double, double x, const Control& u) {
    return a * x + b * u[0];
  };
  m.diffusion = [sigma](double, double, const Control&) { return sigma; };
  m.control_lo = control1(u_lo);
  m.control_hi = control1(u_hi);
  m.horizon = p.T;
  return m;
}

inline RewardSpec lq_reward_spec(double gamma) {
  RewardSpec spec;
  spec.running = [](double, double, double, double, const Control& u) {
    return 0.5 * u[0] * u[0];
  };
  spec.terminal = [gamma](double, double xa, double y) {
    return 0.5 * gamma * (y - xa) * (y - xa);
  };
  spec.sense = Sense::Minimize;
  return spec;
}

/// Coefficients of the quadratic anchored expectation
///   f(t,x,y) = A x^2 + B y^2 + C x y + D x + F y + H,
/// with V(t,x) = f(t,x,x) and u_hat(t,x) = -b ((2A + C) x + D).
struct LqSolution {
  LqParams params;
  OdeSolution coeffs;  // columns [A, B, C, D, F, H]
  std::function<double(double)> A, B, C, D, F, H;
  FeedbackLaw u_hat;
  std::function<double(double, double, double)> f;
  std::function<double(double, double)> V;
  Sense sense = Sense::Minimize;
};

inline LqSolution solve_lq(const LqParams& p, Index steps = 4000) {
  p.validate();
  const double a = p.a, b2 = p.b * p.b, sig2 = p.sigma * p.sigma;

  OdeSystem system;
  system.dim = 6;
  system.rhs = [a, b2, sig2](double, const VecX& y) {
    const double A = y[0], C = y[2], D = y[3];
    const double s = 2.0 * A + C;
    VecX dy(6);
    dy[0] = -2.0 * a * A + 2.0 * b2 * A * s - 0.5 * b2 * s * s;
    dy[1] = 0.0;
    dy[2] = -a * C + b2 * C * s;
    dy[3] = -a * D + 2.0 * b2 * A * D;
    dy[4] = b2 * C * D;
    dy[5] = 0.5 * b2 * D * D - sig2 * A;
    return dy;
  };

  VecX terminal(6);
  terminal << 0.5 * p.gamma, 0.5 * p.gamma, -p.gamma, 0.0, 0.0, 0.0;

  LqSolution s;
  s.params = p;
  s.coeffs = integrate_terminal(system, terminal, 0.0, p.T, steps);
  auto sol = std::make_shared<OdeSolution>(s.coeffs);
  const auto comp = [sol](Index idx) {
    return std::function<double(double)>(
        [sol, idx](double t) { return sol->eval(t, idx); });
  };
  s.A = comp(0);
  s.B = comp(1);
  s.C = comp(2);
  s.D = comp(3);
  s.F = comp(4);
  s.H = comp(5);
  const double b = p.b;
  s.u_hat = scalar_law([sol, b](double t, double x) {
    const VecX y = sol->eval(t);
    return -b * ((2.0 * y[0] + y[2]) * x + y[3]);
  });
  s.f = [sol](double t, double x, double y) {
    const VecX c = sol->eval(t);
    return c[0] * x * x + c[1] * y * y + c[2] * x * y + c[3] * x + c[4] * y +
           c[5];
  };
  s.V = [f = s.f](double t, double x) { return f(t, x, x); };
  return s;
}

/// Monte Carlo certification row: the simulated cost against the model value
/// f(t,x,x). `sigmas` is |difference| / SE; `flag` marks a discrepancy
/// beyond five standard errors (sign convention guard on the H equation).
struct LqValueRow {
  double t = 0.0, x = 0.0;
  double mc_mean = 0.0, mc_std_err = 0.0;
  double model_value = 0.0;
  double sigmas = 0.0;
  bool flag = false;
};

inline std::vector<LqValueRow> lq_value_check(
    const LqParams& p, const LqSolution& s,
    const std::vector<std::pair<double, double>>& points,
    const SimConfig& config) {
  const ControlModel model = lq_model(p);
  const RewardSpec spec = lq_reward_spec(p.gamma);
  std::vector<LqValueRow> rows;
  rows.reserve(points.size());
  for (const auto& [t, x] : points) {
    const JEstimate est = estimate_J(model, s.u_hat, spec, t, x, config);
    LqValueRow row;
    row.t = t;
    row.x = x;
    row.mc_mean = est.mean;
    row.mc_std_err = est.std_err;
    row.model_value = s.V(t, x);
    row.sigmas = est.std_err > 0.0
                     ? std::abs(est.mean - row.model_value) / est.std_err
                     : (est.mean == row.model_value ? 0.0 : 1e100);
    row.flag = row.sigmas > 5.0;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace tic
