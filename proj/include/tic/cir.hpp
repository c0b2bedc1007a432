#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include "tic/discount.hpp"
#include "tic/parallel.hpp"
#include "tic/sde.hpp"

namespace tic {

enum class CirUtility { Log, Power };

/// Production economy with a constant-returns technology
/// dS = alpha S dt + sigma S dW and a representative agent discounting
/// consumption utility by the weight beta_fn over elapsed time.
struct CirParams {
  double alpha = 0.08;
  double sigma = 0.2;
  DiscountFn beta_fn;
  CirUtility utility = CirUtility::Log;
  double gamma = 0.5;  // power utility curvature, gamma < 1, gamma != 0

  void validate() const {
    if (!(sigma > 0.0)) throw std::invalid_argument("CirParams: sigma <= 0");
    if (!beta_fn.phi) throw std::invalid_argument("CirParams: beta_fn unset");
    if (!beta_fn.integral_tail) {
      throw std::invalid_argument(
          "CirParams: discount weight must be integrable on [0, inf)");
    }
    if (utility == CirUtility::Power &&
        (!(gamma < 1.0) || gamma == 0.0)) {
      throw std::invalid_argument(
          "CirParams: power utility needs gamma < 1, gamma != 0");
    }
  }
};

/// D = a0^{-1/(1-gamma)}, the equilibrium marginal propensity to consume
/// under power utility.
inline double power_consumption_rate(double a0, double gamma) {
  return std::pow(a0, -1.0 / (1.0 - gamma));
}

/// Market equilibrium under log utility: the short rate and Girsanov kernel
/// depend only on the technology, consumption on the discount weight.
struct CirLogSolution {
  double r = 0.0;           // alpha - sigma^2
  double phi_kernel = 0.0;  // -sigma
  double a0 = 0.0;          // int_0^inf beta
  std::function<double(double)> a;  // a(t) = int_t^inf beta
  FeedbackLaw c_hat;                // consumption x / a0
  std::function<double(double, double)> sdf;  // (1/x) e^{-t/a0}
};

inline CirLogSolution solve_cir_log(const CirParams& p) {
  p.validate();
  if (p.utility != CirUtility::Log) {
    throw std::invalid_argument("solve_cir_log: params not log utility");
  }
  CirLogSolution s;
  s.r = p.alpha - p.sigma * p.sigma;
  s.phi_kernel = -p.sigma;
  s.a0 = discount_tail(p.beta_fn, 0.0);
  if (!std::isfinite(s.a0) || !(s.a0 > 0.0)) {
    throw std::runtime_error("solve_cir_log: divergent discount integral");
  }
  s.a = [beta = p.beta_fn](double t) { return discount_tail(beta, t); };
  s.c_hat = scalar_law([a0 = s.a0](double, double x) { return x / a0; });
  s.sdf = [a0 = s.a0](double t, double x) {
    return std::exp(-t / a0) / x;
  };
  return s;
}

/// Market equilibrium under power utility. The level a0 of the value
/// coefficient solves the self-consistency condition
///   a0 = D^gamma int_0^inf e^{gamma A s} beta(s) ds,
/// with D = a0^{-1/(1-gamma)} and A = alpha - D - (sigma^2/2)(1-gamma); the
/// coefficient ODE is a' + gamma A a + D^gamma beta(t) = 0. The deflated
/// money account and technology are then exact martingales.
struct CirPowerSolution {
  double r = 0.0;           // alpha - sigma^2 (1 - gamma)
  double phi_kernel = 0.0;  // -sigma (1 - gamma)
  double a0 = 0.0;
  double D = 0.0;
  double coefA = 0.0;         // alpha - D - (sigma^2/2)(1-gamma)
  double coefB = 0.0;         // D^gamma / gamma
  double sdf_exponent = 0.0;  // a'(0)/a(0) = -(gamma A + D)
  std::function<double(double)> a;
  FeedbackLaw c_hat;  // D x
  std::function<double(double, double)> sdf;  // x^{gamma-1} e^{exponent t}
};

namespace detail {

inline double cir_power_residual(const CirParams& p, double a0) {
  const double g = p.gamma;
  const double D = power_consumption_rate(a0, g);
  const double A = p.alpha - D - 0.5 * p.sigma * p.sigma * (1.0 - g);
  double integral;
  try {
    integral = discount_tilted_tail(p.beta_fn, g * A, 0.0);
  } catch (const std::domain_error&) {
    // Divergent tilt means the implied level is infinite.
    return -std::numeric_limits<double>::infinity();
  }
  return a0 - std::pow(D, g) * integral;
}

}  // namespace detail

inline CirPowerSolution solve_cir_power(const CirParams& p) {
  p.validate();
  if (p.utility != CirUtility::Power) {
    throw std::invalid_argument("solve_cir_power: params not power utility");
  }
  const double g = p.gamma;

  // Bracket the self-consistency root on a log grid, then bisect.
  double lo = 0.0, hi = 0.0;
  double prev_a0 = 0.0, prev_res = 0.0;
  bool have_prev = false, bracketed = false;
  for (int i = 0; i <= 200; ++i) {
    const double a0 = std::pow(10.0, -4.0 + 10.0 * i / 200.0);
    const double res = detail::cir_power_residual(p, a0);
    if (std::isnan(res)) continue;
    if (have_prev && prev_res < 0.0 && res >= 0.0) {
      lo = prev_a0;
      hi = a0;
      bracketed = true;
      break;
    }
    prev_a0 = a0;
    prev_res = res;
    have_prev = true;
  }
  if (!bracketed) {
    throw std::runtime_error(
        "solve_cir_power: no admissible a0 (divergent discount integral or "
        "no equilibrium for these parameters)");
  }
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (detail::cir_power_residual(p, mid) < 0.0 ? lo : hi) = mid;
  }
  const double a0 = 0.5 * (lo + hi);

  CirPowerSolution s;
  s.r = p.alpha - p.sigma * p.sigma * (1.0 - g);
  s.phi_kernel = -p.sigma * (1.0 - g);
  s.a0 = a0;
  s.D = power_consumption_rate(a0, g);
  s.coefA = p.alpha - s.D - 0.5 * p.sigma * p.sigma * (1.0 - g);
  s.coefB = std::pow(s.D, g) / g;
  s.sdf_exponent = -(g * s.coefA + s.D);
  s.a = [beta = p.beta_fn, Dg = std::pow(s.D, g), m = g * s.coefA](double t) {
    return Dg * std::exp(-m * t) * discount_tilted_tail(beta, m, t);
  };
  s.c_hat = scalar_law([D = s.D](double, double x) { return D * x; });
  s.sdf = [g, e = s.sdf_exponent](double t, double x) {
    return std::pow(x, g - 1.0) * std::exp(e * t);
  };
  return s;
}

/// Equilibrium wealth dynamics dX = (alpha X - c_hat) dt + sigma X dW; the
/// market clears, so the portfolio weight on the technology is one and the
/// consumption rate is the only control.
inline ControlModel cir_equilibrium_model(const CirParams& p, double horizon) {
  ControlModel m;
  const double alpha = p.alpha, sigma = p.sigma;
  m.drift = [alpha](double, double x, const Control& u) {
    return alpha * x - u[0];
  };
  m.diffusion = [sigma](double, double x, const Control&) {
    return sigma * x;
  };
  m.control_lo = control1(0.0);
  m.control_hi = control1(1e12);
  m.horizon = horizon;
  m.positive_state = true;
  return m;
}

struct MartingaleRow {
  double t = 0.0;
  double mean_money = 0.0, se_money = 0.0, sigmas_money = 0.0;
  double mean_tech = 0.0, se_tech = 0.0, sigmas_tech = 0.0;
};

/// Martingale certification of a stochastic discount factor along the
/// simulated equilibrium wealth path.
///
/// The money and technology checks pass when each checkpoint mean is within
/// three standard errors of its t = 0 value, or within the absolute
/// discretization allowance when the statistic is pathwise-deterministic up
/// to Euler error (log utility, where the sampling noise collapses and the
/// O(dt) weak bias is the relevant scale).
struct MartingaleReport {
  double money0 = 0.0;  // M_0 B_0
  double tech0 = 0.0;   // M_0 S_0 (S_0 = X_0)
  std::vector<MartingaleRow> rows;
  bool money_ok = false;
  bool tech_ok = false;
  // Log utility only: pathwise statistics. The deflated consumption gain
  // M_t X_t + int_0^t M_s c_s ds equals its t = 0 value exactly, and
  // M_t S_t is constant on every path.
  double max_gain_deviation = 0.0;
  double max_tech_deviation = 0.0;
  double euler_tolerance = 0.0;
  bool gain_ok = true;
  bool tech_pathwise_ok = true;
};

namespace detail {

inline MartingaleReport certify_sdf_impl(
    const CirParams& params, const FeedbackLaw& c_hat,
    const std::function<double(double, double)>& sdf, bool pathwise_checks,
    double euler_tolerance, const SimConfig& config, double horizon,
    double r_rate, int checkpoints, double x0) {
  const ControlModel model = cir_equilibrium_model(params, horizon);
  const Index n = config.n_steps;
  std::vector<Index> marks;
  for (int j = 1; j <= checkpoints; ++j) {
    marks.push_back(n * j / checkpoints);
  }

  const auto nmark = static_cast<Index>(marks.size());
  MatX money(config.n_paths, nmark);
  MatX tech(config.n_paths, nmark);
  VecX gain_dev = VecX::Zero(config.n_paths);
  VecX tech_dev = VecX::Zero(config.n_paths);

  MartingaleReport report;
  report.money0 = sdf(0.0, x0);
  report.tech0 = sdf(0.0, x0) * x0;
  report.euler_tolerance = euler_tolerance;
  const double gain0 = sdf(0.0, x0) * x0;

  for_each_path(model, c_hat, 0.0, x0, config, [&](const PathView& view) {
    const double dt = horizon / static_cast<double>(n);
    const double sqrt_dt = std::sqrt(dt);
    double s_tech = x0;  // technology value on the same Brownian path
    double deflated_consumption = 0.0;
    double max_gain = 0.0;
    double max_tech = 0.0;
    double m_prev = sdf(0.0, view.states[0]);
    double c_prev = view.controls[0][0];
    Index mark = 0;
    for (Index k = 1; k <= n; ++k) {
      const auto ks = static_cast<std::size_t>(k);
      const double t = (*view.times)[k];
      s_tech *= 1.0 + params.alpha * dt +
                params.sigma * sqrt_dt * view.gauss[ks - 1];
      const double m = sdf(t, view.states[ks]);
      const double c = view.controls[0][ks];
      deflated_consumption += 0.5 * dt * (m_prev * c_prev + m * c);
      m_prev = m;
      c_prev = c;
      if (mark < nmark && k == marks[static_cast<std::size_t>(mark)]) {
        money(view.path, mark) = m * std::exp(r_rate * t);
        tech(view.path, mark) = m * s_tech;
        if (pathwise_checks) {
          const double gain = m * view.states[ks] + deflated_consumption;
          max_gain = std::max(max_gain, std::abs(gain - gain0));
          max_tech = std::max(max_tech, std::abs(m * s_tech - gain0));
        }
        ++mark;
      }
    }
    gain_dev[view.path] = max_gain;
    tech_dev[view.path] = max_tech;
  });

  report.money_ok = true;
  report.tech_ok = true;
  for (Index j = 0; j < nmark; ++j) {
    MartingaleRow row;
    row.t = horizon * static_cast<double>(marks[static_cast<std::size_t>(j)]) /
            static_cast<double>(n);
    // Columns of the column-major matrices are contiguous.
    const auto mb = mean_std_err(
        std::span<const double>(money.col(j).data(),
                                static_cast<std::size_t>(money.rows())));
    const auto ms = mean_std_err(
        std::span<const double>(tech.col(j).data(),
                                static_cast<std::size_t>(tech.rows())));
    row.mean_money = mb.mean;
    row.se_money = mb.std_err;
    row.sigmas_money =
        mb.std_err > 0 ? std::abs(mb.mean - report.money0) / mb.std_err : 0.0;
    row.mean_tech = ms.mean;
    row.se_tech = ms.std_err;
    row.sigmas_tech =
        ms.std_err > 0 ? std::abs(ms.mean - report.tech0) / ms.std_err : 0.0;
    const bool money_row_ok =
        row.sigmas_money <= 3.0 ||
        std::abs(mb.mean - report.money0) <= euler_tolerance;
    const bool tech_row_ok =
        row.sigmas_tech <= 3.0 ||
        std::abs(ms.mean - report.tech0) <= euler_tolerance;
    report.money_ok = report.money_ok && money_row_ok;
    report.tech_ok = report.tech_ok && tech_row_ok;
    report.rows.push_back(row);
  }
  if (pathwise_checks) {
    report.max_gain_deviation = gain_dev.maxCoeff();
    report.gain_ok = report.max_gain_deviation <= euler_tolerance;
    report.max_tech_deviation = tech_dev.maxCoeff();
    report.tech_pathwise_ok = report.max_tech_deviation <= euler_tolerance;
  }
  return report;
}

}  // namespace detail

inline MartingaleReport certify_sdf(const CirParams& params,
                                    const CirLogSolution& sol,
                                    const SimConfig& config,
                                    double horizon = 1.0, int checkpoints = 5,
                                    double euler_tolerance = 5e-3,
                                    double x0 = 1.0) {
  return detail::certify_sdf_impl(params, sol.c_hat, sol.sdf, true,
                                  euler_tolerance, config, horizon, sol.r,
                                  checkpoints, x0);
}

inline MartingaleReport certify_sdf(const CirParams& params,
                                    const CirPowerSolution& sol,
                                    const SimConfig& config,
                                    double horizon = 1.0, int checkpoints = 5,
                                    double x0 = 1.0) {
  return detail::certify_sdf_impl(params, sol.c_hat, sol.sdf, false, 0.0,
                                  config, horizon, sol.r, checkpoints, x0);
}

}  // namespace tic
