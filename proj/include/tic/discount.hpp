#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>

#include "tic/quadrature.hpp"

namespace tic {

/// Discount weight phi over elapsed time, normalized to phi(0) = 1.
///
/// The finite-horizon solvers only need phi and phi'. The infinite-horizon
/// production-economy solvers additionally need improper integrals, which
/// the named families supply in closed form (integral_tail) or through an
/// exponentially tilted variant (tilted_tail).
struct DiscountFn {
  std::function<double(double)> phi;
  std::function<double(double)> phi_prime;

  /// t -> int_t^inf phi(s) ds; absent when the integral diverges.
  std::function<double(double)> integral_tail;

  /// (m, t) -> int_t^inf e^{m s} phi(s) ds; throws std::domain_error when
  /// the integral diverges for the given m.
  std::function<double(double, double)> tilted_tail;

  std::string family;

  void validate(double horizon) const {
    if (!phi || !phi_prime) {
      throw std::invalid_argument("DiscountFn: phi/phi_prime not set");
    }
    if (std::abs(phi(0.0) - 1.0) > 1e-9) {
      throw std::invalid_argument("DiscountFn: phi(0) must equal 1");
    }
    const int samples = 64;
    for (int i = 0; i <= samples; ++i) {
      const double s = horizon * i / samples;
      if (!(phi(s) >= 0.0)) {
        throw std::invalid_argument("DiscountFn: phi must be non-negative");
      }
    }
  }
};

namespace detail {

/// Numeric int_t^inf e^{m s} phi(s) ds for m < 0 and decreasing phi, using
/// the bound int_L^inf e^{m s} phi(s) ds <= phi(L) e^{m L} / |m|.
inline double numeric_tilted_tail(const std::function<double(double)>& phi,
                                  double m, double t) {
  if (!(m < 0.0)) {
    throw std::domain_error("tilted discount integral diverges for m >= 0");
  }
  double total = 0.0;
  double lo = t;
  double width = std::max(1.0, 4.0 / -m);
  for (int block = 0; block < 64; ++block) {
    const double hi = lo + width;
    total += adaptive_simpson(
        [&](double s) { return std::exp(m * s) * phi(s); }, lo, hi, 1e-14);
    const double bound = phi(hi) * std::exp(m * hi) / -m;
    if (bound < 1e-14 * std::max(1.0, std::abs(total))) return total;
    lo = hi;
    width *= 2.0;
  }
  throw std::runtime_error("tilted discount integral failed to converge");
}

}  // namespace detail

/// phi(s) = e^{-delta s}.
inline DiscountFn exponential_discount(double delta) {
  if (!(delta > 0.0)) {
    throw std::invalid_argument("exponential_discount: delta must be > 0");
  }
  DiscountFn d;
  d.family = "exponential";
  d.phi = [delta](double s) { return std::exp(-delta * s); };
  d.phi_prime = [delta](double s) { return -delta * std::exp(-delta * s); };
  d.integral_tail = [delta](double t) { return std::exp(-delta * t) / delta; };
  d.tilted_tail = [delta](double m, double t) {
    if (!(m < delta)) {
      throw std::domain_error("exponential_discount: tilt m >= delta");
    }
    return std::exp((m - delta) * t) / (delta - m);
  };
  return d;
}

/// phi(s) = 1 / (1 + k s). Not integrable over [0, inf); finite-horizon use
/// only (integral_tail absent, tilted_tail numeric for m < 0).
inline DiscountFn hyperbolic_discount(double k) {
  if (!(k > 0.0)) {
    throw std::invalid_argument("hyperbolic_discount: k must be > 0");
  }
  DiscountFn d;
  d.family = "hyperbolic";
  d.phi = [k](double s) { return 1.0 / (1.0 + k * s); };
  d.phi_prime = [k](double s) {
    const double w = 1.0 + k * s;
    return -k / (w * w);
  };
  d.tilted_tail = [phi = d.phi](double m, double t) {
    return detail::numeric_tilted_tail(phi, m, t);
  };
  return d;
}

/// phi(s) = (1 + k s)^{-m} with m > 1, integrable on [0, inf).
inline DiscountFn hyperbolic_power_discount(double k, double m) {
  if (!(k > 0.0) || !(m > 1.0)) {
    throw std::invalid_argument(
        "hyperbolic_power_discount: need k > 0 and m > 1");
  }
  DiscountFn d;
  d.family = "hyperbolic-power";
  d.phi = [k, m](double s) { return std::pow(1.0 + k * s, -m); };
  d.phi_prime = [k, m](double s) {
    return -k * m * std::pow(1.0 + k * s, -m - 1.0);
  };
  d.integral_tail = [k, m](double t) {
    return std::pow(1.0 + k * t, 1.0 - m) / (k * (m - 1.0));
  };
  d.tilted_tail = [phi = d.phi, tail = d.integral_tail](double tilt, double t) {
    if (tilt == 0.0) return tail(t);
    return detail::numeric_tilted_tail(phi, tilt, t);
  };
  return d;
}

/// Smoothed quasi-hyperbolic weight: a slow phase beta e^{-delta s} plus a
/// fast phase (1 - beta) e^{-10 delta s}, so phi(0) = 1 and phi is smooth
/// while the short-run weight drops quickly toward beta e^{-delta s}.
inline DiscountFn quasi_hyperbolic_discount(double beta, double delta) {
  if (!(beta > 0.0) || !(beta <= 1.0) || !(delta > 0.0)) {
    throw std::invalid_argument(
        "quasi_hyperbolic_discount: need 0 < beta <= 1 and delta > 0");
  }
  const double fast = 10.0 * delta;
  DiscountFn d;
  d.family = "quasi-hyperbolic";
  d.phi = [beta, delta, fast](double s) {
    return beta * std::exp(-delta * s) + (1.0 - beta) * std::exp(-fast * s);
  };
  d.phi_prime = [beta, delta, fast](double s) {
    return -beta * delta * std::exp(-delta * s) -
           (1.0 - beta) * fast * std::exp(-fast * s);
  };
  d.integral_tail = [beta, delta, fast](double t) {
    return beta * std::exp(-delta * t) / delta +
           (1.0 - beta) * std::exp(-fast * t) / fast;
  };
  d.tilted_tail = [beta, delta, fast](double m, double t) {
    if (!(m < delta)) {
      throw std::domain_error("quasi_hyperbolic_discount: tilt m >= delta");
    }
    return beta * std::exp((m - delta) * t) / (delta - m) +
           (1.0 - beta) * std::exp((m - fast) * t) / (fast - m);
  };
  return d;
}

/// Wraps a bare weight function; the derivative falls back to a central
/// finite difference with step 1e-6 * max(1, scale).
inline DiscountFn discount_from_phi(std::function<double(double)> phi,
                                    double scale = 1.0) {
  DiscountFn d;
  d.family = "custom";
  d.phi = phi;
  const double step = 1e-6 * std::max(1.0, scale);
  d.phi_prime = [phi = std::move(phi), step](double s) {
    if (s - step < 0.0) return (phi(s + step) - phi(s)) / step;
    return (phi(s + step) - phi(s - step)) / (2.0 * step);
  };
  return d;
}

/// int_a^b phi, exact through the tail representation when available.
inline double discount_integral(const DiscountFn& d, double a, double b) {
  if (d.integral_tail) return d.integral_tail(a) - d.integral_tail(b);
  return adaptive_simpson(d.phi, a, b, 1e-13);
}

/// int_t^inf phi; throws when the family has no convergent tail.
inline double discount_tail(const DiscountFn& d, double t) {
  if (!d.integral_tail) {
    throw std::domain_error("discount_tail: weight is not integrable");
  }
  return d.integral_tail(t);
}

/// int_t^inf e^{m s} phi(s) ds.
inline double discount_tilted_tail(const DiscountFn& d, double m, double t) {
  if (d.tilted_tail) return d.tilted_tail(m, t);
  return detail::numeric_tilted_tail(d.phi, m, t);
}

}  // namespace tic
