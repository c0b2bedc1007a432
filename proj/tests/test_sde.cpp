#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "tic/mean_variance.hpp"
#include "tic/parallel.hpp"
#include "tic/rng.hpp"
#include "tic/sde.hpp"

using tic::Control;
using tic::ControlModel;
using tic::FeedbackLaw;
using tic::Index;
using tic::PathBatch;
using tic::SimConfig;

namespace {

ControlModel gbm_model(double mu, double sigma, double T) {
  ControlModel m;
  m.drift = [mu](double, double x, const Control&) { return mu * x; };
  m.diffusion = [sigma](double, double x, const Control&) {
    return sigma * x;
  };
  m.control_lo = tic::control1(-1.0);
  m.control_hi = tic::control1(1.0);
  m.horizon = T;
  return m;
}

}  // namespace

TEST_CASE("degenerate dynamics keep the state constant") {
  ControlModel m;
  m.drift = [](double, double, const Control&) { return 0.0; };
  m.diffusion = [](double, double, const Control&) { return 0.0; };
  m.control_lo = tic::control1(0.0);
  m.control_hi = tic::control1(0.0);
  m.horizon = 1.0;
  const auto batch =
      tic::simulate_paths(m, tic::constant_law(0.0), 0.0, 1.0, {50, 20, 7});
  CHECK((batch.states.array() == 1.0).all());
  CHECK(batch.absorbed_fraction == 0.0);
}

TEST_CASE("GBM terminal mean matches the analytic value within 3 SE") {
  const auto m = gbm_model(0.08, 0.2, 1.0);
  SimConfig config{40000, 200, 123};
  const auto batch =
      tic::simulate_paths(m, tic::constant_law(0.0), 0.0, 1.0, config);
  std::vector<double> terminal(config.n_paths);
  for (Index i = 0; i < config.n_paths; ++i) {
    terminal[static_cast<std::size_t>(i)] =
        batch.states(i, config.n_steps);
  }
  const auto stat = tic::mean_std_err(terminal);
  const double ref = std::exp(0.08);  // = 1.0832870676749586
  CHECK(std::abs(stat.mean - ref) <= 3.0 * stat.std_err);
}

TEST_CASE("all-in portfolio law reproduces the GBM path for path") {
  // dX = [rX + (alpha-r)u]dt + sigma u dW with u = x is the GBM above.
  tic::MvParams p;
  p.alpha = 0.08;
  p.r = 0.03;
  p.sigma = 0.2;
  const auto wealth = tic::mv_wealth_model(p, -100.0, 100.0);
  const auto gbm = gbm_model(0.08, 0.2, 1.0);
  SimConfig config{32, 64, 99};
  const auto a = tic::simulate_paths(
      wealth, tic::scalar_law([](double, double x) { return x; }), 0.0, 1.0,
      config);
  const auto b =
      tic::simulate_paths(gbm, tic::constant_law(0.0), 0.0, 1.0, config);
  CHECK((a.states.array() == b.states.array()).all());
}

TEST_CASE("identical inputs give bit-identical batches") {
  const auto m = gbm_model(0.05, 0.3, 2.0);
  SimConfig config{64, 32, 2024};
  const auto a =
      tic::simulate_paths(m, tic::constant_law(0.0), 0.5, 1.2, config);
  const auto b =
      tic::simulate_paths(m, tic::constant_law(0.0), 0.5, 1.2, config);
  CHECK((a.states.array() == b.states.array()).all());
  CHECK(a.times == b.times);
}

TEST_CASE("path i does not depend on the number of paths") {
  const auto m = gbm_model(0.05, 0.3, 1.0);
  const auto small = tic::simulate_paths(m, tic::constant_law(0.0), 0.0, 1.0,
                                         {8, 16, 77});
  const auto large = tic::simulate_paths(m, tic::constant_law(0.0), 0.0, 1.0,
                                         {64, 16, 77});
  for (Index i = 0; i < 8; ++i) {
    for (Index k = 0; k <= 16; ++k) {
      CHECK(small.states(i, k) == large.states(i, k));
    }
  }
}

TEST_CASE("antithetic pairs cancel increments exactly for driftless noise") {
  ControlModel m;
  m.drift = [](double, double, const Control&) { return 0.0; };
  m.diffusion = [](double, double, const Control&) { return 0.7; };
  m.control_lo = tic::control1(0.0);
  m.control_hi = tic::control1(0.0);
  m.horizon = 1.0;
  SimConfig config{16, 25, 5};
  config.antithetic = true;
  const auto batch =
      tic::simulate_paths(m, tic::constant_law(0.0), 0.0, 0.3, config);
  for (Index i = 0; i < config.n_paths; i += 2) {
    for (Index k = 0; k < config.n_steps; ++k) {
      const double inc_even = batch.states(i, k + 1) - batch.states(i, k);
      const double inc_odd =
          batch.states(i + 1, k + 1) - batch.states(i + 1, k);
      CHECK(inc_even + inc_odd == 0.0);
    }
  }
}

TEST_CASE("recorded controls are clamped to the admissible interval") {
  ControlModel m;
  m.drift = [](double, double, const Control& u) { return u[0]; };
  m.diffusion = [](double, double, const Control&) { return 0.1; };
  m.control_lo = tic::control1(-0.5);
  m.control_hi = tic::control1(0.5);
  m.horizon = 1.0;
  const auto law = tic::scalar_law([](double t, double) {
    return 10.0 * std::sin(40.0 * t);
  });
  const auto batch = tic::simulate_paths(m, law, 0.0, 0.0, {16, 50, 3});
  CHECK(batch.controls[0].maxCoeff() <= 0.5);
  CHECK(batch.controls[0].minCoeff() >= -0.5);
}

TEST_CASE("common random numbers: draws do not depend on the law") {
  const auto m = gbm_model(0.02, 0.25, 1.0);
  SimConfig config{10, 30, 11};
  std::vector<std::vector<double>> draws_a(10), draws_b(10);
  tic::for_each_path(m, tic::constant_law(0.0), 0.0, 1.0, config,
                     [&](const tic::PathView& v) {
                       draws_a[static_cast<std::size_t>(v.path)].assign(
                           v.gauss.begin(), v.gauss.end());
                     });
  const auto wild = tic::scalar_law([](double t, double x) {
    return std::sin(x) + t;
  });
  tic::for_each_path(m, wild, 0.0, 1.0, config, [&](const tic::PathView& v) {
    draws_b[static_cast<std::size_t>(v.path)].assign(v.gauss.begin(),
                                                     v.gauss.end());
  });
  CHECK(draws_a == draws_b);
}

TEST_CASE("strong convergence order of the Euler scheme is about one half") {
  // Bisection-refined Brownian increments shared across resolutions; the
  // exact GBM terminal value on the same path is the oracle.
  const double mu = 0.08, sigma = 0.2, T = 1.0, x0 = 1.0;
  const Index n_paths = 4000;
  const Index finest = 256;
  std::vector<double> rms;
  std::vector<Index> levels = {16, 32, 64, 128, 256};

  std::vector<double> err2(levels.size(), 0.0);
  for (Index p = 0; p < n_paths; ++p) {
    tic::NormalStream stream(4242, static_cast<std::uint64_t>(p));
    std::vector<double> dw(finest);
    double w_T = 0.0;
    const double dt_fine = T / static_cast<double>(finest);
    for (Index k = 0; k < finest; ++k) {
      dw[static_cast<std::size_t>(k)] = std::sqrt(dt_fine) * stream.next();
      w_T += dw[static_cast<std::size_t>(k)];
    }
    const double exact = x0 * std::exp((mu - 0.5 * sigma * sigma) * T +
                                       sigma * w_T);
    for (std::size_t li = 0; li < levels.size(); ++li) {
      const Index n = levels[li];
      const Index group = finest / n;
      const double dt = T / static_cast<double>(n);
      double x = x0;
      for (Index k = 0; k < n; ++k) {
        double dwk = 0.0;
        for (Index j = 0; j < group; ++j) {
          dwk += dw[static_cast<std::size_t>(k * group + j)];
        }
        x += mu * x * dt + sigma * x * dwk;
      }
      err2[li] += (x - exact) * (x - exact);
    }
  }
  for (std::size_t li = 0; li < levels.size(); ++li) {
    rms.push_back(std::sqrt(err2[li] / static_cast<double>(n_paths)));
  }
  // Least-squares slope of log2 rms against log2 dt.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t li = 0; li < levels.size(); ++li) {
    const double lx = std::log2(T / static_cast<double>(levels[li]));
    const double ly = std::log2(rms[li]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double n = static_cast<double>(levels.size());
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  CHECK(slope >= 0.35);
  CHECK(slope <= 0.65);
}

TEST_CASE("positive-state models absorb at the floor and report it") {
  ControlModel m;
  m.drift = [](double, double, const Control&) { return -5.0; };
  m.diffusion = [](double, double, const Control&) { return 0.0; };
  m.control_lo = tic::control1(0.0);
  m.control_hi = tic::control1(0.0);
  m.horizon = 1.0;
  m.positive_state = true;
  const auto batch =
      tic::simulate_paths(m, tic::constant_law(0.0), 0.0, 1.0, {4, 100, 1});
  CHECK(batch.absorbed_fraction == 1.0);
  const double floor = 1e-6;
  for (Index i = 0; i < 4; ++i) {
    CHECK(batch.states(i, 100) == floor);
  }
}

TEST_CASE("simulation rejects bad inputs") {
  const auto m = gbm_model(0.1, 0.2, 1.0);
  CHECK_THROWS_AS(
      tic::simulate_paths(m, tic::constant_law(0.0), 1.0, 1.0, {4, 4, 1}),
      std::invalid_argument);
  SimConfig bad;
  bad.n_paths = 0;
  CHECK_THROWS_AS(tic::simulate_paths(m, tic::constant_law(0.0), 0.0, 1.0,
                                      bad),
                  std::invalid_argument);

  ControlModel blow;
  blow.drift = [](double, double x, const Control&) { return x * 1e300; };
  blow.diffusion = [](double, double, const Control&) { return 0.0; };
  blow.control_lo = tic::control1(0.0);
  blow.control_hi = tic::control1(0.0);
  blow.horizon = 1.0;
  CHECK_THROWS_WITH_AS(
      tic::simulate_paths(blow, tic::constant_law(0.0), 0.0, 1e30, {1, 3, 1}),
      doctest::Contains("non-finite state at path 0"), std::runtime_error);
}

TEST_CASE("spike law follows the perturbation only on the window") {
  const auto base = tic::constant_law(0.0);
  const auto bump = tic::constant_law(1.0);

  SUBCASE("identical pieces") {
    const auto law = tic::spike_law(base, base, 0.3, 0.2);
    for (double t : {0.0, 0.31, 0.49, 0.9}) {
      CHECK(law(t, 2.0)[0] == base(t, 2.0)[0]);
    }
  }
  SUBCASE("piecewise definition") {
    const auto law = tic::spike_law(base, bump, 0.0, 0.5);
    CHECK(law(0.25, 123.0)[0] == 1.0);
    CHECK(law(0.75, -4.0)[0] == 0.0);
    CHECK(law(0.5, 0.0)[0] == 0.0);  // closed-left, open-right window
    CHECK(law(0.0, 0.0)[0] == 1.0);
  }
  SUBCASE("window shrinking to zero leaves s > t untouched") {
    for (double h : {1e-3, 1e-6, 1e-12}) {
      const auto law = tic::spike_law(base, bump, 0.2, h);
      for (double s : {0.2 + 1e-2, 0.5, 0.99}) {
        CHECK(law(s, 1.0)[0] == base(s, 1.0)[0]);
      }
    }
  }
  SUBCASE("h must be positive") {
    CHECK_THROWS_AS(tic::spike_law(base, bump, 0.1, 0.0),
                    std::invalid_argument);
  }
}
