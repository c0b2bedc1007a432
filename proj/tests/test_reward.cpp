#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "tic/mean_variance.hpp"
#include "tic/reward.hpp"

using tic::Control;
using tic::ControlModel;
using tic::RewardSpec;
using tic::SimConfig;

namespace {

ControlModel still_model(double T = 1.0) {
  ControlModel m;
  m.drift = [](double, double, const Control&) { return 0.0; };
  m.diffusion = [](double, double, const Control&) { return 0.0; };
  m.control_lo = tic::control1(0.0);
  m.control_hi = tic::control1(0.0);
  m.horizon = T;
  return m;
}

}  // namespace

TEST_CASE("deterministic terminal reward has zero standard error") {
  RewardSpec spec;
  spec.terminal = [](double, double, double y) { return y; };
  const auto est = tic::estimate_J(still_model(), tic::constant_law(0.0),
                                   spec, 0.0, 5.0, {100, 10, 1});
  CHECK(est.mean == 5.0);
  CHECK(est.std_err == 0.0);
}

TEST_CASE("mean-variance reward matches the closed-form value within 3 SE") {
  tic::MvParams p;  // alpha=0.08 r=0.03 sigma=0.2 gamma=2 T=1
  const auto sol = tic::solve_mv(p);
  const auto model = tic::mv_wealth_model(p);
  const auto spec = tic::mv_reward_spec(p.gamma);
  const auto est = tic::estimate_J(model, sol.u_hat, spec, 0.0, 1.0,
                                   {60000, 200, 31});
  const double ref = 1.0460795339535168;  // e^{0.03} + 0.05^2/(2*2*0.2^2)
  CHECK(std::abs(est.mean - ref) <= 3.0 * est.std_err);
  CHECK(est.std_err > 0.0);
}

TEST_CASE("estimate_J with F(y)=y equals estimate_g on the same seed") {
  tic::MvParams p;
  const auto sol = tic::solve_mv(p);
  const auto model = tic::mv_wealth_model(p);
  RewardSpec spec;
  spec.terminal = [](double, double, double y) { return y; };
  SimConfig config{5000, 50, 17};
  const auto a = tic::estimate_J(model, sol.u_hat, spec, 0.0, 1.0, config);
  const auto b =
      tic::estimate_g(model, sol.u_hat, nullptr, 0.0, 1.0, config);
  CHECK(a.mean == b.mean);
  CHECK(a.std_err == b.std_err);
}

TEST_CASE("estimate_f at the evaluation anchor equals estimate_J without G") {
  tic::MvParams p;
  const auto sol = tic::solve_mv(p);
  const auto model = tic::mv_wealth_model(p);
  RewardSpec spec;
  spec.running = [](double ta, double, double s, double y, const Control&) {
    return 0.1 * (s - ta) * y;
  };
  spec.terminal = [](double, double xa, double y) { return y - 0.2 * xa; };
  SimConfig config{3000, 80, 23};
  const auto a = tic::estimate_J(model, sol.u_hat, spec, 0.2, 1.5, config);
  const auto b =
      tic::estimate_f(model, sol.u_hat, spec, 0.2, 1.5, 0.2, 1.5, config);
  CHECK(a.mean == b.mean);
  CHECK(a.std_err == b.std_err);
}

TEST_CASE("constant anchored terminal reward is exact") {
  tic::MvParams p;
  const auto model = tic::mv_wealth_model(p);
  RewardSpec spec;
  spec.terminal = [](double, double xa, double) { return xa; };
  const auto est = tic::estimate_f(model, tic::constant_law(0.3), spec, 0.7,
                                   4.25, 0.0, 1.0, {500, 20, 9});
  CHECK(est.mean == 4.25);
  CHECK(est.std_err == 0.0);
}

TEST_CASE("single-step g estimate tracks x plus drift") {
  ControlModel m;
  m.drift = [](double, double, const Control&) { return 0.4; };
  m.diffusion = [](double, double, const Control&) { return 0.3; };
  m.control_lo = tic::control1(0.0);
  m.control_hi = tic::control1(0.0);
  m.horizon = 1.0;
  // One Euler step of length 0.5 from t = 0.5.
  const auto est = tic::estimate_g(m, tic::constant_law(0.0), nullptr, 0.5,
                                   2.0, {40000, 1, 55});
  CHECK(std::abs(est.mean - (2.0 + 0.4 * 0.5)) <= 3.0 * est.std_err);
}

TEST_CASE("quadratic transform of a frozen state is exact") {
  const auto est = tic::estimate_g(
      still_model(), tic::constant_law(0.0),
      [](double y) { return y * y; }, 0.0, 3.0, {64, 8, 2});
  CHECK(est.mean == 9.0);
  CHECK(est.std_err == 0.0);
}

TEST_CASE("mean-variance g matches e^{rT} x + beta^2/(gamma sigma^2) T") {
  tic::MvParams p;
  const auto sol = tic::solve_mv(p);
  const auto model = tic::mv_wealth_model(p);
  const auto est = tic::estimate_g(model, sol.u_hat, nullptr, 0.0, 1.0,
                                   {60000, 200, 71});
  const double ref = 1.0617045339535168;
  CHECK(std::abs(est.mean - ref) <= 3.0 * est.std_err);
}

TEST_CASE("scaling F by -2 scales mean and standard error exactly") {
  tic::MvParams p;
  const auto sol = tic::solve_mv(p);
  const auto model = tic::mv_wealth_model(p);
  RewardSpec spec;
  spec.terminal = [](double, double, double y) { return y - y * y; };
  RewardSpec scaled;
  scaled.terminal = [](double, double, double y) {
    return -2.0 * (y - y * y);
  };
  SimConfig config{4000, 60, 13};
  const auto a = tic::estimate_J(model, sol.u_hat, spec, 0.0, 1.0, config);
  const auto b = tic::estimate_J(model, sol.u_hat, scaled, 0.0, 1.0, config);
  CHECK(b.mean == -2.0 * a.mean);
  CHECK(b.std_err == 2.0 * a.std_err);
}

TEST_CASE("tower property of g under the equilibrium law") {
  // E_{t,x}[g(t+dt, X_{t+dt})] agrees with g(t,x) for the analytic g.
  tic::MvParams p;
  const auto sol = tic::solve_mv(p);
  const auto model = tic::mv_wealth_model(p);
  const double t = 0.2, x = 1.3, dt_step = 0.1;
  RewardSpec spec;
  ControlModel one_step = model;
  one_step.horizon = t + dt_step;
  spec.terminal = [&sol, t, dt_step](double, double, double y) {
    return sol.g(t + dt_step, y);
  };
  const auto est = tic::estimate_J(one_step, sol.u_hat, spec, t, x,
                                   {60000, 20, 5});
  CHECK(std::abs(est.mean - sol.g(t, x)) <= 3.0 * est.std_err);
}

TEST_CASE("wrapper evaluated at a non-finite mean raises") {
  ControlModel m = still_model();
  RewardSpec spec;
  spec.terminal = [](double, double, double y) { return y; };
  spec.wrapper = [](double, double, double m_) { return std::log(-m_); };
  CHECK_THROWS_AS(tic::estimate_J(m, tic::constant_law(0.0), spec, 0.0, 1.0,
                                  {16, 4, 1}),
                  std::runtime_error);
}

TEST_CASE("a reward needs at least one component") {
  RewardSpec empty;
  CHECK_THROWS_AS(tic::estimate_J(still_model(), tic::constant_law(0.0),
                                  empty, 0.0, 1.0, {16, 4, 1}),
                  std::invalid_argument);
}
