#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "tic/ode.hpp"

using tic::Index;
using tic::MatX;
using tic::OdeSolution;
using tic::OdeSystem;
using tic::VecX;

namespace {

VecX vec1(double v) {
  VecX y(1);
  y[0] = v;
  return y;
}

// Matrix exponential by scaling and squaring with a Taylor series; test-side
// oracle, independent of the integrator.
MatX expm(const MatX& m) {
  const double norm = m.cwiseAbs().rowwise().sum().maxCoeff();
  int squarings = 0;
  double scale = 1.0;
  while (norm * scale > 0.5) {
    scale *= 0.5;
    ++squarings;
  }
  const MatX a = m * scale;
  MatX result = MatX::Identity(m.rows(), m.cols());
  MatX term = result;
  for (int k = 1; k <= 24; ++k) {
    term = (term * a) / static_cast<double>(k);
    result += term;
  }
  for (int s = 0; s < squarings; ++s) result = result * result;
  return result;
}

}  // namespace

TEST_CASE("zero rhs keeps the terminal value") {
  OdeSystem sys{1, [](double, const VecX& y) { return VecX::Zero(1).eval(); }};
  const auto sol = tic::integrate_terminal(sys, vec1(3.5), 0.0, 2.0, 64);
  for (Index i = 0; i < sol.times.size(); ++i) {
    CHECK(sol.values(i, 0) == 3.5);
  }
  CHECK(sol.values(sol.times.size() - 1, 0) == 3.5);  // bitwise terminal
}

TEST_CASE("exponential decay integrated backward hits e") {
  OdeSystem sys{1, [](double, const VecX& y) { return (-y).eval(); }};
  const auto sol = tic::integrate_terminal(sys, vec1(1.0), 0.0, 1.0, 100);
  CHECK(std::abs(sol.values(0, 0) - 2.718281828459045) < 1e-8);
}

TEST_CASE("observed convergence order is at least 3.8") {
  OdeSystem sys{1, [](double, const VecX& y) { return (-y).eval(); }};
  const double exact = std::exp(1.0);
  const double e1 =
      std::abs(tic::integrate_terminal(sys, vec1(1.0), 0.0, 1.0, 50)
                   .values(0, 0) -
               exact);
  const double e2 =
      std::abs(tic::integrate_terminal(sys, vec1(1.0), 0.0, 1.0, 100)
                   .values(0, 0) -
               exact);
  const double order = std::log2(e1 / e2);
  CHECK(order >= 3.8);
}

TEST_CASE("constant-coefficient linear system matches the matrix exponential") {
  MatX m(3, 3);
  m << -0.5, 0.2, 0.0,  //
      0.1, -0.3, 0.4,   //
      0.0, 0.25, -0.8;
  OdeSystem sys{3, [m](double, const VecX& y) { return (m * y).eval(); }};
  VecX terminal(3);
  terminal << 1.0, -2.0, 0.5;
  const double T = 1.5;
  const auto sol = tic::integrate_terminal(sys, terminal, 0.0, T, 1000);
  // y(0) = expm(-T m) y(T)
  const VecX expected = expm((-T * m).eval()) * terminal;
  for (Index i = 0; i < 3; ++i) {
    CHECK(std::abs(sol.values(0, i) - expected[i]) < 1e-6);
  }
}

TEST_CASE("forward re-integration reproduces the terminal value") {
  OdeSystem sys{2, [](double t, const VecX& y) {
                  VecX dy(2);
                  dy[0] = y[1];
                  dy[1] = -std::sin(y[0]) - 0.1 * y[1] + 0.2 * std::cos(t);
                  return dy;
                }};
  VecX terminal(2);
  terminal << 0.4, -0.1;
  const double t0 = 0.0, T = 2.0;
  const Index steps = 400;
  const auto back = tic::integrate_terminal(sys, terminal, t0, T, steps);

  // Reversed clock: w(s) = y(T + t0 - s) turns the forward run into another
  // terminal-value problem.
  OdeSystem reversed{2, [&](double s, const VecX& w) {
                       return (-sys.rhs(T + t0 - s, w)).eval();
                     }};
  const auto fwd =
      tic::integrate_terminal(reversed, back.values.row(0), t0, T, steps);
  for (Index i = 0; i < 2; ++i) {
    CHECK(std::abs(fwd.values(0, i) - terminal[i]) < 1e-9);
  }
}

TEST_CASE("linear interpolation is exact at nodes and clamps outside") {
  OdeSystem sys{1, [](double, const VecX& y) { return (-y).eval(); }};
  const auto sol = tic::integrate_terminal(sys, vec1(2.0), 0.5, 1.5, 10);
  for (Index i = 0; i < sol.times.size(); ++i) {
    CHECK(sol.eval(sol.times[i], 0) == sol.values(i, 0));
  }
  CHECK(sol.eval(0.0, 0) == sol.values(0, 0));
  CHECK(sol.eval(9.0, 0) == sol.values(10, 0));
  const double mid = 0.5 * (sol.times[3] + sol.times[4]);
  CHECK(sol.eval(mid, 0) ==
        doctest::Approx(0.5 * (sol.values(3, 0) + sol.values(4, 0))));
}

TEST_CASE("input validation") {
  OdeSystem sys{1, [](double, const VecX& y) { return y; }};
  CHECK_THROWS_AS(tic::integrate_terminal(sys, vec1(1.0), 1.0, 1.0, 10),
                  std::invalid_argument);
  CHECK_THROWS_AS(tic::integrate_terminal(sys, vec1(1.0), 0.0, 1.0, 0),
                  std::invalid_argument);
  CHECK_THROWS_AS(tic::integrate_terminal(sys, VecX::Zero(2), 0.0, 1.0, 10),
                  std::invalid_argument);
}

TEST_CASE("non-finite right-hand side reports the failing time") {
  OdeSystem sys{1, [](double t, const VecX& y) {
                  return vec1(t < 0.5 ? 1e308 * y[0] * y[0] : -y[0]);
                }};
  CHECK_THROWS_AS(tic::integrate_terminal(sys, vec1(2.0), 0.0, 1.0, 100),
                  std::runtime_error);
}
