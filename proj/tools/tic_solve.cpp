// tic-solve: experiment runner for the time-inconsistent control suite.
//
// One subcommand per worked problem family (mv, mv-wealth, discount, lq,
// cir), plus the generic grid solver, the spike-perturbation tester, and the
// equivalent standard-problem construction. Each run writes solution tables,
// certification tables (simulation against closed form with standard
// errors), and a summary file with one PASS/FAIL line per exercised check.
// Exit status: 0 all checks pass, 1 a check failed, 2 configuration error.

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "tic/cir.hpp"
#include "tic/csv.hpp"
#include "tic/discount.hpp"
#include "tic/discounting.hpp"
#include "tic/equilibrium.hpp"
#include "tic/grid_checks.hpp"
#include "tic/hjb_grid.hpp"
#include "tic/lq.hpp"
#include "tic/mean_variance.hpp"
#include "tic/problems.hpp"

namespace {

using nlohmann::json;

struct Summary {
  std::vector<std::string> lines;
  bool all_pass = true;

  void check(const std::string& name, bool ok, const std::string& detail) {
    lines.push_back(std::string(ok ? "PASS " : "FAIL ") + name + ": " +
                    detail);
    all_pass = all_pass && ok;
  }

  void write(const std::filesystem::path& dir) const {
    std::ofstream out(dir / "summary.txt", std::ios::binary);
    for (const auto& line : lines) out << line << '\n';
    out << (all_pass ? "ALL CHECKS PASSED\n" : "CHECK FAILURES PRESENT\n");
  }
};

std::string fmt(double v) { return tic::CsvWriter::format(v); }

/// Applies config-file values to options the user did not pass explicitly;
/// rejects unknown keys.
void apply_config(CLI::App* cmd, const std::string& config_path) {
  if (config_path.empty()) return;
  std::ifstream in(config_path);
  if (!in) throw CLI::ValidationError("config", "cannot open " + config_path);
  json values = json::parse(in, nullptr, true, true);
  if (!values.is_object()) {
    throw CLI::ValidationError("config", "expected a flat JSON object");
  }
  for (const auto& [key, value] : values.items()) {
    CLI::Option* opt = nullptr;
    try {
      opt = cmd->get_option("--" + key);
    } catch (const CLI::OptionNotFound&) {
      throw CLI::ValidationError("config", "unknown key '" + key + "'");
    }
    if (opt->count() > 0) continue;  // command line wins
    std::string text =
        value.is_string() ? value.get<std::string>() : value.dump();
    opt->add_result(text);
    opt->run_callback();
  }
}

struct CommonOpts {
  std::string out_dir = ".";
  std::string config;
  std::uint64_t seed = 42;
  long long paths = 20000;
  long long steps = 200;

  void attach(CLI::App* cmd) {
    cmd->add_option("--out", out_dir, "output directory");
    cmd->add_option("--config", config,
                    "JSON config file (flags override file values)");
    cmd->add_option("--seed", seed, "simulation seed");
    cmd->add_option("--paths", paths, "Monte Carlo paths");
    cmd->add_option("--steps", steps, "Euler steps");
  }

  tic::SimConfig sim() const {
    tic::SimConfig c;
    c.n_paths = paths;
    c.n_steps = steps;
    c.seed = seed;
    return c;
  }

  std::filesystem::path dir() const {
    std::filesystem::path d(out_dir);
    std::filesystem::create_directories(d);
    return d;
  }
};

tic::DiscountFn make_family(const std::string& family, double delta, double k,
                            double m, double beta_weight) {
  if (family == "exponential") return tic::exponential_discount(delta);
  if (family == "hyperbolic") return tic::hyperbolic_discount(k);
  if (family == "hyperbolic-power") {
    return tic::hyperbolic_power_discount(k, m);
  }
  if (family == "quasi-hyperbolic") {
    return tic::quasi_hyperbolic_discount(beta_weight, delta);
  }
  throw CLI::ValidationError("family", "unknown discount family " + family);
}

bool spike_all_pass(const std::vector<tic::SpikeReport>& reports) {
  for (const auto& r : reports) {
    if (r.verdict != tic::Verdict::Pass) return false;
  }
  return true;
}

void write_spike_csv(const std::filesystem::path& path,
                     const std::vector<tic::SpikeReport>& reports) {
  tic::CsvWriter csv(path.string());
  csv.header({"t", "x", "perturbation", "h", "delta", "std_err", "verdict"});
  for (const auto& r : reports) {
    for (std::size_t i = 0; i < r.h_values.size(); ++i) {
      csv.row({r.t, r.x, static_cast<long long>(r.perturbation),
               r.h_values[i], r.deltas[i], r.std_errs[i],
               std::string(tic::to_string(r.verdict))});
    }
  }
}

// ---------------------------------------------------------------------------
// mv
// ---------------------------------------------------------------------------

int run_mv(const CommonOpts& common, const tic::MvParams& params) {
  const auto dir = common.dir();
  Summary summary;
  const auto sol = tic::solve_mv(params);

  {
    tic::CsvWriter csv((dir / "mv_solution.csv").string());
    csv.header({"t", "u_hat", "V_at_1", "a", "b", "A", "B"});
    const int rows = 50;
    for (int i = 0; i <= rows; ++i) {
      const double t = params.T * i / rows;
      csv.row({t, sol.u_hat(t, 1.0)[0], sol.V(t, 1.0), sol.a(t), sol.b(t),
               sol.A(t), sol.B(t)});
    }
  }

  const auto model = tic::mv_wealth_model(params);
  const auto spec = tic::mv_reward_spec(params.gamma);
  const auto config = common.sim();

  tic::CsvWriter certify((dir / "mv_certify.csv").string());
  certify.header(
      {"check", "estimate", "std_err", "reference", "sigmas", "pass"});

  {
    const auto est = tic::estimate_J(model, sol.u_hat, spec, 0.0, 1.0, config);
    const double ref = sol.V(0.0, 1.0);
    const double sig = std::abs(est.mean - ref) / est.std_err;
    const bool ok = sig <= 3.0;
    certify.row({std::string("J_vs_V_at_0_1"), est.mean, est.std_err, ref, sig,
                 std::string(ok ? "1" : "0")});
    summary.check("mv_value_mc", ok,
                  "J(0,1)=" + fmt(est.mean) + " vs V=" + fmt(ref) +
                      " (sigma=" + fmt(sig) + ")");
  }
  {
    const auto est =
        tic::estimate_g(model, sol.u_hat, nullptr, 0.0, 1.0, config);
    const double ref = sol.g(0.0, 1.0);
    const double sig = std::abs(est.mean - ref) / est.std_err;
    const bool ok = sig <= 3.0;
    certify.row({std::string("g_vs_ax_plus_b_at_0_1"), est.mean, est.std_err,
                 ref, sig, std::string(ok ? "1" : "0")});
    summary.check("mv_g_mc", ok, "E[X_T]=" + fmt(est.mean) + " vs " +
                                     fmt(ref) + " (sigma=" + fmt(sig) + ")");
  }
  {
    std::vector<tic::FeedbackLaw> perturbations = {
        tic::scalar_law([&](double t, double x) {
          return sol.u_hat(t, x)[0] + 1.0;
        }),
        tic::scalar_law([&](double t, double x) {
          return sol.u_hat(t, x)[0] - 1.0;
        }),
        tic::scalar_law(
            [&](double t, double x) { return 2.0 * sol.u_hat(t, x)[0]; })};
    const std::vector<std::pair<double, double>> points = {
        {0.0, 1.0}, {0.5 * params.T, 2.0}};
    const std::vector<double> hs = {0.2 * params.T, 0.1 * params.T,
                                    0.05 * params.T, 0.025 * params.T};
    const auto reports = tic::check_equilibrium(model, sol.u_hat,
                                                perturbations, spec, points,
                                                hs, config, 3.0);
    write_spike_csv(dir / "mv_spike.csv", reports);
    const bool ok = spike_all_pass(reports);
    summary.check("mv_spike", ok,
                  std::to_string(reports.size()) + " spike reports");
  }

  summary.write(dir);
  return summary.all_pass ? 0 : 1;
}

// ---------------------------------------------------------------------------
// mv-wealth
// ---------------------------------------------------------------------------

int run_mv_wealth(const CommonOpts& common, const tic::MvParams& params,
                  long long ode_steps) {
  const auto dir = common.dir();
  Summary summary;
  const auto sol = tic::solve_mv_wealth(params, ode_steps);
  const auto fine = tic::solve_mv_wealth(params, 2 * ode_steps);

  {
    tic::CsvWriter csv((dir / "mv_wealth_solution.csv").string());
    csv.header({"t", "a", "b", "u_slope", "V_at_1"});
    const int rows = 50;
    for (int i = 0; i <= rows; ++i) {
      const double t = params.T * i / rows;
      csv.row({t, sol.a(t), sol.b(t), sol.control_slope(t), sol.V(t, 1.0)});
    }
  }

  tic::CsvWriter certify((dir / "mv_wealth_certify.csv").string());
  certify.header(
      {"check", "estimate", "std_err", "reference", "sigmas", "pass"});

  {
    const double dev = std::max(std::abs(sol.a(0.0) - fine.a(0.0)),
                                std::abs(sol.b(0.0) - fine.b(0.0)));
    const bool ok = dev <= 1e-8;
    certify.row({std::string("step_doubling"), dev, 0.0, 1e-8, 0.0,
                 std::string(ok ? "1" : "0")});
    summary.check("mv_wealth_step_doubling", ok, "max drift " + fmt(dev));
  }
  {
    double dev = 0.0;
    for (double t : {0.0, 0.3 * params.T, 0.7 * params.T}) {
      const double s1 = sol.u_hat(t, 1.0)[0] / 1.0;
      for (double x : {0.5, 2.0, 5.0}) {
        dev = std::max(dev, std::abs(sol.u_hat(t, x)[0] / x - s1));
      }
    }
    const bool ok = dev <= 1e-12;
    certify.row({std::string("u_over_x_constant"), dev, 0.0, 1e-12, 0.0,
                 std::string(ok ? "1" : "0")});
    summary.check("mv_wealth_linear_control", ok, "max dev " + fmt(dev));
  }

  const auto model = tic::mv_wealth_model(params, -100.0, 100.0, true);
  const auto spec = tic::mv_wealth_reward_spec(params.gamma);
  const auto config = common.sim();
  {
    const auto est =
        tic::estimate_g(model, sol.u_hat, nullptr, 0.0, 1.0, config);
    const double ref = sol.a(0.0);
    const double sig = std::abs(est.mean - ref) / est.std_err;
    const bool ok = sig <= 3.0;
    certify.row({std::string("mean_XT_vs_a0"), est.mean, est.std_err, ref,
                 sig, std::string(ok ? "1" : "0")});
    summary.check("mv_wealth_mean_mc", ok,
                  "E[X_T]=" + fmt(est.mean) + " vs a(0)=" + fmt(ref) +
                      " (sigma=" + fmt(sig) + ")");
  }
  {
    std::vector<tic::FeedbackLaw> perturbations = {
        tic::scalar_law([&](double t, double x) {
          return sol.u_hat(t, x)[0] + 0.5 * x;
        }),
        tic::scalar_law([&](double t, double x) {
          return 0.5 * sol.u_hat(t, x)[0];
        })};
    const auto reports = tic::check_equilibrium(
        model, sol.u_hat, perturbations, spec, {{0.0, 1.0}},
        {0.1 * params.T, 0.05 * params.T, 0.025 * params.T}, config, 3.0);
    write_spike_csv(dir / "mv_wealth_spike.csv", reports);
    const bool ok = spike_all_pass(reports);
    summary.check("mv_wealth_spike", ok,
                  std::to_string(reports.size()) + " spike reports");
  }

  summary.write(dir);
  return summary.all_pass ? 0 : 1;
}

// ---------------------------------------------------------------------------
// discount
// ---------------------------------------------------------------------------

int run_discount(const CommonOpts& common, double alpha, double r,
                 double sigma, double T, const std::string& family,
                 double delta, double k, double m, double beta_weight,
                 long long ode_steps) {
  const auto dir = common.dir();
  Summary summary;
  const auto disc = make_family(family, delta, k, m, beta_weight);
  const auto sol = tic::solve_log_consumption(alpha, r, sigma, T, disc,
                                              ode_steps);

  {
    tic::CsvWriter csv((dir / "discount_solution.csv").string());
    csv.header({"t", "a", "d", "c_hat_at_1"});
    const int rows = 50;
    for (int i = 0; i <= rows; ++i) {
      const double t = T * i / rows;
      csv.row({t, sol.a(t), sol.d(t), sol.c_hat(t, 1.0)[0]});
    }
  }

  tic::CsvWriter certify((dir / "discount_certify.csv").string());
  certify.header(
      {"check", "estimate", "std_err", "reference", "sigmas", "pass"});

  {
    const double aT = sol.a(T);
    const bool ok = std::abs(aT - 1.0) <= 1e-8;
    certify.row({std::string("a_terminal"), aT, 0.0, 1.0, 0.0,
                 std::string(ok ? "1" : "0")});
    summary.check("discount_a_terminal", ok, "a(T)=" + fmt(aT));
  }
  if (family == "exponential") {
    double dev = 0.0;
    for (int i = 0; i <= 20; ++i) {
      const double t = T * i / 20;
      const double tau = T - t;
      const double ref = std::exp(-delta * tau) +
                         (1.0 - std::exp(-delta * tau)) / delta;
      dev = std::max(dev, std::abs(sol.a(t) - ref));
    }
    const bool ok = dev <= 1e-8;
    certify.row({std::string("a_analytic_exponential"), dev, 0.0, 1e-8, 0.0,
                 std::string(ok ? "1" : "0")});
    summary.check("discount_a_analytic", ok, "max dev " + fmt(dev));
  }
  {
    const double tol = 10.0 * T / static_cast<double>(ode_steps);
    double worst = 0.0;
    for (double t : {0.1 * T, 0.5 * T, 0.9 * T}) {
      for (double x : {0.5, 1.0, 2.0}) {
        worst = std::max(worst, std::abs(tic::hjb_residual_log(sol, t, x)));
      }
    }
    const bool ok = worst <= tol;
    certify.row({std::string("hjb_residual"), worst, 0.0, tol, 0.0,
                 std::string(ok ? "1" : "0")});
    summary.check("discount_hjb_residual", ok,
                  "max |residual| " + fmt(worst) + " tol " + fmt(tol));
  }

  const auto model = tic::log_consumption_model(alpha, r, sigma, T);
  const auto spec = tic::log_consumption_reward_spec(disc, T);
  const auto config = common.sim();
  {
    const auto est =
        tic::estimate_J(model, sol.joint, spec, 0.0, 1.0, config);
    const double ref = sol.V(0.0, 1.0);
    const double sig = std::abs(est.mean - ref) / est.std_err;
    const bool ok = sig <= 3.0;
    certify.row({std::string("J_vs_V_at_0_1"), est.mean, est.std_err, ref,
                 sig, std::string(ok ? "1" : "0")});
    summary.check("discount_value_mc", ok,
                  "J(0,1)=" + fmt(est.mean) + " vs V=" + fmt(ref) +
                      " (sigma=" + fmt(sig) + ")");
  }
  {
    std::vector<tic::FeedbackLaw> perturbations = {
        tic::joint_law(tic::scalar_law([&](double t, double x) {
                         return sol.u_hat(t, x)[0] + 0.5 * x;
                       }),
                       sol.c_hat),
        tic::joint_law(sol.u_hat, tic::scalar_law([&](double t, double x) {
                         return 1.5 * sol.c_hat(t, x)[0];
                       }))};
    const auto reports = tic::check_equilibrium(
        model, sol.joint, perturbations, spec, {{0.0, 1.0}},
        {0.1 * T, 0.05 * T, 0.025 * T}, config, 3.0);
    write_spike_csv(dir / "discount_spike.csv", reports);
    const bool ok = spike_all_pass(reports);
    summary.check("discount_spike", ok,
                  std::to_string(reports.size()) + " spike reports");
  }

  summary.write(dir);
  return summary.all_pass ? 0 : 1;
}

// ---------------------------------------------------------------------------
// lq
// ---------------------------------------------------------------------------

int run_lq(const CommonOpts& common, const tic::LqParams& params,
           long long ode_steps) {
  const auto dir = common.dir();
  Summary summary;
  const auto sol = tic::solve_lq(params, ode_steps);

  {
    tic::CsvWriter csv((dir / "lq_solution.csv").string());
    csv.header({"t", "A", "C", "H", "u_hat_at_1"});
    const int rows = 50;
    for (int i = 0; i <= rows; ++i) {
      const double t = params.T * i / rows;
      csv.row({t, sol.A(t), sol.C(t), sol.H(t), sol.u_hat(t, 1.0)[0]});
    }
  }

  tic::CsvWriter certify((dir / "lq_certify.csv").string());
  certify.header(
      {"check", "estimate", "std_err", "reference", "sigmas", "pass"});

  {
    double dev = 0.0;
    for (int i = 0; i <= 20; ++i) {
      dev = std::max(dev, std::abs(sol.B(params.T * i / 20) -
                                   0.5 * params.gamma));
    }
    const bool ok = dev == 0.0;
    certify.row({std::string("B_constant"), dev, 0.0, 0.0, 0.0,
                 std::string(ok ? "1" : "0")});
    summary.check("lq_B_constant", ok, "max |B - gamma/2| = " + fmt(dev));
  }
  {
    double dev = 0.0;
    for (int i = 0; i <= 20; ++i) {
      const double t = params.T * i / 20;
      dev = std::max({dev, std::abs(sol.D(t)), std::abs(sol.F(t))});
    }
    const bool ok = dev <= 1e-10;
    certify.row({std::string("D_F_zero"), dev, 0.0, 1e-10, 0.0,
                 std::string(ok ? "1" : "0")});
    summary.check("lq_D_F_zero", ok, "max |D|,|F| = " + fmt(dev));
  }
  {
    const double u_T = sol.u_hat(params.T, 1.0)[0];
    const bool ok = std::abs(u_T) <= 1e-10;
    certify.row({std::string("u_hat_terminal"), u_T, 0.0, 0.0, 0.0,
                 std::string(ok ? "1" : "0")});
    summary.check("lq_terminal_control", ok, "u_hat(T,1) = " + fmt(u_T));
  }
  {
    const auto rows = tic::lq_value_check(
        params, sol, {{0.0, 1.0}, {0.5 * params.T, 0.5}}, common.sim());
    bool ok = true;
    for (const auto& row : rows) {
      certify.row({std::string("mc_value_t") + fmt(row.t), row.mc_mean,
                   row.mc_std_err, row.model_value, row.sigmas,
                   std::string(row.sigmas <= 3.0 ? "1" : "0")});
      ok = ok && row.sigmas <= 3.0;
      if (row.flag) {
        summary.check("lq_sign_flag", false,
                      "MC disagrees beyond 5 sigma at t=" + fmt(row.t) +
                          " (H-equation sign suspect)");
      }
    }
    summary.check("lq_value_mc", ok, std::to_string(rows.size()) + " points");
  }
  {
    const auto model = tic::lq_model(params);
    const auto spec = tic::lq_reward_spec(params.gamma);
    std::vector<tic::FeedbackLaw> perturbations = {
        tic::scalar_law([&](double t, double x) {
          return sol.u_hat(t, x)[0] + 0.5;
        }),
        tic::constant_law(0.0),
        tic::scalar_law([&](double t, double x) {
          return sol.u_hat(t, x)[0] - 0.5;
        })};
    const auto reports = tic::check_equilibrium(
        model, sol.u_hat, perturbations, spec, {{0.0, 1.0}},
        {0.1 * params.T, 0.05 * params.T, 0.025 * params.T}, common.sim(),
        3.0);
    write_spike_csv(dir / "lq_spike.csv", reports);
    summary.check("lq_spike", spike_all_pass(reports),
                  std::to_string(reports.size()) + " spike reports");
  }

  summary.write(dir);
  return summary.all_pass ? 0 : 1;
}

// ---------------------------------------------------------------------------
// cir
// ---------------------------------------------------------------------------

int run_cir(const CommonOpts& common, double alpha, double sigma,
            const std::string& utility, double gamma,
            const std::string& family, double delta, double k, double m,
            double beta_weight, double horizon, int checkpoints) {
  const auto dir = common.dir();
  Summary summary;
  tic::CirParams params;
  params.alpha = alpha;
  params.sigma = sigma;
  params.beta_fn = make_family(family, delta, k, m, beta_weight);
  params.gamma = gamma;
  params.utility =
      utility == "log" ? tic::CirUtility::Log : tic::CirUtility::Power;

  tic::CsvWriter solution((dir / "cir_solution.csv").string());
  tic::CsvWriter certify((dir / "cir_certify.csv").string());
  certify.header({"t", "mean_money", "se_money", "sigmas_money", "mean_tech",
                  "se_tech", "sigmas_tech"});

  const auto config = common.sim();
  if (params.utility == tic::CirUtility::Log) {
    const auto sol = tic::solve_cir_log(params);
    solution.header({"family", "r", "phi", "a0", "c_rate", "sdf_exponent"});
    solution.row({params.beta_fn.family, sol.r, sol.phi_kernel, sol.a0,
                  1.0 / sol.a0, -1.0 / sol.a0});
    const double tol =
        5e-3 * 200.0 / static_cast<double>(config.n_steps);
    const auto report =
        tic::certify_sdf(params, sol, config, horizon, checkpoints,
                         std::max(tol, 5e-4));
    for (const auto& row : report.rows) {
      certify.row({row.t, row.mean_money, row.se_money, row.sigmas_money,
                   row.mean_tech, row.se_tech, row.sigmas_tech});
    }
    summary.check("cir_rate", sol.r == alpha - sigma * sigma,
                  "r = " + fmt(sol.r));
    summary.check("cir_kernel", sol.phi_kernel == -sigma,
                  "phi = " + fmt(sol.phi_kernel));
    summary.check("cir_consumption_gain", report.gain_ok,
                  "max deviation " + fmt(report.max_gain_deviation) +
                      " tol " + fmt(report.gain_tolerance));
    summary.check("cir_tech_pathwise", report.tech_pathwise_ok,
                  "max deviation " + fmt(report.max_tech_deviation));
    summary.check("cir_money_mean", report.money_ok, "checkpoint means");
  } else {
    const auto sol = tic::solve_cir_power(params);
    solution.header(
        {"family", "r", "phi", "a0", "c_rate", "sdf_exponent"});
    solution.row({params.beta_fn.family, sol.r, sol.phi_kernel, sol.a0,
                  sol.D, sol.sdf_exponent});
    const auto report =
        tic::certify_sdf(params, sol, config, horizon, checkpoints);
    for (const auto& row : report.rows) {
      certify.row({row.t, row.mean_money, row.se_money, row.sigmas_money,
                   row.mean_tech, row.se_tech, row.sigmas_tech});
    }
    summary.check("cir_rate",
                  sol.r == alpha - sigma * sigma * (1.0 - gamma),
                  "r = " + fmt(sol.r));
    summary.check("cir_kernel", sol.phi_kernel == -sigma * (1.0 - gamma),
                  "phi = " + fmt(sol.phi_kernel));
    summary.check("cir_money_mean", report.money_ok, "checkpoint means");
    summary.check("cir_tech_mean", report.tech_ok, "checkpoint means");
  }

  summary.write(dir);
  return summary.all_pass ? 0 : 1;
}

// ---------------------------------------------------------------------------
// grid
// ---------------------------------------------------------------------------

struct GridCliOpts {
  std::string example = "mv";
  double x_lo = 0.2, x_hi = 5.0;
  long long nx = 201, nt = 0, nu = 101, ny = 0;
  double u_lo = 0.0, u_hi = 2.0;
};

tic::ExtendedProblem make_example(const std::string& name,
                                  const tic::MvParams& mv,
                                  const tic::LqParams& lq,
                                  const GridCliOpts& opts) {
  if (name == "mv") return tic::mv_extended_problem(mv, opts.u_lo, opts.u_hi);
  if (name == "mv-wealth") {
    return tic::mv_wealth_extended_problem(mv, opts.u_lo, opts.u_hi);
  }
  if (name == "lq") return tic::lq_extended_problem(lq, opts.u_lo, opts.u_hi);
  throw CLI::ValidationError("example", "unknown example " + name);
}

int run_grid(const CommonOpts& common, const GridCliOpts& opts,
             const tic::MvParams& mv, const tic::LqParams& lq) {
  const auto dir = common.dir();
  Summary summary;
  const auto problem = make_example(opts.example, mv, lq, opts);
  tic::GridSpec grid{opts.x_lo, opts.x_hi, opts.nx, opts.nt, opts.nu,
                     opts.ny};
  const auto sol = tic::solve_extended(problem, grid);

  const bool is_mv = opts.example == "mv";
  std::unique_ptr<tic::MvSolution> closed;
  if (is_mv) closed = std::make_unique<tic::MvSolution>(tic::solve_mv(mv));

  {
    tic::CsvWriter csv((dir / "grid_solution.csv").string());
    if (is_mv) {
      csv.header({"t", "x", "V", "u_hat", "g", "V_closed", "u_closed"});
    } else {
      csv.header({"t", "x", "V", "u_hat", "g"});
    }
    const Index nt = sol.times.size();
    const Index stride_t = std::max<Index>(1, (nt - 1) / 10);
    for (Index it = 0; it < nt; it += stride_t) {
      for (Index ix = 0; ix < sol.xs.size(); ++ix) {
        const double t = sol.times[it], x = sol.xs[ix];
        if (is_mv) {
          csv.row({t, x, sol.V(it, ix), sol.u_hat(it, ix), sol.g(it, ix),
                   closed->V(t, x), closed->u_hat(t, x)[0]});
        } else {
          csv.row({t, x, sol.V(it, ix), sol.u_hat(it, ix), sol.g(it, ix)});
        }
      }
    }
  }
  {
    std::ofstream diag(dir / "grid_diagnostics.txt", std::ios::binary);
    diag << "dt " << fmt(sol.diagnostics.dt) << "\n"
         << "dx " << fmt(sol.diagnostics.dx) << "\n"
         << "cfl_margin " << fmt(sol.diagnostics.cfl_margin) << "\n"
         << "boundary_influence_nodes "
         << sol.diagnostics.boundary_influence_nodes << "\n";
  }

  if (is_mv) {
    const double v_ref = closed->V(0.0, 1.0);
    const double v_grid = sol.value(0.0, 1.0);
    const bool v_ok = std::abs(v_grid - v_ref) <= 0.01 * std::abs(v_ref);
    summary.check("grid_value", v_ok, "V(0,1)=" + fmt(v_grid) + " vs " +
                                          fmt(v_ref));
    const double u_ref = closed->u_hat(0.0, 1.0)[0];
    const double du = sol.us[1] - sol.us[0];
    const double tol = std::max(0.02 * std::abs(u_ref), du);
    double worst = 0.0;
    const Index lo_i = sol.xs.size() / 4, hi_i = sol.xs.size() -
                                                 sol.xs.size() / 4;
    for (Index i = lo_i; i < hi_i; ++i) {
      worst = std::max(worst, std::abs(sol.u_hat(0, i) - u_ref));
    }
    const bool u_ok = worst <= tol;
    summary.check("grid_control", u_ok,
                  "max |u - " + fmt(u_ref) + "| = " + fmt(worst) +
                      " tol " + fmt(tol));
  } else {
    summary.check("grid_solved", true,
                  "V(0, mid) = " +
                      fmt(sol.value(0.0, 0.5 * (opts.x_lo + opts.x_hi))));
  }

  summary.write(dir);
  return summary.all_pass ? 0 : 1;
}

// ---------------------------------------------------------------------------
// spike
// ---------------------------------------------------------------------------

int run_spike(const CommonOpts& common, const std::string& example,
              const tic::MvParams& mv, const tic::LqParams& lq,
              std::vector<double> point_t, std::vector<double> point_x,
              std::vector<double> hs) {
  const auto dir = common.dir();
  Summary summary;
  if (point_t.size() != point_x.size() || point_t.empty()) {
    throw CLI::ValidationError("point", "need matching --point-t/--point-x");
  }
  std::vector<std::pair<double, double>> points;
  for (std::size_t i = 0; i < point_t.size(); ++i) {
    points.emplace_back(point_t[i], point_x[i]);
  }

  tic::ControlModel model;
  tic::RewardSpec spec;
  tic::FeedbackLaw candidate;
  std::vector<tic::FeedbackLaw> perturbations;
  if (example == "mv") {
    const auto sol = tic::solve_mv(mv);
    model = tic::mv_wealth_model(mv);
    spec = tic::mv_reward_spec(mv.gamma);
    candidate = sol.u_hat;
    perturbations = {
        tic::scalar_law([sol](double t, double x) {
          return sol.u_hat(t, x)[0] + 1.0;
        }),
        tic::scalar_law([sol](double t, double x) {
          return sol.u_hat(t, x)[0] - 1.0;
        }),
        tic::scalar_law(
            [sol](double t, double x) { return 2.0 * sol.u_hat(t, x)[0]; })};
  } else if (example == "lq") {
    const auto sol = tic::solve_lq(lq);
    model = tic::lq_model(lq);
    spec = tic::lq_reward_spec(lq.gamma);
    candidate = sol.u_hat;
    perturbations = {tic::scalar_law([sol](double t, double x) {
                       return sol.u_hat(t, x)[0] + 0.5;
                     }),
                     tic::constant_law(0.0)};
  } else {
    throw CLI::ValidationError("example", "unknown example " + example);
  }

  const auto reports = tic::check_equilibrium(
      model, candidate, perturbations, spec, points, hs, common.sim(), 3.0);
  write_spike_csv(dir / "spike_report.csv", reports);
  summary.check("spike", spike_all_pass(reports),
                std::to_string(reports.size()) + " spike reports");
  summary.write(dir);
  return summary.all_pass ? 0 : 1;
}

// ---------------------------------------------------------------------------
// equivalent
// ---------------------------------------------------------------------------

int run_equivalent(const CommonOpts& common, const GridCliOpts& opts,
                   const tic::MvParams& mv) {
  const auto dir = common.dir();
  Summary summary;
  const auto problem = tic::mv_extended_problem(mv, opts.u_lo, opts.u_hi);
  tic::GridSpec grid{opts.x_lo, opts.x_hi, opts.nx, opts.nt, opts.nu,
                     opts.ny};
  const auto sol = tic::solve_extended(problem, grid);
  const auto eq = tic::build_equivalent_standard(problem, sol, grid);

  const auto kernel = tic::equivalent_standard_objective(mv);
  {
    tic::CsvWriter csv((dir / "equivalent_kernel.csv").string());
    csv.header({"t", "x", "u", "K_grid", "K_closed"});
    const Index lo_i = sol.xs.size() / 4, hi_i = sol.xs.size() -
                                                 sol.xs.size() / 4;
    for (std::size_t s = 0; s < eq.k_levels.size(); ++s) {
      const Index level = eq.k_levels[s];
      const double t = sol.times[level];
      for (Index i = lo_i; i < hi_i; i += 20) {
        for (Index j = 0; j < sol.us.size(); j += 25) {
          csv.row({t, sol.xs[i], sol.us[j], eq.K[s](i, j),
                   kernel(t, sol.us[j])});
        }
      }
    }
  }
  {
    tic::CsvWriter csv((dir / "equivalent_value.csv").string());
    csv.header({"t", "x", "V", "dp_V"});
    const Index stride_t = std::max<Index>(1, (sol.times.size() - 1) / 10);
    for (Index it = 0; it < sol.times.size(); it += stride_t) {
      for (Index ix = 0; ix < sol.xs.size(); ix += 10) {
        csv.row({sol.times[it], sol.xs[ix], sol.V(it, ix), eq.dp_V(it, ix)});
      }
    }
  }

  summary.check("equivalent_dp_value", eq.max_interior_rel_dev <= 0.01,
                "max interior deviation " + fmt(eq.max_interior_rel_dev));

  double worst = 0.0;
  const Index lo_i = sol.xs.size() / 4, hi_i = sol.xs.size() -
                                               sol.xs.size() / 4;
  for (std::size_t s = 0; s < eq.k_levels.size(); ++s) {
    const Index level = eq.k_levels[s];
    if (sol.times[level] > 0.9 * mv.T) continue;  // K scale vanishes with u
    for (Index i = lo_i; i < hi_i; i += 10) {
      for (Index j = 0; j < sol.us.size(); ++j) {
        const double u = sol.us[j];
        if (u < 0.45) continue;  // compare where the kernel is away from zero
        const double ref = kernel(sol.times[level], u);
        worst = std::max(worst, std::abs(eq.K[s](i, j) - ref) /
                                    std::abs(ref));
      }
    }
  }
  summary.check("equivalent_kernel", worst <= 0.05,
                "max relative kernel deviation " + fmt(worst));

  summary.write(dir);
  return summary.all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"time-inconsistent stochastic control solver"};
  app.require_subcommand(1);

  tic::MvParams mv;
  tic::LqParams lq;
  long long ode_steps = 2000;
  long long lq_steps = 4000;

  // mv
  CommonOpts mv_common;
  auto* mv_cmd = app.add_subcommand("mv", "mean-variance closed form");
  mv_common.attach(mv_cmd);
  mv_cmd->add_option("--alpha", mv.alpha, "risky drift");
  mv_cmd->add_option("--r", mv.r, "short rate");
  mv_cmd->add_option("--sigma", mv.sigma, "volatility");
  mv_cmd->add_option("--gamma", mv.gamma, "risk aversion");
  mv_cmd->add_option("--T", mv.T, "horizon");

  // mv-wealth
  CommonOpts mvw_common;
  auto* mvw_cmd =
      app.add_subcommand("mv-wealth", "wealth-dependent risk aversion");
  mvw_common.attach(mvw_cmd);
  mvw_cmd->add_option("--alpha", mv.alpha, "risky drift");
  mvw_cmd->add_option("--r", mv.r, "short rate");
  mvw_cmd->add_option("--sigma", mv.sigma, "volatility");
  mvw_cmd->add_option("--gamma", mv.gamma, "risk aversion at x = 1");
  mvw_cmd->add_option("--T", mv.T, "horizon");
  mvw_cmd->add_option("--ode-steps", ode_steps, "coefficient ODE steps");

  // discount
  CommonOpts disc_common;
  double d_alpha = 0.08, d_r = 0.03, d_sigma = 0.2, d_T = 1.0;
  std::string family = "exponential";
  double delta = 1.0, hyp_k = 1.0, hyp_m = 2.0, beta_weight = 0.7;
  auto* disc_cmd =
      app.add_subcommand("discount", "log utility, general discounting");
  disc_common.attach(disc_cmd);
  disc_cmd->add_option("--alpha", d_alpha, "risky drift");
  disc_cmd->add_option("--r", d_r, "short rate");
  disc_cmd->add_option("--sigma", d_sigma, "volatility");
  disc_cmd->add_option("--T", d_T, "horizon");
  disc_cmd->add_option("--family", family,
                       "exponential|hyperbolic|hyperbolic-power|quasi-"
                       "hyperbolic");
  disc_cmd->add_option("--delta", delta, "exponential rate");
  disc_cmd->add_option("--k", hyp_k, "hyperbolic scale");
  disc_cmd->add_option("--m", hyp_m, "hyperbolic-power exponent");
  disc_cmd->add_option("--beta-weight", beta_weight,
                       "quasi-hyperbolic slow-phase weight");
  disc_cmd->add_option("--ode-steps", ode_steps, "d-ODE steps");

  // lq
  CommonOpts lq_common;
  auto* lq_cmd = app.add_subcommand("lq", "time-inconsistent regulator");
  lq_common.attach(lq_cmd);
  lq_cmd->add_option("--a", lq.a, "state feedback rate");
  lq_cmd->add_option("--b", lq.b, "control gain");
  lq_cmd->add_option("--sigma", lq.sigma, "noise amplitude");
  lq_cmd->add_option("--gamma", lq.gamma, "terminal weight");
  lq_cmd->add_option("--T", lq.T, "horizon");
  lq_cmd->add_option("--ode-steps", lq_steps, "coefficient ODE steps");

  // cir
  CommonOpts cir_common;
  double c_alpha = 0.08, c_sigma = 0.2, c_gamma = 0.5, c_horizon = 1.0;
  std::string utility = "log";
  std::string c_family = "exponential";
  double c_delta = 0.1, c_k = 1.0, c_m = 2.0, c_beta_weight = 0.7;
  int checkpoints = 5;
  auto* cir_cmd = app.add_subcommand("cir", "production-economy equilibrium");
  cir_common.attach(cir_cmd);
  cir_cmd->add_option("--alpha", c_alpha, "technology drift");
  cir_cmd->add_option("--sigma", c_sigma, "technology volatility");
  cir_cmd->add_option("--utility", utility, "log|power");
  cir_cmd->add_option("--gamma", c_gamma, "power curvature (< 1)");
  cir_cmd->add_option("--family", c_family,
                      "exponential|hyperbolic-power|quasi-hyperbolic");
  cir_cmd->add_option("--delta", c_delta, "exponential rate");
  cir_cmd->add_option("--k", c_k, "hyperbolic scale");
  cir_cmd->add_option("--m", c_m, "hyperbolic-power exponent");
  cir_cmd->add_option("--beta-weight", c_beta_weight,
                      "quasi-hyperbolic slow-phase weight");
  cir_cmd->add_option("--horizon", c_horizon, "simulation horizon");
  cir_cmd->add_option("--checkpoints", checkpoints, "martingale checkpoints");

  // grid
  CommonOpts grid_common;
  GridCliOpts grid_opts;
  tic::MvParams grid_mv;
  tic::LqParams grid_lq;
  auto* grid_cmd = app.add_subcommand("grid", "finite-difference solver");
  grid_common.attach(grid_cmd);
  grid_cmd->add_option("--example", grid_opts.example, "mv|mv-wealth|lq");
  grid_cmd->add_option("--x-lo", grid_opts.x_lo, "state lower bound");
  grid_cmd->add_option("--x-hi", grid_opts.x_hi, "state upper bound");
  grid_cmd->add_option("--nx", grid_opts.nx, "state nodes");
  grid_cmd->add_option("--nt", grid_opts.nt, "time nodes (0 = auto)");
  grid_cmd->add_option("--nu", grid_opts.nu, "control nodes");
  grid_cmd->add_option("--ny", grid_opts.ny, "anchor nodes (0 = nx)");
  grid_cmd->add_option("--u-lo", grid_opts.u_lo, "control lower bound");
  grid_cmd->add_option("--u-hi", grid_opts.u_hi, "control upper bound");
  grid_cmd->add_option("--alpha", grid_mv.alpha, "risky drift");
  grid_cmd->add_option("--r", grid_mv.r, "short rate");
  grid_cmd->add_option("--sigma", grid_mv.sigma, "volatility");
  grid_cmd->add_option("--gamma", grid_mv.gamma, "risk aversion");
  grid_cmd->add_option("--T", grid_mv.T, "horizon");

  // spike
  CommonOpts spike_common;
  std::string spike_example = "mv";
  std::vector<double> point_t = {0.0};
  std::vector<double> point_x = {1.0};
  std::vector<double> spike_h = {0.2, 0.1, 0.05, 0.025};
  tic::MvParams spike_mv;
  tic::LqParams spike_lq;
  auto* spike_cmd = app.add_subcommand("spike", "equilibrium spike test");
  spike_common.attach(spike_cmd);
  spike_cmd->add_option("--example", spike_example, "mv|lq");
  spike_cmd->add_option("--point-t", point_t, "evaluation times");
  spike_cmd->add_option("--point-x", point_x, "evaluation states");
  spike_cmd->add_option("--h", spike_h, "window lengths (decreasing)");

  // equivalent
  CommonOpts eq_common;
  GridCliOpts eq_opts;
  tic::MvParams eq_mv;
  auto* eq_cmd =
      app.add_subcommand("equivalent", "equivalent standard problem");
  eq_common.attach(eq_cmd);
  eq_cmd->add_option("--x-lo", eq_opts.x_lo, "state lower bound");
  eq_cmd->add_option("--x-hi", eq_opts.x_hi, "state upper bound");
  eq_cmd->add_option("--nx", eq_opts.nx, "state nodes");
  eq_cmd->add_option("--nt", eq_opts.nt, "time nodes (0 = auto)");
  eq_cmd->add_option("--nu", eq_opts.nu, "control nodes");
  eq_cmd->add_option("--u-lo", eq_opts.u_lo, "control lower bound");
  eq_cmd->add_option("--u-hi", eq_opts.u_hi, "control upper bound");
  eq_cmd->add_option("--alpha", eq_mv.alpha, "risky drift");
  eq_cmd->add_option("--r", eq_mv.r, "short rate");
  eq_cmd->add_option("--sigma", eq_mv.sigma, "volatility");
  eq_cmd->add_option("--gamma", eq_mv.gamma, "risk aversion");
  eq_cmd->add_option("--T", eq_mv.T, "horizon");

  try {
    app.parse(argc, argv);
    for (auto* cmd :
         {mv_cmd, mvw_cmd, disc_cmd, lq_cmd, cir_cmd, grid_cmd, spike_cmd,
          eq_cmd}) {
      if (cmd->parsed()) {
        const auto* opt = cmd->get_option_no_throw("--config");
        if (opt && opt->count() > 0) {
          apply_config(cmd, opt->results().front());
        }
      }
    }

    if (mv_cmd->parsed()) return run_mv(mv_common, mv);
    if (mvw_cmd->parsed()) return run_mv_wealth(mvw_common, mv, ode_steps);
    if (disc_cmd->parsed()) {
      return run_discount(disc_common, d_alpha, d_r, d_sigma, d_T, family,
                          delta, hyp_k, hyp_m, beta_weight, ode_steps);
    }
    if (lq_cmd->parsed()) return run_lq(lq_common, lq, lq_steps);
    if (cir_cmd->parsed()) {
      return run_cir(cir_common, c_alpha, c_sigma, utility, c_gamma, c_family,
                     c_delta, c_k, c_m, c_beta_weight, c_horizon, checkpoints);
    }
    if (grid_cmd->parsed()) {
      return run_grid(grid_common, grid_opts, grid_mv, grid_lq);
    }
    if (spike_cmd->parsed()) {
      return run_spike(spike_common, spike_example, spike_mv, spike_lq,
                       point_t, point_x, spike_h);
    }
    if (eq_cmd->parsed()) return run_equivalent(eq_common, eq_opts, eq_mv);
    std::cerr << "error: no subcommand\n";
    return 2;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return 0;  // --help
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
