#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "tic/reward.hpp"
#include "tic/sde.hpp"

namespace tic {

enum class Verdict { Pass, Fail, Inconclusive };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Pass: return "pass";
    case Verdict::Fail: return "fail";
    default: return "inconclusive";
  }
}

/// Result of the spike-perturbation test at one point for one perturbation:
/// per window length h, an estimate of (J(candidate) - J(spiked)) / h with
/// its standard error (sign flipped for minimization problems).
struct SpikeReport {
  double t = 0.0;
  double x = 0.0;
  Index perturbation = 0;
  std::vector<double> h_values;  // snapped to the simulation grid, decreasing
  std::vector<double> deltas;
  std::vector<double> std_errs;
  Verdict verdict = Verdict::Inconclusive;
};

/// Empirical test of the equilibrium property: for each point and each
/// perturbation law, the candidate is spiked on [t, t+h) and the difference
/// quotient of the two rewards is estimated with common random numbers and
/// per-path differencing. The candidate passes when no difference quotient
/// is significantly negative; it fails when the quotient is significantly
/// negative at the two smallest windows.
inline std::vector<SpikeReport> check_equilibrium(
    const ControlModel& model, const FeedbackLaw& candidate,
    const std::vector<FeedbackLaw>& perturbations, const RewardSpec& spec,
    const std::vector<std::pair<double, double>>& points,
    const std::vector<double>& h_values, const SimConfig& config,
    double tol_sigmas) {
  spec.validate();
  if (!(tol_sigmas > 0.0)) {
    throw std::invalid_argument("check_equilibrium: tol_sigmas must be > 0");
  }
  if (h_values.empty()) {
    throw std::invalid_argument("check_equilibrium: no h values");
  }
  for (std::size_t i = 1; i < h_values.size(); ++i) {
    if (!(h_values[i] < h_values[i - 1]) || !(h_values[i] > 0.0)) {
      throw std::invalid_argument(
          "check_equilibrium: h values must be positive and strictly "
          "decreasing");
    }
  }

  const double sign = (spec.sense == Sense::Maximize) ? 1.0 : -1.0;
  std::vector<SpikeReport> reports;
  reports.reserve(points.size() * perturbations.size());

  for (const auto& [t, x] : points) {
    const double span = model.horizon - t;
    const double dt = span / static_cast<double>(config.n_steps);
    std::vector<double> snapped;
    snapped.reserve(h_values.size());
    for (double h : h_values) {
      if (!(h < span)) {
        throw std::invalid_argument("check_equilibrium: h >= T - t");
      }
      const double hs =
          std::floor(h / dt + 1e-12) * dt;  // snap down onto the Euler grid
      if (!(hs > 0.0)) {
        throw std::invalid_argument(
            "check_equilibrium: h smaller than one simulation step");
      }
      if (!snapped.empty() && !(hs < snapped.back())) {
        throw std::invalid_argument(
            "check_equilibrium: h values collide after grid snapping");
      }
      snapped.push_back(hs);
    }

    const bool has_wrapper = spec.wrapper != nullptr;
    const auto base_table = detail::path_reward_table(
        model, candidate, spec, t, x, t, x, config, has_wrapper);

    for (std::size_t p = 0; p < perturbations.size(); ++p) {
      SpikeReport report;
      report.t = t;
      report.x = x;
      report.perturbation = static_cast<Index>(p);
      report.h_values = snapped;

      for (double hs : snapped) {
        const FeedbackLaw spiked =
            spike_law(candidate, perturbations[p], t, hs);
        const auto spike_table = detail::path_reward_table(
            model, spiked, spec, t, x, t, x, config, has_wrapper);

        std::vector<double> diff(base_table.fh.size());
        for (std::size_t i = 0; i < diff.size(); ++i) {
          diff[i] = base_table.fh[i] - spike_table.fh[i];
        }
        const auto d = mean_std_err(diff);
        double raw = d.mean;
        double se = d.std_err;
        if (has_wrapper) {
          std::vector<double> kdiff(base_table.kval.size());
          for (std::size_t i = 0; i < kdiff.size(); ++i) {
            kdiff[i] = base_table.kval[i] - spike_table.kval[i];
          }
          const auto kd = mean_std_err(kdiff);
          const auto kb = mean_std_err(base_table.kval);
          const auto ks = mean_std_err(spike_table.kval);
          raw += spec.wrapper(t, x, kb.mean) - spec.wrapper(t, x, ks.mean);
          const double slope = detail::wrapper_slope(
              spec.wrapper, t, x, 0.5 * (kb.mean + ks.mean));
          se = std::hypot(se, slope * kd.std_err);
        }
        report.deltas.push_back(sign * raw / hs);
        report.std_errs.push_back(se / hs);
      }

      bool all_ok = true;
      bool small_h_fail = false;
      const std::size_t m = report.deltas.size();
      for (std::size_t i = 0; i < m; ++i) {
        const bool violated =
            report.deltas[i] < -tol_sigmas * report.std_errs[i];
        if (violated) {
          all_ok = false;
          if (i + 2 >= m) small_h_fail = true;  // two smallest windows
        }
      }
      report.verdict = all_ok ? Verdict::Pass
                              : (small_h_fail ? Verdict::Fail
                                              : Verdict::Inconclusive);
      reports.push_back(std::move(report));
    }
  }
  return reports;
}

}  // namespace tic
