#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "tic/parallel.hpp"
#include "tic/sde.hpp"
#include "tic/types.hpp"

namespace tic {

/// Reward functional
///   J(t,x,u) = E[ int_t^T H(t,x,s,X_s,u_s) ds + F(t,x,X_T) ]
///              + G(t,x, E[k(X_T)]),
/// with the first pair of arguments of H, F, G frozen at the evaluation
/// point (the anchor). Any of H, F, G may be absent; k defaults to the
/// identity.
struct RewardSpec {
  std::function<double(double, double, double, double, const Control&)>
      running;                                      // H(ta, xa, s, y, u)
  std::function<double(double, double, double)> terminal;  // F(ta, xa, yT)
  std::function<double(double, double, double)> wrapper;   // G(ta, xa, m)
  std::function<double(double)> terminal_transform;        // k(yT)
  Sense sense = Sense::Maximize;

  void validate() const {
    if (!running && !terminal && !wrapper) {
      throw std::invalid_argument("RewardSpec: all of H, F, G absent");
    }
  }

  double k(double y) const {
    return terminal_transform ? terminal_transform(y) : y;
  }
};

/// Monte Carlo estimate with a standard error.
struct JEstimate {
  double mean = 0.0;
  double std_err = 0.0;
  Index n_paths = 0;
};

namespace detail {

/// Per-path reward parts: fh[i] = trapezoid of H plus F for path i, both
/// anchored at (anchor_t, anchor_x); kval[i] = k(X_T) when requested.
struct PathRewardTable {
  std::vector<double> fh;
  std::vector<double> kval;
  double absorbed_fraction = 0.0;
};

inline PathRewardTable path_reward_table(
    const ControlModel& model, const FeedbackLaw& law, const RewardSpec& spec,
    double anchor_t, double anchor_x, double t, double x,
    const SimConfig& config, bool need_k) {
  PathRewardTable table;
  table.fh.assign(static_cast<std::size_t>(config.n_paths), 0.0);
  if (need_k) table.kval.assign(static_cast<std::size_t>(config.n_paths), 0.0);
  std::vector<std::uint8_t> absorbed(
      static_cast<std::size_t>(config.n_paths), 0);

  const Index n = config.n_steps;
  for_each_path(model, law, t, x, config, [&](const PathView& view) {
    double total = 0.0;
    if (spec.running) {
      const double dt = ((*view.times)[n] - (*view.times)[0]) /
                        static_cast<double>(n);
      Control u(view.control_dim);
      double integral = 0.0;
      for (Index k = 0; k <= n; ++k) {
        const auto ks = static_cast<std::size_t>(k);
        for (Index c = 0; c < view.control_dim; ++c) {
          u[c] = view.controls[static_cast<std::size_t>(c)][ks];
        }
        const double h =
            spec.running(anchor_t, anchor_x, (*view.times)[k],
                         view.states[ks], u);
        integral += (k == 0 || k == n) ? 0.5 * h : h;
      }
      total += integral * dt;
    }
    const double x_T = view.states[static_cast<std::size_t>(n)];
    if (spec.terminal) total += spec.terminal(anchor_t, anchor_x, x_T);
    table.fh[static_cast<std::size_t>(view.path)] = total;
    if (need_k) table.kval[static_cast<std::size_t>(view.path)] = spec.k(x_T);
    absorbed[static_cast<std::size_t>(view.path)] = view.absorbed ? 1 : 0;
  });

  double flagged = 0.0;
  for (auto a : absorbed) flagged += a;
  table.absorbed_fraction = flagged / static_cast<double>(config.n_paths);
  return table;
}

/// Central-difference derivative of G in its mean argument.
inline double wrapper_slope(
    const std::function<double(double, double, double)>& wrapper,
    double anchor_t, double anchor_x, double m) {
  const double step = std::max(1e-6, 1e-6 * std::abs(m));
  return (wrapper(anchor_t, anchor_x, m + step) -
          wrapper(anchor_t, anchor_x, m - step)) /
         (2.0 * step);
}

}  // namespace detail

/// Estimates J(t, x, law). The G term is the plug-in G(t, x, mean of
/// k(X_T)); its uncertainty enters the standard error through a delta-method
/// term |dG/dm| * SE(mean k) combined in quadrature with the sample error of
/// the H+F part.
inline JEstimate estimate_J(const ControlModel& model, const FeedbackLaw& law,
                            const RewardSpec& spec, double t, double x,
                            const SimConfig& config) {
  spec.validate();
  const auto table = detail::path_reward_table(model, law, spec, t, x, t, x,
                                               config, spec.wrapper != nullptr);
  const auto fh = mean_std_err(table.fh);
  JEstimate est{fh.mean, fh.std_err, config.n_paths};
  if (spec.wrapper) {
    const auto kv = mean_std_err(table.kval);
    if (!std::isfinite(kv.mean)) {
      throw std::runtime_error("estimate_J: non-finite mean of k(X_T)");
    }
    const double g = spec.wrapper(t, x, kv.mean);
    if (!std::isfinite(g)) {
      throw std::runtime_error("estimate_J: G evaluated to a non-finite value");
    }
    const double slope = detail::wrapper_slope(spec.wrapper, t, x, kv.mean);
    est.mean += g;
    est.std_err = std::hypot(fh.std_err, slope * kv.std_err);
  }
  return est;
}

/// Estimates the anchored expectation
///   f(t, x; s, y) = E_{t,x}[ int_t^T H(s,y,r,X_r,u_r) dr + F(s,y,X_T) ]
/// with the anchor pair (s, y) = (anchor_t, anchor_x) frozen.
inline JEstimate estimate_f(const ControlModel& model, const FeedbackLaw& law,
                            const RewardSpec& spec, double anchor_t,
                            double anchor_x, double t, double x,
                            const SimConfig& config) {
  if (!spec.running && !spec.terminal) {
    throw std::invalid_argument("estimate_f: needs H or F");
  }
  const auto table = detail::path_reward_table(
      model, law, spec, anchor_t, anchor_x, t, x, config, false);
  const auto fh = mean_std_err(table.fh);
  return {fh.mean, fh.std_err, config.n_paths};
}

/// Estimates g(t, x) = E_{t,x}[k(X_T)] under the given law.
inline JEstimate estimate_g(const ControlModel& model, const FeedbackLaw& law,
                            const std::function<double(double)>& k, double t,
                            double x, const SimConfig& config) {
  RewardSpec spec;
  spec.terminal = [&k](double, double, double y) { return k ? k(y) : y; };
  const auto table =
      detail::path_reward_table(model, law, spec, t, x, t, x, config, false);
  const auto kv = mean_std_err(table.fh);
  return {kv.mean, kv.std_err, config.n_paths};
}

}  // namespace tic
