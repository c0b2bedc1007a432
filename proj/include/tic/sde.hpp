#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "tic/parallel.hpp"
#include "tic/rng.hpp"
#include "tic/types.hpp"

namespace tic {

/// A controlled scalar diffusion dX = mu(t,X,u) dt + sigma(t,X,u) dW on
/// [0, horizon], with the admissible control set truncated to the interval
/// [control_lo, control_hi] (componentwise).
struct ControlModel {
  std::function<double(double, double, const Control&)> drift;
  std::function<double(double, double, const Control&)> diffusion;
  Control control_lo;
  Control control_hi;
  double horizon = 0.0;

  /// Dynamics only make sense for X > 0 (log utility, gamma(x) = gamma/x).
  /// Paths crossing a small floor are frozen there and flagged.
  bool positive_state = false;

  Index control_dim() const { return control_lo.size(); }

  void validate() const {
    if (!drift || !diffusion) {
      throw std::invalid_argument("ControlModel: drift/diffusion not set");
    }
    if (control_lo.size() != control_hi.size() || control_lo.size() < 1 ||
        control_lo.size() > kMaxControls) {
      throw std::invalid_argument("ControlModel: bad control bounds");
    }
    for (Index c = 0; c < control_lo.size(); ++c) {
      if (!(control_lo[c] <= control_hi[c])) {
        throw std::invalid_argument("ControlModel: control_lo > control_hi");
      }
    }
    if (!(horizon > 0.0)) {
      throw std::invalid_argument("ControlModel: horizon must be positive");
    }
  }

  Control clamp(Control u) const {
    for (Index c = 0; c < u.size(); ++c) {
      u[c] = std::min(std::max(u[c], control_lo[c]), control_hi[c]);
    }
    return u;
  }
};

/// Deterministic feedback map (t, x) -> u.
struct FeedbackLaw {
  std::function<Control(double, double)> u;
  Control operator()(double t, double x) const { return u(t, x); }
  explicit operator bool() const { return static_cast<bool>(u); }
};

inline FeedbackLaw scalar_law(std::function<double(double, double)> f) {
  return {[f = std::move(f)](double t, double x) { return control1(f(t, x)); }};
}

inline FeedbackLaw constant_law(double value) {
  return scalar_law([value](double, double) { return value; });
}

/// Joins two scalar laws into a two-component law (e.g. investment and
/// consumption).
inline FeedbackLaw joint_law(const FeedbackLaw& first,
                             const FeedbackLaw& second) {
  return {[first, second](double t, double x) {
    return control2(first(t, x)[0], second(t, x)[0]);
  }};
}

struct SimConfig {
  Index n_paths = 10000;
  Index n_steps = 100;
  std::uint64_t seed = 42;
  bool antithetic = false;

  void validate() const {
    if (n_paths < 1) throw std::invalid_argument("SimConfig: n_paths < 1");
    if (n_steps < 1) throw std::invalid_argument("SimConfig: n_steps < 1");
  }
};

/// Euler-Maruyama realization of the controlled SDE for a batch of paths.
struct PathBatch {
  VecX times;                     // n_steps + 1 stamps, uniform on [t0, T]
  PathMat states;                 // n_paths x (n_steps + 1)
  std::vector<PathMat> controls;  // one matrix per control component
  std::vector<std::uint8_t> absorbed;
  double absorbed_fraction = 0.0;
};

/// Read-only view of one simulated path handed to streaming consumers.
struct PathView {
  Index path = 0;
  const VecX* times = nullptr;
  std::span<const double> states;  // n_steps + 1 values
  std::array<std::span<const double>, kMaxControls> controls;
  Index control_dim = 0;
  std::span<const double> gauss;  // the n_steps normal draws actually applied
  bool absorbed = false;
};

namespace detail {

struct EulerScratch {
  std::vector<double> states;
  std::array<std::vector<double>, kMaxControls> controls;
  std::vector<double> gauss;
};

/// Simulates one path into scratch buffers. Draw k of path i depends only on
/// (seed, stream index, k); the stream index is the path index, or the pair
/// index when antithetic pairing is on (odd paths negate the pair's draws).
inline bool euler_path(const ControlModel& model, const FeedbackLaw& law,
                       double t0, double x0, const SimConfig& config,
                       Index path, EulerScratch& scratch) {
  const Index n = config.n_steps;
  const double dt = (model.horizon - t0) / static_cast<double>(n);
  const double sqrt_dt = std::sqrt(dt);
  const Index dim = model.control_dim();

  const std::uint64_t stream =
      config.antithetic ? static_cast<std::uint64_t>(path >> 1)
                        : static_cast<std::uint64_t>(path);
  const double sign = (config.antithetic && (path & 1)) ? -1.0 : 1.0;
  NormalStream draws(config.seed, stream);

  const double floor = model.positive_state ? 1e-6 * std::abs(x0) : 0.0;
  if (model.positive_state && !(x0 > floor)) {
    throw std::invalid_argument(
        "simulate_paths: initial state not positive for a positive-state "
        "model");
  }

  double x = x0;
  bool absorbed = false;
  scratch.states[0] = x;
  for (Index k = 0; k < n; ++k) {
    const double t = t0 + dt * static_cast<double>(k);
    const Control u = model.clamp(law(t, x));
    for (Index c = 0; c < dim; ++c) scratch.controls[c][k] = u[c];
    const double z = sign * draws.next();
    scratch.gauss[k] = z;
    if (!absorbed) {
      x += model.drift(t, x, u) * dt + model.diffusion(t, x, u) * sqrt_dt * z;
      if (!std::isfinite(x)) {
        throw std::runtime_error("simulate_paths: non-finite state at path " +
                                 std::to_string(path) + " step " +
                                 std::to_string(k + 1));
      }
      if (model.positive_state && x <= floor) {
        x = floor;
        absorbed = true;
      }
    }
    scratch.states[k + 1] = x;
  }
  const Control u_final = model.clamp(law(model.horizon, x));
  for (Index c = 0; c < dim; ++c) scratch.controls[c][n] = u_final[c];
  return absorbed;
}

}  // namespace detail

/// Streams simulated paths through `sink` without materializing the batch.
/// The sink may run concurrently across paths and must therefore write only
/// to slots owned by the given path index.
template <class Sink>
void for_each_path(const ControlModel& model, const FeedbackLaw& law,
                   double t0, double x0, const SimConfig& config, Sink&& sink) {
  model.validate();
  config.validate();
  if (!law) throw std::invalid_argument("for_each_path: empty feedback law");
  if (!(t0 < model.horizon)) {
    throw std::invalid_argument("for_each_path: t0 >= horizon");
  }

  const Index n = config.n_steps;
  const Index dim = model.control_dim();
  VecX times = VecX::LinSpaced(n + 1, t0, model.horizon);

  parallel_chunks(config.n_paths, [&](Index lo, Index hi) {
    detail::EulerScratch scratch;
    scratch.states.resize(static_cast<std::size_t>(n + 1));
    scratch.gauss.resize(static_cast<std::size_t>(n));
    for (Index c = 0; c < dim; ++c) {
      scratch.controls[static_cast<std::size_t>(c)].resize(
          static_cast<std::size_t>(n + 1));
    }
    for (Index path = lo; path < hi; ++path) {
      const bool absorbed =
          detail::euler_path(model, law, t0, x0, config, path, scratch);
      PathView view;
      view.path = path;
      view.times = &times;
      view.states = scratch.states;
      view.control_dim = dim;
      for (Index c = 0; c < dim; ++c) {
        view.controls[static_cast<std::size_t>(c)] =
            scratch.controls[static_cast<std::size_t>(c)];
      }
      view.gauss = scratch.gauss;
      view.absorbed = absorbed;
      sink(view);
    }
  });
}

/// Simulates the controlled SDE with the Euler-Maruyama scheme on a uniform
/// grid. Deterministic given (model, law, t0, x0, config); path i is
/// invariant under changes of n_paths.
inline PathBatch simulate_paths(const ControlModel& model,
                                const FeedbackLaw& law, double t0, double x0,
                                const SimConfig& config) {
  PathBatch batch;
  batch.times = VecX::LinSpaced(config.n_steps + 1, t0, model.horizon);
  batch.states.resize(config.n_paths, config.n_steps + 1);
  const Index dim = model.control_dim();
  batch.controls.assign(static_cast<std::size_t>(dim),
                        PathMat(config.n_paths, config.n_steps + 1));
  batch.absorbed.assign(static_cast<std::size_t>(config.n_paths), 0);

  for_each_path(model, law, t0, x0, config, [&](const PathView& view) {
    for (Index k = 0; k <= config.n_steps; ++k) {
      batch.states(view.path, k) = view.states[static_cast<std::size_t>(k)];
    }
    for (Index c = 0; c < dim; ++c) {
      auto& dst = batch.controls[static_cast<std::size_t>(c)];
      const auto src = view.controls[static_cast<std::size_t>(c)];
      for (Index k = 0; k <= config.n_steps; ++k) {
        dst(view.path, k) = src[static_cast<std::size_t>(k)];
      }
    }
    batch.absorbed[static_cast<std::size_t>(view.path)] =
        view.absorbed ? 1 : 0;
  });

  batch.absorbed_fraction =
      std::accumulate(batch.absorbed.begin(), batch.absorbed.end(), 0.0) /
      static_cast<double>(config.n_paths);
  return batch;
}

/// Spike perturbation of a candidate law: the returned law follows `perturb`
/// on the window [t, t+h) and `base` everywhere else.
inline FeedbackLaw spike_law(const FeedbackLaw& base,
                             const FeedbackLaw& perturb, double t, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("spike_law: h must be positive");
  return {[base, perturb, t, h](double s, double y) {
    return (s >= t && s < t + h) ? perturb(s, y) : base(s, y);
  }};
}

}  // namespace tic
