#pragma once

#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "tic/types.hpp"

namespace tic {

/// Worker count honoring the TIC_SOLVE_THREADS environment variable
/// (unset or 0 means one worker per hardware thread).
inline int worker_count() {
  long requested = 0;
  if (const char* env = std::getenv("TIC_SOLVE_THREADS")) {
    requested = std::strtol(env, nullptr, 10);
  }
  if (requested > 0) return static_cast<int>(requested);
  unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

/// Runs body(lo, hi) over a partition of [0, n) with one contiguous range
/// per worker thread. The body must only write to per-index slots.
/// Exceptions are captured and the first one is rethrown on the caller.
template <class RangeBody>
void parallel_chunks(Index n, RangeBody&& body) {
  const int workers = worker_count();
  if (n <= 0) return;
  if (workers <= 1 || n == 1) {
    body(Index{0}, n);
    return;
  }
  const Index chunks = std::min<Index>(workers, n);
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(chunks));
  std::exception_ptr error;
  std::mutex error_mutex;
  const Index per = (n + chunks - 1) / chunks;
  for (Index c = 0; c < chunks; ++c) {
    const Index lo = c * per;
    const Index hi = std::min(n, lo + per);
    if (lo >= hi) break;
    pool.emplace_back([&, lo, hi] {
      try {
        body(lo, hi);
      } catch (...) {
        std::scoped_lock lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

/// Runs body(i) for i in [0, n) across threads.
template <class Body>
void parallel_for(Index n, Body&& body) {
  parallel_chunks(n, [&](Index lo, Index hi) {
    for (Index i = lo; i < hi; ++i) body(i);
  });
}

/// Fixed-tree pairwise sum. The reduction order depends only on the length,
/// never on thread count, so aggregates are bit-reproducible.
inline double pairwise_sum(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n <= 8) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

struct MeanStdErr {
  double mean = 0.0;
  double std_err = 0.0;
};

/// Sample mean and standard error of the mean (pairwise reductions).
inline MeanStdErr mean_std_err(std::span<const double> values) {
  const auto n = static_cast<double>(values.size());
  if (values.empty()) return {};
  MeanStdErr out;
  out.mean = pairwise_sum(values) / n;
  if (values.size() < 2) return out;
  std::vector<double> sq(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double d = values[i] - out.mean;
    sq[i] = d * d;
  }
  const double var = pairwise_sum(sq) / (n - 1.0);
  out.std_err = std::sqrt(var / n);
  return out;
}

}  // namespace tic
