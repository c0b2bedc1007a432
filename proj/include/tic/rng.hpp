#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace tic {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Mixes a user seed with a stream index into a well-spread 64-bit key.
inline std::uint64_t stream_key(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t s = seed;
  std::uint64_t a = splitmix64(s);
  s ^= 0x8BADF00DDEADBEEFULL + stream;
  std::uint64_t b = splitmix64(s);
  return a ^ (b + 0x9E3779B97F4A7C15ULL * (stream + 1));
}

}  // namespace detail

/// Stream of standard normal draws keyed by (seed, stream index).
///
/// Each call to next() consumes exactly two 64-bit words from a mt19937_64
/// engine and applies the cosine branch of the Box-Muller transform, so the
/// k-th draw of a stream is a pure function of (seed, stream, k). Two
/// simulations sharing a seed therefore consume identical normals at
/// identical (path, step) indices regardless of the control law, which is
/// what common-random-number difference estimation relies on.
class NormalStream {
 public:
  NormalStream(std::uint64_t seed, std::uint64_t stream)
      : gen_(detail::stream_key(seed, stream)) {}

  double next() {
    // u1 in (0,1] keeps the log finite; u2 in [0,1).
    const double u1 =
        (static_cast<double>(gen_() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    constexpr double two_pi = 6.283185307179586476925286766559;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace tic
