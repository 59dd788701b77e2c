#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace surfreg {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Bad or inconsistent user configuration (CLI exit code 2).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Non-finite value or numerical breakdown at runtime (CLI exit code 3).
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Aabb {
  Vec3 lo{-1.0, -1.0, -1.0};
  Vec3 hi{1.0, 1.0, 1.0};

  Vec3 extent() const { return hi - lo; }
  Vec3 clamp(const Vec3& x) const {
    return x.cwiseMax(lo).cwiseMin(hi);
  }
  bool contains(const Vec3& x) const {
    return (x.array() >= lo.array()).all() && (x.array() <= hi.array()).all();
  }
};

// --- Counter-based pseudorandom stream -------------------------------------
//
// All randomness in the pipeline derives from splitmix64 so that draws can be
// keyed on (seed, iteration, ray) and replayed independently of thread
// scheduling.

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

/// Mixes an extra key into a seed; used to derive independent substreams.
inline std::uint64_t mix_key(std::uint64_t seed, std::uint64_t key) {
  std::uint64_t s = seed ^ (0x9e3779b97f4a7c15ull + key);
  return splitmix64(s);
}

/// Small deterministic RNG over splitmix64.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() { return splitmix64(state_); }

  /// Uniform double in [0, 1).
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform double in [lo, hi).
  double next_double(double lo, double hi) {
    return lo + (hi - lo) * next_double();
  }

  /// Uniform integer in [0, n).
  std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

  /// Standard normal via Box-Muller.
  double next_normal() {
    double u1 = next_double();
    double u2 = next_double();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

 private:
  std::uint64_t state_;
};

/// Rng keyed on (seed, a, b); draws are independent for distinct keys.
inline Rng keyed_rng(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return Rng(mix_key(mix_key(seed, a), b));
}

// --- Compensated summation ---------------------------------------------------

/// Kahan accumulator; metric reductions use it so per-pixel order does not
/// leak into the reported values.
class KahanSum {
 public:
  void add(double x) {
    const double y = x - comp_;
    const double t = sum_ + y;
    comp_ = (t - sum_) - y;
    sum_ = t;
  }
  double value() const { return sum_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

inline bool is_power_of_two(std::uint64_t n) {
  return n != 0 && (n & (n - 1)) == 0;
}

inline int integer_log2(std::uint64_t n) {
  int l = 0;
  while (n > 1) {
    n >>= 1;
    ++l;
  }
  return l;
}

}  // namespace surfreg
