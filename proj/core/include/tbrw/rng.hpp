#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "tbrw/errors.hpp"
#include "tbrw/ext_count.hpp"

namespace tbrw {

/// Probabilities below this are treated as exact zero by all samplers.
inline constexpr double kProbabilityFloor = 0x1p-60;

/// Deterministic random stream.
///
/// Wraps std::mt19937_64 (whose output sequence is fixed by the standard) and
/// supplies its own value mappings instead of the standard distributions, whose
/// algorithms are implementation-defined.  Two streams built from the same seed
/// therefore produce identical draws on any platform with IEEE doubles.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : gen_(seed) {}

  /// Replica seed derivation: one splitmix64 scramble of master + (index+1)*phi.
  /// Documented so that external tooling can reproduce per-replica streams.
  static std::uint64_t derive(std::uint64_t master, std::uint64_t index) {
    return splitmix64(master + (index + 1) * 0x9E3779B97F4A7C15ull);
  }

  static std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
  }

  std::uint64_t next_uint64() { return gen_(); }

  /// Uniform in [0, 1), 53 random bits.
  double next_unit() { return static_cast<double>(gen_() >> 11) * 0x1p-53; }

  bool bernoulli(double p) {
    if (p < kProbabilityFloor) return false;
    if (p >= 1.0) return true;
    return next_unit() < p;
  }

  /// Uniform integer in [0, n), unbiased via rejection.
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw ArgumentError("RngStream::below: empty range");
    if ((n & (n - 1)) == 0) return gen_() & (n - 1);
    std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    for (;;) {
      std::uint64_t v = gen_();
      if (v < limit) return v % n;
    }
  }

  /// Number of Bernoulli(p) trials up to and including the first success;
  /// support {1, 2, ...}.  Valid for any p above the probability floor.
  ExtCount geometric(double p) {
    if (p >= 1.0) return ExtCount(1);
    if (p < kProbabilityFloor)
      throw ArgumentError("RngStream::geometric: success probability below floor");
    double u = 1.0 - next_unit();  // in (0, 1]
    double g = std::floor(std::log(u) / std::log1p(-p));
    if (g < 0.0) g = 0.0;
    return ExtCount::from_double(g + 1.0);
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace tbrw
