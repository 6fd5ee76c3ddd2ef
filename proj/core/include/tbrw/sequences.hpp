#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include "tbrw/ext_count.hpp"

namespace tbrw {

/// Partial sum of a probability sequence.  `approximate` is set when a closed
/// form or integral tail replaced direct summation; `error_bound` then bounds
/// the absolute error of `value`.
struct PartialSum {
  double value = 0.0;
  double error_bound = 0.0;
  bool approximate = false;
};

enum class ListTail { zero, repeat_last, error };

/// p_i = 1 / (i + offset)
struct HarmonicProb {
  double offset = 1.0;
};

/// p_i = min(1, c * i^-gamma)
struct PowerProb {
  double c = 1.0;
  double gamma = 1.0;
};

struct ConstantProb {
  double p = 1.0;
};

/// The combed sequence 1/2, 1/2, 1/3, 1/4, 1/4, 1/8, 1/5, 1/16, ...:
/// odd positions walk the harmonic sequence 1/(j+1), even positions the
/// dyadic sequence 2^-j.  Not monotone; its pairwise-minimum sum converges.
struct CombedProb {};

struct ListProb {
  std::vector<double> values;
  ListTail tail = ListTail::error;
};

/// A success-probability sequence p_1, p_2, ... evaluated at arbitrary
/// (possibly astronomically large) indices.
class ProbSequence {
 public:
  using Spec = std::variant<HarmonicProb, PowerProb, ConstantProb, CombedProb, ListProb>;

  ProbSequence(Spec spec);  // NOLINT(google-explicit-constructor)

  double eval(const ExtCount& i) const;

  /// sum_{k<=n} p_k
  PartialSum partial_sum(const ExtCount& n) const;

  /// sum_{k<=n} min(p_k, p_{k+1})
  PartialSum min_pair_partial_sum(const ExtCount& n) const;

  /// sup_{k>=i} p_k; exact for every built-in variant.
  double tail_sup(const ExtCount& i) const;

  bool is_nonincreasing() const;

  const Spec& spec() const { return spec_; }

 private:
  Spec spec_;
};

/// w_i = v
struct ConstantCount {
  std::uint64_t v = 1;
};

/// w_i = 2^(coeff * i^alpha), optionally with the exponent rounded up to the
/// next integer.  Covers the burst weights 2^ceil(i^1.1) and the checkpoint
/// thresholds 2^(i^(1+eps)).
struct Pow2Count {
  double coeff = 1.0;
  double alpha = 1.0;
  bool ceil_exponent = false;
};

struct ListCount {
  std::vector<std::uint64_t> values;
  ListTail tail = ListTail::error;
};

/// A positive integer sequence w_1, w_2, ... with extended-range values.
class CountSequence {
 public:
  using Spec = std::variant<ConstantCount, Pow2Count, ListCount>;

  CountSequence(Spec spec);  // NOLINT(google-explicit-constructor)

  ExtCount eval(const ExtCount& i) const;

  bool is_nondecreasing() const;

  /// Validates w_i < w_{i+1} over a prefix window; used for threshold
  /// sequences that must be strictly increasing.
  void require_strictly_increasing(std::uint64_t prefix) const;

  const Spec& spec() const { return spec_; }

 private:
  Spec spec_;
};

}  // namespace tbrw
