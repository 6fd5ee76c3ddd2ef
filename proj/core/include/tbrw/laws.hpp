#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "tbrw/ext_count.hpp"
#include "tbrw/rng.hpp"
#include "tbrw/sequences.hpp"

namespace tbrw {

/// Z_n = 1 with probability min(1, c * n^-gamma), else 0.
struct BernoulliPowerLaw {
  double c = 1.0;
  double gamma = 1.0;
};

/// Z_n = ceil(ln n) with probability n^-delta, else 0.  At n = 1 the burst
/// size is 0, so the step never grows regardless of the coin.
struct LogBurstLaw {
  double delta = 1.0;
};

/// Z_n = w_n with probability p_n, else 0; w nondecreasing, w_n >= 1.
struct WeightedBurstLaw {
  ProbSequence p;
  CountSequence w;
};

/// Z_n = z with probability p, else 0, for every n.
struct ConstantLaw {
  double p = 1.0;
  std::uint64_t z = 1;
};

/// Explicit per-step table: row n gives (value, probability); beyond the
/// table the tail rule applies (zero growth, repeat of the last row, or error).
struct TableLaw {
  struct Row {
    std::uint64_t value = 1;
    double prob = 1.0;
  };
  std::vector<Row> rows;
  ListTail tail = ListTail::error;
};

using LawSpec =
    std::variant<BernoulliPowerLaw, LogBurstLaw, WeightedBurstLaw, ConstantLaw, TableLaw>;

struct Moments {
  ExtCount m;     // E[Z_n]
  double q = 1.0;  // P(Z_n = 0)
};

/// A leaf-count law together with an index shift: local step n reads the
/// underlying law at index shift + n.  Shifting by m1 and then by m2 is the
/// same sequence as shifting once by m1 + m2.
class LawSequence {
 public:
  explicit LawSequence(LawSpec spec, ExtCount shift = ExtCount());

  LawSequence shifted(const ExtCount& by) const;
  const ExtCount& shift() const { return shift_; }
  const LawSpec& spec() const { return spec_; }

  /// Draw Z_n.  Consumes a deterministic number of stream values given the
  /// outcome (one uniform draw unless the success probability is degenerate).
  ExtCount sample_z(const ExtCount& n, RngStream& rng) const;

  Moments moments(const ExtCount& n) const;

  /// M_n = sum_{k<=n} E[Z_k] by direct summation.
  double cumulative_mean(std::uint64_t n) const;

  /// P(Z_n >= 1).
  double growth_prob(const ExtCount& n) const;

  /// sup_{j>=n} P(Z_j >= 1); exact for every built-in variant.
  double growth_prob_tail_sup(const ExtCount& n) const;

  /// The burst size conditioned on Z_n >= 1 (deterministic for all variants).
  ExtCount growth_value(const ExtCount& n) const;

  /// True when every possible burst has size exactly 1.
  bool single_leaf_only() const;

  std::string describe() const;

 private:
  ExtCount global(const ExtCount& n) const { return shift_ + n; }

  LawSpec spec_;
  ExtCount shift_;
};

enum class Verdict { satisfied_trend, violated_trend, inconclusive };

const char* verdict_name(Verdict v);

struct TraceEntry {
  ExtCount n;           // index or time the entry refers to
  double term = 0.0;    // the summand at n (or statistic value)
  double partial = 0.0; // running sum (equals term history accumulated)
  /// 0 = exact, 1 = upper bound / analytic approximation, 2 = unavailable
  int flag = 0;
};

struct ConditionReport {
  Verdict verdict = Verdict::inconclusive;
  std::vector<TraceEntry> trace;
  std::string notes;
};

struct TrendOptions {
  double improvement_factor = 2.0;  // tail must shrink (grow) by this factor
  std::size_t grid_points = 48;
  double plateau_eps = 1e-3;        // partial-sum tail growth treated as flat
};

/// Recurrence test for single-walker laws: checks that per-step means are
/// finite, that the no-growth probability is nondecreasing, and that the
/// statistic s_n = (1 - q_n) * M_n^2 trends to zero on a log grid up to
/// `horizon`.  The trace holds (n, s_n) pairs.  Requires horizon >= 10.
ConditionReport check_recurrence_conditions(const LawSequence& law, std::uint64_t horizon,
                                            const TrendOptions& opts = {});

struct TransienceReport {
  ConditionReport escape_sum;    // sum_i P(tau_i > a_i), bounds where needed
  ConditionReport backtrack_sum; // sum_i (a_i - a_{i-1}) / (w_{i-1} + 1)
  ConditionReport growth_sum;    // sum_n min(p_n, p_{n+1}), must diverge
  Verdict combined = Verdict::inconclusive;
};

/// Transience test for burst laws (success probabilities p, burst weights w)
/// against a strictly increasing checkpoint sequence a.  The first two sums
/// must converge and the third diverge for the transience criterion to hold.
TransienceReport check_transience_conditions(const ProbSequence& p, const CountSequence& w,
                                             const CountSequence& a, std::uint64_t i_max,
                                             const TrendOptions& opts = {});

}  // namespace tbrw
