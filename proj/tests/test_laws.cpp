#include <cmath>
#include <cstdint>
#include <vector>

#include "doctest.h"
#include "tbrw/laws.hpp"
#include "tbrw/rng.hpp"

using namespace tbrw;

namespace {

LawSequence bernoulli_power(double c, double gamma) {
  return LawSequence(BernoulliPowerLaw{c, gamma});
}

}  // namespace

TEST_CASE("sample_z degenerate cases") {
  RngStream rng(1);
  LawSequence sure = bernoulli_power(1.0, 0.8);
  for (int i = 0; i < 20; ++i) CHECK_EQ(sure.sample_z(ExtCount(1), rng).to_uint64(), 1u);

  LawSequence never(ConstantLaw{0.0, 5});
  for (int i = 0; i < 20; ++i) CHECK(never.sample_z(ExtCount(7), rng).is_zero());

  // ceil(ln 1) = 0 leaves: the first step cannot grow whatever the coin says.
  LawSequence burst(LogBurstLaw{0.8});
  for (int i = 0; i < 20; ++i) CHECK(burst.sample_z(ExtCount(1), rng).is_zero());
}

TEST_CASE("log-burst draw at n=8") {
  // Z_8 is either 0 or ceil(ln 8) = 3, with P(3) = 8^-0.8.
  LawSequence law(LogBurstLaw{0.8});
  RngStream rng(42);
  const double p = std::pow(8.0, -0.8);
  int hits = 0;
  const int reps = 100000;
  for (int i = 0; i < reps; ++i) {
    ExtCount z = law.sample_z(ExtCount(8), rng);
    if (!z.is_zero()) {
      CHECK_EQ(z.to_uint64(), 3u);
      ++hits;
    }
  }
  double se = std::sqrt(p * (1.0 - p) / reps);
  CHECK(std::abs(static_cast<double>(hits) / reps - p) < 4.0 * se);
}

TEST_CASE("moments closed forms") {
  Moments a = bernoulli_power(1.0, 0.8).moments(ExtCount(32));
  CHECK_EQ(a.m.to_double(), doctest::Approx(0.0625));
  CHECK_EQ(a.q, doctest::Approx(0.9375));

  Moments b = LawSequence(ConstantLaw{0.5, 2}).moments(ExtCount(11));
  CHECK_EQ(b.m.to_double(), doctest::Approx(1.0));
  CHECK_EQ(b.q, doctest::Approx(0.5));

  Moments c = LawSequence(LogBurstLaw{1.0}).moments(ExtCount(1));
  CHECK(c.m.is_zero());
  CHECK_EQ(c.q, 1.0);

  Moments d = LawSequence(LogBurstLaw{0.8}).moments(ExtCount(8));
  CHECK_EQ(d.m.to_double(), doctest::Approx(3.0 * std::pow(8.0, -0.8)));
  CHECK_EQ(d.q, doctest::Approx(1.0 - std::pow(8.0, -0.8)));
}

TEST_CASE("moments agree with Monte Carlo over one million draws") {
  struct Case {
    LawSequence law;
    ExtCount n;
  };
  std::vector<Case> cases;
  cases.push_back({bernoulli_power(1.0, 0.75), ExtCount(7)});
  cases.push_back({LawSequence(LogBurstLaw{0.5}), ExtCount(20)});
  cases.push_back(
      {LawSequence(WeightedBurstLaw{ProbSequence(HarmonicProb{1.0}),
                                    CountSequence(Pow2Count{1.0, 1.1, true})}),
       ExtCount(3)});
  cases.push_back({LawSequence(ConstantLaw{0.3, 4}), ExtCount(5)});
  cases.push_back({LawSequence(TableLaw{{{2, 0.5}, {3, 0.25}}, ListTail::zero}), ExtCount(2)});

  const int reps = 1000000;
  RngStream rng(7);
  for (const auto& cs : cases) {
    Moments mo = cs.law.moments(cs.n);
    double m = mo.m.to_double();
    // All variants are two-point laws (0 or one burst value), so
    // E[Z^2] = z^2 p = z * m gives the exact variance for the SE.
    double z = cs.law.growth_value(cs.n).to_double();
    double var = z * m - m * m;

    double sum = 0.0;
    int zeros = 0;
    for (int i = 0; i < reps; ++i) {
      ExtCount d = cs.law.sample_z(cs.n, rng);
      if (d.is_zero()) ++zeros;
      sum += d.to_double();
    }
    double se_mean = std::sqrt(var / reps);
    double se_q = std::sqrt(mo.q * (1.0 - mo.q) / reps);
    CHECK(std::abs(sum / reps - m) <= 4.0 * se_mean + 1e-12);
    CHECK(std::abs(static_cast<double>(zeros) / reps - mo.q) <= 4.0 * se_q + 1e-12);
  }
}

TEST_CASE("cumulative mean by direct summation") {
  CHECK_EQ(LawSequence(ConstantLaw{1.0, 1}).cumulative_mean(100), doctest::Approx(100.0));
  CHECK_EQ(bernoulli_power(1.0, 0.8).cumulative_mean(1000000),
           doctest::Approx(74.8071291316).epsilon(1e-6));
  // Harmonic number H_10000.
  CHECK_EQ(bernoulli_power(1.0, 1.0).cumulative_mean(10000),
           doctest::Approx(9.7876060360).epsilon(1e-9));
}

TEST_CASE("cumulative mean increments equal the per-step mean") {
  LawSequence laws[] = {bernoulli_power(1.0, 0.8), LawSequence(LogBurstLaw{0.5}),
                        LawSequence(ConstantLaw{0.25, 3})};
  for (const auto& law : laws) {
    for (std::uint64_t n : {2ull, 10ull, 97ull}) {
      double inc = law.cumulative_mean(n) - law.cumulative_mean(n - 1);
      CHECK_EQ(inc, doctest::Approx(law.moments(ExtCount(n)).m.to_double()).epsilon(1e-9));
    }
  }
}

TEST_CASE("shift composition") {
  LawSequence base = bernoulli_power(1.0, 0.8);
  LawSequence two_hops = base.shifted(ExtCount(3)).shifted(ExtCount(4));
  LawSequence one_hop = base.shifted(ExtCount(7));
  CHECK(two_hops.shift() == one_hop.shift());

  for (std::uint64_t n = 1; n <= 20; ++n) {
    Moments a = two_hops.moments(ExtCount(n));
    Moments b = one_hop.moments(ExtCount(n));
    CHECK_EQ(a.q, b.q);
    CHECK(a.m == b.m);
  }

  RngStream ra(99), rb(99);
  for (std::uint64_t n = 1; n <= 200; ++n)
    CHECK(two_hops.sample_z(ExtCount(n), ra) == one_hop.sample_z(ExtCount(n), rb));
}

TEST_CASE("growth probability and value") {
  LawSequence bp = bernoulli_power(1.0, 0.8);
  CHECK_EQ(bp.growth_prob(ExtCount(32)), doctest::Approx(0.0625));
  CHECK_EQ(bp.growth_prob_tail_sup(ExtCount(32)), doctest::Approx(0.0625));
  CHECK_EQ(bp.growth_value(ExtCount(5)).to_uint64(), 1u);
  CHECK(bp.single_leaf_only());

  LawSequence lb(LogBurstLaw{0.8});
  CHECK_EQ(lb.growth_prob(ExtCount(1)), 0.0);
  CHECK_EQ(lb.growth_prob_tail_sup(ExtCount(1)), doctest::Approx(std::pow(2.0, -0.8)));
  CHECK_EQ(lb.growth_value(ExtCount(8)).to_uint64(), 3u);
  CHECK_FALSE(lb.single_leaf_only());

  LawSequence wb(WeightedBurstLaw{ProbSequence(HarmonicProb{1.0}),
                                  CountSequence(Pow2Count{1.0, 1.1, true})});
  CHECK_EQ(wb.growth_prob(ExtCount(3)), doctest::Approx(0.25));
  CHECK_EQ(wb.growth_value(ExtCount(10)).to_uint64(), 8192u);
  CHECK_EQ(wb.growth_value(ExtCount(100)).log2(), doctest::Approx(159.0));
  CHECK_FALSE(wb.single_leaf_only());

  CHECK(LawSequence(ConstantLaw{0.4, 1}).single_leaf_only());
  CHECK_FALSE(LawSequence(ConstantLaw{0.4, 2}).single_leaf_only());
}

TEST_CASE("table law tail rules") {
  TableLaw t{{{2, 0.5}, {3, 0.25}}, ListTail::zero};
  LawSequence zero(t);
  CHECK_EQ(zero.growth_prob(ExtCount(2)), 0.25);
  CHECK_EQ(zero.growth_prob(ExtCount(3)), 0.0);
  CHECK_EQ(zero.moments(ExtCount(1)).m.to_double(), doctest::Approx(1.0));

  t.tail = ListTail::repeat_last;
  LawSequence rep(t);
  CHECK_EQ(rep.growth_prob(ExtCount(9)), 0.25);
  CHECK_EQ(rep.growth_value(ExtCount(9)).to_uint64(), 3u);

  t.tail = ListTail::error;
  LawSequence err(t);
  CHECK_THROWS_AS(err.growth_prob(ExtCount(3)), ArgumentError);
}

TEST_CASE("recurrence conditions: slow decay satisfies, fast decay violates") {
  ConditionReport slow = check_recurrence_conditions(bernoulli_power(1.0, 0.8), 1000000);
  CHECK_EQ(slow.verdict, Verdict::satisfied_trend);
  // Final statistic is (1 - q_n) M_n^2 at the horizon.
  double m_final = 74.8071291316;
  double expect = std::pow(1.0e6, -0.8) * m_final * m_final;
  CHECK_EQ(slow.trace.back().term, doctest::Approx(expect).epsilon(1e-4));
  CHECK(slow.trace.back().term < 0.1);

  ConditionReport fast = check_recurrence_conditions(bernoulli_power(1.0, 0.6), 1000000);
  CHECK_EQ(fast.verdict, Verdict::violated_trend);

  ConditionReport frozen = check_recurrence_conditions(LawSequence(ConstantLaw{0.0, 1}), 1000);
  CHECK_EQ(frozen.verdict, Verdict::satisfied_trend);

  CHECK_THROWS_AS(check_recurrence_conditions(bernoulli_power(1.0, 0.8), 5), ArgumentError);
}

TEST_CASE("recurrence trace is strictly increasing in n and tail-monotone") {
  // Statistic ~ n^(2(1-gamma)) * n^-gamma: decreasing for gamma > 2/3,
  // increasing for gamma < 2/3; visible on the back half of the log grid.
  ConditionReport above = check_recurrence_conditions(bernoulli_power(1.0, 0.75), 1000000);
  ConditionReport below = check_recurrence_conditions(bernoulli_power(1.0, 0.55), 1000000);
  for (const ConditionReport* r : {&above, &below})
    for (std::size_t i = 1; i < r->trace.size(); ++i)
      CHECK(r->trace[i - 1].n < r->trace[i].n);

  for (std::size_t i = above.trace.size() / 2 + 1; i < above.trace.size(); ++i)
    CHECK(above.trace[i].term < above.trace[i - 1].term);
  for (std::size_t i = below.trace.size() / 2 + 1; i < below.trace.size(); ++i)
    CHECK(below.trace[i].term > below.trace[i - 1].term);
}

TEST_CASE("transience growth condition: constant probabilities diverge, combed plateaus") {
  CountSequence w(ConstantCount{2});
  CountSequence a(Pow2Count{1.0, 1.5, true});

  TransienceReport always = check_transience_conditions(ProbSequence(ConstantProb{1.0}), w, a, 10);
  CHECK_EQ(always.growth_sum.verdict, Verdict::satisfied_trend);
  // With p = 1 every success is immediate, so no checkpoint is ever missed...
  CHECK_EQ(always.escape_sum.verdict, Verdict::satisfied_trend);
  // ...but backtracking cost grows with the gaps a_i - a_{i-1} at fixed w.
  CHECK_EQ(always.backtrack_sum.verdict, Verdict::violated_trend);
  CHECK_EQ(always.combined, Verdict::violated_trend);

  TransienceReport combed = check_transience_conditions(ProbSequence(CombedProb{}), w, a, 10);
  CHECK_EQ(combed.growth_sum.verdict, Verdict::violated_trend);
  CHECK_EQ(combed.combined, Verdict::violated_trend);
}

TEST_CASE("transience worked example trends") {
  // p_i = 1/(i+1), w_i = 2^ceil(i^1.1), a_i = 2^(i^1.03).
  ProbSequence p(HarmonicProb{1.0});
  CountSequence w(Pow2Count{1.0, 1.1, true});
  CountSequence a(Pow2Count{1.0, 1.03, false});
  TransienceReport rep = check_transience_conditions(p, w, a, 60);

  CHECK_EQ(rep.growth_sum.verdict, Verdict::satisfied_trend);
  CHECK_EQ(rep.backtrack_sum.verdict, Verdict::satisfied_trend);

  // Escape terms: exact where the checkpoint is small enough for the DP,
  // Chebyshev bounds where applicable; partial sums must be nondecreasing
  // and every exact term must lie in [0, 1].
  double prev = 0.0;
  for (const TraceEntry& e : rep.escape_sum.trace) {
    CHECK(e.partial >= prev - 1e-12);
    if (e.flag == 0) {
      CHECK(e.term >= 0.0);
      CHECK(e.term <= 1.0);
    }
    prev = e.partial;
  }

  // First checkpoint: a_1 = 2, P(tau_1 > 2) = (1/2)(2/3) = 1/3 exactly.
  REQUIRE_FALSE(rep.escape_sum.trace.empty());
  CHECK_EQ(rep.escape_sum.trace.front().flag, 0);
  CHECK_EQ(rep.escape_sum.trace.front().term, doctest::Approx(1.0 / 3).epsilon(1e-9));

  // Backtrack terms start at i = 2 and shrink fast: by i = 40 the increments
  // are far below the plateau threshold.
  const auto& bt = rep.backtrack_sum.trace;
  REQUIRE(bt.size() >= 2);
  for (const TraceEntry& e : bt)
    if (e.n >= ExtCount(40)) CHECK(e.term < 1e-3);
}

TEST_CASE("transience input validation") {
  ProbSequence p(HarmonicProb{1.0});
  CountSequence w(Pow2Count{1.0, 1.1, true});
  CHECK_THROWS_AS(
      check_transience_conditions(p, w, CountSequence(ConstantCount{5}), 10),
      ArgumentError);  // checkpoints must be strictly increasing
}
