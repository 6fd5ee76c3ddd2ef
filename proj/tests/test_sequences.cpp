#include <cmath>
#include <cstdint>

#include "doctest.h"
#include "tbrw/sequences.hpp"

using tbrw::ArgumentError;
using tbrw::ConstantCount;
using tbrw::ConstantProb;
using tbrw::CombedProb;
using tbrw::CountSequence;
using tbrw::ExtCount;
using tbrw::HarmonicProb;
using tbrw::ListCount;
using tbrw::ListProb;
using tbrw::ListTail;
using tbrw::PartialSum;
using tbrw::Pow2Count;
using tbrw::PowerProb;
using tbrw::ProbSequence;

TEST_CASE("harmonic sequence") {
  ProbSequence p(HarmonicProb{1.0});
  CHECK_EQ(p.eval(ExtCount(1)), doctest::Approx(0.5));
  CHECK_EQ(p.eval(ExtCount(9)), doctest::Approx(0.1));
  CHECK(p.is_nonincreasing());
  CHECK_EQ(p.tail_sup(ExtCount(9)), doctest::Approx(0.1));

  PartialSum s = p.partial_sum(ExtCount(4));
  CHECK_EQ(s.value, doctest::Approx(0.5 + 1.0 / 3 + 0.25 + 0.2));

  // Far beyond direct summation: closed form, ln(n) + gamma - 1 here.
  PartialSum big = p.partial_sum(ExtCount::from_log2(100.0));
  double expect = 100.0 * M_LN2 + 0.57721566490153286 - 1.0;
  CHECK_EQ(big.value, doctest::Approx(expect).epsilon(1e-6));
  CHECK(big.error_bound < 1e-6);

  // Past double range entirely: asymptotic form, flagged approximate.
  PartialSum astro = p.partial_sum(ExtCount::from_log2(2000.0));
  CHECK(astro.approximate);
  double expect2 = 2000.0 * M_LN2 + 0.57721566490153286 - 1.0;
  CHECK_EQ(astro.value, doctest::Approx(expect2).epsilon(1e-6));
}

TEST_CASE("power sequence") {
  ProbSequence p(PowerProb{1.0, 0.8});
  CHECK_EQ(p.eval(ExtCount(1)), 1.0);
  CHECK_EQ(p.eval(ExtCount(32)), doctest::Approx(0.0625));
  CHECK(p.is_nonincreasing());
  CHECK_EQ(p.tail_sup(ExtCount(1)), 1.0);
  CHECK_EQ(p.tail_sup(ExtCount(32)), doctest::Approx(0.0625));

  // Clamp region: c > 1 pins early entries at 1.
  ProbSequence q(PowerProb{2.0, 0.5});
  CHECK_EQ(q.eval(ExtCount(1)), 1.0);
  CHECK_EQ(q.eval(ExtCount(16)), doctest::Approx(0.5));

  double direct = 0.0;
  for (int i = 1; i <= 10000; ++i) direct += std::pow(i, -0.8);
  CHECK_EQ(p.partial_sum(ExtCount(10000)).value, doctest::Approx(direct).epsilon(1e-9));

  // Beyond the direct cap the integral bracket must contain the value:
  // int_1^{n+1} x^-g dx <= sum <= 1 + int_1^n x^-g dx.
  ExtCount n = ExtCount::from_log2(40.0);
  PartialSum s = p.partial_sum(n);
  CHECK(s.approximate);
  double lo = (std::pow(n.to_double() + 1.0, 0.2) - 1.0) / 0.2;
  double hi = 1.0 + (std::pow(n.to_double(), 0.2) - 1.0) / 0.2;
  CHECK(s.value + s.error_bound >= lo);
  CHECK(s.value - s.error_bound <= hi);
}

TEST_CASE("power sequence validation") {
  CHECK_THROWS_AS(ProbSequence(PowerProb{-1.0, 0.5}), ArgumentError);
  CHECK_THROWS_AS(ProbSequence(PowerProb{1.0, -0.5}), ArgumentError);
  CHECK_THROWS_AS(ProbSequence(HarmonicProb{-2.0}), ArgumentError);
  CHECK_THROWS_AS(ProbSequence(ConstantProb{1.5}), ArgumentError);
}

TEST_CASE("constant sequence") {
  ProbSequence p(ConstantProb{0.3});
  CHECK_EQ(p.eval(ExtCount(1)), 0.3);
  CHECK_EQ(p.eval(ExtCount::from_log2(80.0)), 0.3);
  CHECK_EQ(p.partial_sum(ExtCount(10)).value, doctest::Approx(3.0));
  CHECK_EQ(p.tail_sup(ExtCount(5)), 0.3);
  CHECK(p.is_nonincreasing());
}

TEST_CASE("combed sequence interleaves harmonic and dyadic entries") {
  ProbSequence p(CombedProb{});
  const double expect[] = {0.5, 0.5, 1.0 / 3, 0.25, 0.25, 0.125, 0.2, 0.0625};
  for (int i = 0; i < 8; ++i)
    CHECK_EQ(p.eval(ExtCount(static_cast<std::uint64_t>(i + 1))), doctest::Approx(expect[i]));
  CHECK_FALSE(p.is_nonincreasing());

  // Supremum of the tail can sit past the start index (p_7 = 1/5 > p_6).
  CHECK_EQ(p.tail_sup(ExtCount(6)), doctest::Approx(0.2));
  CHECK_EQ(p.tail_sup(ExtCount(5)), doctest::Approx(0.25));

  // Pairwise minima are dominated by the dyadic comb, so their sum plateaus.
  PartialSum a = p.min_pair_partial_sum(ExtCount(100));
  PartialSum b = p.min_pair_partial_sum(ExtCount(400));
  CHECK(b.value - a.value < 1e-10);
  double direct = 0.0;
  for (std::uint64_t n = 1; n <= 100; ++n)
    direct += std::min(p.eval(ExtCount(n)), p.eval(ExtCount(n + 1)));
  CHECK_EQ(a.value, doctest::Approx(direct).epsilon(1e-9));
}

TEST_CASE("pairwise-minimum sum diverges for the harmonic sequence") {
  ProbSequence p(HarmonicProb{1.0});
  PartialSum a = p.min_pair_partial_sum(ExtCount(100));
  PartialSum b = p.min_pair_partial_sum(ExtCount(10000));
  CHECK(b.value - a.value > 1.0);
  double direct = 0.0;
  for (std::uint64_t n = 1; n <= 100; ++n)
    direct += std::min(p.eval(ExtCount(n)), p.eval(ExtCount(n + 1)));
  CHECK_EQ(a.value, doctest::Approx(direct).epsilon(1e-6));
}

TEST_CASE("list sequence tail rules") {
  ProbSequence zero(ListProb{{0.5, 0.25}, ListTail::zero});
  CHECK_EQ(zero.eval(ExtCount(2)), 0.25);
  CHECK_EQ(zero.eval(ExtCount(3)), 0.0);
  CHECK(zero.is_nonincreasing());

  ProbSequence rep(ListProb{{0.5, 0.25}, ListTail::repeat_last});
  CHECK_EQ(rep.eval(ExtCount(5)), 0.25);
  CHECK_EQ(rep.partial_sum(ExtCount(4)).value, doctest::Approx(1.25));
  CHECK_EQ(rep.tail_sup(ExtCount(1)), 0.5);

  ProbSequence err(ListProb{{0.5, 0.25}, ListTail::error});
  CHECK_EQ(err.eval(ExtCount(2)), 0.25);
  CHECK_THROWS_AS(err.eval(ExtCount(3)), ArgumentError);

  CHECK_FALSE(ProbSequence(ListProb{{0.1, 0.5}, ListTail::zero}).is_nonincreasing());
  CHECK_THROWS_AS(ProbSequence(ListProb{{1.2}, ListTail::zero}), ArgumentError);
}

TEST_CASE("index zero rejected") {
  ProbSequence p(HarmonicProb{1.0});
  CHECK_THROWS_AS(p.eval(ExtCount()), ArgumentError);
}

TEST_CASE("constant count") {
  CountSequence w(ConstantCount{5});
  CHECK_EQ(w.eval(ExtCount(3)).to_uint64(), 5u);
  CHECK(w.is_nondecreasing());
  CHECK_THROWS_AS(w.require_strictly_increasing(10), ArgumentError);
}

TEST_CASE("power-of-two count with ceil exponent") {
  // w_i = 2^ceil(i^1.1): 2, 8, 16, ..., 2^13 at i = 10.
  CountSequence w(Pow2Count{1.0, 1.1, true});
  CHECK_EQ(w.eval(ExtCount(1)).to_uint64(), 2u);
  CHECK_EQ(w.eval(ExtCount(2)).to_uint64(), 8u);
  CHECK_EQ(w.eval(ExtCount(3)).to_uint64(), 16u);
  CHECK_EQ(w.eval(ExtCount(10)).to_uint64(), 8192u);
  CHECK_EQ(w.eval(ExtCount(100)).log2(), doctest::Approx(159.0));
  CHECK(w.is_nondecreasing());
  w.require_strictly_increasing(50);
}

TEST_CASE("power-of-two count with real exponent") {
  CountSequence w(Pow2Count{1.0, 1.03, false});
  CHECK_EQ(w.eval(ExtCount(1)).to_double(), doctest::Approx(2.0));
  CHECK_EQ(w.eval(ExtCount(2)).log2(), doctest::Approx(std::pow(2.0, 1.03)));
  CHECK_EQ(w.eval(ExtCount(40)).log2(), doctest::Approx(std::pow(40.0, 1.03)));
  w.require_strictly_increasing(60);
}

TEST_CASE("list count") {
  CountSequence rep(ListCount{{1, 2, 3}, ListTail::repeat_last});
  CHECK_EQ(rep.eval(ExtCount(5)).to_uint64(), 3u);
  CHECK(rep.is_nondecreasing());
  CHECK_THROWS_AS(rep.require_strictly_increasing(5), ArgumentError);

  CountSequence err(ListCount{{4, 7}, ListTail::error});
  CHECK_EQ(err.eval(ExtCount(2)).to_uint64(), 7u);
  CHECK_THROWS_AS(err.eval(ExtCount(3)), ArgumentError);

  CHECK_FALSE(CountSequence(ListCount{{2, 1}, ListTail::repeat_last}).is_nondecreasing());
  // Counts are >= 1 by contract; a zero tail can never satisfy that.
  CHECK_THROWS_AS(CountSequence(ListCount{{2, 1}, ListTail::zero}), ArgumentError);
}
