#include <cmath>
#include <cstdint>

#include "doctest.h"
#include "tbrw/ext_count.hpp"

using tbrw::ArgumentError;
using tbrw::ExtCount;

TEST_CASE("zero value") {
  ExtCount z;
  CHECK(z.is_zero());
  CHECK(z.is_exact_integer());
  CHECK(z.fits_uint64());
  CHECK_EQ(z.to_uint64(), 0u);
  CHECK_EQ(z.to_double(), 0.0);
  CHECK_EQ(z.to_string(), "0");
  CHECK(z == ExtCount(0));
  CHECK(z < ExtCount(1));
  CHECK_FALSE(ExtCount(1) < z);
}

TEST_CASE("small integers are exact") {
  CHECK(ExtCount(5) + ExtCount(7) == ExtCount(12));
  CHECK(ExtCount(12) - ExtCount(7) == ExtCount(5));
  CHECK(ExtCount(5) * ExtCount(7) == ExtCount(35));
  CHECK(ExtCount(35) / ExtCount(7) == ExtCount(5));
  CHECK(ExtCount(7).is_exact_integer());
  CHECK_EQ(ExtCount(7).to_uint64(), 7u);

  // 2^53 is the last power-of-two block where every integer is representable.
  const std::uint64_t big = 1ull << 53;
  CHECK(ExtCount(big).is_exact_integer());
  CHECK_EQ(ExtCount(big).to_uint64(), big);
  CHECK(ExtCount(big - 1) + ExtCount(1) == ExtCount(big));
}

TEST_CASE("accumulation stays exact through 2^52") {
  ExtCount acc;
  for (int i = 0; i < 1000; ++i) acc += ExtCount(3);
  CHECK_EQ(acc.to_uint64(), 3000u);

  const std::uint64_t base = 1ull << 52;
  CHECK(ExtCount(base) + ExtCount(1) == ExtCount(base + 1));
  CHECK((ExtCount(base) + ExtCount(1)).is_exact_integer());
}

TEST_CASE("from_double validation") {
  CHECK_THROWS_AS(ExtCount::from_double(-1.0), ArgumentError);
  CHECK_THROWS_AS(ExtCount::from_double(std::nan("")), ArgumentError);
  CHECK(ExtCount::from_double(0.0).is_zero());
  CHECK_EQ(ExtCount::from_double(1.5).to_double(), 1.5);
  CHECK_EQ(ExtCount::from_double(8.0).to_uint64(), 8u);
}

TEST_CASE("from_log2 round trips") {
  CHECK_EQ(ExtCount::from_log2(0.0).to_double(), 1.0);
  CHECK_EQ(ExtCount::from_log2(10.0).to_uint64(), 1024u);
  CHECK_EQ(ExtCount::from_log2(0.5).to_double(), doctest::Approx(std::sqrt(2.0)));
  CHECK_EQ(ExtCount::from_log2(90.0).log2(), doctest::Approx(90.0));
  CHECK_EQ(ExtCount::from_log2(-3.0).to_double(), 0.125);

  // Exponents beyond double mantissa range carry through unchanged.
  CHECK_EQ(ExtCount::from_log2(1.0e18).log2(), 1.0e18);
}

TEST_CASE("huge values survive arithmetic without overflow") {
  ExtCount big = ExtCount::from_log2(90.0);
  CHECK_FALSE(big.fits_uint64());
  CHECK_THROWS_AS(big.to_uint64(), ArgumentError);
  CHECK(std::isfinite(big.to_double()));

  CHECK_EQ((big * big).log2(), doctest::Approx(180.0));
  CHECK_EQ((big / ExtCount::from_log2(30.0)).log2(), doctest::Approx(60.0));
  CHECK((big - big).is_zero());

  ExtCount astro = ExtCount::from_log2(5.0e8);
  CHECK_EQ(std::isinf(astro.to_double()), true);
  CHECK_EQ((astro * astro).log2(), doctest::Approx(1.0e9));
}

TEST_CASE("tiny addends beyond the precision window are dropped") {
  ExtCount big = ExtCount::from_log2(90.0);
  CHECK(big + ExtCount(1) == big);
  CHECK(big - ExtCount(1) == big);
  // Comparable magnitudes still move the value.
  CHECK(big + big == ExtCount::from_log2(91.0));
}

TEST_CASE("subtraction below zero throws") {
  CHECK_THROWS_AS(ExtCount(3) - ExtCount(5), ArgumentError);
  CHECK((ExtCount(5) - ExtCount(5)).is_zero());
  CHECK_THROWS_AS(ExtCount(1) / ExtCount(0), ArgumentError);
}

TEST_CASE("ordering") {
  CHECK(ExtCount(3) < ExtCount(5));
  CHECK(ExtCount::from_log2(99.5) < ExtCount::from_log2(100.0));
  CHECK(ExtCount(5) <= ExtCount(5));
  CHECK(ExtCount::from_log2(100.0) > ExtCount(1));
  CHECK(ExtCount(2) != ExtCount(3));
}

TEST_CASE("fits_uint64 boundary") {
  CHECK(ExtCount::from_log2(63.0).fits_uint64());
  CHECK_FALSE(ExtCount::from_log2(64.0).fits_uint64());
}

TEST_CASE("approx_equal is a relative test") {
  CHECK(approx_equal(ExtCount(1000000), ExtCount(1000001), 1e-5));
  CHECK(approx_equal(ExtCount(100), ExtCount(105), 0.06));
  CHECK_FALSE(approx_equal(ExtCount(100), ExtCount(105), 0.04));
  CHECK_FALSE(approx_equal(ExtCount(1), ExtCount(), 0.5));
  CHECK(approx_equal(ExtCount(), ExtCount(), 0.0));
  CHECK(approx_equal(ExtCount::from_log2(1.0e18), ExtCount::from_log2(1.0e18), 1e-9));
}

TEST_CASE("logarithms") {
  CHECK_EQ(ExtCount(1024).log2(), doctest::Approx(10.0));
  CHECK_EQ(ExtCount::from_double(std::exp(1.0)).ln(), doctest::Approx(1.0));
  CHECK_EQ(ExtCount().log2(), -std::numeric_limits<double>::infinity());
}

TEST_CASE("repr round-trips bit-exactly") {
  ExtCount values[] = {ExtCount(),
                       ExtCount(1),
                       ExtCount(123456789),
                       ExtCount(1ull << 53),
                       ExtCount::from_double(2.5),
                       ExtCount::from_log2(80.0),
                       ExtCount::from_log2(90.0) * ExtCount::from_double(1.7),
                       ExtCount::from_log2(1.0e18)};
  for (const ExtCount& v : values) CHECK(ExtCount::from_repr(v.repr()) == v);

  CHECK_EQ(ExtCount(42).repr(), "42");
  CHECK_THROWS_AS(ExtCount::from_repr(""), ArgumentError);
  CHECK_THROWS_AS(ExtCount::from_repr("12x"), ArgumentError);
  CHECK_THROWS_AS(ExtCount::from_repr("0x1.8p+1:"), ArgumentError);
  CHECK_THROWS_AS(ExtCount::from_repr("0x1.8p+2:0x1p+0"), ArgumentError);  // mantissa >= 2
}

TEST_CASE("to_string picks a format by magnitude") {
  CHECK_EQ(ExtCount(123456789).to_string(), "123456789");
  CHECK_EQ(ExtCount::from_double(2.5).to_string(), "2.5");
  CHECK_EQ(ExtCount::from_log2(90.0).to_string(), "1.23794003929e+27");
  // Beyond double range: mantissa/exponent rendering from the base-10 log.
  std::string s = ExtCount::from_log2(10000.0).to_string();
  CHECK(s.size() > 6);
  CHECK_EQ(s.substr(s.size() - 6), "e+3010");
  // Beyond even that: order-of-magnitude only.
  std::string t = ExtCount::from_log2(1.0e17).to_string();
  CHECK_EQ(t.substr(0, 3), "10^");
}
