#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <string>

#include "tbrw/errors.hpp"

namespace tbrw {

/// Nonnegative count / clock value with an extended exponent range.
///
/// Values are stored as mantissa * 2^exponent with the mantissa normalised to
/// [1, 2).  Integers up to 2^53 are represented exactly and arithmetic on them
/// is exact; beyond that the value degrades gracefully to floating accuracy,
/// and for astronomically large values (binary exponents beyond 2^53) even the
/// exponent itself carries only double precision.  That is deliberate: event
/// probabilities below 2^-60 are treated as exact zero throughout the library,
/// so differences this representation cannot see are not observable either.
class ExtCount {
 public:
  constexpr ExtCount() = default;

  ExtCount(std::uint64_t v) {  // NOLINT(google-explicit-constructor)
    if (v != 0) normalize_from(static_cast<double>(v), 0.0);
  }

  static ExtCount from_double(double v) {
    if (std::isnan(v) || v < 0.0) throw ArgumentError("ExtCount: negative or NaN value");
    ExtCount r;
    if (v > 0.0) r.normalize_from(v, 0.0);
    return r;
  }

  /// The value 2^l.  Accepts any real l, including astronomically large ones.
  static ExtCount from_log2(double l) {
    ExtCount r;
    if (std::abs(l) < (1ull << 52)) {
      double fl = std::floor(l);
      r.mant_ = std::exp2(l - fl);
      r.exp2_ = fl;
      if (r.mant_ >= 2.0) {  // rounding at the bin edge
        r.mant_ *= 0.5;
        r.exp2_ += 1.0;
      }
    } else {
      r.mant_ = 1.0;
      r.exp2_ = l;
    }
    return r;
  }

  bool is_zero() const { return mant_ == 0.0; }

  /// True when the value is an integer represented exactly (<= 2^53).
  bool is_exact_integer() const {
    if (is_zero()) return true;
    if (exp2_ < 0.0 || exp2_ > 53.0) return false;
    double d = to_double();
    return d <= 9007199254740992.0 && d == std::floor(d);
  }

  bool fits_uint64() const {
    return is_zero() || exp2_ < 63.5;
  }

  std::uint64_t to_uint64() const {
    if (is_zero()) return 0;
    if (!fits_uint64()) throw ArgumentError("ExtCount: value does not fit in uint64");
    return static_cast<std::uint64_t>(std::llround(to_double()));
  }

  /// May overflow to +inf for very large values; never negative.
  double to_double() const {
    if (is_zero()) return 0.0;
    if (exp2_ > 1025.0) return std::numeric_limits<double>::infinity();
    if (exp2_ < -1070.0) return 0.0;
    return std::ldexp(mant_, static_cast<int>(exp2_));
  }

  double log2() const {
    if (is_zero()) return -std::numeric_limits<double>::infinity();
    return exp2_ + std::log2(mant_);
  }

  double ln() const { return log2() * M_LN2; }

  friend ExtCount operator+(const ExtCount& a, const ExtCount& b) {
    if (a.is_zero()) return b;
    if (b.is_zero()) return a;
    const ExtCount& hi = (b < a) ? a : b;
    const ExtCount& lo = (b < a) ? b : a;
    double diff = hi.exp2_ - lo.exp2_;
    if (diff > 64.0) return hi;  // below representable precision
    ExtCount r;
    r.normalize_from(hi.mant_ + scale_down(lo.mant_, diff), hi.exp2_);
    return r;
  }

  friend ExtCount operator-(const ExtCount& a, const ExtCount& b) {
    if (b.is_zero()) return a;
    if (a < b) throw ArgumentError("ExtCount: subtraction would be negative");
    double diff = a.exp2_ - b.exp2_;
    if (diff > 64.0) return a;
    ExtCount r;
    double m = a.mant_ - scale_down(b.mant_, diff);
    if (m > 0.0) r.normalize_from(m, a.exp2_);
    return r;
  }

  friend ExtCount operator*(const ExtCount& a, const ExtCount& b) {
    if (a.is_zero() || b.is_zero()) return ExtCount();
    ExtCount r;
    r.normalize_from(a.mant_ * b.mant_, a.exp2_ + b.exp2_);
    return r;
  }

  friend ExtCount operator/(const ExtCount& a, const ExtCount& b) {
    if (b.is_zero()) throw ArgumentError("ExtCount: division by zero");
    if (a.is_zero()) return ExtCount();
    ExtCount r;
    r.normalize_from(a.mant_ / b.mant_, a.exp2_ - b.exp2_);
    return r;
  }

  ExtCount& operator+=(const ExtCount& o) { return *this = *this + o; }
  ExtCount& operator-=(const ExtCount& o) { return *this = *this - o; }
  ExtCount& operator*=(const ExtCount& o) { return *this = *this * o; }

  friend bool operator==(const ExtCount& a, const ExtCount& b) {
    return a.mant_ == b.mant_ && (a.is_zero() || a.exp2_ == b.exp2_);
  }
  friend bool operator!=(const ExtCount& a, const ExtCount& b) { return !(a == b); }
  friend bool operator<(const ExtCount& a, const ExtCount& b) {
    if (a.is_zero()) return !b.is_zero();
    if (b.is_zero()) return false;
    if (a.exp2_ != b.exp2_) return a.exp2_ < b.exp2_;
    return a.mant_ < b.mant_;
  }
  friend bool operator>(const ExtCount& a, const ExtCount& b) { return b < a; }
  friend bool operator<=(const ExtCount& a, const ExtCount& b) { return !(b < a); }
  friend bool operator>=(const ExtCount& a, const ExtCount& b) { return !(a < b); }

  /// Relative comparison; exact equality for exact integers, ratio test otherwise.
  friend bool approx_equal(const ExtCount& a, const ExtCount& b, double rel) {
    if (a == b) return true;
    if (a.is_zero() || b.is_zero()) return false;
    double lr = a.log2() - b.log2();
    if (std::abs(lr) > 1.0) return false;
    double ratio = std::exp2(lr);
    return ratio >= 1.0 - rel && ratio <= 1.0 + rel;
  }

  /// Decimal rendering: exact integers as digits, moderate values in scientific
  /// notation, astronomic values as "d.dddddde+EEE" derived from the base-10 log.
  std::string to_string() const {
    if (is_zero()) return "0";
    if (is_exact_integer()) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%llu",
                    static_cast<unsigned long long>(std::llround(to_double())));
      return buf;
    }
    double d = to_double();
    char buf[64];
    if (std::isfinite(d)) {
      std::snprintf(buf, sizeof buf, "%.12g", d);
      return buf;
    }
    double l10 = log2() * 0.30102999566398119521;
    if (l10 < 9.0e15) {
      double e10 = std::floor(l10);
      double m10 = std::pow(10.0, l10 - e10);
      if (m10 >= 10.0) {  // rounding at the bin edge
        m10 /= 10.0;
        e10 += 1.0;
      }
      std::snprintf(buf, sizeof buf, "%.6fe+%.0f", m10, e10);
      return buf;
    }
    std::snprintf(buf, sizeof buf, "10^%.9g", l10);
    return buf;
  }

  /// Exact machine-readable encoding: decimal digits for exact integers,
  /// otherwise hexfloat "mantissa:exponent".  Round-trips bit-exactly through
  /// from_repr, unlike the human-oriented to_string.
  std::string repr() const {
    if (is_exact_integer()) return to_string();
    char buf[64];
    std::snprintf(buf, sizeof buf, "%a:%a", mant_, exp2_);
    return buf;
  }

  static ExtCount from_repr(const std::string& s) {
    if (s.empty()) throw ArgumentError("ExtCount: empty repr");
    std::size_t colon = s.find(':');
    if (colon == std::string::npos) {
      char* end = nullptr;
      unsigned long long v = std::strtoull(s.c_str(), &end, 10);
      if (end != s.c_str() + s.size()) throw ArgumentError("ExtCount: malformed repr");
      return ExtCount(static_cast<std::uint64_t>(v));
    }
    char* end = nullptr;
    double m = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + colon) throw ArgumentError("ExtCount: malformed repr mantissa");
    double e = std::strtod(s.c_str() + colon + 1, &end);
    if (end != s.c_str() + s.size()) throw ArgumentError("ExtCount: malformed repr exponent");
    if (!(m >= 1.0 && m < 2.0) || std::isnan(e)) throw ArgumentError("ExtCount: repr out of range");
    ExtCount r;
    r.mant_ = m;
    r.exp2_ = e;
    return r;
  }

 private:
  static double scale_down(double mant, double diff) {
    double fl = std::floor(diff);
    if (fl == diff && diff <= 1074.0) return std::ldexp(mant, -static_cast<int>(diff));
    return mant * std::exp2(-diff);
  }

  void normalize_from(double m, double e) {
    int sh = 0;
    double frac = std::frexp(m, &sh);  // frac in [0.5, 1)
    mant_ = frac * 2.0;
    exp2_ = e + static_cast<double>(sh - 1);
  }

  double mant_ = 0.0;  // 0, or in [1, 2)
  double exp2_ = 0.0;
};

}  // namespace tbrw
