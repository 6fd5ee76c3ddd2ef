#include "tbrw/sequences.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/special_functions/digamma.hpp>

#include "tbrw/errors.hpp"

namespace tbrw {

namespace {

constexpr std::uint64_t kDirectSumCap = 10'000'000;

// sum_{j=1}^m 1/(j+t) = psi(m+t+1) - psi(t+1); m passed as a double that may
// be infinite, in which case the asymptotic psi(x) ~ ln(x) is substituted.
PartialSum harmonic_psum(const ExtCount& m, double t) {
  PartialSum r;
  if (m.is_zero()) return r;
  double d = m.to_double();
  if (std::isfinite(d)) {
    r.value = boost::math::digamma(d + t + 1.0) - boost::math::digamma(t + 1.0);
    r.error_bound = 1e-12 * std::max(1.0, r.value);
  } else {
    r.value = m.ln() - boost::math::digamma(t + 1.0);
    r.error_bound = 1e-10 * std::max(1.0, r.value);
    r.approximate = true;
  }
  return r;
}

double combed_eval_exact(std::uint64_t n) {
  if (n % 2 == 1) {
    double j = static_cast<double>((n + 1) / 2);
    return 1.0 / (j + 1.0);
  }
  double j = static_cast<double>(n / 2);
  return (j > 1074.0) ? 0.0 : std::exp2(-j);
}

}  // namespace

ProbSequence::ProbSequence(Spec spec) : spec_(std::move(spec)) {
  if (auto* h = std::get_if<HarmonicProb>(&spec_)) {
    if (!(h->offset >= 0.0)) throw ArgumentError("harmonic sequence: offset must be >= 0");
  } else if (auto* p = std::get_if<PowerProb>(&spec_)) {
    if (!(p->c > 0.0) || !(p->gamma >= 0.0))
      throw ArgumentError("power sequence: need c > 0 and gamma >= 0");
    if (p->gamma > 0.0 && std::pow(p->c, 1.0 / p->gamma) > 1e6)
      throw ArgumentError("power sequence: clamped region too long (c too large)");
  } else if (auto* c = std::get_if<ConstantProb>(&spec_)) {
    if (!(c->p >= 0.0 && c->p <= 1.0)) throw ArgumentError("constant sequence: p outside [0,1]");
  } else if (auto* l = std::get_if<ListProb>(&spec_)) {
    for (double v : l->values)
      if (!(v >= 0.0 && v <= 1.0)) throw ArgumentError("list sequence: probability outside [0,1]");
  }
}

double ProbSequence::eval(const ExtCount& i) const {
  if (i.is_zero()) throw ArgumentError("sequence index must be >= 1");
  return std::visit(
      [&](const auto& s) -> double {
        using T = std::decay_t<decltype(s)>;
        double d = i.to_double();
        if constexpr (std::is_same_v<T, HarmonicProb>) {
          return std::isfinite(d) ? 1.0 / (d + s.offset) : 0.0;
        } else if constexpr (std::is_same_v<T, PowerProb>) {
          if (std::isfinite(d)) return std::min(1.0, s.c * std::pow(d, -s.gamma));
          double lp = std::log(s.c) - s.gamma * i.ln();
          return (lp > -745.0) ? std::min(1.0, std::exp(lp)) : 0.0;
        } else if constexpr (std::is_same_v<T, ConstantProb>) {
          return s.p;
        } else if constexpr (std::is_same_v<T, CombedProb>) {
          if (i.is_exact_integer()) return combed_eval_exact(i.to_uint64());
          return std::isfinite(d) ? 2.0 / (d + 3.0) : 0.0;  // dominating branch
        } else {
          const ListProb& l = static_cast<const ListProb&>(s);
          if (i.fits_uint64()) {
            std::uint64_t n = i.to_uint64();
            if (n <= l.values.size()) return l.values[n - 1];
          }
          switch (l.tail) {
            case ListTail::zero: return 0.0;
            case ListTail::repeat_last:
              if (l.values.empty()) throw ArgumentError("list sequence: empty with repeat_last");
              return l.values.back();
            default: throw ArgumentError("list sequence: index beyond table");
          }
        }
      },
      spec_);
}

PartialSum ProbSequence::partial_sum(const ExtCount& n) const {
  return std::visit(
      [&](const auto& s) -> PartialSum {
        using T = std::decay_t<decltype(s)>;
        PartialSum r;
        if (n.is_zero()) return r;
        if constexpr (std::is_same_v<T, HarmonicProb>) {
          return harmonic_psum(n, s.offset);
        } else if constexpr (std::is_same_v<T, PowerProb>) {
          std::uint64_t direct = n.fits_uint64()
                                     ? std::min(n.to_uint64(), kDirectSumCap)
                                     : kDirectSumCap;
          double sum = 0.0;
          for (std::uint64_t k = 1; k <= direct; ++k)
            sum += std::min(1.0, s.c * std::pow(static_cast<double>(k), -s.gamma));
          r.value = sum;
          if (n > ExtCount(direct)) {
            // integral tail with midpoint continuity; first-term error bound
            double a = static_cast<double>(direct) + 0.5;
            double tail;
            if (s.gamma == 1.0) {
              double lnb = std::isfinite(n.to_double()) ? std::log(n.to_double() + 0.5) : n.ln();
              tail = s.c * (lnb - std::log(a));
            } else {
              double e = 1.0 - s.gamma;
              double bpow = std::exp(e * (std::isfinite(n.to_double())
                                              ? std::log(n.to_double() + 0.5)
                                              : n.ln()));
              tail = s.c * (bpow - std::pow(a, e)) / e;
            }
            r.value += tail;
            r.error_bound = s.c * std::pow(a, -s.gamma);
            r.approximate = true;
          }
          return r;
        } else if constexpr (std::is_same_v<T, ConstantProb>) {
          r.value = s.p * n.to_double();
          return r;
        } else if constexpr (std::is_same_v<T, CombedProb>) {
          if (n.fits_uint64() && n.to_uint64() <= 2000) {
            for (std::uint64_t k = 1; k <= n.to_uint64(); ++k) r.value += combed_eval_exact(k);
            return r;
          }
          // closed form: ceil(n/2) harmonic terms offset 1, floor(n/2) dyadic terms
          ExtCount half = (n + ExtCount(1)) / ExtCount(2);
          PartialSum harm = harmonic_psum(half, 1.0);
          r = harm;
          r.value += 1.0;  // dyadic part: 1 - 2^-floor(n/2), the tail is below 2^-60
          return r;
        } else {
          const ListProb& l = static_cast<const ListProb&>(s);
          std::uint64_t len = l.values.size();
          std::uint64_t direct =
              n.fits_uint64() ? std::min(n.to_uint64(), len) : len;
          for (std::uint64_t k = 0; k < direct; ++k) r.value += l.values[k];
          if (n > ExtCount(len)) {
            switch (l.tail) {
              case ListTail::zero: break;
              case ListTail::repeat_last:
                r.value += l.values.back() * (n - ExtCount(len)).to_double();
                break;
              default: throw ArgumentError("list sequence: partial sum beyond table");
            }
          }
          return r;
        }
      },
      spec_);
}

PartialSum ProbSequence::min_pair_partial_sum(const ExtCount& n) const {
  if (n.is_zero()) return {};
  if (is_nonincreasing()) {
    // min(p_k, p_{k+1}) = p_{k+1}
    PartialSum r = partial_sum(n + ExtCount(1));
    r.value -= eval(ExtCount(1));
    if (r.value < 0.0) r.value = 0.0;
    return r;
  }
  if (std::holds_alternative<CombedProb>(spec_)) {
    // every pairwise minimum involves a dyadic term; beyond k = 400 those are
    // under the 2^-60 probability floor and contribute nothing
    PartialSum r;
    std::uint64_t direct = n.fits_uint64() ? std::min<std::uint64_t>(n.to_uint64(), 400) : 400;
    for (std::uint64_t k = 1; k <= direct; ++k)
      r.value += std::min(combed_eval_exact(k), combed_eval_exact(k + 1));
    r.error_bound = 0x1p-50;
    return r;
  }
  const ListProb& l = std::get<ListProb>(spec_);
  if (!n.fits_uint64() && l.tail == ListTail::error)
    throw ArgumentError("list sequence: partial sum beyond table");
  PartialSum r;
  std::uint64_t m = n.fits_uint64() ? n.to_uint64() : l.values.size() + 1;
  std::uint64_t direct = std::min<std::uint64_t>(m, l.values.size() + 1);
  for (std::uint64_t k = 1; k <= direct; ++k)
    r.value += std::min(eval(ExtCount(k)), eval(ExtCount(k + 1)));
  if (m > direct) {
    double last = eval(ExtCount(direct + 1));
    r.value += last * static_cast<double>(m - direct);
  }
  return r;
}

double ProbSequence::tail_sup(const ExtCount& i) const {
  if (std::holds_alternative<CombedProb>(spec_)) {
    if (!i.fits_uint64()) return eval(i);
    std::uint64_t n = i.to_uint64();
    double harm = 1.0 / (static_cast<double>((n + 2) / 2) + 1.0);
    double jd = static_cast<double>((n + 1) / 2);
    double dy = (jd > 1074.0) ? 0.0 : std::exp2(-jd);
    return std::max(harm, dy);
  }
  if (auto* l = std::get_if<ListProb>(&spec_)) {
    double sup = 0.0;
    std::uint64_t from = i.fits_uint64() ? i.to_uint64() : l->values.size() + 1;
    for (std::uint64_t k = from; k <= l->values.size(); ++k)
      sup = std::max(sup, l->values[k - 1]);
    if (l->tail == ListTail::repeat_last && !l->values.empty())
      sup = std::max(sup, l->values.back());
    return sup;
  }
  return eval(i);  // nonincreasing variants
}

bool ProbSequence::is_nonincreasing() const {
  return std::visit(
      [](const auto& s) -> bool {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, CombedProb>) {
          return false;
        } else if constexpr (std::is_same_v<T, ListProb>) {
          const ListProb& l = static_cast<const ListProb&>(s);
          for (std::size_t k = 1; k < l.values.size(); ++k)
            if (l.values[k] > l.values[k - 1]) return false;
          return true;
        } else {
          return true;
        }
      },
      spec_);
}

CountSequence::CountSequence(Spec spec) : spec_(std::move(spec)) {
  if (auto* c = std::get_if<ConstantCount>(&spec_)) {
    if (c->v < 1) throw ArgumentError("count sequence: value must be >= 1");
  } else if (auto* p = std::get_if<Pow2Count>(&spec_)) {
    if (!(p->coeff > 0.0) || !(p->alpha >= 0.0))
      throw ArgumentError("count sequence: need coeff > 0 and alpha >= 0");
  } else if (auto* l = std::get_if<ListCount>(&spec_)) {
    if (l->tail == ListTail::zero)
      throw ArgumentError("count sequence: zero tail not allowed (values must be >= 1)");
    for (auto v : l->values)
      if (v < 1) throw ArgumentError("count sequence: value must be >= 1");
  }
}

ExtCount CountSequence::eval(const ExtCount& i) const {
  if (i.is_zero()) throw ArgumentError("sequence index must be >= 1");
  return std::visit(
      [&](const auto& s) -> ExtCount {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, ConstantCount>) {
          return ExtCount(s.v);
        } else if constexpr (std::is_same_v<T, Pow2Count>) {
          double e = s.coeff * std::exp(s.alpha * i.ln());
          if (s.ceil_exponent) e = std::ceil(e);
          return ExtCount::from_log2(e);
        } else {
          const ListCount& l = static_cast<const ListCount&>(s);
          if (i.fits_uint64()) {
            std::uint64_t n = i.to_uint64();
            if (n <= l.values.size()) return ExtCount(l.values[n - 1]);
          }
          if (l.tail == ListTail::repeat_last) {
            if (l.values.empty()) throw ArgumentError("count sequence: empty with repeat_last");
            return ExtCount(l.values.back());
          }
          throw ArgumentError("count sequence: index beyond table");
        }
      },
      spec_);
}

bool CountSequence::is_nondecreasing() const {
  if (auto* l = std::get_if<ListCount>(&spec_)) {
    for (std::size_t k = 1; k < l->values.size(); ++k)
      if (l->values[k] < l->values[k - 1]) return false;
  }
  return true;
}

void CountSequence::require_strictly_increasing(std::uint64_t prefix) const {
  for (std::uint64_t i = 1; i < prefix; ++i) {
    if (!(eval(ExtCount(i)) < eval(ExtCount(i + 1))))
      throw ArgumentError("sequence must be strictly increasing");
  }
}

}  // namespace tbrw
