#include "tbrw/laws.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "tbrw/errors.hpp"
#include "tbrw/oracles.hpp"

namespace tbrw {

namespace {

// ceil(ln n); zero at n = 1
ExtCount ceil_ln(const ExtCount& n) {
  double l = n.ln();
  if (l <= 0.0) return ExtCount();
  return ExtCount::from_double(std::ceil(l));
}

double power_prob(double c, double gamma, const ExtCount& n) {
  double d = n.to_double();
  if (std::isfinite(d)) return std::min(1.0, c * std::pow(d, -gamma));
  double lp = std::log(c) - gamma * n.ln();
  return (lp > -745.0) ? std::min(1.0, std::exp(lp)) : 0.0;
}

struct TableRowView {
  ExtCount value;
  double prob = 0.0;
  bool defined = true;
};

TableRowView table_row(const TableLaw& t, const ExtCount& n) {
  if (n.fits_uint64()) {
    std::uint64_t k = n.to_uint64();
    if (k >= 1 && k <= t.rows.size()) return {ExtCount(t.rows[k - 1].value), t.rows[k - 1].prob};
  }
  switch (t.tail) {
    case ListTail::zero: return {ExtCount(), 0.0};
    case ListTail::repeat_last:
      if (t.rows.empty()) throw ArgumentError("table law: empty table with repeat_last");
      return {ExtCount(t.rows.back().value), t.rows.back().prob};
    default: throw ArgumentError("table law: step index beyond table");
  }
}

}  // namespace

LawSequence::LawSequence(LawSpec spec, ExtCount shift)
    : spec_(std::move(spec)), shift_(shift) {
  if (auto* b = std::get_if<BernoulliPowerLaw>(&spec_)) {
    if (!(b->c > 0.0) || !(b->gamma >= 0.0))
      throw ArgumentError("bernoulli-power law: need c > 0 and gamma >= 0");
  } else if (auto* l = std::get_if<LogBurstLaw>(&spec_)) {
    if (!(l->delta > 0.0)) throw ArgumentError("log-burst law: need delta > 0");
  } else if (auto* wb = std::get_if<WeightedBurstLaw>(&spec_)) {
    if (!wb->w.is_nondecreasing())
      throw ArgumentError("weighted-burst law: weight sequence must be nondecreasing");
  } else if (auto* c = std::get_if<ConstantLaw>(&spec_)) {
    if (!(c->p >= 0.0 && c->p <= 1.0)) throw ArgumentError("constant law: p outside [0,1]");
  } else if (auto* t = std::get_if<TableLaw>(&spec_)) {
    for (const auto& row : t->rows)
      if (!(row.prob >= 0.0 && row.prob <= 1.0))
        throw ArgumentError("table law: probability outside [0,1]");
  }
}

LawSequence LawSequence::shifted(const ExtCount& by) const {
  return LawSequence(spec_, shift_ + by);
}

ExtCount LawSequence::sample_z(const ExtCount& n, RngStream& rng) const {
  if (!rng.bernoulli(growth_prob(n))) return ExtCount();
  return growth_value(n);
}

Moments LawSequence::moments(const ExtCount& n) const {
  if (n.is_zero()) throw ArgumentError("moments: step index must be >= 1");
  ExtCount g = global(n);
  return std::visit(
      [&](const auto& s) -> Moments {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, BernoulliPowerLaw>) {
          double p = power_prob(s.c, s.gamma, g);
          return {ExtCount::from_double(p), 1.0 - p};
        } else if constexpr (std::is_same_v<T, LogBurstLaw>) {
          ExtCount z = ceil_ln(g);
          if (z.is_zero()) return {ExtCount(), 1.0};
          double p = power_prob(1.0, s.delta, g);
          return {z * ExtCount::from_double(p), 1.0 - p};
        } else if constexpr (std::is_same_v<T, WeightedBurstLaw>) {
          double p = s.p.eval(g);
          return {s.w.eval(g) * ExtCount::from_double(p), 1.0 - p};
        } else if constexpr (std::is_same_v<T, ConstantLaw>) {
          if (s.z == 0) return {ExtCount(), 1.0};
          return {ExtCount(s.z) * ExtCount::from_double(s.p), 1.0 - s.p};
        } else {
          TableRowView row = table_row(static_cast<const TableLaw&>(s), g);
          if (row.value.is_zero()) return {ExtCount(), 1.0};
          return {row.value * ExtCount::from_double(row.prob), 1.0 - row.prob};
        }
      },
      spec_);
}

double LawSequence::cumulative_mean(std::uint64_t n) const {
  if (n < 1) throw ArgumentError("cumulative_mean: horizon must be >= 1");
  if (n > 100'000'000) throw ArgumentError("cumulative_mean: horizon beyond direct summation");
  double sum = 0.0, comp = 0.0;
  for (std::uint64_t k = 1; k <= n; ++k) {
    double m = moments(ExtCount(k)).m.to_double();
    if (!std::isfinite(m)) return std::numeric_limits<double>::infinity();
    double y = m - comp;
    double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
  return sum;
}

double LawSequence::growth_prob(const ExtCount& n) const {
  if (n.is_zero()) throw ArgumentError("growth_prob: step index must be >= 1");
  ExtCount g = global(n);
  return std::visit(
      [&](const auto& s) -> double {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, BernoulliPowerLaw>) {
          return power_prob(s.c, s.gamma, g);
        } else if constexpr (std::is_same_v<T, LogBurstLaw>) {
          if (ceil_ln(g).is_zero()) return 0.0;
          return power_prob(1.0, s.delta, g);
        } else if constexpr (std::is_same_v<T, WeightedBurstLaw>) {
          return s.p.eval(g);
        } else if constexpr (std::is_same_v<T, ConstantLaw>) {
          return s.z == 0 ? 0.0 : s.p;
        } else {
          TableRowView row = table_row(static_cast<const TableLaw&>(s), g);
          return row.value.is_zero() ? 0.0 : row.prob;
        }
      },
      spec_);
}

double LawSequence::growth_prob_tail_sup(const ExtCount& n) const {
  if (n.is_zero()) throw ArgumentError("growth_prob_tail_sup: step index must be >= 1");
  ExtCount g = global(n);
  return std::visit(
      [&](const auto& s) -> double {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, BernoulliPowerLaw>) {
          return power_prob(s.c, s.gamma, g);  // nonincreasing
        } else if constexpr (std::is_same_v<T, LogBurstLaw>) {
          // the n = 1 step never grows; the sup of the tail sits at max(g, 2)
          ExtCount at = (g < ExtCount(2)) ? ExtCount(2) : g;
          return power_prob(1.0, s.delta, at);
        } else if constexpr (std::is_same_v<T, WeightedBurstLaw>) {
          return s.p.tail_sup(g);
        } else if constexpr (std::is_same_v<T, ConstantLaw>) {
          return s.z == 0 ? 0.0 : s.p;
        } else {
          const TableLaw& t = static_cast<const TableLaw&>(s);
          double sup = 0.0;
          std::uint64_t from = g.fits_uint64() ? g.to_uint64() : t.rows.size() + 1;
          for (std::uint64_t k = from; k <= t.rows.size(); ++k)
            if (t.rows[k - 1].value >= 1) sup = std::max(sup, t.rows[k - 1].prob);
          if (t.tail == ListTail::repeat_last && !t.rows.empty() && t.rows.back().value >= 1)
            sup = std::max(sup, t.rows.back().prob);
          return sup;
        }
      },
      spec_);
}

ExtCount LawSequence::growth_value(const ExtCount& n) const {
  if (n.is_zero()) throw ArgumentError("growth_value: step index must be >= 1");
  ExtCount g = global(n);
  return std::visit(
      [&](const auto& s) -> ExtCount {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, BernoulliPowerLaw>) {
          return ExtCount(1);
        } else if constexpr (std::is_same_v<T, LogBurstLaw>) {
          return ceil_ln(g);
        } else if constexpr (std::is_same_v<T, WeightedBurstLaw>) {
          return s.w.eval(g);
        } else if constexpr (std::is_same_v<T, ConstantLaw>) {
          return ExtCount(s.z);
        } else {
          return table_row(static_cast<const TableLaw&>(s), g).value;
        }
      },
      spec_);
}

bool LawSequence::single_leaf_only() const {
  return std::visit(
      [](const auto& s) -> bool {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, BernoulliPowerLaw>) {
          return true;
        } else if constexpr (std::is_same_v<T, LogBurstLaw>) {
          return false;
        } else if constexpr (std::is_same_v<T, WeightedBurstLaw>) {
          const WeightedBurstLaw& wb = static_cast<const WeightedBurstLaw&>(s);
          if (auto* c = std::get_if<ConstantCount>(&wb.w.spec())) return c->v == 1;
          return false;
        } else if constexpr (std::is_same_v<T, ConstantLaw>) {
          return static_cast<const ConstantLaw&>(s).z <= 1;
        } else {
          const TableLaw& t = static_cast<const TableLaw&>(s);
          for (const auto& row : t.rows)
            if (row.value > 1) return false;
          return true;
        }
      },
      spec_);
}

std::string LawSequence::describe() const {
  std::ostringstream os;
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, BernoulliPowerLaw>) {
          os << "bernoulli-power(c=" << s.c << ",gamma=" << s.gamma << ")";
        } else if constexpr (std::is_same_v<T, LogBurstLaw>) {
          os << "log-burst(delta=" << s.delta << ")";
        } else if constexpr (std::is_same_v<T, WeightedBurstLaw>) {
          os << "weighted-burst";
        } else if constexpr (std::is_same_v<T, ConstantLaw>) {
          os << "constant(p=" << s.p << ",z=" << s.z << ")";
        } else {
          os << "table(" << static_cast<const TableLaw&>(s).rows.size() << " rows)";
        }
      },
      spec_);
  if (!shift_.is_zero()) os << " shift=" << shift_.to_string();
  return os.str();
}

const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::satisfied_trend: return "satisfied-trend";
    case Verdict::violated_trend: return "violated-trend";
    default: return "inconclusive";
  }
}

namespace {

constexpr double kWobble = 1.05;  // tolerated non-monotonicity in trend tests

std::vector<double> tail_values(const std::vector<TraceEntry>& trace, bool use_term) {
  std::vector<double> v;
  std::size_t from = trace.size() / 2;
  for (std::size_t i = from; i < trace.size(); ++i)
    v.push_back(use_term ? trace[i].term : trace[i].partial);
  return v;
}

// Trend of a nonnegative statistic that should decay to zero.
Verdict classify_decay(const std::vector<TraceEntry>& trace, double factor) {
  std::vector<double> v = tail_values(trace, /*use_term=*/true);
  if (v.size() < 2) return Verdict::inconclusive;
  bool all_zero = true, mono_down = true, mono_up = true;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] > 1e-300) all_zero = false;
    if (i > 0) {
      if (v[i] > v[i - 1] * kWobble) mono_down = false;
      if (v[i] < v[i - 1] / kWobble) mono_up = false;
    }
  }
  if (all_zero) return Verdict::satisfied_trend;
  if (mono_down && v.front() >= factor * v.back()) return Verdict::satisfied_trend;
  if (mono_up && v.back() >= factor * v.front() && v.back() > 0.0)
    return Verdict::violated_trend;
  return Verdict::inconclusive;
}

enum class SumTrend { plateau, diverging, unclear };

SumTrend classify_sum(const std::vector<TraceEntry>& trace, double plateau_eps) {
  if (trace.size() < 4) return SumTrend::unclear;
  double s_mid = trace[trace.size() / 2].partial;
  double s_end = trace.back().partial;
  if (!std::isfinite(s_end)) return SumTrend::diverging;
  double growth = s_end - s_mid;
  if (growth <= plateau_eps * std::max(1.0, std::abs(s_end))) return SumTrend::plateau;
  if (growth >= 0.25 * std::max(1.0, std::abs(s_mid))) return SumTrend::diverging;
  return SumTrend::unclear;
}

bool tail_has_flag(const std::vector<TraceEntry>& trace, int flag) {
  for (std::size_t i = trace.size() / 2; i < trace.size(); ++i)
    if (trace[i].flag == flag) return true;
  return false;
}

}  // namespace

ConditionReport check_recurrence_conditions(const LawSequence& law, std::uint64_t horizon,
                                            const TrendOptions& opts) {
  if (horizon < 10) throw ArgumentError("check_recurrence_conditions: horizon must be >= 10");

  // log-spaced grid including the horizon
  std::vector<std::uint64_t> grid;
  double lh = std::log(static_cast<double>(horizon));
  for (std::size_t j = 1; j <= opts.grid_points; ++j) {
    auto n = static_cast<std::uint64_t>(
        std::llround(std::exp(lh * static_cast<double>(j) / opts.grid_points)));
    n = std::max<std::uint64_t>(n, 1);
    if (grid.empty() || n > grid.back()) grid.push_back(n);
  }
  if (grid.back() != horizon) grid.push_back(horizon);

  ConditionReport report;
  std::vector<double> qs;
  bool mean_finite = true;
  double msum = 0.0, comp = 0.0;
  std::size_t gi = 0;
  for (std::uint64_t k = 1; k <= horizon && gi < grid.size(); ++k) {
    Moments mo = law.moments(ExtCount(k));
    double m = mo.m.to_double();
    if (!std::isfinite(m)) mean_finite = false;
    double y = m - comp, t = msum + y;
    comp = (t - msum) - y;
    msum = t;
    if (k == grid[gi]) {
      double s = (1.0 - mo.q) * msum * msum;
      report.trace.push_back({ExtCount(k), s, s, 0});
      qs.push_back(mo.q);
      ++gi;
    }
  }

  // no-growth probability must be nondecreasing and approach one
  bool q_monotone = true;
  for (std::size_t i = 1; i < qs.size(); ++i)
    if (qs[i] < qs[i - 1] - 1e-9) q_monotone = false;
  double rem_first = 1.0 - qs.front(), rem_last = 1.0 - qs.back();
  Verdict vq;
  if (!q_monotone) {
    vq = Verdict::violated_trend;
  } else if (rem_last <= kProbabilityFloor || rem_last * opts.improvement_factor <= rem_first) {
    vq = Verdict::satisfied_trend;
  } else if (rem_last * kWobble >= rem_first) {
    vq = Verdict::violated_trend;  // no progress toward one
  } else {
    vq = Verdict::inconclusive;
  }

  Verdict vs = classify_decay(report.trace, opts.improvement_factor);
  Verdict vm = mean_finite ? Verdict::satisfied_trend : Verdict::violated_trend;

  if (vm == Verdict::violated_trend || vq == Verdict::violated_trend ||
      vs == Verdict::violated_trend) {
    report.verdict = Verdict::violated_trend;
  } else if (vm == Verdict::satisfied_trend && vq == Verdict::satisfied_trend &&
             vs == Verdict::satisfied_trend) {
    report.verdict = Verdict::satisfied_trend;
  } else {
    report.verdict = Verdict::inconclusive;
  }

  std::ostringstream notes;
  notes << "finite-mean: " << verdict_name(vm) << "; no-growth-monotone: " << verdict_name(vq)
        << "; statistic-decay: " << verdict_name(vs) << "; horizon=" << horizon;
  report.notes = notes.str();
  return report;
}

TransienceReport check_transience_conditions(const ProbSequence& p, const CountSequence& w,
                                             const CountSequence& a, std::uint64_t i_max,
                                             const TrendOptions& opts) {
  if (i_max < 4) throw ArgumentError("check_transience_conditions: i_max must be >= 4");
  if (!w.is_nondecreasing())
    throw ArgumentError("check_transience_conditions: w must be nondecreasing");
  a.require_strictly_increasing(std::min<std::uint64_t>(i_max + 1, 64));

  TransienceReport rep;

  // --- sum of escape-failure probabilities P(tau_i > a_i) -------------------
  {
    double sum = 0.0;
    std::size_t exact_terms = 0, bound_terms = 0, unavailable = 0;
    for (std::uint64_t i = 1; i <= i_max; ++i) {
      ExtCount ai = a.eval(ExtCount(i));
      TraceEntry e{ExtCount(i), 0.0, 0.0, 2};
      bool dp_feasible = ai.fits_uint64() && ai.to_uint64() <= 2'000'000 &&
                         static_cast<double>(ai.to_uint64()) * static_cast<double>(i) <= 5e7;
      if (dp_feasible) {
        std::uint64_t j = ai.to_uint64();
        std::vector<double> pv(j);
        for (std::uint64_t k = 0; k < j; ++k) pv[k] = p.eval(ExtCount(k + 1));
        e.term = poisson_binomial_cdf(pv, i - 1);
        e.flag = 0;
        ++exact_terms;
      } else {
        PartialSum ps = p.partial_sum(ai);
        ChebyshevBound cb =
            chebyshev_r_bound_from_psum(ps.value - ps.error_bound, i);
        if (cb.applicable) {
          e.term = cb.value;
          e.flag = 1;
          ++bound_terms;
        } else {
          ++unavailable;
        }
      }
      if (e.flag != 2) sum += e.term;
      e.partial = sum;
      rep.escape_sum.trace.push_back(e);
    }
    bool tail_gap = tail_has_flag(rep.escape_sum.trace, 2);
    SumTrend t = classify_sum(rep.escape_sum.trace, opts.plateau_eps);
    if (tail_gap) {
      rep.escape_sum.verdict = Verdict::inconclusive;
    } else if (t == SumTrend::plateau) {
      rep.escape_sum.verdict = Verdict::satisfied_trend;
    } else if (t == SumTrend::diverging && bound_terms == 0) {
      rep.escape_sum.verdict = Verdict::violated_trend;  // exact terms only
    } else {
      rep.escape_sum.verdict = Verdict::inconclusive;
    }
    std::ostringstream notes;
    notes << "exact-terms=" << exact_terms << " bound-terms=" << bound_terms
          << " unavailable=" << unavailable;
    rep.escape_sum.notes = notes.str();
  }

  // --- sum of backtrack odds (a_i - a_{i-1}) / (w_{i-1} + 1) ----------------
  {
    double sum = 0.0;
    for (std::uint64_t i = 2; i <= i_max; ++i) {
      ExtCount delta = a.eval(ExtCount(i)) - a.eval(ExtCount(i - 1));
      ExtCount denom = w.eval(ExtCount(i - 1)) + ExtCount(1);
      double term = (delta / denom).to_double();
      sum += term;
      rep.backtrack_sum.trace.push_back({ExtCount(i), term, sum, 0});
    }
    SumTrend t = classify_sum(rep.backtrack_sum.trace, opts.plateau_eps);
    rep.backtrack_sum.verdict = (t == SumTrend::plateau)    ? Verdict::satisfied_trend
                                : (t == SumTrend::diverging) ? Verdict::violated_trend
                                                             : Verdict::inconclusive;
    rep.backtrack_sum.notes = "terms start at i=2";
  }

  // --- sum of min(p_n, p_{n+1}) up to a_{i_max}, must diverge ---------------
  {
    ExtCount top = a.eval(ExtCount(i_max));
    double l2 = std::max(top.log2(), 3.0);
    double prev = 0.0;
    std::size_t approx = 0;
    for (std::size_t g = 1; g <= opts.grid_points; ++g) {
      ExtCount ng = ExtCount::from_log2(l2 * static_cast<double>(g) / opts.grid_points);
      if (g == opts.grid_points) ng = top;
      if (!rep.growth_sum.trace.empty() && !(rep.growth_sum.trace.back().n < ng)) continue;
      PartialSum ps = p.min_pair_partial_sum(ng);
      if (ps.approximate) ++approx;
      rep.growth_sum.trace.push_back(
          {ng, ps.value - prev, ps.value, ps.approximate ? 1 : 0});
      prev = ps.value;
    }
    SumTrend t = classify_sum(rep.growth_sum.trace, opts.plateau_eps);
    rep.growth_sum.verdict = (t == SumTrend::diverging)  ? Verdict::satisfied_trend
                             : (t == SumTrend::plateau)  ? Verdict::violated_trend
                                                         : Verdict::inconclusive;
    std::ostringstream notes;
    notes << "log-grid to " << top.to_string() << "; approximate-points=" << approx;
    rep.growth_sum.notes = notes.str();
  }

  if (rep.escape_sum.verdict == Verdict::satisfied_trend &&
      rep.backtrack_sum.verdict == Verdict::satisfied_trend &&
      rep.growth_sum.verdict == Verdict::satisfied_trend) {
    rep.combined = Verdict::satisfied_trend;
  } else if (rep.escape_sum.verdict == Verdict::violated_trend ||
             rep.backtrack_sum.verdict == Verdict::violated_trend ||
             rep.growth_sum.verdict == Verdict::violated_trend) {
    rep.combined = Verdict::violated_trend;
  } else {
    rep.combined = Verdict::inconclusive;
  }
  return rep;
}

}  // namespace tbrw
