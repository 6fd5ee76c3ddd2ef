#include "tbrw/engine.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "dense_ops.hpp"
#include "tbrw/errors.hpp"

namespace tbrw {

std::string mode_name(const EngineMode& mode) {
  if (std::holds_alternative<ExactParams>(mode)) return "exact";
  if (std::holds_alternative<ShortcutParams>(mode)) return "shortcut";
  return "lumped";
}

ExtCount mixing_threshold(const ExtCount& vertex_count, double epsilon,
                          ShortcutParams::Policy policy, double fast_coefficient) {
  if (!(epsilon > 0.0 && epsilon < 1.0))
    throw ArgumentError("mixing_threshold: epsilon must lie in (0, 1)");
  if (vertex_count.is_zero()) throw ArgumentError("mixing_threshold: vertex count must be >= 1");
  if (!(fast_coefficient > 0.0))
    throw ArgumentError("mixing_threshold: fast coefficient must be positive");
  double lneps = std::log(1.0 / epsilon);
  double lv = vertex_count.log2();
  if (lv <= 20.0) {
    double vd = vertex_count.to_double();
    double val = policy == ShortcutParams::Policy::rigorous
                     ? 2.0 * vd * vd * lneps
                     : fast_coefficient * vd * lv * lv * lneps;
    return ExtCount::from_double(std::ceil(val));
  }
  double lg = policy == ShortcutParams::Policy::rigorous
                  ? 1.0 + 2.0 * lv + std::log2(lneps)
                  : std::log2(fast_coefficient) + lv + 2.0 * std::log2(lv) + std::log2(lneps);
  return ExtCount::from_log2(lg);
}

std::optional<ExtCount> sample_next_growth_time(const LawSequence& law, const ExtCount& after,
                                                RngStream& rng) {
  ExtCount cur = after;
  while (true) {
    double env = law.growth_prob_tail_sup(cur + ExtCount(1));
    if (env < kProbabilityFloor) return std::nullopt;
    ExtCount cand = cur + rng.geometric(env);
    double p = law.growth_prob(cand);
    if (p >= env || rng.next_unit() * env < p) return cand;
    cur = cand;
  }
}

// --- WeightedSlotSampler ----------------------------------------------------

std::size_t WeightedSlotSampler::add_slot(const ExtCount& w) {
  std::size_t slot = weight_.size();
  weight_.push_back(ExtCount());
  // Fenwick node i covers (i - lowbit(i), i]; a fresh zero-weight element
  // makes the new node the sum of the nodes it absorbs.
  std::size_t i = slot + 1;
  ExtCount node;
  std::size_t low = i & (~i + 1);
  for (std::size_t j = i - 1; j > i - low; j -= j & (~j + 1)) node = node + node_[j];
  if (node_.empty()) node_.push_back(ExtCount());  // index 0 unused
  node_.push_back(node);
  if (!w.is_zero()) set_weight(slot, w);
  return slot;
}

void WeightedSlotSampler::node_shift(std::size_t slot, const ExtCount& up, const ExtCount& down) {
  for (std::size_t i = slot + 1; i < node_.size(); i += i & (~i + 1)) {
    if (!up.is_zero()) node_[i] = node_[i] + up;
    // Clamp at zero: mathematically the node stays nonnegative, but rounding
    // in the extended-count sum can leave it a hair below the decrement.
    if (!down.is_zero()) node_[i] = node_[i] > down ? node_[i] - down : ExtCount();
  }
  if (!up.is_zero()) total_ = total_ + up;
  if (!down.is_zero()) total_ = total_ > down ? total_ - down : ExtCount();
}

void WeightedSlotSampler::set_weight(std::size_t slot, const ExtCount& w) {
  if (slot >= weight_.size()) throw ArgumentError("set_weight: unknown slot");
  ExtCount old = weight_[slot];
  weight_[slot] = w;
  if (w >= old) {
    node_shift(slot, w - old, ExtCount());
  } else {
    node_shift(slot, ExtCount(), old - w);
  }
}

std::size_t WeightedSlotSampler::sample(RngStream& rng) const {
  std::size_t n = weight_.size();
  if (n == 0 || total_.is_zero()) throw StateError("sample: no positive weight");
  double u = rng.next_unit();
  ExtCount rem = ExtCount::from_double(u) * total_;
  std::size_t pos = 0;
  for (std::size_t step = std::bit_floor(n); step > 0; step >>= 1) {
    std::size_t next = pos + step;
    if (next <= n && !(rem < node_[next])) {
      rem = rem - node_[next];
      pos = next;
    }
  }
  std::size_t slot = pos < n ? pos : n - 1;
  while (slot + 1 < n && weight_[slot].is_zero()) ++slot;
  while (slot > 0 && weight_[slot].is_zero()) --slot;
  if (weight_[slot].is_zero()) throw StateError("sample: landed on empty support");
  return slot;
}

// --- Engine -----------------------------------------------------------------

Engine::Engine(const LawSequence& law, CompressedTree tree, VertexRef start, std::uint64_t seed,
               EngineMode mode)
    : law_(law), tree_(std::move(tree)), walker_(start), rng_(seed), mode_(mode) {
  tree_.depth_of(start);  // validates the start reference
  if (const ShortcutParams* sp = std::get_if<ShortcutParams>(&mode_)) {
    if (!(sp->epsilon > 0.0 && sp->epsilon < 1.0))
      throw ArgumentError("shortcut epsilon must lie in (0, 1)");
    if (sp->fallback_cap < 1) throw ArgumentError("shortcut fallback_cap must be >= 1");
    use_slots_ = true;
    rebuild_slots();
  } else if (const LumpedParams* lp = std::get_if<LumpedParams>(&mode_)) {
    if (lp->max_states == 0) throw ArgumentError("lumped max_states must be >= 1");
  }
}

ExtCount Engine::entity_weight(VertexId v) const {
  const ExtCount& d = tree_.vertex(v).degree;
  return v == tree_.root() ? d + ExtCount(1) : d;
}

void Engine::rebuild_slots() {
  sampler_ = WeightedSlotSampler();
  slot_entity_.clear();
  vertex_slot_.clear();
  bundle_slot_.clear();
  for (VertexId v = 0; v < tree_.materialized_count(); ++v) {
    vertex_slot_.push_back(sampler_.add_slot(entity_weight(v)));
    slot_entity_.push_back(VertexRef::vertex(v));
  }
  for (BundleId b = 0; b < tree_.bundle_slots(); ++b) {
    const LeafBundle& lb = tree_.bundle(b);
    bundle_slot_.push_back(sampler_.add_slot(lb.alive ? lb.multiplicity : ExtCount()));
    slot_entity_.push_back(VertexRef::member(b));
  }
}

void Engine::sync_slots(const GrowthEvent& ev) {
  if (ev.source_bundle) {
    BundleId sb = *ev.source_bundle;
    const LeafBundle& lb = tree_.bundle(sb);
    sampler_.set_weight(bundle_slot_[sb], lb.alive ? lb.multiplicity : ExtCount());
    if (ev.parent != vertex_slot_.size())
      throw StateError("slot bookkeeping out of sync with materialization");
    vertex_slot_.push_back(sampler_.add_slot(ExtCount()));
    slot_entity_.push_back(VertexRef::vertex(ev.parent));
  }
  sampler_.set_weight(vertex_slot_[ev.parent], entity_weight(ev.parent));
  if (ev.bundle != bundle_slot_.size())
    throw StateError("slot bookkeeping out of sync with growth");
  bundle_slot_.push_back(sampler_.add_slot(tree_.bundle(ev.bundle).multiplicity));
  slot_entity_.push_back(VertexRef::member(ev.bundle));
}

void Engine::check_observers(std::span<Observer* const> observers) const {
  bool exact = std::holds_alternative<ExactParams>(mode_);
  for (Observer* o : observers) {
    if (o->requires_exact_steps() && !exact)
      throw ArgumentError("observer needs per-step playback; run it on the exact engine");
    if (o->requires_single_leaf_growth() && !law_.single_leaf_only())
      throw ArgumentError("observer assumes single-leaf growth; this law can add more");
  }
}

void Engine::ensure_pending_growth() {
  if (pending_growth_ || growth_exhausted_) return;
  pending_growth_ = sample_next_growth_time(law_, time_, rng_);
  if (!pending_growth_) growth_exhausted_ = true;
}

GrowthEvent Engine::apply_growth(const ExtCount& n) {
  ExtCount z = law_.growth_value(n);
  GrowthEvent ev = tree_.grow(walker_, z, n);
  walker_ = VertexRef::vertex(ev.parent);
  ++growths_;
  if (use_slots_) sync_slots(ev);
  return ev;
}

bool Engine::exact_step(std::span<Observer* const> observers) {
  ensure_pending_growth();
  ExtCount next = time_ + ExtCount(1);
  bool is_growth = pending_growth_ && *pending_growth_ == next;
  GrowthEvent ev;
  if (is_growth) {
    ev = apply_growth(next);
    pending_growth_.reset();
  }
  VertexRef from = walker_;
  walker_ = tree_.sample_neighbor(walker_, rng_);
  time_ = next;
  if (is_growth)
    for (Observer* o : observers) o->on_growth(*this, ev);
  for (Observer* o : observers) o->on_step(*this, from, walker_);
  return is_growth;
}

void Engine::place_stationary() { walker_ = slot_entity_[sampler_.sample(rng_)]; }

LumpedDistribution lumped_walk_distribution(const CompressedTree& tree, VertexRef start,
                                            const ExtCount& t, std::uint64_t max_states) {
  std::size_t nv = tree.materialized_count();
  std::vector<std::size_t> bstate(tree.bundle_slots(), SIZE_MAX);
  std::vector<BundleId> state_bundle;
  std::size_t S = nv;
  for (BundleId b = 0; b < tree.bundle_slots(); ++b) {
    if (!tree.bundle(b).alive) continue;
    bstate[b] = S++;
    state_bundle.push_back(b);
  }
  if (S > max_states)
    throw StateError("lumped transport needs " + std::to_string(S) + " states, budget " +
                     std::to_string(max_states));

  std::vector<double> M(S * S, 0.0);
  VertexId root = tree.root();
  for (VertexId u = 0; u < nv; ++u) {
    const MaterializedVertex& mv = tree.vertex(u);
    ExtCount w = u == root ? mv.degree + ExtCount(1) : mv.degree;
    double unit = (ExtCount(1) / w).to_double();
    double* row = &M[u * S];
    if (u == root)
      row[u] += unit;
    else
      row[mv.parent] += unit;
    for (VertexId c : mv.child_vertices) row[c] += unit;
    for (BundleId b : mv.child_bundles)
      row[bstate[b]] += (tree.bundle(b).multiplicity / w).to_double();
  }
  for (std::size_t k = 0; k < state_bundle.size(); ++k)
    M[(nv + k) * S + tree.bundle(state_bundle[k]).parent] = 1.0;  // leaves step to the parent

  std::size_t s0;
  if (start.is_vertex()) {
    if (start.index >= nv) throw InvalidTreeError("reference to unknown vertex");
    s0 = start.index;
  } else {
    if (start.index >= bstate.size() || bstate[start.index] == SIZE_MAX)
      throw InvalidTreeError("reference to a dead bundle");
    s0 = bstate[start.index];
  }
  std::vector<double> r(S, 0.0);
  r[s0] = 1.0;

  // Beyond 2^62 steps the segment distribution is stationary to double
  // precision for any state count within the budget; clamp the exponent.
  std::uint64_t steps = t.fits_uint64() ? t.to_uint64() : (std::uint64_t{1} << 62);
  if (steps <= 512) {
    for (std::uint64_t s = 0; s < steps; ++s) detail::dense_vec_mul_renorm(r, M, S);
  } else {
    std::uint64_t bits = steps;
    while (bits > 0) {
      if (bits & 1) detail::dense_vec_mul_renorm(r, M, S);
      bits >>= 1;
      if (bits > 0) M = detail::dense_mul_renorm(M, M, S);
    }
  }

  LumpedDistribution out;
  out.vertex_mass.assign(r.begin(), r.begin() + static_cast<std::ptrdiff_t>(nv));
  for (std::size_t k = 0; k < state_bundle.size(); ++k)
    out.bundle_mass.push_back({state_bundle[k], r[nv + k]});
  return out;
}

VertexRef Engine::lumped_place(const ExtCount& steps, std::uint64_t max_states) {
  LumpedDistribution d = lumped_walk_distribution(tree_, walker_, steps, max_states);

  double u = rng_.next_unit();
  double acc = 0.0;
  std::optional<VertexRef> pick, last;
  for (std::size_t v = 0; v < d.vertex_mass.size() && !pick; ++v) {
    if (d.vertex_mass[v] <= 0.0) continue;
    last = VertexRef::vertex(static_cast<VertexId>(v));
    acc += d.vertex_mass[v];
    if (u < acc) pick = last;
  }
  for (std::size_t k = 0; k < d.bundle_mass.size() && !pick; ++k) {
    if (d.bundle_mass[k].second <= 0.0) continue;
    last = VertexRef::member(d.bundle_mass[k].first);
    acc += d.bundle_mass[k].second;
    if (u < acc) pick = last;
  }
  if (!pick) pick = last;
  if (!pick) throw StateError("lumped transport produced an empty distribution");
  return *pick;
}

bool Engine::advance_jump(std::span<Observer* const> observers) {
  ensure_pending_growth();
  if (!pending_growth_) return false;
  ExtCount T = *pending_growth_;
  ExtCount gap = T - time_ - ExtCount(1);
  if (!gap.is_zero()) {
    if (const ShortcutParams* sp = std::get_if<ShortcutParams>(&mode_)) {
      ExtCount thr =
          mixing_threshold(tree_.vertex_count(), sp->epsilon, sp->policy, sp->fast_coefficient);
      if (gap >= thr) {
        place_stationary();
      } else if (gap.fits_uint64() && gap.to_uint64() <= sp->fallback_cap) {
        walker_ = tree_.walk_many(walker_, gap.to_uint64(), rng_);
      } else if (sp->lumped_fallback_max_states > 0) {
        walker_ = lumped_place(gap, sp->lumped_fallback_max_states);
      } else {
        throw BudgetExceededError("inter-growth segment of " + gap.to_string() +
                                  " steps exceeds fallback_cap " +
                                  std::to_string(sp->fallback_cap) +
                                  "; enable matrix transport or relax epsilon");
      }
    } else {
      walker_ = lumped_place(gap, std::get<LumpedParams>(mode_).max_states);
    }
  }
  GrowthEvent ev = apply_growth(T);
  walker_ = tree_.sample_neighbor(walker_, rng_);
  time_ = T;
  pending_growth_.reset();
  for (Observer* o : observers) o->on_growth(*this, ev);
  return true;
}

std::uint64_t Engine::run_growths(std::uint64_t growth_budget,
                                  std::span<Observer* const> observers, std::uint64_t step_cap) {
  check_observers(observers);
  for (Observer* o : observers) o->on_start(*this);
  std::uint64_t fired = 0;
  if (std::holds_alternative<ExactParams>(mode_)) {
    std::uint64_t stepped = 0;
    while (fired < growth_budget) {
      ensure_pending_growth();
      if (!pending_growth_) break;
      if (exact_step(observers)) ++fired;
      ++stepped;
      if (step_cap > 0 && stepped >= step_cap && fired < growth_budget)
        throw BudgetExceededError("exact run hit the step cap of " + std::to_string(step_cap) +
                                  " before the growth budget");
    }
  } else {
    while (fired < growth_budget) {
      if (!advance_jump(observers)) break;
      ++fired;
    }
  }
  for (Observer* o : observers) o->on_finish(*this);
  return fired;
}

void Engine::run_steps(std::uint64_t steps, std::span<Observer* const> observers) {
  if (!std::holds_alternative<ExactParams>(mode_))
    throw ArgumentError("run_steps requires the exact engine");
  check_observers(observers);
  for (Observer* o : observers) o->on_start(*this);
  for (std::uint64_t s = 0; s < steps; ++s) exact_step(observers);
  for (Observer* o : observers) o->on_finish(*this);
}

}  // namespace tbrw
