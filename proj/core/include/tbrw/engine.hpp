#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "tbrw/ext_count.hpp"
#include "tbrw/laws.hpp"
#include "tbrw/rng.hpp"
#include "tbrw/tree.hpp"

namespace tbrw {

/// Advance strategies for the coupled (tree, walker) chain.
///
/// exact      - every time step is simulated and reported.
/// shortcut   - inter-growth segments are jumped: once the segment is longer
///              than the mixing threshold the walker is redrawn from the
///              frozen tree's stationary measure (TV error <= epsilon);
///              shorter segments are walked exactly, up to fallback_cap steps,
///              beyond which the dense-matrix transport is used if enabled.
/// lumped     - inter-growth segments use the exact segment-length step
///              distribution on the lumped chain (one state per materialized
///              vertex, one per live bundle), computed by repeated squaring.
struct ExactParams {};

struct ShortcutParams {
  enum class Policy { rigorous, fast };
  double epsilon = 0.01;
  Policy policy = Policy::rigorous;
  double fast_coefficient = 8.0;
  std::uint64_t fallback_cap = 1'000'000'000;
  /// 0 disables matrix transport for over-cap segments.
  std::uint64_t lumped_fallback_max_states = 0;
};

struct LumpedParams {
  std::uint64_t max_states = 400;
};

using EngineMode = std::variant<ExactParams, ShortcutParams, LumpedParams>;

std::string mode_name(const EngineMode& mode);

/// Steps after which the frozen-tree walk is within `epsilon` of stationary
/// in TV.  rigorous: ceil(2 V^2 ln(1/eps)), a worst-case bound.  fast:
/// ceil(coefficient V (log2 V)^2 ln(1/eps)), empirical and cross-validated
/// against exact runs, never used by oracle checks.
ExtCount mixing_threshold(const ExtCount& vertex_count, double epsilon,
                          ShortcutParams::Policy policy, double fast_coefficient = 8.0);

/// First time n > `after` whose leaf draw is nonzero, sampled by envelope
/// thinning: geometric proposals under sup_{m>cur} P(Z_m >= 1), accepted with
/// ratio p_n / envelope, envelope re-tightened after each rejection.  Returns
/// nullopt once the remaining growth probability falls below the
/// representable floor (no further growth will ever occur).
std::optional<ExtCount> sample_next_growth_time(const LawSequence& law, const ExtCount& after,
                                                RngStream& rng);

class Engine;

/// Receives simulation callbacks.  Growth callbacks fire in every mode;
/// per-step callbacks fire only when each step is simulated explicitly, so
/// observers that need them must veto jump modes via requires_exact_steps.
class Observer {
 public:
  virtual ~Observer() = default;
  virtual bool requires_exact_steps() const { return false; }
  virtual bool requires_single_leaf_growth() const { return false; }
  virtual void on_start(const Engine&) {}
  /// Fires after the step completing time n; `to` is the walker position.
  virtual void on_step(const Engine&, VertexRef from, VertexRef to) {
    (void)from;
    (void)to;
  }
  /// Fires after the growth at ev.time and the step that follows it; the
  /// engine's walker() is the post-step position.  Precedes on_step for the
  /// same time index.
  virtual void on_growth(const Engine&, const GrowthEvent& ev) { (void)ev; }
  virtual void on_finish(const Engine&) {}
};

/// Sampling weights over appendable slots; O(log n) weight update and draw.
/// Weights far below the running total (relative 2^-64) are absorbed by the
/// extended-count arithmetic and never sampled, matching the probability
/// floor of the rest of the toolkit.
class WeightedSlotSampler {
 public:
  std::size_t add_slot(const ExtCount& w);
  void set_weight(std::size_t slot, const ExtCount& w);
  const ExtCount& weight(std::size_t slot) const { return weight_[slot]; }
  const ExtCount& total() const { return total_; }
  std::size_t size() const { return weight_.size(); }
  /// Draws a slot with probability weight/total; consumes one stream value.
  std::size_t sample(RngStream& rng) const;

 private:
  void node_shift(std::size_t slot, const ExtCount& up, const ExtCount& down);

  std::vector<ExtCount> weight_;
  std::vector<ExtCount> node_;  // Fenwick array, 1-based
  ExtCount total_;
};

/// Exact t-step walk distribution on the lumped chain: one state per
/// materialized vertex plus one per live bundle (members of a bundle are
/// exchangeable, so per-member mass is the bundle mass over its
/// multiplicity).  Dense vector iteration for short segments, repeated
/// squaring with row renormalization beyond 512 steps.  Throws StateError
/// when the state count exceeds `max_states`.
struct LumpedDistribution {
  std::vector<double> vertex_mass;                       // indexed by vertex id
  std::vector<std::pair<BundleId, double>> bundle_mass;  // one entry per live bundle
};

LumpedDistribution lumped_walk_distribution(const CompressedTree& tree, VertexRef start,
                                            const ExtCount& t, std::uint64_t max_states);

class Engine {
 public:
  /// Takes ownership of the initial tree; the walker starts at `start`.
  Engine(const LawSequence& law, CompressedTree tree, VertexRef start, std::uint64_t seed,
         EngineMode mode);

  /// Runs until `growth_budget` further growth events have fired, growth is
  /// exhausted, or (exact mode, step_cap > 0) step_cap steps overflow, which
  /// throws BudgetExceededError.  Returns the number of growth events fired.
  std::uint64_t run_growths(std::uint64_t growth_budget, std::span<Observer* const> observers,
                            std::uint64_t step_cap = 0);

  /// Exact mode only: advances exactly `steps` time steps.
  void run_steps(std::uint64_t steps, std::span<Observer* const> observers);

  const CompressedTree& tree() const { return tree_; }
  const LawSequence& law() const { return law_; }
  const EngineMode& mode() const { return mode_; }
  VertexRef walker() const { return walker_; }
  /// Number of completed time steps; the next draw is Z_{time+1}.
  const ExtCount& time() const { return time_; }
  std::uint64_t growth_count() const { return growths_; }

 private:
  void check_observers(std::span<Observer* const> observers) const;
  void ensure_pending_growth();
  GrowthEvent apply_growth(const ExtCount& n);
  bool exact_step(std::span<Observer* const> observers);
  bool advance_jump(std::span<Observer* const> observers);
  void place_stationary();
  VertexRef lumped_place(const ExtCount& steps, std::uint64_t max_states);
  void rebuild_slots();
  void sync_slots(const GrowthEvent& ev);
  ExtCount entity_weight(VertexId v) const;

  LawSequence law_;
  CompressedTree tree_;
  VertexRef walker_;
  RngStream rng_;
  EngineMode mode_;
  ExtCount time_;
  std::uint64_t growths_ = 0;
  std::optional<ExtCount> pending_growth_;
  bool growth_exhausted_ = false;

  // Stationary-placement slots, maintained in shortcut mode only.
  bool use_slots_ = false;
  WeightedSlotSampler sampler_;
  std::vector<VertexRef> slot_entity_;
  std::vector<std::size_t> vertex_slot_;
  std::vector<std::size_t> bundle_slot_;
};

}  // namespace tbrw
