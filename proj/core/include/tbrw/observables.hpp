#pragma once

#include <cstdint>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "tbrw/engine.hpp"
#include "tbrw/ext_count.hpp"
#include "tbrw/rng.hpp"
#include "tbrw/tree.hpp"

namespace tbrw {

// --- half-edge coloring core (pure, engine-independent) ---------------------

enum class IntervalKind { good, bad };

/// An inter-growth interval is good iff delta_tau >= k^(2+delta) + 1: long
/// enough for the walk to mix before the k-th growth.
IntervalKind classify_interval(std::uint64_t k, const ExtCount& delta_tau, double delta);

/// Coloring state over entity keys (0 and 1 are the initial edge's endpoints;
/// grown leaves use 2 + bundle id).  Starts from the convention that both
/// half-edges of the initial edge are blue.
struct RedBlueState {
  std::uint64_t k = 1;
  std::uint64_t blue = 2;
  std::uint64_t red = 0;
  std::uint64_t vertex_total = 2;
  std::unordered_map<std::uint64_t, std::uint32_t> blue_degree{{0, 1}, {1, 1}};
};

/// Applies the k+1st single-leaf growth: bad intervals color both new
/// half-edges red; good intervals color the leaf-side half-edge blue and the
/// parent-side one blue with probability blue/(2k) (pre-update values), which
/// then raises the parent's blue degree.  Returns whether the parent-side
/// half-edge came out blue.
bool update_coloring(RedBlueState& state, std::uint64_t parent_key, std::uint64_t leaf_key,
                     IntervalKind kind, RngStream& coin);

/// Vertex counts by blue degree, blue-degree-0 vertices included.
std::map<std::uint32_t, std::uint64_t> blue_degree_histogram(const RedBlueState& state);

// --- window and step-log queries --------------------------------------------

struct WindowSpec {
  std::uint64_t start = 1;
  std::uint64_t length = 1;
  std::string kind;
};

struct WindowReport {
  std::uint64_t evaluated = 0;
  std::uint64_t visited = 0;
  std::uint64_t skipped = 0;  // windows not fully covered by the log
  double fraction = 0.0;
};

/// Fraction of windows [start, start+length] containing at least one logged
/// root-visit time.  Windows extending beyond [log_start, log_end] are
/// skipped and counted, never guessed.
WindowReport window_root_visit_fraction(const std::vector<std::uint64_t>& root_visit_times,
                                        const std::vector<WindowSpec>& windows,
                                        std::uint64_t log_start, std::uint64_t log_end);

/// Per-window outcome: 1 visited, 0 missed, -1 skipped (outside the log).
std::vector<int> window_visit_flags(const std::vector<std::uint64_t>& root_visit_times,
                                    const std::vector<WindowSpec>& windows,
                                    std::uint64_t log_start, std::uint64_t log_end);

struct StepRecord {
  std::uint64_t time = 0;
  VertexRef from;
  VertexRef to;
  ExtCount to_birth;
};

/// Number of steps j in [t, t+s] spent at vertices born after time t.  The
/// log must cover the whole range contiguously.
std::uint64_t red_visit_count(std::span<const StepRecord> log, std::uint64_t t, std::uint64_t s);

// --- observers --------------------------------------------------------------

/// Snapshots the tree's degree histogram at chosen growth counts (degrees
/// change only at growth events) and at the end of the run.
class DegreeDistObserver : public Observer {
 public:
  struct Snapshot {
    std::uint64_t k = 0;
    ExtCount vertex_count;
    std::map<ExtCount, ExtCount> histogram;
  };

  explicit DegreeDistObserver(std::vector<std::uint64_t> checkpoints = {});
  void on_growth(const Engine& e, const GrowthEvent& ev) override;
  void on_finish(const Engine& e) override;
  const std::vector<Snapshot>& snapshots() const { return snapshots_; }

 private:
  void take(const Engine& e);
  std::vector<std::uint64_t> checkpoints_;
  std::size_t next_ = 0;
  std::vector<Snapshot> snapshots_;
};

/// Records growth times and the rarity statistic k^(2+delta) / tau_k^gamma.
class TauObserver : public Observer {
 public:
  struct Row {
    std::uint64_t k = 0;
    ExtCount tau;
    double statistic = 0.0;
  };

  TauObserver(double delta, double gamma, std::uint64_t stride = 1);
  void on_growth(const Engine& e, const GrowthEvent& ev) override;
  void on_finish(const Engine& e) override;
  const std::vector<Row>& rows() const { return rows_; }

 private:
  double delta_, gamma_;
  std::uint64_t stride_;
  bool have_last_ = false;
  Row last_;
  std::vector<Row>& rows_ref() { return rows_; }
  std::vector<Row> rows_;
};

/// Runs the half-edge coloring over the growth-event stream.  The coin uses
/// its own stream, so the color trajectory depends only on the interval
/// lengths, never on walker positions.  Requires a fresh two-vertex run.
class RedBlueObserver : public Observer {
 public:
  struct Row {
    std::uint64_t k = 0;
    std::uint64_t blue = 0;
    std::uint64_t red = 0;
    bool good = false;
  };

  RedBlueObserver(double delta, std::uint64_t coin_seed, std::uint64_t stride = 1);
  bool requires_single_leaf_growth() const override { return true; }
  void on_start(const Engine& e) override;
  void on_growth(const Engine& e, const GrowthEvent& ev) override;
  void on_finish(const Engine& e) override;
  const std::vector<Row>& rows() const { return rows_; }
  const RedBlueState& state() const { return state_; }

 private:
  double delta_;
  RngStream coin_;
  std::uint64_t stride_;
  ExtCount tau_prev_;
  RedBlueState state_;
  std::vector<std::uint64_t> vertex_key_;  // materialized vertex id -> entity key
  bool have_last_ = false;
  Row last_;
  std::vector<Row> rows_;
};

/// Graph distance from the root to the walker at each growth time.
class DistanceObserver : public Observer {
 public:
  struct Row {
    std::uint64_t k = 0;
    ExtCount tau;
    std::uint32_t distance = 0;
  };

  explicit DistanceObserver(std::uint64_t stride = 1);
  void on_growth(const Engine& e, const GrowthEvent& ev) override;
  void on_finish(const Engine& e) override;
  const std::vector<Row>& rows() const { return rows_; }

 private:
  std::uint64_t stride_;
  bool have_last_ = false;
  Row last_;
  std::vector<Row> rows_;
};

/// Tracks the leaf fraction N(1)/|V| incrementally and asserts the
/// deterministic bound N(1) >= added - |V0| - k after every growth event.
class LeafFractionObserver : public Observer {
 public:
  struct Row {
    std::uint64_t k = 0;
    ExtCount leaves;
    ExtCount vertices;
    double fraction = 0.0;
  };

  explicit LeafFractionObserver(std::vector<std::uint64_t> checkpoints = {});
  void on_start(const Engine& e) override;
  void on_growth(const Engine& e, const GrowthEvent& ev) override;
  void on_finish(const Engine& e) override;
  const std::vector<Row>& rows() const { return rows_; }

 private:
  void take(const Engine& e, bool verify);
  std::vector<std::uint64_t> checkpoints_;
  std::size_t next_ = 0;
  ExtCount n1_, v0_, added_;
  std::uint64_t k0_ = 0;
  std::vector<Row> rows_;
};

/// Collects root-visit times for window queries.  Needs per-step playback.
class WindowObserver : public Observer {
 public:
  explicit WindowObserver(std::vector<WindowSpec> windows);
  bool requires_exact_steps() const override { return true; }
  void on_start(const Engine& e) override;
  void on_step(const Engine& e, VertexRef from, VertexRef to) override;
  void on_finish(const Engine& e) override;
  WindowReport report() const;
  std::vector<int> flags() const;
  const std::vector<WindowSpec>& windows() const { return windows_; }
  const std::vector<std::uint64_t>& visits() const { return visits_; }

 private:
  std::vector<WindowSpec> windows_;
  std::vector<std::uint64_t> visits_;
  std::uint64_t log_start_ = 1, log_end_ = 0;
};

/// Full step log for red-visit queries and debugging; refuses long runs.
class StepLogObserver : public Observer {
 public:
  explicit StepLogObserver(std::uint64_t max_records = 50'000'000);
  bool requires_exact_steps() const override { return true; }
  void on_step(const Engine& e, VertexRef from, VertexRef to) override;
  const std::vector<StepRecord>& records() const { return records_; }

 private:
  std::uint64_t max_records_;
  std::vector<StepRecord> records_;
};

/// Line-oriented event stream: `step <n> <from> <to>` per simulated step and
/// `growth <k> <time> <parent> <count>` per growth event.
class EventStreamObserver : public Observer {
 public:
  explicit EventStreamObserver(std::ostream& out) : out_(out) {}
  void on_step(const Engine& e, VertexRef from, VertexRef to) override;
  void on_growth(const Engine& e, const GrowthEvent& ev) override;

 private:
  std::ostream& out_;
};

/// Follows the vertex born at the `track_k`-th observed growth event: degree
/// samples at growth times and the first time each degree level is reached.
class TrackedVertexObserver : public Observer {
 public:
  struct DegreeSample {
    ExtCount time;
    ExtCount degree;
  };

  explicit TrackedVertexObserver(std::uint64_t track_k, std::uint64_t eta_cap = 64);
  void on_growth(const Engine& e, const GrowthEvent& ev) override;
  bool tracking() const { return have_target_; }
  const std::vector<DegreeSample>& degree_history() const { return history_; }
  /// first_reach[d] = earliest time the tracked vertex had degree >= d.
  const std::map<std::uint64_t, ExtCount>& first_reach() const { return eta_; }

 private:
  void reach_levels(const ExtCount& degree, const ExtCount& time);
  std::uint64_t track_k_, eta_cap_, seen_ = 0;
  bool have_target_ = false;
  bool materialized_ = false;
  BundleId target_bundle_ = 0;
  VertexId target_vertex_ = 0;
  ExtCount degree_;
  std::vector<DegreeSample> history_;
  std::map<std::uint64_t, ExtCount> eta_;
};

}  // namespace tbrw
