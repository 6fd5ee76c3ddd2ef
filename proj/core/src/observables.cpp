#include "tbrw/observables.hpp"

#include <algorithm>
#include <cmath>

#include "tbrw/errors.hpp"

namespace tbrw {

IntervalKind classify_interval(std::uint64_t k, const ExtCount& delta_tau, double delta) {
  if (k < 1) throw ArgumentError("classify_interval: k must be >= 1");
  if (!(delta >= 0.0)) throw ArgumentError("classify_interval: delta must be >= 0");
  double threshold = std::pow(static_cast<double>(k), 2.0 + delta) + 1.0;
  return delta_tau >= ExtCount::from_double(threshold) ? IntervalKind::good : IntervalKind::bad;
}

bool update_coloring(RedBlueState& state, std::uint64_t parent_key, std::uint64_t leaf_key,
                     IntervalKind kind, RngStream& coin) {
  std::uint64_t k_prev = state.k;
  std::uint64_t blue_prev = state.blue;
  bool parent_blue = false;
  if (kind == IntervalKind::bad) {
    state.red += 2;
  } else {
    state.blue_degree[leaf_key] += 1;
    state.blue += 1;
    double p = static_cast<double>(blue_prev) / (2.0 * static_cast<double>(k_prev));
    if (coin.bernoulli(p)) {
      state.blue_degree[parent_key] += 1;
      state.blue += 1;
      parent_blue = true;
    } else {
      state.red += 1;
    }
  }
  state.vertex_total += 1;
  state.k = k_prev + 1;
  return parent_blue;
}

std::map<std::uint32_t, std::uint64_t> blue_degree_histogram(const RedBlueState& state) {
  std::map<std::uint32_t, std::uint64_t> h;
  for (const auto& [key, b] : state.blue_degree) {
    (void)key;
    h[b] += 1;
  }
  std::uint64_t colored = state.blue_degree.size();
  if (state.vertex_total > colored) h[0] += state.vertex_total - colored;
  return h;
}

std::vector<int> window_visit_flags(const std::vector<std::uint64_t>& root_visit_times,
                                    const std::vector<WindowSpec>& windows,
                                    std::uint64_t log_start, std::uint64_t log_end) {
  std::vector<int> flags;
  flags.reserve(windows.size());
  for (const WindowSpec& w : windows) {
    if (w.length < 1) throw ArgumentError("window length must be >= 1");
    std::uint64_t end = w.start + w.length;  // inclusive window [start, start+length]
    if (end < w.start) throw ArgumentError("window range overflows");
    if (w.start < log_start || end > log_end) {
      flags.push_back(-1);
      continue;
    }
    auto it = std::lower_bound(root_visit_times.begin(), root_visit_times.end(), w.start);
    flags.push_back(it != root_visit_times.end() && *it <= end ? 1 : 0);
  }
  return flags;
}

WindowReport window_root_visit_fraction(const std::vector<std::uint64_t>& root_visit_times,
                                        const std::vector<WindowSpec>& windows,
                                        std::uint64_t log_start, std::uint64_t log_end) {
  WindowReport rep;
  for (int f : window_visit_flags(root_visit_times, windows, log_start, log_end)) {
    if (f < 0) {
      ++rep.skipped;
    } else {
      ++rep.evaluated;
      if (f == 1) ++rep.visited;
    }
  }
  rep.fraction = rep.evaluated == 0
                     ? 0.0
                     : static_cast<double>(rep.visited) / static_cast<double>(rep.evaluated);
  return rep;
}

std::uint64_t red_visit_count(std::span<const StepRecord> log, std::uint64_t t, std::uint64_t s) {
  if (log.empty()) throw ArgumentError("red_visit_count: empty step log");
  std::uint64_t first = log.front().time;
  std::uint64_t last = log.back().time;
  if (t < first || t + s > last)
    throw ArgumentError("red_visit_count: log does not cover [t, t+s]");
  std::uint64_t idx0 = t - first;
  ExtCount born_after(t);
  std::uint64_t count = 0;
  for (std::uint64_t j = 0; j <= s; ++j) {
    if (idx0 + j >= log.size() || log[idx0 + j].time != t + j)
      throw ArgumentError("red_visit_count: step log is not contiguous");
    if (log[idx0 + j].to_birth > born_after) ++count;
  }
  return count;
}

// --- DegreeDistObserver -----------------------------------------------------

DegreeDistObserver::DegreeDistObserver(std::vector<std::uint64_t> checkpoints)
    : checkpoints_(std::move(checkpoints)) {
  std::sort(checkpoints_.begin(), checkpoints_.end());
  checkpoints_.erase(std::unique(checkpoints_.begin(), checkpoints_.end()), checkpoints_.end());
}

void DegreeDistObserver::take(const Engine& e) {
  snapshots_.push_back(Snapshot{e.growth_count(), e.tree().vertex_count(),
                                e.tree().degree_histogram()});
}

void DegreeDistObserver::on_growth(const Engine& e, const GrowthEvent&) {
  std::uint64_t k = e.growth_count();
  while (next_ < checkpoints_.size() && checkpoints_[next_] < k) ++next_;
  if (next_ < checkpoints_.size() && checkpoints_[next_] == k) {
    take(e);
    ++next_;
  }
}

void DegreeDistObserver::on_finish(const Engine& e) {
  if (snapshots_.empty() || snapshots_.back().k != e.growth_count()) take(e);
}

// --- TauObserver ------------------------------------------------------------

TauObserver::TauObserver(double delta, double gamma, std::uint64_t stride)
    : delta_(delta), gamma_(gamma), stride_(stride) {
  if (stride_ < 1) throw ArgumentError("TauObserver: stride must be >= 1");
  if (!(delta_ >= 0.0)) throw ArgumentError("TauObserver: delta must be >= 0");
}

void TauObserver::on_growth(const Engine& e, const GrowthEvent& ev) {
  std::uint64_t k = e.growth_count();
  double statistic =
      std::exp((2.0 + delta_) * std::log(static_cast<double>(k)) - gamma_ * ev.time.ln());
  last_ = Row{k, ev.time, statistic};
  have_last_ = true;
  if (k % stride_ == 0) rows_.push_back(last_);
}

void TauObserver::on_finish(const Engine&) {
  if (have_last_ && (rows_.empty() || rows_.back().k != last_.k)) rows_.push_back(last_);
}

// --- RedBlueObserver --------------------------------------------------------

RedBlueObserver::RedBlueObserver(double delta, std::uint64_t coin_seed, std::uint64_t stride)
    : delta_(delta), coin_(coin_seed), stride_(stride) {
  if (stride_ < 1) throw ArgumentError("RedBlueObserver: stride must be >= 1");
  if (!(delta_ >= 0.0)) throw ArgumentError("RedBlueObserver: delta must be >= 0");
}

void RedBlueObserver::on_start(const Engine& e) {
  if (e.growth_count() != 0)
    throw ArgumentError("coloring must observe the run from its first growth event");
  if (e.tree().materialized_count() != 2 || e.tree().alive_bundle_count() != 0)
    throw ArgumentError("coloring starts from the initial single edge");
  vertex_key_ = {0, 1};
  tau_prev_ = ExtCount();
  state_ = RedBlueState{};
  rows_.clear();
  have_last_ = false;
}

void RedBlueObserver::on_growth(const Engine& e, const GrowthEvent& ev) {
  if (ev.count != ExtCount(1))
    throw StateError("coloring is defined for single-leaf growth only");
  if (ev.source_bundle) {
    if (ev.parent != vertex_key_.size())
      throw StateError("coloring key table out of sync with materialization");
    vertex_key_.push_back(2 + *ev.source_bundle);
  }
  std::uint64_t parent_key = vertex_key_[ev.parent];
  std::uint64_t leaf_key = 2 + ev.bundle;
  ExtCount delta_tau = ev.time - tau_prev_;
  IntervalKind kind = classify_interval(state_.k + 1, delta_tau, delta_);
  update_coloring(state_, parent_key, leaf_key, kind, coin_);
  tau_prev_ = ev.time;
  last_ = Row{state_.k, state_.blue, state_.red, kind == IntervalKind::good};
  have_last_ = true;
  if (state_.k % stride_ == 0) rows_.push_back(last_);
  (void)e;
}

void RedBlueObserver::on_finish(const Engine&) {
  if (have_last_ && (rows_.empty() || rows_.back().k != last_.k)) rows_.push_back(last_);
}

// --- DistanceObserver -------------------------------------------------------

DistanceObserver::DistanceObserver(std::uint64_t stride) : stride_(stride) {
  if (stride_ < 1) throw ArgumentError("DistanceObserver: stride must be >= 1");
}

void DistanceObserver::on_growth(const Engine& e, const GrowthEvent& ev) {
  std::uint64_t k = e.growth_count();
  last_ = Row{k, ev.time, e.tree().depth_of(e.walker())};
  have_last_ = true;
  if (k % stride_ == 0) rows_.push_back(last_);
}

void DistanceObserver::on_finish(const Engine&) {
  if (have_last_ && (rows_.empty() || rows_.back().k != last_.k)) rows_.push_back(last_);
}

// --- LeafFractionObserver ---------------------------------------------------

LeafFractionObserver::LeafFractionObserver(std::vector<std::uint64_t> checkpoints)
    : checkpoints_(std::move(checkpoints)) {
  std::sort(checkpoints_.begin(), checkpoints_.end());
  checkpoints_.erase(std::unique(checkpoints_.begin(), checkpoints_.end()), checkpoints_.end());
}

void LeafFractionObserver::on_start(const Engine& e) {
  n1_ = e.tree().leaf_count();
  v0_ = e.tree().vertex_count();
  added_ = ExtCount();
  k0_ = e.growth_count();
  next_ = 0;
  rows_.clear();
}

void LeafFractionObserver::take(const Engine& e, bool verify) {
  if (verify) {
    ExtCount direct = e.tree().leaf_count();
    bool equal = (n1_.is_exact_integer() && direct.is_exact_integer())
                     ? n1_ == direct
                     : approx_equal(n1_, direct, 1e-9);
    if (!equal) throw StateError("incremental leaf count diverged from the tree");
  }
  ExtCount vc = e.tree().vertex_count();
  rows_.push_back(Row{e.growth_count() - k0_, n1_, vc, (n1_ / vc).to_double()});
}

void LeafFractionObserver::on_growth(const Engine& e, const GrowthEvent& ev) {
  ExtCount pre = e.tree().vertex(ev.parent).degree - ev.count;
  n1_ = n1_ + ev.count;
  if (pre == ExtCount(1)) n1_ = n1_ - ExtCount(1);  // the receiver stopped being a leaf
  added_ = added_ + ev.count;
  std::uint64_t k = e.growth_count() - k0_;
  ExtCount slack = v0_ + ExtCount(k);
  if (added_ > slack && n1_ < added_ - slack)
    throw StateError("leaf bound violated at growth " + std::to_string(k) + ": leaves " +
                     n1_.to_string() + " < " + (added_ - slack).to_string());
  while (next_ < checkpoints_.size() && checkpoints_[next_] < k) ++next_;
  if (next_ < checkpoints_.size() && checkpoints_[next_] == k) {
    take(e, true);
    ++next_;
  }
}

void LeafFractionObserver::on_finish(const Engine& e) {
  if (rows_.empty() || rows_.back().k != e.growth_count() - k0_) take(e, true);
}

// --- WindowObserver ---------------------------------------------------------

WindowObserver::WindowObserver(std::vector<WindowSpec> windows) : windows_(std::move(windows)) {
  for (const WindowSpec& w : windows_)
    if (w.length < 1) throw ArgumentError("WindowObserver: window length must be >= 1");
}

void WindowObserver::on_start(const Engine& e) {
  log_start_ = e.time().to_uint64() + 1;
  log_end_ = log_start_ - 1;
  visits_.clear();
}

void WindowObserver::on_step(const Engine& e, VertexRef, VertexRef to) {
  ++log_end_;
  if (to.is_vertex() && to.index == e.tree().root()) visits_.push_back(log_end_);
}

void WindowObserver::on_finish(const Engine&) {}

WindowReport WindowObserver::report() const {
  return window_root_visit_fraction(visits_, windows_, log_start_, log_end_);
}

std::vector<int> WindowObserver::flags() const {
  return window_visit_flags(visits_, windows_, log_start_, log_end_);
}

// --- StepLogObserver --------------------------------------------------------

StepLogObserver::StepLogObserver(std::uint64_t max_records) : max_records_(max_records) {}

void StepLogObserver::on_step(const Engine& e, VertexRef from, VertexRef to) {
  if (records_.size() >= max_records_) throw StateError("step log capacity exceeded");
  ExtCount birth = to.is_vertex() ? e.tree().vertex(to.index).birth
                                  : e.tree().bundle(to.index).birth;
  records_.push_back(StepRecord{e.time().to_uint64(), from, to, birth});
}

// --- EventStreamObserver ----------------------------------------------------

void EventStreamObserver::on_step(const Engine& e, VertexRef from, VertexRef to) {
  out_ << "step " << e.time().to_string() << " " << from.to_string() << " " << to.to_string()
       << "\n";
}

void EventStreamObserver::on_growth(const Engine& e, const GrowthEvent& ev) {
  out_ << "growth " << e.growth_count() << " " << ev.time.to_string() << " " << ev.parent << " "
       << ev.count.to_string() << "\n";
}

// --- TrackedVertexObserver --------------------------------------------------

TrackedVertexObserver::TrackedVertexObserver(std::uint64_t track_k, std::uint64_t eta_cap)
    : track_k_(track_k), eta_cap_(eta_cap) {
  if (track_k_ < 1) throw ArgumentError("TrackedVertexObserver: track_k must be >= 1");
}

void TrackedVertexObserver::reach_levels(const ExtCount& degree, const ExtCount& time) {
  std::uint64_t next = eta_.empty() ? 1 : eta_.rbegin()->first + 1;
  while (next <= eta_cap_ && ExtCount(next) <= degree) {
    eta_[next] = time;
    ++next;
  }
}

void TrackedVertexObserver::on_growth(const Engine& e, const GrowthEvent& ev) {
  ++seen_;
  if (!have_target_) {
    if (seen_ == track_k_) {
      have_target_ = true;
      target_bundle_ = ev.bundle;
      degree_ = ExtCount(1);
      history_.push_back(DegreeSample{ev.time, degree_});
      reach_levels(degree_, ev.time);
    }
    return;
  }
  bool ours = false;
  if (!materialized_) {
    // The first member of the tracked bundle to be promoted becomes the
    // followed vertex.
    if (ev.source_bundle && *ev.source_bundle == target_bundle_) {
      materialized_ = true;
      target_vertex_ = ev.parent;
      ours = true;
    }
  } else {
    ours = !ev.source_bundle.has_value() && ev.parent == target_vertex_;
    if (ev.source_bundle && ev.parent == target_vertex_) ours = true;
  }
  if (!ours) return;
  degree_ = e.tree().vertex(target_vertex_).degree;
  history_.push_back(DegreeSample{ev.time, degree_});
  reach_levels(degree_, ev.time);
}

}  // namespace tbrw
