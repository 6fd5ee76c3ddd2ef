#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tbrw/ext_count.hpp"
#include "tbrw/rng.hpp"

namespace tbrw {

using VertexId = std::uint32_t;
using BundleId = std::uint32_t;

/// A position in the tree: either a materialized vertex or one anonymous
/// member of a leaf bundle.  Members of one bundle are exchangeable, so a
/// single reference stands for any of them.
struct VertexRef {
  enum class Kind : std::uint8_t { vertex, bundle_member };
  Kind kind = Kind::vertex;
  std::uint32_t index = 0;

  static VertexRef vertex(VertexId v) { return {Kind::vertex, v}; }
  static VertexRef member(BundleId b) { return {Kind::bundle_member, b}; }
  bool is_vertex() const { return kind == Kind::vertex; }
  friend bool operator==(const VertexRef& a, const VertexRef& b) {
    return a.kind == b.kind && a.index == b.index;
  }
  friend bool operator!=(const VertexRef& a, const VertexRef& b) { return !(a == b); }
  std::string to_string() const;
};

struct GrowthEvent {
  ExtCount time;
  VertexId parent = 0;   // vertex that received the leaves (post-materialization)
  ExtCount count;        // number of leaves added
  BundleId bundle = 0;   // the freshly created bundle
  /// set when the grow target was a bundle member that had to be materialized
  std::optional<BundleId> source_bundle;
};

struct WalkOption {
  VertexRef target;
  ExtCount weight;
};

struct MaterializedVertex {
  VertexId parent = 0;  // self for the root
  ExtCount birth;
  std::uint32_t depth = 0;
  ExtCount degree;      // graph degree; the root self-loop is not counted
  std::vector<VertexId> child_vertices;
  std::vector<BundleId> child_bundles;
};

struct LeafBundle {
  VertexId parent = 0;
  ExtCount multiplicity;  // >= 1 while alive
  ExtCount birth;
  bool alive = true;
};

/// Growing rooted tree with bundle compression: leaves that share a parent and
/// a birth event are stored as one bundle with a multiplicity.  A bundle
/// member is materialized only when the process grows at it.  The root carries
/// one self-loop, which counts as a walk option but never as graph degree.
class CompressedTree {
 public:
  static CompressedTree single_vertex();
  static CompressedTree single_edge();
  /// Edge list of an initial tree; vertex ids must be dense 0..n-1 with the
  /// root at id 0.  All birth times are zero.
  static CompressedTree from_edges(const std::vector<std::pair<std::uint64_t, std::uint64_t>>& edges);

  /// Add `count` leaves at `at` (materializing `at` first if it is a bundle
  /// member), stamped with the given event time.  count >= 1.
  GrowthEvent grow(VertexRef at, const ExtCount& count, const ExtCount& time);

  /// Promote one anonymous member of bundle `b` to a materialized vertex.
  VertexId materialize_member(BundleId b);

  /// All moves available to the walker at `at`, each with its weight:
  /// parent, root self-loop, materialized children (weight 1 each), child
  /// bundles (weight = multiplicity).
  std::vector<WalkOption> walk_options(VertexRef at) const;

  /// One uniform walk step from `at`; consumes exactly one stream value and
  /// follows the same distribution as `walk_options`.
  VertexRef sample_neighbor(VertexRef at, RngStream& rng) const;

  /// Exactly `steps` applications of sample_neighbor with the per-step
  /// validation hoisted out of the loop; same stream consumption, same
  /// positions for the same stream state.
  VertexRef walk_many(VertexRef at, std::uint64_t steps, RngStream& rng) const;

  /// Total walk-option weight at `at` (graph degree, plus one at the root).
  ExtCount walk_weight(VertexRef at) const;

  ExtCount degree_of(VertexRef at) const;
  std::uint32_t depth_of(VertexRef at) const;

  /// Count of vertices per graph degree, bundle members included.
  std::map<ExtCount, ExtCount> degree_histogram() const;

  /// Number of degree-1 vertices.
  ExtCount leaf_count() const;

  ExtCount vertex_count() const { return vertex_count_; }
  ExtCount edge_count() const { return edge_count_; }
  std::uint64_t materialized_count() const { return verts_.size(); }
  std::uint64_t alive_bundle_count() const { return alive_bundles_; }
  std::uint64_t bundle_slots() const { return bundles_.size(); }
  VertexId root() const { return root_; }

  const MaterializedVertex& vertex(VertexId v) const;
  const LeafBundle& bundle(BundleId b) const;

  /// Recomputes every structural invariant from scratch; throws
  /// InvalidTreeError on the first violation.
  void audit() const;

  /// Line-oriented snapshot: header with the root id and counts, one
  /// `parent child birth` line per materialized edge, then one
  /// `bundle parent multiplicity birth` line per live bundle.
  std::string export_snapshot() const;
  static CompressedTree import_snapshot(const std::string& text);

  /// Copy with every bundle member promoted to a real vertex.  Refuses trees
  /// whose expansion would exceed `cap` vertices.
  CompressedTree fully_materialized(std::uint64_t cap = 1'000'000) const;

 private:
  CompressedTree() = default;
  void check_ref(VertexRef at) const;

  /// Cached cumulative option weights for one vertex, rebuilt lazily after a
  /// structural change.  Only usable while every option weight is an exact
  /// integer; otherwise sampling falls back to the general scan.
  struct SampleIndex {
    bool dirty = true;
    bool small = false;
    double total = 0.0;
    std::vector<double> cum;  // one entry per walk option, in walk_options order
  };
  void invalidate_sample_index(VertexId v) const {
    if (v < sample_index_.size()) sample_index_[v].dirty = true;
  }
  void rebuild_sample_index(VertexId v) const;
  VertexRef sample_neighbor_scan(VertexId v, double u) const;

  std::vector<MaterializedVertex> verts_;
  std::vector<LeafBundle> bundles_;
  VertexId root_ = 0;
  std::uint64_t alive_bundles_ = 0;
  ExtCount vertex_count_;
  ExtCount edge_count_;
  mutable std::vector<SampleIndex> sample_index_;
};

}  // namespace tbrw
