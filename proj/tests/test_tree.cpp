#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

#include "doctest.h"
#include "tbrw/rng.hpp"
#include "tbrw/tree.hpp"

using namespace tbrw;

namespace {

std::map<std::uint64_t, std::uint64_t> small_histogram(const CompressedTree& t) {
  std::map<std::uint64_t, std::uint64_t> out;
  for (const auto& [d, c] : t.degree_histogram()) out[d.to_uint64()] = c.to_uint64();
  return out;
}

}  // namespace

TEST_CASE("single vertex") {
  CompressedTree t = CompressedTree::single_vertex();
  CHECK_EQ(t.vertex_count().to_uint64(), 1u);
  CHECK_EQ(t.edge_count().to_uint64(), 0u);
  CHECK_EQ(t.depth_of(VertexRef::vertex(t.root())), 0u);
  t.audit();

  // Only option at the bare root is the self-loop: the walker is pinned.
  auto opts = t.walk_options(VertexRef::vertex(t.root()));
  REQUIRE_EQ(opts.size(), 1u);
  CHECK(opts[0].target == VertexRef::vertex(t.root()));
  CHECK_EQ(opts[0].weight.to_uint64(), 1u);
  RngStream rng(3);
  for (int i = 0; i < 10; ++i)
    CHECK(t.sample_neighbor(VertexRef::vertex(t.root()), rng) == VertexRef::vertex(t.root()));
}

TEST_CASE("single edge") {
  CompressedTree t = CompressedTree::single_edge();
  CHECK_EQ(t.vertex_count().to_uint64(), 2u);
  CHECK_EQ(t.edge_count().to_uint64(), 1u);
  CHECK_EQ(small_histogram(t), std::map<std::uint64_t, std::uint64_t>{{1, 2}});
  t.audit();

  // The non-root leaf has exactly one neighbor.
  auto opts = t.walk_options(VertexRef::vertex(1));
  REQUIRE_EQ(opts.size(), 1u);
  CHECK(opts[0].target == VertexRef::vertex(t.root()));
}

TEST_CASE("explicit path") {
  CompressedTree t = CompressedTree::from_edges({{0, 1}, {1, 2}});
  CHECK_EQ(t.depth_of(VertexRef::vertex(0)), 0u);
  CHECK_EQ(t.depth_of(VertexRef::vertex(1)), 1u);
  CHECK_EQ(t.depth_of(VertexRef::vertex(2)), 2u);
  CHECK_EQ(small_histogram(t), std::map<std::uint64_t, std::uint64_t>{{1, 2}, {2, 1}});
  t.audit();
}

TEST_CASE("explicit star") {
  CompressedTree t = CompressedTree::from_edges({{0, 1}, {0, 2}, {0, 3}});
  CHECK_EQ(small_histogram(t), std::map<std::uint64_t, std::uint64_t>{{1, 3}, {3, 1}});
  CHECK_EQ(t.leaf_count().to_uint64(), 3u);
  t.audit();
}

TEST_CASE("from_edges rejects non-trees") {
  CHECK_THROWS_AS(CompressedTree::from_edges({{0, 1}, {1, 2}, {2, 0}}), InvalidTreeError);
  CHECK_THROWS_AS(CompressedTree::from_edges({{0, 1}, {2, 3}, {3, 4}}), InvalidTreeError);
  CHECK_THROWS_AS(CompressedTree::from_edges({{0, 2}}), InvalidTreeError);
  CHECK_THROWS_AS(CompressedTree::from_edges({{1, 1}}), InvalidTreeError);
  CHECK_THROWS_AS(CompressedTree::from_edges({}), InvalidTreeError);
}

TEST_CASE("grow at the root") {
  CompressedTree t = CompressedTree::single_vertex();
  GrowthEvent ev = t.grow(VertexRef::vertex(t.root()), ExtCount(3), ExtCount(1));
  CHECK_EQ(ev.parent, t.root());
  CHECK_EQ(ev.count.to_uint64(), 3u);
  CHECK_FALSE(ev.source_bundle.has_value());

  CHECK_EQ(t.vertex_count().to_uint64(), 4u);
  CHECK_EQ(t.degree_of(VertexRef::vertex(t.root())).to_uint64(), 3u);
  CHECK_EQ(t.alive_bundle_count(), 1u);
  CHECK_EQ(t.leaf_count().to_uint64(), 3u);
  t.audit();

  // Self-loop weight 1 plus the 3-bundle: total walk weight 4.
  CHECK_EQ(t.walk_weight(VertexRef::vertex(t.root())).to_uint64(), 4u);
  auto opts = t.walk_options(VertexRef::vertex(t.root()));
  REQUIRE_EQ(opts.size(), 2u);
  ExtCount total;
  for (const auto& o : opts) total += o.weight;
  CHECK_EQ(total.to_uint64(), 4u);
}

TEST_CASE("grow at a bundle member materializes it") {
  CompressedTree t = CompressedTree::single_vertex();
  GrowthEvent first = t.grow(VertexRef::vertex(t.root()), ExtCount(3), ExtCount(1));
  GrowthEvent second = t.grow(VertexRef::member(first.bundle), ExtCount(2), ExtCount(2));

  REQUIRE(second.source_bundle.has_value());
  CHECK_EQ(*second.source_bundle, first.bundle);
  CHECK_NE(second.bundle, first.bundle);
  CHECK_EQ(t.bundle(first.bundle).multiplicity.to_uint64(), 2u);
  CHECK_EQ(t.depth_of(VertexRef::vertex(second.parent)), 1u);
  CHECK_EQ(t.degree_of(VertexRef::vertex(second.parent)).to_uint64(), 3u);

  CHECK_EQ(t.vertex_count().to_uint64(), 6u);
  CHECK_EQ(small_histogram(t), std::map<std::uint64_t, std::uint64_t>{{1, 4}, {3, 2}});
  // Degree handshake: sum of d * N(d) = 2 * (|V| - 1), loop excluded.
  std::uint64_t handshake = 0;
  for (const auto& [d, c] : small_histogram(t)) handshake += d * c;
  CHECK_EQ(handshake, 10u);
  t.audit();
}

TEST_CASE("emptied bundles disappear and stale refs are rejected") {
  CompressedTree t = CompressedTree::single_vertex();
  GrowthEvent ev = t.grow(VertexRef::vertex(t.root()), ExtCount(1), ExtCount(1));
  t.grow(VertexRef::member(ev.bundle), ExtCount(1), ExtCount(2));
  CHECK_EQ(t.alive_bundle_count(), 1u);  // only the fresh bundle remains
  CHECK_THROWS_AS(t.walk_options(VertexRef::member(ev.bundle)), InvalidTreeError);
  CHECK_THROWS_AS(t.grow(VertexRef::member(ev.bundle), ExtCount(1), ExtCount(3)), InvalidTreeError);
  CHECK_THROWS_AS(t.degree_of(VertexRef::vertex(99)), InvalidTreeError);
  t.audit();
}

TEST_CASE("zero-count growth rejected") {
  CompressedTree t = CompressedTree::single_vertex();
  CHECK_THROWS_AS(t.grow(VertexRef::vertex(t.root()), ExtCount(), ExtCount(1)), ArgumentError);
}

TEST_CASE("astronomic bundle counts") {
  CompressedTree t = CompressedTree::single_vertex();
  t.grow(VertexRef::vertex(t.root()), ExtCount::from_log2(90.0), ExtCount(1));
  CHECK_EQ(t.degree_of(VertexRef::vertex(t.root())).log2(), doctest::Approx(90.0));
  CHECK_EQ(t.vertex_count().log2(), doctest::Approx(90.0));
  CHECK_EQ(t.leaf_count().log2(), doctest::Approx(90.0));
  t.audit();

  // Walk weight = degree + 1 at the root; indistinguishable at this scale.
  CHECK_EQ(t.walk_weight(VertexRef::vertex(t.root())).log2(), doctest::Approx(90.0));
  CHECK_THROWS_AS(t.fully_materialized(), StateError);

  // The walker almost surely lands in the bundle.
  RngStream rng(11);
  int in_bundle = 0;
  for (int i = 0; i < 50; ++i)
    if (!t.sample_neighbor(VertexRef::vertex(t.root()), rng).is_vertex()) ++in_bundle;
  CHECK_EQ(in_bundle, 50);
}

TEST_CASE("bundle member depth") {
  CompressedTree t = CompressedTree::single_vertex();
  GrowthEvent ev = t.grow(VertexRef::vertex(t.root()), ExtCount(5), ExtCount(1));
  CHECK_EQ(t.depth_of(VertexRef::member(ev.bundle)), 1u);
  CHECK_EQ(t.degree_of(VertexRef::member(ev.bundle)).to_uint64(), 1u);
}

TEST_CASE("sibling cohorts from different events stay separate") {
  CompressedTree t = CompressedTree::single_edge();
  GrowthEvent a = t.grow(VertexRef::vertex(t.root()), ExtCount(2), ExtCount(1));
  GrowthEvent b = t.grow(VertexRef::vertex(t.root()), ExtCount(4), ExtCount(7));
  CHECK_NE(a.bundle, b.bundle);
  CHECK_EQ(t.alive_bundle_count(), 2u);
  CHECK(t.bundle(a.bundle).birth == ExtCount(1));
  CHECK(t.bundle(b.bundle).birth == ExtCount(7));
  CHECK_EQ(t.degree_of(VertexRef::vertex(t.root())).to_uint64(), 7u);
  t.audit();
}

TEST_CASE("random growth sequences keep every invariant") {
  RngStream rng(17);
  CompressedTree t = CompressedTree::single_edge();
  std::vector<GrowthEvent> events;
  std::uint64_t added = 0;
  for (int k = 1; k <= 300; ++k) {
    // Pick a uniformly random position: a materialized vertex or a live bundle.
    VertexRef at = VertexRef::vertex(static_cast<VertexId>(rng.below(t.materialized_count())));
    if (!events.empty() && rng.next_unit() < 0.5) {
      for (int tries = 0; tries < 50; ++tries) {
        BundleId b = events[rng.below(events.size())].bundle;
        if (b < t.bundle_slots() && t.bundle(b).alive) {
          at = VertexRef::member(b);
          break;
        }
      }
      if (!at.is_vertex() && !t.bundle(at.index).alive) at = VertexRef::vertex(t.root());
    }
    std::uint64_t z = 1 + rng.below(3);
    events.push_back(t.grow(at, ExtCount(z), ExtCount(static_cast<std::uint64_t>(k))));
    added += z;
    if (k % 50 == 0) t.audit();

    // Deterministic leaf bound: N(1) >= added - |V_0| - k.
    double bound = static_cast<double>(added) - 2.0 - static_cast<double>(k);
    CHECK(t.leaf_count().to_double() >= bound);
  }
  t.audit();
  CHECK_EQ(t.vertex_count().to_uint64(), 2u + added);

  std::uint64_t handshake = 0, verts = 0;
  for (const auto& [d, c] : small_histogram(t)) {
    handshake += d * c;
    verts += c;
  }
  CHECK_EQ(verts, 2u + added);
  CHECK_EQ(handshake, 2u * (verts - 1));
}

TEST_CASE("materialization leaves observables unchanged") {
  CompressedTree t = CompressedTree::single_vertex();
  GrowthEvent ev = t.grow(VertexRef::vertex(t.root()), ExtCount(4), ExtCount(1));
  t.grow(VertexRef::vertex(t.root()), ExtCount(2), ExtCount(2));
  auto before = small_histogram(t);
  ExtCount leaves = t.leaf_count();

  t.materialize_member(ev.bundle);
  CHECK_EQ(small_histogram(t), before);
  CHECK(t.leaf_count() == leaves);
  CHECK_EQ(t.vertex_count().to_uint64(), 7u);
  t.audit();

  CompressedTree full = t.fully_materialized();
  CHECK_EQ(full.alive_bundle_count(), 0u);
  CHECK_EQ(small_histogram(full), before);
  CHECK_EQ(full.materialized_count(), 7u);
  full.audit();
}

TEST_CASE("snapshot round trip") {
  CompressedTree t = CompressedTree::from_edges({{0, 1}, {0, 2}, {2, 3}});
  t.grow(VertexRef::vertex(2), ExtCount(3), ExtCount(5));
  t.grow(VertexRef::vertex(t.root()), ExtCount::from_log2(80.0), ExtCount(9));

  std::string snap = t.export_snapshot();
  CompressedTree back = CompressedTree::import_snapshot(snap);
  back.audit();
  CHECK_EQ(back.export_snapshot(), snap);
  CHECK(back.degree_histogram() == t.degree_histogram());
  CHECK(back.vertex_count() == t.vertex_count());
  CHECK_EQ(back.materialized_count(), t.materialized_count());
  CHECK_EQ(back.alive_bundle_count(), t.alive_bundle_count());

  CHECK_THROWS_AS(CompressedTree::import_snapshot("not a snapshot"), InvalidTreeError);
}

TEST_CASE("neighbor sampling matches option weights") {
  // Root with: one materialized child chain, a 3-bundle, and a 6-bundle.
  CompressedTree t = CompressedTree::single_edge();
  GrowthEvent a = t.grow(VertexRef::vertex(t.root()), ExtCount(3), ExtCount(1));
  t.grow(VertexRef::vertex(t.root()), ExtCount(6), ExtCount(2));
  VertexRef root = VertexRef::vertex(t.root());

  // Weight layout at the root: loop 1 + child 1 + bundle 3 + bundle 6 = 11.
  CHECK_EQ(t.walk_weight(root).to_uint64(), 11u);

  std::map<std::string, std::uint64_t> freq;
  RngStream rng(23);
  const int reps = 110000;
  for (int i = 0; i < reps; ++i) freq[t.sample_neighbor(root, rng).to_string()] += 1;

  for (const auto& o : t.walk_options(root)) {
    double expect = o.weight.to_double() / 11.0;
    double got = static_cast<double>(freq[o.target.to_string()]) / reps;
    double se = std::sqrt(expect * (1.0 - expect) / reps);
    CHECK(std::abs(got - expect) < 4.5 * se);
  }

  // Growing elsewhere must not disturb the cached sampler at the root.
  t.grow(VertexRef::member(a.bundle), ExtCount(2), ExtCount(3));
  CHECK_EQ(t.walk_weight(root).to_uint64(), 11u);
  std::map<std::string, std::uint64_t> freq2;
  for (int i = 0; i < reps; ++i) freq2[t.sample_neighbor(root, rng).to_string()] += 1;
  // The promoted member is now a materialized child; weight layout unchanged.
  ExtCount total;
  for (const auto& o : t.walk_options(root)) total += o.weight;
  CHECK_EQ(total.to_uint64(), 11u);
  t.audit();
}

TEST_CASE("sampling consumes exactly one stream value") {
  CompressedTree t = CompressedTree::single_edge();
  t.grow(VertexRef::vertex(t.root()), ExtCount(3), ExtCount(1));
  RngStream a(5), b(5);
  t.sample_neighbor(VertexRef::vertex(t.root()), a);
  b.next_unit();
  for (int i = 0; i < 5; ++i) CHECK_EQ(a.next_unit(), b.next_unit());
}

TEST_CASE("walk_many equals repeated sample_neighbor") {
  // Mixed structure: bursts, promoted members, an astronomic bundle elsewhere.
  CompressedTree t = CompressedTree::single_edge();
  RngStream grow_rng(31);
  for (int k = 1; k <= 200; ++k) {
    VertexRef at = VertexRef::vertex(static_cast<VertexId>(grow_rng.below(t.materialized_count())));
    t.grow(at, ExtCount(1 + grow_rng.below(3)), ExtCount(static_cast<std::uint64_t>(k)));
  }
  t.audit();

  RngStream a(77), b(77);
  VertexRef pa = VertexRef::vertex(t.root());
  VertexRef pb = pa;
  // Split the budget unevenly to also cover resuming from a bundle member.
  for (std::uint64_t chunk : {1u, 7u, 250u, 4242u}) {
    pa = t.walk_many(pa, chunk, a);
    for (std::uint64_t s = 0; s < chunk; ++s) pb = t.sample_neighbor(pb, b);
    CHECK_EQ(pa.to_string(), pb.to_string());
  }
  // Identical stream consumption: the next draws agree too.
  for (int i = 0; i < 4; ++i) CHECK_EQ(a.next_unit(), b.next_unit());

  CHECK_EQ(t.walk_many(pa, 0, a).to_string(), pa.to_string());
}
