#include "tbrw/tree.hpp"

#include <algorithm>
#include <cstdlib>
#include <deque>
#include <sstream>

#include "tbrw/errors.hpp"

namespace tbrw {

std::string VertexRef::to_string() const {
  std::string s = is_vertex() ? "v" : "b";
  return s + std::to_string(index);
}

CompressedTree CompressedTree::single_vertex() {
  CompressedTree t;
  t.verts_.push_back(MaterializedVertex{0, ExtCount(), 0, ExtCount(), {}, {}});
  t.vertex_count_ = ExtCount(1);
  return t;
}

CompressedTree CompressedTree::single_edge() {
  return from_edges({{0, 1}});
}

CompressedTree CompressedTree::from_edges(
    const std::vector<std::pair<std::uint64_t, std::uint64_t>>& edges) {
  if (edges.empty()) throw InvalidTreeError("from_edges: empty edge list");
  std::uint64_t n = edges.size() + 1;
  if (n > (1ull << 31)) throw InvalidTreeError("from_edges: too many vertices");
  std::vector<std::vector<VertexId>> adj(n);
  for (auto [a, b] : edges) {
    if (a >= n || b >= n) throw InvalidTreeError("from_edges: vertex ids must be dense 0..n-1");
    if (a == b) throw InvalidTreeError("from_edges: self-loop in edge list");
    adj[a].push_back(static_cast<VertexId>(b));
    adj[b].push_back(static_cast<VertexId>(a));
  }

  CompressedTree t;
  t.verts_.resize(n);
  std::vector<char> seen(n, 0);
  std::deque<VertexId> queue{0};
  seen[0] = 1;
  std::uint64_t reached = 0;
  while (!queue.empty()) {
    VertexId v = queue.front();
    queue.pop_front();
    ++reached;
    for (VertexId u : adj[v]) {
      if (seen[u]) continue;
      seen[u] = 1;
      t.verts_[u].parent = v;
      t.verts_[u].depth = t.verts_[v].depth + 1;
      t.verts_[v].child_vertices.push_back(u);
      queue.push_back(u);
    }
  }
  if (reached != n)
    throw InvalidTreeError("from_edges: edge list is not a tree (cycle or disconnection)");
  for (std::uint64_t v = 0; v < n; ++v) {
    t.verts_[v].degree =
        ExtCount(t.verts_[v].child_vertices.size() + (v == 0 ? 0 : 1));
  }
  t.vertex_count_ = ExtCount(n);
  t.edge_count_ = ExtCount(n - 1);
  return t;
}

void CompressedTree::check_ref(VertexRef at) const {
  if (at.is_vertex()) {
    if (at.index >= verts_.size()) throw InvalidTreeError("reference to unknown vertex");
  } else {
    if (at.index >= bundles_.size()) throw InvalidTreeError("reference to unknown bundle");
    if (!bundles_[at.index].alive) throw InvalidTreeError("reference to a dead bundle");
  }
}

VertexId CompressedTree::materialize_member(BundleId b) {
  check_ref(VertexRef::member(b));
  LeafBundle& lb = bundles_[b];
  VertexId parent = lb.parent;
  lb.multiplicity -= ExtCount(1);
  if (lb.multiplicity.is_zero()) {
    lb.alive = false;
    --alive_bundles_;
    auto& list = verts_[parent].child_bundles;
    auto it = std::find(list.begin(), list.end(), b);
    if (it != list.end()) {
      *it = list.back();
      list.pop_back();
    }
  }
  VertexId v = static_cast<VertexId>(verts_.size());
  verts_.push_back(MaterializedVertex{parent, lb.birth, verts_[parent].depth + 1,
                                      ExtCount(1), {}, {}});
  verts_[parent].child_vertices.push_back(v);
  invalidate_sample_index(parent);
  return v;
}

GrowthEvent CompressedTree::grow(VertexRef at, const ExtCount& count, const ExtCount& time) {
  check_ref(at);
  if (count.is_zero()) throw ArgumentError("grow: leaf count must be >= 1");
  GrowthEvent ev;
  ev.time = time;
  ev.count = count;
  VertexId target;
  if (at.is_vertex()) {
    target = at.index;
  } else {
    ev.source_bundle = at.index;
    target = materialize_member(at.index);
  }
  BundleId b = static_cast<BundleId>(bundles_.size());
  bundles_.push_back(LeafBundle{target, count, time, true});
  ++alive_bundles_;
  verts_[target].child_bundles.push_back(b);
  verts_[target].degree += count;
  invalidate_sample_index(target);
  vertex_count_ += count;
  edge_count_ += count;
  ev.parent = target;
  ev.bundle = b;
  return ev;
}

std::vector<WalkOption> CompressedTree::walk_options(VertexRef at) const {
  check_ref(at);
  std::vector<WalkOption> opts;
  if (!at.is_vertex()) {
    opts.push_back({VertexRef::vertex(bundles_[at.index].parent), ExtCount(1)});
    return opts;
  }
  const MaterializedVertex& v = verts_[at.index];
  if (at.index != root_) opts.push_back({VertexRef::vertex(v.parent), ExtCount(1)});
  if (at.index == root_) opts.push_back({VertexRef::vertex(root_), ExtCount(1)});  // self-loop
  for (VertexId c : v.child_vertices) opts.push_back({VertexRef::vertex(c), ExtCount(1)});
  for (BundleId b : v.child_bundles)
    opts.push_back({VertexRef::member(b), bundles_[b].multiplicity});
  return opts;
}

ExtCount CompressedTree::walk_weight(VertexRef at) const {
  check_ref(at);
  if (!at.is_vertex()) return ExtCount(1);
  return verts_[at.index].degree + ExtCount(at.index == root_ ? 1 : 0);
}

void CompressedTree::rebuild_sample_index(VertexId at) const {
  SampleIndex& idx = sample_index_[at];
  const MaterializedVertex& v = verts_[at];
  idx.dirty = false;
  idx.small = v.degree.is_exact_integer();
  idx.cum.clear();
  if (!idx.small) return;
  double acc = 1.0;  // head option: parent edge, or the root self-loop
  idx.cum.push_back(acc);
  for (std::size_t i = 0; i < v.child_vertices.size(); ++i) {
    acc += 1.0;
    idx.cum.push_back(acc);
  }
  for (BundleId b : v.child_bundles) {
    const ExtCount& m = bundles_[b].multiplicity;
    if (!m.is_exact_integer()) {
      idx.small = false;
      idx.cum.clear();
      return;
    }
    acc += m.to_double();
    idx.cum.push_back(acc);
  }
  idx.total = acc;
}

VertexRef CompressedTree::sample_neighbor(VertexRef at, RngStream& rng) const {
  check_ref(at);
  if (!at.is_vertex()) {
    rng.next_unit();  // every step consumes one value
    return VertexRef::vertex(bundles_[at.index].parent);
  }
  double u = rng.next_unit();
  if (at.index >= sample_index_.size()) sample_index_.resize(verts_.size());
  SampleIndex& idx = sample_index_[at.index];
  if (idx.dirty) rebuild_sample_index(at.index);
  if (!idx.small) return sample_neighbor_scan(at.index, u);

  const MaterializedVertex& v = verts_[at.index];
  double target = u * idx.total;
  std::size_t i = static_cast<std::size_t>(
      std::upper_bound(idx.cum.begin(), idx.cum.end(), target) - idx.cum.begin());
  if (i >= idx.cum.size()) i = idx.cum.size() - 1;  // rounding residue
  if (i == 0) return VertexRef::vertex(at.index == root_ ? at.index : v.parent);
  std::size_t nc = v.child_vertices.size();
  if (i <= nc) return VertexRef::vertex(v.child_vertices[i - 1]);
  return VertexRef::member(v.child_bundles[i - 1 - nc]);
}

VertexRef CompressedTree::walk_many(VertexRef at, std::uint64_t steps, RngStream& rng) const {
  check_ref(at);
  if (sample_index_.size() < verts_.size()) sample_index_.resize(verts_.size());
  for (std::uint64_t s = 0; s < steps; ++s) {
    if (!at.is_vertex()) {
      rng.next_unit();  // every step consumes one value
      at = VertexRef::vertex(bundles_[at.index].parent);
      continue;
    }
    double u = rng.next_unit();
    SampleIndex& idx = sample_index_[at.index];
    if (idx.dirty) rebuild_sample_index(at.index);
    if (!idx.small) {
      at = sample_neighbor_scan(at.index, u);
      continue;
    }
    const MaterializedVertex& v = verts_[at.index];
    double target = u * idx.total;
    std::size_t i = static_cast<std::size_t>(
        std::upper_bound(idx.cum.begin(), idx.cum.end(), target) - idx.cum.begin());
    if (i >= idx.cum.size()) i = idx.cum.size() - 1;  // rounding residue
    if (i == 0) {
      at = VertexRef::vertex(at.index == root_ ? at.index : v.parent);
    } else if (std::size_t nc = v.child_vertices.size(); i <= nc) {
      at = VertexRef::vertex(v.child_vertices[i - 1]);
    } else {
      at = VertexRef::member(v.child_bundles[i - 1 - nc]);
    }
  }
  return at;
}

VertexRef CompressedTree::sample_neighbor_scan(VertexId at, double u) const {
  const MaterializedVertex& v = verts_[at];
  ExtCount total = walk_weight(VertexRef::vertex(at));
  double acc = 0.0;
  VertexRef last = VertexRef::vertex(at);
  if (at != root_) {
    acc += (ExtCount(1) / total).to_double();
    last = VertexRef::vertex(v.parent);
    if (u < acc) return last;
  } else {
    acc += (ExtCount(1) / total).to_double();
    last = VertexRef::vertex(root_);
    if (u < acc) return last;  // self-loop
  }
  for (VertexId c : v.child_vertices) {
    acc += (ExtCount(1) / total).to_double();
    last = VertexRef::vertex(c);
    if (u < acc) return last;
  }
  for (BundleId b : v.child_bundles) {
    acc += (bundles_[b].multiplicity / total).to_double();
    last = VertexRef::member(b);
    if (u < acc) return last;
  }
  return last;  // rounding residue lands on the final option
}

ExtCount CompressedTree::degree_of(VertexRef at) const {
  check_ref(at);
  if (!at.is_vertex()) return ExtCount(1);
  return verts_[at.index].degree;
}

std::uint32_t CompressedTree::depth_of(VertexRef at) const {
  check_ref(at);
  if (!at.is_vertex()) return verts_[bundles_[at.index].parent].depth + 1;
  return verts_[at.index].depth;
}

std::map<ExtCount, ExtCount> CompressedTree::degree_histogram() const {
  std::map<ExtCount, ExtCount> h;
  for (const auto& v : verts_) h[v.degree] += ExtCount(1);
  ExtCount members;
  for (const auto& b : bundles_)
    if (b.alive) members += b.multiplicity;
  if (!members.is_zero()) h[ExtCount(1)] += members;
  return h;
}

ExtCount CompressedTree::leaf_count() const {
  ExtCount n;
  for (const auto& v : verts_)
    if (v.degree == ExtCount(1)) n += ExtCount(1);
  for (const auto& b : bundles_)
    if (b.alive) n += b.multiplicity;
  return n;
}

const MaterializedVertex& CompressedTree::vertex(VertexId v) const {
  if (v >= verts_.size()) throw InvalidTreeError("reference to unknown vertex");
  return verts_[v];
}

const LeafBundle& CompressedTree::bundle(BundleId b) const {
  if (b >= bundles_.size()) throw InvalidTreeError("reference to unknown bundle");
  return bundles_[b];
}

void CompressedTree::audit() const {
  if (verts_.empty()) throw InvalidTreeError("audit: no vertices");
  if (root_ >= verts_.size() || verts_[root_].parent != root_ || verts_[root_].depth != 0)
    throw InvalidTreeError("audit: root must be its own parent at depth zero");

  ExtCount members, degree_sum;
  std::uint64_t alive = 0;
  for (BundleId b = 0; b < bundles_.size(); ++b) {
    const LeafBundle& lb = bundles_[b];
    if (!lb.alive) {
      if (!lb.multiplicity.is_zero())
        throw InvalidTreeError("audit: dead bundle with nonzero multiplicity");
      continue;
    }
    ++alive;
    if (lb.multiplicity.is_zero())
      throw InvalidTreeError("audit: live bundle with zero multiplicity");
    if (lb.parent >= verts_.size()) throw InvalidTreeError("audit: bundle parent unknown");
    const auto& list = verts_[lb.parent].child_bundles;
    if (std::find(list.begin(), list.end(), b) == list.end())
      throw InvalidTreeError("audit: live bundle missing from parent child list");
    if (lb.birth < verts_[lb.parent].birth)
      throw InvalidTreeError("audit: bundle born before its parent");
    members += lb.multiplicity;
    degree_sum += lb.multiplicity;  // members are degree-1 vertices
  }
  if (alive != alive_bundles_) throw InvalidTreeError("audit: live bundle count drifted");

  for (VertexId v = 0; v < verts_.size(); ++v) {
    const MaterializedVertex& mv = verts_[v];
    ExtCount deg(mv.child_vertices.size() + (v == root_ ? 0 : 1));
    for (BundleId b : mv.child_bundles) {
      if (b >= bundles_.size() || !bundles_[b].alive)
        throw InvalidTreeError("audit: child list references dead bundle");
      deg += bundles_[b].multiplicity;
    }
    if (!approx_equal(deg, mv.degree, 1e-9) || (deg.is_exact_integer() && deg != mv.degree))
      throw InvalidTreeError("audit: cached degree mismatch");
    if (v != root_) {
      if (mv.parent >= verts_.size()) throw InvalidTreeError("audit: unknown parent");
      if (mv.depth != verts_[mv.parent].depth + 1)
        throw InvalidTreeError("audit: depth is not parent depth + 1");
      if (mv.birth < verts_[mv.parent].birth)
        throw InvalidTreeError("audit: vertex born before its parent");
      const auto& list = verts_[mv.parent].child_vertices;
      if (std::find(list.begin(), list.end(), v) == list.end())
        throw InvalidTreeError("audit: vertex missing from parent child list");
    }
    degree_sum += mv.degree;
  }

  ExtCount total = ExtCount(verts_.size()) + members;
  if (!approx_equal(total, vertex_count_, 1e-9))
    throw InvalidTreeError("audit: vertex count drifted");
  if (!approx_equal(edge_count_ + ExtCount(1), vertex_count_, 1e-9))
    throw InvalidTreeError("audit: edge count must be vertex count minus one");
  // handshake identity; the root self-loop is excluded from degrees
  if (!approx_equal(degree_sum, edge_count_ * ExtCount(2), 1e-9))
    throw InvalidTreeError("audit: degree sum must equal twice the edge count");
}

std::string CompressedTree::export_snapshot() const {
  std::ostringstream os;
  os << "tbrw-tree 1 root=" << root_ << " vertices=" << vertex_count_.to_string()
     << " edges=" << edge_count_.to_string() << "\n";
  for (VertexId v = 0; v < verts_.size(); ++v) {
    if (v == root_) continue;
    os << verts_[v].parent << " " << v << " " << verts_[v].birth.repr() << "\n";
  }
  for (const auto& b : bundles_) {
    if (!b.alive) continue;
    os << "bundle " << b.parent << " " << b.multiplicity.repr() << " "
       << b.birth.repr() << "\n";
  }
  return os.str();
}

namespace {

ExtCount parse_ext(const std::string& tok) {
  try {
    return ExtCount::from_repr(tok);
  } catch (const ArgumentError& e) {
    throw InvalidTreeError(std::string("import: ") + e.what());
  }
}

}  // namespace

CompressedTree CompressedTree::import_snapshot(const std::string& text) {
  std::istringstream in(text);
  std::string header;
  if (!std::getline(in, header) || header.rfind("tbrw-tree 1 root=", 0) != 0)
    throw InvalidTreeError("import: missing tbrw-tree header");
  std::uint64_t root = std::strtoull(header.c_str() + 17, nullptr, 10);
  if (root != 0) throw InvalidTreeError("import: root must have id 0");

  struct EdgeLine {
    std::uint64_t parent, child;
    ExtCount birth;
  };
  std::vector<EdgeLine> edges;
  struct BundleLine {
    std::uint64_t parent;
    ExtCount mult, birth;
  };
  std::vector<BundleLine> bundles;

  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string a, b, c;
    if (line.rfind("bundle ", 0) == 0) {
      std::string kw;
      ls >> kw >> a >> b >> c;
      bundles.push_back({std::strtoull(a.c_str(), nullptr, 10), parse_ext(b), parse_ext(c)});
    } else {
      ls >> a >> b >> c;
      edges.push_back({std::strtoull(a.c_str(), nullptr, 10),
                       std::strtoull(b.c_str(), nullptr, 10), parse_ext(c)});
    }
  }

  std::uint64_t n = edges.size() + 1;
  CompressedTree t;
  t.verts_.resize(n);
  std::vector<char> has_parent(n, 0);
  has_parent[0] = 1;
  for (const auto& e : edges) {
    if (e.parent >= n || e.child >= n || e.child == 0)
      throw InvalidTreeError("import: vertex ids must be dense 0..n-1 with root 0");
    if (has_parent[e.child] && e.child != 0)
      throw InvalidTreeError("import: duplicate parent for a vertex");
    has_parent[e.child] = 1;
    t.verts_[e.child].parent = static_cast<VertexId>(e.parent);
    t.verts_[e.child].birth = e.birth;
    t.verts_[static_cast<VertexId>(e.parent)].child_vertices.push_back(
        static_cast<VertexId>(e.child));
  }
  // assign depths; detects cycles (a cycle never reaches depth assignment)
  std::vector<char> done(n, 0);
  done[0] = 1;
  std::deque<VertexId> queue{0};
  std::uint64_t reached = 1;
  while (!queue.empty()) {
    VertexId v = queue.front();
    queue.pop_front();
    for (VertexId c : t.verts_[v].child_vertices) {
      t.verts_[c].depth = t.verts_[v].depth + 1;
      done[c] = 1;
      ++reached;
      queue.push_back(c);
    }
  }
  if (reached != n) throw InvalidTreeError("import: edges do not form a tree rooted at 0");

  ExtCount members;
  for (const auto& bl : bundles) {
    if (bl.parent >= n) throw InvalidTreeError("import: bundle parent unknown");
    if (bl.mult.is_zero()) throw InvalidTreeError("import: bundle multiplicity must be >= 1");
    BundleId b = static_cast<BundleId>(t.bundles_.size());
    t.bundles_.push_back(LeafBundle{static_cast<VertexId>(bl.parent), bl.mult, bl.birth, true});
    t.verts_[static_cast<VertexId>(bl.parent)].child_bundles.push_back(b);
    ++t.alive_bundles_;
    members += bl.mult;
  }
  for (VertexId v = 0; v < n; ++v) {
    ExtCount deg(t.verts_[v].child_vertices.size() + (v == 0 ? 0 : 1));
    for (BundleId b : t.verts_[v].child_bundles) deg += t.bundles_[b].multiplicity;
    t.verts_[v].degree = deg;
  }
  t.vertex_count_ = ExtCount(n) + members;
  t.edge_count_ = t.vertex_count_ - ExtCount(1);
  return t;
}

CompressedTree CompressedTree::fully_materialized(std::uint64_t cap) const {
  if (!vertex_count_.fits_uint64() || vertex_count_.to_uint64() > cap)
    throw StateError("fully_materialized: expansion exceeds vertex cap");
  CompressedTree t;
  t.verts_ = verts_;
  t.root_ = root_;
  for (const auto& b : bundles_) {
    if (!b.alive) continue;
    std::uint64_t m = b.multiplicity.to_uint64();
    for (std::uint64_t k = 0; k < m; ++k) {
      VertexId v = static_cast<VertexId>(t.verts_.size());
      t.verts_.push_back(MaterializedVertex{b.parent, b.birth,
                                            t.verts_[b.parent].depth + 1, ExtCount(1),
                                            {}, {}});
      t.verts_[b.parent].child_vertices.push_back(v);
    }
  }
  for (auto& v : t.verts_) v.child_bundles.clear();
  t.vertex_count_ = ExtCount(t.verts_.size());
  t.edge_count_ = t.vertex_count_ - ExtCount(1);
  return t;
}

}  // namespace tbrw
