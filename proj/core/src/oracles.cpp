#include "tbrw/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "dense_ops.hpp"
#include "tbrw/errors.hpp"
#include "tbrw/rng.hpp"

namespace tbrw {

namespace {

/// Neighbor lists of a fully materialized tree, indexed by vertex id.  The
/// root self-loop is not an edge and never appears here.
std::vector<std::vector<std::uint32_t>> materialized_adjacency(const CompressedTree& tree) {
  if (tree.alive_bundle_count() != 0)
    throw StateError("oracle: tree must be fully materialized");
  std::size_t n = tree.materialized_count();
  std::vector<std::vector<std::uint32_t>> adj(n);
  for (std::uint32_t v = 0; v < n; ++v) {
    const MaterializedVertex& mv = tree.vertex(v);
    if (v != tree.root()) adj[v].push_back(mv.parent);
    for (VertexId c : mv.child_vertices) adj[v].push_back(c);
  }
  return adj;
}

/// Expected hitting times of `target` for the loop-free simple random walk,
/// from the first-step equations deg(u) h(u) - sum_{x ~ u, x != target} h(x)
/// = deg(u).  Dense Gaussian elimination with partial pivoting.
std::vector<double> hitting_times_to(const std::vector<std::vector<std::uint32_t>>& adj,
                                     std::uint32_t target) {
  std::size_t n = adj.size();
  std::vector<double> h(n, 0.0);
  if (n <= 1) return h;

  std::vector<std::uint32_t> unknown;
  std::vector<std::size_t> row_of(n, SIZE_MAX);
  for (std::uint32_t u = 0; u < n; ++u) {
    if (u == target) continue;
    row_of[u] = unknown.size();
    unknown.push_back(u);
  }
  std::size_t m = unknown.size();
  std::size_t stride = m + 1;  // augmented column holds the right-hand side
  std::vector<double> A(m * stride, 0.0);
  for (std::size_t r = 0; r < m; ++r) {
    std::uint32_t u = unknown[r];
    double deg = static_cast<double>(adj[u].size());
    A[r * stride + r] = deg;
    for (std::uint32_t x : adj[u])
      if (x != target) A[r * stride + row_of[x]] -= 1.0;
    A[r * stride + m] = deg;
  }

  for (std::size_t col = 0; col < m; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < m; ++r)
      if (std::fabs(A[r * stride + col]) > std::fabs(A[piv * stride + col])) piv = r;
    if (std::fabs(A[piv * stride + col]) < 1e-300)
      throw StateError("hitting_times_to: singular system");
    if (piv != col)
      for (std::size_t j = col; j <= m; ++j) std::swap(A[piv * stride + j], A[col * stride + j]);
    for (std::size_t r = col + 1; r < m; ++r) {
      double f = A[r * stride + col] / A[col * stride + col];
      if (f == 0.0) continue;
      for (std::size_t j = col; j <= m; ++j) A[r * stride + j] -= f * A[col * stride + j];
    }
  }
  std::vector<double> x(m, 0.0);
  for (std::size_t r = m; r-- > 0;) {
    double acc = A[r * stride + m];
    for (std::size_t j = r + 1; j < m; ++j) acc -= A[r * stride + j] * x[j];
    x[r] = acc / A[r * stride + r];
  }
  for (std::size_t r = 0; r < m; ++r) h[unknown[r]] = x[r];
  return h;
}

}  // namespace

double pa_target(std::uint64_t d) {
  if (d == 0) throw ArgumentError("pa_target: degree must be >= 1");
  double dd = static_cast<double>(d);
  return 4.0 / (dd * (dd + 1.0) * (dd + 2.0));
}

double pa_target_partial_sum(std::uint64_t dmax) {
  double dd = static_cast<double>(dmax);
  return 1.0 - 2.0 / ((dd + 1.0) * (dd + 2.0));
}

double expected_return_time(const CompressedTree& tree, VertexId v) {
  auto adj = materialized_adjacency(tree);
  if (adj.size() < 2) throw ArgumentError("expected_return_time: need at least two vertices");
  if (v >= adj.size()) throw ArgumentError("expected_return_time: vertex out of range");
  return 2.0 * static_cast<double>(adj.size() - 1) / static_cast<double>(adj[v].size());
}

double expected_return_time_solved(const CompressedTree& tree, VertexId v) {
  auto adj = materialized_adjacency(tree);
  if (adj.size() < 2) throw ArgumentError("expected_return_time: need at least two vertices");
  if (v >= adj.size()) throw ArgumentError("expected_return_time: vertex out of range");
  std::vector<double> h = hitting_times_to(adj, v);
  double acc = 0.0;
  for (std::uint32_t x : adj[v]) acc += h[x];
  return 1.0 + acc / static_cast<double>(adj[v].size());
}

double subtree_hitting_time(const CompressedTree& tree, VertexId w, VertexId v) {
  auto adj = materialized_adjacency(tree);
  if (w >= adj.size() || v >= adj.size())
    throw ArgumentError("subtree_hitting_time: vertex out of range");
  if (std::find(adj[v].begin(), adj[v].end(), w) == adj[v].end())
    throw ArgumentError("subtree_hitting_time: w must be adjacent to v");
  // Size of the component of w after deleting v.
  std::vector<std::uint8_t> seen(adj.size(), 0);
  seen[v] = 1;
  seen[w] = 1;
  std::vector<std::uint32_t> stack{w};
  std::uint64_t size = 1;
  while (!stack.empty()) {
    std::uint32_t u = stack.back();
    stack.pop_back();
    for (std::uint32_t x : adj[u]) {
      if (seen[x]) continue;
      seen[x] = 1;
      ++size;
      stack.push_back(x);
    }
  }
  return 2.0 * static_cast<double>(size) - 1.0;
}

double subtree_hitting_time_solved(const CompressedTree& tree, VertexId w, VertexId v) {
  auto adj = materialized_adjacency(tree);
  if (w >= adj.size() || v >= adj.size())
    throw ArgumentError("subtree_hitting_time: vertex out of range");
  return hitting_times_to(adj, v)[w];
}

std::uint64_t cover_time_bound(std::uint64_t m) {
  if (m == 0) throw ArgumentError("cover_time_bound: m must be >= 1");
  if (m > 2'000'000'000ull) throw ArgumentError("cover_time_bound: m too large");
  return 2 * m * m;
}

Distribution exact_walk_distribution(const CompressedTree& tree, VertexId start,
                                     const ExtCount& t, std::uint32_t cap) {
  auto adj = materialized_adjacency(tree);
  std::size_t n = adj.size();
  if (n == 0) throw ArgumentError("exact_walk_distribution: empty tree");
  if (n > cap) throw StateError("exact_walk_distribution: tree exceeds the size cap");
  if (start >= n) throw ArgumentError("exact_walk_distribution: start out of range");
  std::uint32_t root = tree.root();
  auto weight = [&](std::size_t u) {
    return static_cast<double>(adj[u].size()) + (u == root ? 1.0 : 0.0);
  };

  std::uint64_t sparse_cap = static_cast<std::uint64_t>(n) * 1000;
  if (t.fits_uint64() && t.to_uint64() <= sparse_cap) {
    std::vector<double> p(n, 0.0), q(n, 0.0);
    p[start] = 1.0;
    for (std::uint64_t s = 0, T = t.to_uint64(); s < T; ++s) {
      std::fill(q.begin(), q.end(), 0.0);
      for (std::size_t u = 0; u < n; ++u) {
        if (p[u] == 0.0) continue;
        double share = p[u] / weight(u);
        for (std::uint32_t x : adj[u]) q[x] += share;
        if (u == root) q[u] += share;
      }
      p.swap(q);
    }
    return Distribution{std::move(p)};
  }

  // Beyond 2^62 steps the chain is stationary to double precision on any tree
  // within the cap; clamp instead of widening the exponent loop.
  std::uint64_t steps = t.fits_uint64() ? t.to_uint64() : (std::uint64_t{1} << 62);
  std::vector<double> P(n * n, 0.0);
  for (std::size_t u = 0; u < n; ++u) {
    double share = 1.0 / weight(u);
    for (std::uint32_t x : adj[u]) P[u * n + x] += share;
    if (u == root) P[u * n + u] += share;
  }
  std::vector<double> R(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) R[i * n + i] = 1.0;
  while (steps > 0) {
    if (steps & 1) R = detail::dense_mul_renorm(R, P, n);
    steps >>= 1;
    if (steps > 0) P = detail::dense_mul_renorm(P, P, n);
  }
  std::vector<double> out(R.begin() + static_cast<std::ptrdiff_t>(start) * static_cast<std::ptrdiff_t>(n),
                          R.begin() + static_cast<std::ptrdiff_t>(start + 1) * static_cast<std::ptrdiff_t>(n));
  return Distribution{std::move(out)};
}

Distribution stationary_distribution(const CompressedTree& tree, bool degree_over_two_edges) {
  auto adj = materialized_adjacency(tree);
  std::size_t n = adj.size();
  if (n == 0) throw ArgumentError("stationary_distribution: empty tree");
  std::vector<double> mass(n, 0.0);
  double edges = static_cast<double>(n - 1);
  if (degree_over_two_edges) {
    if (n < 2)
      throw ArgumentError("stationary_distribution: degree/2|E| form needs at least one edge");
    for (std::size_t u = 0; u < n; ++u)
      mass[u] = static_cast<double>(adj[u].size()) / (2.0 * edges);
  } else {
    double total = 2.0 * edges + 1.0;  // every edge twice, plus the root loop option
    std::uint32_t root = tree.root();
    for (std::size_t u = 0; u < n; ++u)
      mass[u] = (static_cast<double>(adj[u].size()) + (u == root ? 1.0 : 0.0)) / total;
  }
  return Distribution{std::move(mass)};
}

double tv_distance(const Distribution& a, const Distribution& b) {
  // The union of the supports is compared; ids missing on one side carry
  // zero mass there.
  std::size_t n = std::max(a.mass.size(), b.mass.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double pa = i < a.mass.size() ? a.mass[i] : 0.0;
    double pb = i < b.mass.size() ? b.mass[i] : 0.0;
    acc += std::fabs(pa - pb);
  }
  return 0.5 * acc;
}

double poisson_binomial_cdf(std::span<const double> p, std::uint64_t i) {
  for (double pk : p)
    if (!(pk >= 0.0 && pk <= 1.0))
      throw ArgumentError("poisson_binomial_cdf: probabilities must lie in [0, 1]");
  if (i >= p.size()) return 1.0;
  // f[c] = P(first k trials produced c successes); mass above i is dropped,
  // which leaves every stored entry exact.
  std::vector<double> f(static_cast<std::size_t>(i) + 1, 0.0);
  f[0] = 1.0;
  std::size_t top = 0;
  for (double pk : p) {
    std::size_t hi = std::min<std::size_t>(top + 1, static_cast<std::size_t>(i));
    for (std::size_t c = hi; c >= 1; --c) f[c] = f[c] * (1.0 - pk) + f[c - 1] * pk;
    f[0] *= 1.0 - pk;
    top = hi;
  }
  double s = 0.0;
  for (double x : f) s += x;
  return std::min(1.0, s);
}

ChebyshevBound chebyshev_r_bound_from_psum(double psum, std::uint64_t i) {
  if (i < 1) throw ArgumentError("chebyshev_r_bound: i must be >= 1");
  ChebyshevBound b;
  b.psum = psum;
  if (std::isinf(psum) && psum > 0.0) {
    b.applicable = true;
    b.value = 0.0;
    return b;
  }
  double need = static_cast<double>(i) - 1.0;
  if (!(psum > need)) {
    b.applicable = false;
    b.value = std::numeric_limits<double>::quiet_NaN();
    return b;
  }
  double gap = psum - need;
  b.applicable = true;
  b.value = psum / (gap * gap);
  return b;
}

ChebyshevBound chebyshev_r_bound(std::span<const double> p, std::uint64_t i) {
  double psum = 0.0;
  for (double pk : p) {
    if (!(pk >= 0.0 && pk <= 1.0))
      throw ArgumentError("chebyshev_r_bound: probabilities must lie in [0, 1]");
    psum += pk;
  }
  return chebyshev_r_bound_from_psum(psum, i);
}

namespace {

std::vector<std::pair<std::uint64_t, std::uint64_t>> pruefer_decode(
    const std::vector<std::uint32_t>& seq, std::uint32_t n) {
  std::vector<std::uint32_t> deg(n, 1);
  for (std::uint32_t a : seq) ++deg[a];
  std::set<std::uint32_t> leaves;
  for (std::uint32_t v = 0; v < n; ++v)
    if (deg[v] == 1) leaves.insert(v);
  std::vector<std::pair<std::uint64_t, std::uint64_t>> edges;
  edges.reserve(n - 1);
  for (std::uint32_t a : seq) {
    std::uint32_t u = *leaves.begin();
    leaves.erase(leaves.begin());
    edges.emplace_back(u, a);
    if (--deg[a] == 1) leaves.insert(a);
  }
  std::uint32_t u = *leaves.begin();
  std::uint32_t v = *std::next(leaves.begin());
  edges.emplace_back(u, v);
  return edges;
}

std::string ahu_code(const std::vector<std::vector<std::uint32_t>>& adj, std::uint32_t v,
                     std::uint32_t parent) {
  std::vector<std::string> kids;
  for (std::uint32_t x : adj[v])
    if (x != parent) kids.push_back(ahu_code(adj, x, v));
  std::sort(kids.begin(), kids.end());
  std::string s = "(";
  for (const std::string& k : kids) s += k;
  s += ")";
  return s;
}

/// Canonical string of a free tree: minimum rooted encoding over its centers.
std::string free_tree_canonical(const std::vector<std::vector<std::uint32_t>>& adj) {
  std::size_t n = adj.size();
  if (n == 1) return "()";
  std::vector<std::uint32_t> deg(n);
  std::vector<std::uint32_t> layer;
  std::size_t remaining = n;
  for (std::size_t v = 0; v < n; ++v) {
    deg[v] = static_cast<std::uint32_t>(adj[v].size());
    if (deg[v] <= 1) layer.push_back(static_cast<std::uint32_t>(v));
  }
  while (remaining > 2) {
    std::vector<std::uint32_t> next;
    for (std::uint32_t v : layer) {
      --remaining;
      for (std::uint32_t x : adj[v])
        if (--deg[x] == 1) next.push_back(x);
    }
    layer.swap(next);
  }
  std::string best;
  for (std::uint32_t c : layer) {
    std::string code = ahu_code(adj, c, UINT32_MAX);
    if (best.empty() || code < best) best = code;
  }
  return best;
}

}  // namespace

std::vector<CompressedTree> nonisomorphic_trees(std::uint32_t max_n) {
  if (max_n < 2 || max_n > 10)
    throw ArgumentError("nonisomorphic_trees: max_n must lie in [2, 10]");
  std::vector<CompressedTree> out;
  out.push_back(CompressedTree::single_edge());
  for (std::uint32_t n = 3; n <= max_n; ++n) {
    std::set<std::string> seen;
    std::vector<std::uint32_t> seq(n - 2, 0);
    while (true) {
      auto edges = pruefer_decode(seq, n);
      std::vector<std::vector<std::uint32_t>> adj(n);
      for (auto [a, b] : edges) {
        adj[a].push_back(static_cast<std::uint32_t>(b));
        adj[b].push_back(static_cast<std::uint32_t>(a));
      }
      std::string canon = free_tree_canonical(adj);
      if (seen.insert(canon).second) out.push_back(CompressedTree::from_edges(edges));

      std::size_t pos = 0;
      while (pos < seq.size() && seq[pos] == n - 1) seq[pos++] = 0;
      if (pos == seq.size()) break;
      ++seq[pos];
    }
  }
  return out;
}

OracleSelfCheckReport oracle_self_check() {
  OracleSelfCheckReport rep;
  std::vector<CompressedTree> trees = nonisomorphic_trees(8);

  {
    IdentityCheck c{"return-time-closed-vs-solve", 0, 0.0, 1e-9, false};
    for (const CompressedTree& t : trees) {
      std::uint64_t n = t.materialized_count();
      for (std::uint32_t v = 0; v < n; ++v) {
        double dev = std::fabs(expected_return_time(t, v) - expected_return_time_solved(t, v));
        c.max_deviation = std::max(c.max_deviation, dev);
        ++c.instances;
      }
    }
    c.pass = c.max_deviation <= c.tolerance;
    rep.checks.push_back(std::move(c));
  }

  {
    IdentityCheck c{"adjacent-hitting-closed-vs-solve", 0, 0.0, 1e-9, false};
    for (const CompressedTree& t : trees) {
      auto adj = materialized_adjacency(t);
      for (std::uint32_t v = 0; v < adj.size(); ++v) {
        for (std::uint32_t w : adj[v]) {
          double dev =
              std::fabs(subtree_hitting_time(t, w, v) - subtree_hitting_time_solved(t, w, v));
          c.max_deviation = std::max(c.max_deviation, dev);
          ++c.instances;
        }
      }
    }
    c.pass = c.max_deviation <= c.tolerance;
    rep.checks.push_back(std::move(c));
  }

  {
    IdentityCheck c{"degree-fraction-telescoping", 0, 0.0, 1e-12, false};
    double acc = 0.0;
    for (std::uint64_t d = 1; d <= 64; ++d) {
      acc += pa_target(d);
      double dev = std::fabs(acc - pa_target_partial_sum(d));
      c.max_deviation = std::max(c.max_deviation, dev);
      ++c.instances;
    }
    c.pass = c.max_deviation <= c.tolerance;
    rep.checks.push_back(std::move(c));
  }

  {
    IdentityCheck c{"success-count-dp-vs-enumeration", 0, 0.0, 1e-12, false};
    RngStream rng(0x5eedULL);
    for (int round = 0; round < 40; ++round) {
      std::size_t j = 1 + static_cast<std::size_t>(rng.below(12));
      std::vector<double> p(j);
      for (double& pk : p) pk = rng.next_unit();
      for (std::uint64_t i = 0; i <= j; ++i) {
        double brute = 0.0;
        for (std::uint64_t mask = 0; mask < (1ull << j); ++mask) {
          if (static_cast<std::uint64_t>(__builtin_popcountll(mask)) > i) continue;
          double term = 1.0;
          for (std::size_t k = 0; k < j; ++k)
            term *= (mask >> k) & 1 ? p[k] : 1.0 - p[k];
          brute += term;
        }
        double dev = std::fabs(poisson_binomial_cdf(p, i) - brute);
        c.max_deviation = std::max(c.max_deviation, dev);
        ++c.instances;
      }
    }
    c.pass = c.max_deviation <= c.tolerance;
    rep.checks.push_back(std::move(c));
  }

  {
    // The tail bound must dominate the exact left-tail probability wherever
    // it applies; max_deviation records the worst (exact - bound) excess.
    IdentityCheck c{"tail-bound-dominates-exact", 0, 0.0, 1e-12, false};
    auto probe = [&](const std::vector<double>& p) {
      double psum = 0.0;
      for (double pk : p) psum += pk;
      for (std::uint64_t i = 1;; ++i) {
        ChebyshevBound b = chebyshev_r_bound(p, i);
        if (!b.applicable) break;
        double exact = poisson_binomial_cdf(p, i - 1);
        c.max_deviation = std::max(c.max_deviation, exact - b.value);
        ++c.instances;
      }
    };
    std::vector<double> harmonic(400);
    for (std::size_t k = 0; k < harmonic.size(); ++k)
      harmonic[k] = 1.0 / static_cast<double>(k + 2);
    probe(harmonic);
    probe(std::vector<double>(100, 0.3));
    c.max_deviation = std::max(c.max_deviation, 0.0);
    c.pass = c.max_deviation <= c.tolerance;
    rep.checks.push_back(std::move(c));
  }

  {
    IdentityCheck c{"stationary-is-fixed-point", 0, 0.0, 1e-12, false};
    for (const CompressedTree& t : trees) {
      std::size_t n = t.materialized_count();
      Distribution pi = stationary_distribution(t);
      std::vector<double> mixed(n, 0.0);
      for (std::uint32_t v = 0; v < n; ++v) {
        Distribution row = exact_walk_distribution(t, v, ExtCount(1));
        for (std::size_t x = 0; x < n; ++x) mixed[x] += pi.mass[v] * row.mass[x];
      }
      double dev = tv_distance(Distribution{std::move(mixed)}, pi);
      c.max_deviation = std::max(c.max_deviation, dev);
      ++c.instances;
    }
    c.pass = c.max_deviation <= c.tolerance;
    rep.checks.push_back(std::move(c));
  }

  {
    IdentityCheck c{"long-run-reaches-stationary", 0, 0.0, 1e-9, false};
    for (const CompressedTree& t : trees) {
      Distribution late = exact_walk_distribution(t, 0, ExtCount(200'000));
      double dev = tv_distance(late, stationary_distribution(t));
      c.max_deviation = std::max(c.max_deviation, dev);
      ++c.instances;
    }
    c.pass = c.max_deviation <= c.tolerance;
    rep.checks.push_back(std::move(c));
  }

  rep.all_pass = true;
  for (const IdentityCheck& c : rep.checks) rep.all_pass = rep.all_pass && c.pass;
  return rep;
}

}  // namespace tbrw
