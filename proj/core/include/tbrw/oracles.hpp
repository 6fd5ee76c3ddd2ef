#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tbrw/ext_count.hpp"
#include "tbrw/tree.hpp"

namespace tbrw {

/// Probability masses indexed by vertex id of a fully materialized tree.
struct Distribution {
  std::vector<double> mass;
};

/// Limiting degree fraction 4 / (d (d+1) (d+2)) for d >= 1.
double pa_target(std::uint64_t d);

/// sum_{d<=D} pa_target(d) = 1 - 2 / ((D+1)(D+2)).
double pa_target_partial_sum(std::uint64_t dmax);

/// Mean return time of the simple random walk (no self-loop) started at v:
/// 2 (|T| - 1) / deg(v).  Requires a fully materialized tree with >= 2 vertices.
double expected_return_time(const CompressedTree& tree, VertexId v);

/// Same quantity from a dense first-step linear system (partial pivoting);
/// an independent route kept for cross-checking the closed form.
double expected_return_time_solved(const CompressedTree& tree, VertexId v);

/// Mean hitting time of v from an adjacent vertex w: 2 |T_v(w)| - 1, where
/// T_v(w) is the component of w after deleting v.
double subtree_hitting_time(const CompressedTree& tree, VertexId w, VertexId v);

/// Same quantity via the linear system.
double subtree_hitting_time_solved(const CompressedTree& tree, VertexId w, VertexId v);

/// Worst-case expected cover time bound 2 m^2 for an m-vertex tree.
std::uint64_t cover_time_bound(std::uint64_t m);

/// Exact t-step distribution of the walk (root self-loop included) started
/// at `start`.  Sparse vector iteration; switches to dense repeated squaring
/// with row renormalization once t > |V| * 1000.  Trees above `cap` vertices
/// are refused.
Distribution exact_walk_distribution(const CompressedTree& tree, VertexId start,
                                     const ExtCount& t, std::uint32_t cap = 2000);

/// Stationary distribution of the walk: mass proportional to the walk-option
/// count (graph degree, plus one at the root).  With `degree_over_two_edges`
/// set, returns the plain deg(v) / (2 |E|) normalization instead, which omits
/// the self-loop correction.
Distribution stationary_distribution(const CompressedTree& tree,
                                     bool degree_over_two_edges = false);

double tv_distance(const Distribution& a, const Distribution& b);

/// P(K <= i) for K a sum of independent Bernoulli(p_k); O(j * i) dynamic
/// program over the truncated count.
double poisson_binomial_cdf(std::span<const double> p, std::uint64_t i);

struct ChebyshevBound {
  bool applicable = false;  // requires sum(p) > i - 1
  double value = 0.0;       // upper bound on P(K <= i - 1)
  double psum = 0.0;
};

/// Chebyshev tail bound P(K <= i-1) <= S / (S - i + 1)^2 with S = sum(p).
ChebyshevBound chebyshev_r_bound(std::span<const double> p, std::uint64_t i);
ChebyshevBound chebyshev_r_bound_from_psum(double psum, std::uint64_t i);

/// One representative per isomorphism class of free trees with 2..max_n
/// vertices (Pruefer enumeration, canonical-form dedup).  max_n <= 10.
std::vector<CompressedTree> nonisomorphic_trees(std::uint32_t max_n);

struct IdentityCheck {
  std::string name;
  std::uint64_t instances = 0;
  double max_deviation = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

struct OracleSelfCheckReport {
  std::vector<IdentityCheck> checks;
  bool all_pass = false;
};

/// Cross-validates every closed form against its independent route
/// (enumeration, linear solve, or long-run iteration).
OracleSelfCheckReport oracle_self_check();

}  // namespace tbrw
