#pragma once

#include <cstddef>
#include <vector>

namespace tbrw::detail {

/// C = A * B for row-major row-stochastic n x n matrices, with each result
/// row renormalized to sum 1 to control drift across repeated squarings.
inline std::vector<double> dense_mul_renorm(const std::vector<double>& A,
                                            const std::vector<double>& B, std::size_t n) {
  std::vector<double> C(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < n; ++k) {
      double a = A[i * n + k];
      if (a == 0.0) continue;
      const double* brow = &B[k * n];
      double* crow = &C[i * n];
      for (std::size_t j = 0; j < n; ++j) crow[j] += a * brow[j];
    }
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += C[i * n + j];
    if (s > 0.0)
      for (std::size_t j = 0; j < n; ++j) C[i * n + j] /= s;
  }
  return C;
}

/// r <- r * M with the result renormalized to a probability vector.
inline void dense_vec_mul_renorm(std::vector<double>& r, const std::vector<double>& M,
                                 std::size_t n) {
  std::vector<double> q(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double ri = r[i];
    if (ri == 0.0) continue;
    const double* row = &M[i * n];
    for (std::size_t j = 0; j < n; ++j) q[j] += ri * row[j];
  }
  double s = 0.0;
  for (std::size_t j = 0; j < n; ++j) s += q[j];
  if (s > 0.0)
    for (std::size_t j = 0; j < n; ++j) q[j] /= s;
  r.swap(q);
}

}  // namespace tbrw::detail
