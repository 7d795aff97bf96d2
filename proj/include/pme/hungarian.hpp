#pragma once

// Rectangular linear assignment (Kuhn-Munkres with potentials, O(n^2 m)).

#include <algorithm>
#include <limits>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace pme {

using Matching = std::vector<std::pair<int, int>>;

namespace detail {

// Requires rows <= cols. Returns col index per row.
inline std::vector<int> hungarian_rows_le_cols(const Eigen::MatrixXd& cost) {
  const int n = static_cast<int>(cost.rows());
  const int m = static_cast<int>(cost.cols());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<int> p(m + 1, 0), way(m + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= m; ++j)
    if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

}  // namespace detail

/// Minimum-cost one-to-one matching of size min(rows, cols), sorted by row.
/// Costs must be finite.
inline Matching hungarian(const Eigen::MatrixXd& cost) {
  Matching out;
  if (cost.rows() == 0 || cost.cols() == 0) return out;
  if (cost.rows() <= cost.cols()) {
    const auto r2c = detail::hungarian_rows_le_cols(cost);
    for (int r = 0; r < static_cast<int>(r2c.size()); ++r) out.emplace_back(r, r2c[r]);
  } else {
    const Eigen::MatrixXd t = cost.transpose();
    const auto c2r = detail::hungarian_rows_le_cols(t);
    for (int c = 0; c < static_cast<int>(c2r.size()); ++c) out.emplace_back(c2r[c], c);
    std::sort(out.begin(), out.end());
  }
  return out;
}

inline double matching_cost(const Eigen::MatrixXd& cost, const Matching& m) {
  double total = 0.0;
  for (const auto& [r, c] : m) total += cost(r, c);
  return total;
}

}  // namespace pme
