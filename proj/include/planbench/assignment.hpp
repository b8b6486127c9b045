#pragma once

// Bipartite assignment routines shared by the plan metrics (0/1 matching
// cardinality) and the detection reward (max-total-weight assignment).

#include <cstddef>
#include <functional>
#include <limits>
#include <utility>
#include <vector>

namespace planbench {

// Maximum-cardinality bipartite matching via Kuhn's augmenting paths.
// edge(i, j) answers whether left vertex i may pair with right vertex j.
inline size_t max_matching_cardinality(size_t m, size_t n,
                                       const std::function<bool(size_t, size_t)>& edge) {
  std::vector<int> match_right(n, -1);
  std::vector<char> visited(n);

  std::function<bool(size_t)> try_row = [&](size_t i) -> bool {
    for (size_t j = 0; j < n; ++j) {
      if (!edge(i, j) || visited[j]) continue;
      visited[j] = 1;
      if (match_right[j] < 0 || try_row(static_cast<size_t>(match_right[j]))) {
        match_right[j] = static_cast<int>(i);
        return true;
      }
    }
    return false;
  };

  size_t matched = 0;
  for (size_t i = 0; i < m; ++i) {
    std::fill(visited.begin(), visited.end(), 0);
    if (try_row(i)) ++matched;
  }
  return matched;
}

struct Assignment {
  double total = 0.0;
  std::vector<std::pair<size_t, size_t>> pairs;  // (row, col) with positive weight
};

// Exact maximum-total-weight assignment on a rectangular nonnegative matrix.
// Zero-weight cells are treated as "no pairing": the optimum may leave rows or
// columns unassigned, and only strictly positive pairs are reported.
// Potentials-based Hungarian algorithm on the square-padded cost matrix, O(n^3).
inline Assignment max_weight_assignment(const std::vector<std::vector<double>>& w) {
  size_t m = w.size();
  size_t n = m ? w[0].size() : 0;
  Assignment result;
  if (m == 0 || n == 0) return result;

  size_t dim = std::max(m, n);
  const double kInf = std::numeric_limits<double>::infinity();
  // minimize cost = -weight, 1-based with a dummy 0 row/col
  auto cost = [&](size_t i, size_t j) -> double {
    return (i <= m && j <= n) ? -w[i - 1][j - 1] : 0.0;
  };

  std::vector<double> u(dim + 1, 0.0), v(dim + 1, 0.0);
  std::vector<size_t> p(dim + 1, 0), way(dim + 1, 0);
  for (size_t i = 1; i <= dim; ++i) {
    p[0] = i;
    size_t j0 = 0;
    std::vector<double> minv(dim + 1, kInf);
    std::vector<char> used(dim + 1, 0);
    do {
      used[j0] = 1;
      size_t i0 = p[j0], j1 = 0;
      double delta = kInf;
      for (size_t j = 1; j <= dim; ++j) {
        if (used[j]) continue;
        double cur = cost(i0, j) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (size_t j = 0; j <= dim; ++j) {
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
      size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  for (size_t j = 1; j <= dim; ++j) {
    size_t i = p[j];
    if (i >= 1 && i <= m && j <= n && w[i - 1][j - 1] > 0.0) {
      result.total += w[i - 1][j - 1];
      result.pairs.emplace_back(i - 1, j - 1);
    }
  }
  return result;
}

}  // namespace planbench
