#pragma once

// Brute-force reference implementations for the test suite. These stay
// independent of the library's algorithms on purpose: different recurrences,
// no shared helpers beyond the plain data types.

#include <functional>
#include <vector>

#include "planbench/match_metrics.hpp"

namespace oracle {

// Maximum matching cardinality by exhaustive row assignment with memoization
// over (row, used-column bitmask). Columns capped at 16.
inline size_t max_matching(const planbench::MatchMatrix& M) {
  std::vector<std::vector<int>> memo(M.m + 1, std::vector<int>(1u << M.n, -1));
  std::function<int(size_t, unsigned)> go = [&](size_t i, unsigned used) -> int {
    if (i == M.m) return 0;
    int& slot = memo[i][used];
    if (slot >= 0) return slot;
    int best = go(i + 1, used);
    for (size_t j = 0; j < M.n; ++j)
      if (M.at(i, j) && !(used & (1u << j))) best = std::max(best, 1 + go(i + 1, used | (1u << j)));
    return slot = best;
  };
  return static_cast<size_t>(go(0, 0));
}

// Longest strictly-increasing chain of matched pairs, computed pairwise:
// chain[a][b] = 1 + max chain[a'][b'] over matched (a' < a, b' < b).
inline size_t lcs_chain(const planbench::MatchMatrix& M) {
  size_t best = 0;
  std::vector<std::vector<size_t>> chain(M.m, std::vector<size_t>(M.n, 0));
  for (size_t a = 0; a < M.m; ++a) {
    for (size_t b = 0; b < M.n; ++b) {
      if (!M.at(a, b)) continue;
      size_t d = 1;
      for (size_t a2 = 0; a2 < a; ++a2)
        for (size_t b2 = 0; b2 < b; ++b2)
          if (M.at(a2, b2)) d = std::max(d, chain[a2][b2] + 1);
      chain[a][b] = d;
      best = std::max(best, d);
    }
  }
  return best;
}

// Exact maximum-total-weight assignment by exhaustive recursion; cells with
// weight <= 0 are unpairable.
inline double max_weight(const std::vector<std::vector<double>>& w) {
  size_t m = w.size(), n = m ? w[0].size() : 0;
  std::function<double(size_t, unsigned)> go = [&](size_t i, unsigned used) -> double {
    if (i == m) return 0.0;
    double best = go(i + 1, used);
    for (size_t j = 0; j < n; ++j)
      if (!(used & (1u << j)) && w[i][j] > 0.0)
        best = std::max(best, w[i][j] + go(i + 1, used | (1u << j)));
    return best;
  };
  return go(0, 0);
}

}  // namespace oracle
