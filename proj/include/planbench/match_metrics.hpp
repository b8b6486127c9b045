#pragma once

// Plan-vs-gold evaluation. Low-level locomotion actions are filtered from
// both sides, a binary cross-match matrix is built with one matcher call per
// predicted action, and two scores are read off it:
//
//   quantity = maximum bipartite matching cardinality   (content coverage)
//   order    = longest M-constrained common subsequence (sequencing)
//
// Each score s is reported as precision s/m, recall s/n and their F1, with
// zero denominators scoring 0.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "planbench/action_set.hpp"
#include "planbench/assignment.hpp"
#include "planbench/core.hpp"
#include "planbench/plan_format.hpp"

namespace planbench {

struct MatchMatrix {
  size_t m = 0, n = 0;        // predicted x ground-truth
  std::vector<uint8_t> cells;  // row-major

  MatchMatrix() = default;
  MatchMatrix(size_t rows, size_t cols) : m(rows), n(cols), cells(rows * cols, 0) {}

  uint8_t at(size_t i, size_t j) const { return cells[i * n + j]; }
  void set(size_t i, size_t j, bool v) { cells[i * n + j] = v ? 1 : 0; }

  static MatchMatrix from_rows(const std::vector<std::vector<int>>& rows) {
    MatchMatrix mm(rows.size(), rows.empty() ? 0 : rows[0].size());
    for (size_t i = 0; i < mm.m; ++i)
      for (size_t j = 0; j < mm.n; ++j) mm.set(i, j, rows[i][j] != 0);
    return mm;
  }
};

struct MatchResult {
  std::vector<size_t> indices;  // matching ground-truth positions, 0-based, ascending
  bool range_warning = false;   // judge produced out-of-range indices (dropped)
  bool parse_warning = false;   // judge reply was not parseable (treated as no match)
};

class ActionMatcher {
 public:
  virtual ~ActionMatcher() = default;
  // May return several indices: one predicted action can cover multiple gold steps.
  virtual MatchResult match(const AtomicAction& pred, const std::vector<AtomicAction>& gt) = 0;
};

struct MatcherConfig {
  ActionSet action_set = ActionSet::defaults();
  // normalized surface form -> normalized canonical form, e.g. "washer" -> "washing machine"
  std::unordered_map<std::string, std::string> object_aliases;
};

// Deterministic matcher: canonical verbs equal (after ActionSet alias
// resolution, case-insensitive) and the argument multisets equal after
// normalization (lowercase, trim, article stripping, object alias table).
class RuleBasedMatcher : public ActionMatcher {
 public:
  explicit RuleBasedMatcher(MatcherConfig cfg = {}) : cfg_(std::move(cfg)) {}

  MatchResult match(const AtomicAction& pred, const std::vector<AtomicAction>& gt) override {
    MatchResult res;
    for (size_t j = 0; j < gt.size(); ++j)
      if (actions_equivalent(pred, gt[j])) res.indices.push_back(j);
    return res;
  }

  bool actions_equivalent(const AtomicAction& a, const AtomicAction& b) const {
    if (canonical_verb(a.verb) != canonical_verb(b.verb)) return false;
    auto na = normalized_args(a), nb = normalized_args(b);
    std::sort(na.begin(), na.end());
    std::sort(nb.begin(), nb.end());
    return na == nb;
  }

 private:
  std::string canonical_verb(const std::string& verb) const {
    auto res = cfg_.action_set.resolve(verb);
    return res.verdict == VerbVerdict::unknown ? to_lower(verb) : to_lower(res.canonical);
  }

  std::vector<std::string> normalized_args(const AtomicAction& a) const {
    std::vector<std::string> out;
    out.reserve(a.args.size());
    for (const auto& arg : a.args) {
      std::string norm = normalize_name(arg);
      auto it = cfg_.object_aliases.find(norm);
      out.push_back(it == cfg_.object_aliases.end() ? norm : it->second);
    }
    return out;
  }

  MatcherConfig cfg_;
};

inline std::vector<std::string> default_low_level_verbs() {
  return {"find", "navigate", "gotoobject", "search", "map"};
}

// Drops locomotion/search actions before scoring. Verbs are compared after
// ActionSet alias resolution when a set is supplied.
inline std::vector<AtomicAction> filter_low_level(const std::vector<AtomicAction>& actions,
                                                  const std::vector<std::string>& low_level_verbs,
                                                  const ActionSet* set = nullptr) {
  std::vector<AtomicAction> out;
  for (const auto& a : actions) {
    std::string verb = a.verb;
    if (set) {
      auto res = set->resolve(verb);
      if (res.verdict != VerbVerdict::unknown) verb = res.canonical;
    }
    bool low = false;
    for (const auto& lv : low_level_verbs)
      if (iequals(verb, lv)) {
        low = true;
        break;
      }
    if (!low) out.push_back(a);
  }
  return out;
}

// One matcher invocation per predicted action. Matcher exceptions propagate
// wrapped with the failing row. Range/parse warnings collect into `flags`.
inline MatchMatrix build_match_matrix(const std::vector<AtomicAction>& pred,
                                      const std::vector<AtomicAction>& gt, ActionMatcher& matcher,
                                      std::vector<std::string>* flags = nullptr) {
  MatchMatrix m(pred.size(), gt.size());
  for (size_t i = 0; i < pred.size(); ++i) {
    MatchResult res;
    try {
      res = matcher.match(pred[i], gt);
    } catch (const std::exception& e) {
      throw judge_error("action matcher failed on predicted row " + std::to_string(i) + ": " +
                        e.what());
    }
    for (size_t j : res.indices) {
      if (j >= gt.size()) throw std::invalid_argument("matcher returned out-of-range index");
      m.set(i, j, true);
    }
    if (flags && res.range_warning) flags->push_back("matcher_range_warning");
    if (flags && res.parse_warning) flags->push_back("matcher_parse_warning");
  }
  return m;
}

inline size_t hungarian_quantity(const MatchMatrix& m) {
  return max_matching_cardinality(m.m, m.n,
                                  [&](size_t i, size_t j) { return m.at(i, j) != 0; });
}

// Longest sequence of matched (i, j) pairs strictly increasing in both
// indices; the LCS dynamic program with M[i][j] as the equality relation.
inline size_t lcs_order(const MatchMatrix& m) {
  if (m.m == 0 || m.n == 0) return 0;
  std::vector<std::vector<size_t>> dp(m.m + 1, std::vector<size_t>(m.n + 1, 0));
  for (size_t i = 1; i <= m.m; ++i) {
    for (size_t j = 1; j <= m.n; ++j) {
      size_t best = std::max(dp[i - 1][j], dp[i][j - 1]);
      if (m.at(i - 1, j - 1)) best = std::max(best, dp[i - 1][j - 1] + 1);
      dp[i][j] = best;
    }
  }
  return dp[m.m][m.n];
}

struct PRF1 {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool operator==(const PRF1&) const = default;
};

inline PRF1 prf1(size_t score, size_t m, size_t n) {
  if (score > std::min(m, n))
    throw std::invalid_argument("score " + std::to_string(score) + " exceeds min(m, n)");
  PRF1 r;
  r.precision = m ? static_cast<double>(score) / static_cast<double>(m) : 0.0;
  r.recall = n ? static_cast<double>(score) / static_cast<double>(n) : 0.0;
  r.f1 = (r.precision + r.recall) > 0.0
             ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
             : 0.0;
  return r;
}

struct MatchMetrics {
  PRF1 quantity;
  PRF1 order;
};

struct EvalConfig {
  bool strict_parse = true;  // false salvages what it can from the prediction
  ActionSet action_set = ActionSet::defaults();
  std::vector<std::string> low_level_verbs = default_low_level_verbs();
  std::unordered_map<std::string, std::string> object_aliases;
};

struct PairEvaluation {
  MatchMetrics metrics;
  size_t quantity_score = 0, order_score = 0;
  size_t m = 0, n = 0;  // filtered action counts, for micro aggregation
  std::vector<std::string> flags;
};

// Full pipeline for one (prediction, ground truth) pair of raw structured
// outputs. An unparseable prediction under strict_parse scores zero with a
// format_failure flag; an unparseable ground truth is a caller error.
inline PairEvaluation evaluate_plan_pair(const std::string& pred_raw, const std::string& gt_raw,
                                         ActionMatcher& matcher, const EvalConfig& cfg = {}) {
  PairEvaluation out;
  auto gt = parse_structured_output(gt_raw, /*strict=*/true);
  if (!gt) throw std::invalid_argument("ground truth does not parse as structured output");

  auto pred = parse_structured_output(pred_raw, cfg.strict_parse);
  if (!pred) {
    out.flags.push_back("format_failure");
    return out;
  }

  auto p = filter_low_level(pred->actions, cfg.low_level_verbs, &cfg.action_set);
  auto g = filter_low_level(gt->actions, cfg.low_level_verbs, &cfg.action_set);
  out.m = p.size();
  out.n = g.size();
  if (p.empty()) out.flags.push_back("empty_prediction");
  if (g.empty()) out.flags.push_back("empty_ground_truth");

  MatchMatrix matrix = build_match_matrix(p, g, matcher, &out.flags);
  out.quantity_score = hungarian_quantity(matrix);
  out.order_score = lcs_order(matrix);
  out.metrics.quantity = prf1(out.quantity_score, out.m, out.n);
  out.metrics.order = prf1(out.order_score, out.m, out.n);
  return out;
}

}  // namespace planbench
