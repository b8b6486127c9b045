#pragma once

// Perception rewards: detection IoU assignment, count extraction, and the
// two-branch spatial reward (multiple-choice and descriptive relations) with
// a verbosity penalty.

#include <cmath>
#include <fstream>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "planbench/assignment.hpp"
#include "planbench/core.hpp"

namespace planbench {

struct BBox {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

  void validate() const {
    if (!(std::isfinite(x1) && std::isfinite(y1) && std::isfinite(x2) && std::isfinite(y2)))
      throw std::invalid_argument("bounding box has non-finite coordinates");
    if (!(x2 > x1 && y2 > y1)) throw std::invalid_argument("degenerate bounding box");
  }
  double area() const { return (x2 - x1) * (y2 - y1); }
};

inline double iou(const BBox& a, const BBox& b) {
  a.validate();
  b.validate();
  double ix = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
  double iy = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
  double inter = ix * iy;
  double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

// Max-total-IoU assignment over pairs clearing the threshold, normalized by
// the larger list size so both misses and hallucinations dilute the reward.
// Two empty lists are a vacuous perfect score.
inline double detection_reward(const std::vector<BBox>& pred, const std::vector<BBox>& gt,
                               double iou_threshold = 0.5) {
  if (pred.empty() && gt.empty()) return 1.0;
  if (pred.empty() || gt.empty()) return 0.0;
  std::vector<std::vector<double>> w(pred.size(), std::vector<double>(gt.size(), 0.0));
  for (size_t i = 0; i < pred.size(); ++i)
    for (size_t j = 0; j < gt.size(); ++j) {
      double v = iou(pred[i], gt[j]);
      if (v >= iou_threshold) w[i][j] = v;
    }
  double total = max_weight_assignment(w).total;
  return total / static_cast<double>(std::max(pred.size(), gt.size()));
}

// Last integer in the text once bracket groups (bounding boxes and other
// [..] blobs) are removed. "I count [12, 3, 40, 55] and see 7 apples" -> 7.
inline std::optional<long long> extract_count(const std::string& text) {
  std::string scrubbed;
  scrubbed.reserve(text.size());
  int depth = 0;
  for (char c : text) {
    if (c == '[') ++depth;
    if (depth == 0) scrubbed += c;
    if (c == ']' && depth > 0) --depth;
  }
  std::optional<long long> last;
  size_t i = 0;
  while (i < scrubbed.size()) {
    if (std::isdigit(static_cast<unsigned char>(scrubbed[i]))) {
      size_t j = i;
      while (j < scrubbed.size() && std::isdigit(static_cast<unsigned char>(scrubbed[j]))) ++j;
      try {
        last = std::stoll(scrubbed.substr(i, j - i));
      } catch (const std::out_of_range&) {
        // absurd digit runs are not counts
      }
      i = j;
    } else {
      ++i;
    }
  }
  return last;
}

inline double counting_reward(const std::string& pred_text, long long gt_count) {
  auto got = extract_count(pred_text);
  return got && *got == gt_count ? 1.0 : 0.0;
}

// ---------------------------------------------------------------------------
// spatial rewards

struct RelationEntry {
  std::string id;
  std::vector<std::string> synonyms;  // surface forms, longest-match wins
  std::string antonym;                // empty = none
  bool symmetric = false;             // "near": swapping the operands is free
};

class RelationTable {
 public:
  explicit RelationTable(std::vector<RelationEntry> entries) : entries_(std::move(entries)) {
    for (auto& e : entries_)
      for (auto& s : e.synonyms) forms_.push_back({tokenize(s), e.id});
  }

  static RelationTable defaults() {
    return RelationTable({
        {"left", {"left of", "left side of", "to the left of", "on the left of", "left"}, "right", false},
        {"right", {"right of", "right side of", "to the right of", "on the right of", "right"}, "left", false},
        {"above", {"above", "on top of", "over", "atop", "higher than"}, "below", false},
        {"below", {"below", "under", "underneath", "beneath", "lower than"}, "above", false},
        {"near", {"near", "beside", "next to", "close to", "adjacent to"}, "", true},
        {"inside", {"inside of", "inside", "within", "in"}, "", false},
        {"behind", {"behind", "in back of", "at the back of"}, "in_front_of", false},
        {"in_front_of", {"in front of", "ahead of"}, "behind", false},
    });
  }

  static RelationTable from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open relation table: " + path);
    nlohmann::json doc = nlohmann::json::parse(in, nullptr, false);
    if (doc.is_discarded() || !doc.contains("relations"))
      throw config_error("relation table is not a JSON object with a 'relations' key: " + path);
    std::vector<RelationEntry> entries;
    for (const auto& r : doc["relations"]) {
      RelationEntry e;
      e.id = r.at("id").get<std::string>();
      for (const auto& s : r.at("synonyms")) e.synonyms.push_back(s.get<std::string>());
      e.antonym = r.value("antonym", "");
      e.symmetric = r.value("symmetric", false);
      entries.push_back(std::move(e));
    }
    return RelationTable(std::move(entries));
  }

  const RelationEntry* find(const std::string& id) const {
    for (const auto& e : entries_)
      if (e.id == id) return &e;
    return nullptr;
  }

  // Leftmost-longest synonym occurrence in the token stream. Returns the
  // relation id plus the matched token span [begin, end).
  struct Hit {
    std::string id;
    size_t begin = 0, end = 0;
  };
  std::optional<Hit> match(const std::vector<std::string>& tokens) const {
    for (size_t i = 0; i < tokens.size(); ++i) {
      const std::pair<std::vector<std::string>, std::string>* best = nullptr;
      for (const auto& form : forms_) {
        const auto& syn = form.first;
        if (syn.empty() || i + syn.size() > tokens.size()) continue;
        if (!std::equal(syn.begin(), syn.end(), tokens.begin() + static_cast<long>(i))) continue;
        if (!best || syn.size() > best->first.size()) best = &form;
      }
      if (best) return Hit{best->second, i, i + best->first.size()};
    }
    return std::nullopt;
  }

  const std::vector<RelationEntry>& entries() const { return entries_; }

 private:
  std::vector<RelationEntry> entries_;
  std::vector<std::pair<std::vector<std::string>, std::string>> forms_;
};

struct RelationStatement {
  std::string subject;  // normalized
  std::string relation;
  std::string object;
};

// "The cup is to the left of the plate" -> {cup, left, plate}.
inline std::optional<RelationStatement> parse_relation(const std::string& text,
                                                       const RelationTable& table) {
  auto tokens = tokenize(text);
  auto hit = table.match(tokens);
  if (!hit) return std::nullopt;

  static const std::set<std::string> fillers = {"is",       "are",    "was",      "were",
                                                "be",       "been",   "located",  "positioned",
                                                "situated", "placed", "sitting",  "standing",
                                                "lies",     "lying",  "appears",  "seems"};
  auto clean = [&](size_t b, size_t e, bool strip_leading_particle) {
    std::vector<std::string> seg;
    for (size_t i = b; i < e; ++i) {
      const auto& t = tokens[i];
      if (strip_leading_particle && seg.empty() && (t == "of" || t == "to")) continue;
      if (is_article(t) || fillers.count(t)) continue;
      seg.push_back(t);
    }
    return join(seg, " ");
  };
  RelationStatement st;
  st.subject = clean(0, hit->begin, false);
  st.relation = hit->id;
  st.object = clean(hit->end, tokens.size(), true);
  if (st.subject.empty() || st.object.empty()) return std::nullopt;
  return st;
}

struct SpatialConfig {
  RelationTable relations = RelationTable::defaults();
  double beta = 0.5;   // verbosity penalty strength
  double gamma = 3.0;  // free length ratio before the penalty bites
  std::vector<std::string> options;  // MCQ option texts, when known
};

// max(0, 1 - beta * max(0, len_pred/len_gt - gamma)), lengths in whitespace tokens.
inline double verbosity_penalty_factor(const std::string& pred, const std::string& gt,
                                       double beta = 0.5, double gamma = 3.0) {
  auto count = [](const std::string& s) {
    size_t n = 0;
    bool in_tok = false;
    for (char c : s) {
      bool ws = std::isspace(static_cast<unsigned char>(c)) != 0;
      if (!ws && !in_tok) ++n;
      in_tok = !ws;
    }
    return n;
  };
  size_t lp = count(pred), lg = count(gt);
  if (lg == 0) return 1.0;
  double ratio = static_cast<double>(lp) / static_cast<double>(lg);
  return std::max(0.0, 1.0 - beta * std::max(0.0, ratio - gamma));
}

namespace detail {

inline bool has_standalone_upper_letter(const std::string& raw, char letter) {
  for (size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] != letter) continue;
    bool left_ok = i == 0 || !std::isalnum(static_cast<unsigned char>(raw[i - 1]));
    bool right_ok = i + 1 == raw.size() || !std::isalnum(static_cast<unsigned char>(raw[i + 1]));
    if (left_ok && right_ok) return true;
  }
  return false;
}

inline bool contains_token_run(const std::vector<std::string>& hay,
                               const std::vector<std::string>& needle) {
  if (needle.empty() || needle.size() > hay.size()) return false;
  for (size_t i = 0; i + needle.size() <= hay.size(); ++i)
    if (std::equal(needle.begin(), needle.end(), hay.begin() + static_cast<long>(i))) return true;
  return false;
}

inline const std::set<std::string>& stopwords() {
  static const std::set<std::string> words = {
      "a",    "an",   "the", "is",  "are", "was",  "were", "be",   "been", "being", "of",
      "to",   "in",   "on",  "at",  "and", "or",   "it",   "its",  "this", "that",  "there",
      "with", "as",   "by",  "for", "from", "has",  "have", "does", "do"};
  return words;
}

}  // namespace detail

// Multiple-choice branch. Matching tightens with the ground-truth shape:
//  - single option letter: a standalone uppercase letter token (or the whole
//    prediction) must equal it;
//  - short word/phrase: the normalized gt must appear as a token run, and no
//    competing option text may also appear;
//  - sentence (> 4 tokens): every non-stopword gt token must appear.
// The verbosity penalty multiplies the hit/miss score either way.
inline double spatial_mcq_reward(const std::string& pred, const std::string& gt,
                                 const SpatialConfig& cfg = {}) {
  bool correct = false;
  std::string gt_trim = trim(gt);
  auto pred_tokens = strip_articles(tokenize(pred));
  auto gt_tokens = strip_articles(tokenize(gt_trim));

  if (gt_trim.size() == 1 && std::isalpha(static_cast<unsigned char>(gt_trim[0]))) {
    char letter = static_cast<char>(std::toupper(static_cast<unsigned char>(gt_trim[0])));
    correct = iequals(trim(pred), gt_trim) || detail::has_standalone_upper_letter(pred, letter);
  } else if (tokenize(gt_trim).size() > 4) {
    correct = !gt_tokens.empty();
    std::set<std::string> bag(pred_tokens.begin(), pred_tokens.end());
    for (const auto& t : gt_tokens) {
      if (detail::stopwords().count(t)) continue;
      if (!bag.count(t)) {
        correct = false;
        break;
      }
    }
  } else {
    correct = detail::contains_token_run(pred_tokens, gt_tokens);
    if (correct) {
      for (const auto& opt : cfg.options) {
        auto ot = strip_articles(tokenize(opt));
        if (ot == gt_tokens) continue;
        if (detail::contains_token_run(pred_tokens, ot)) {
          correct = false;  // prediction hedges across several options
          break;
        }
      }
    }
  }
  return (correct ? 1.0 : 0.0) * verbosity_penalty_factor(pred, gt, cfg.beta, cfg.gamma);
}

// Descriptive branch: relation triples must match directly, or swapped via
// the antonym table (or a symmetric relation). Unknown gt vocabulary is a
// configuration problem and throws.
inline double spatial_descriptive_reward(const std::string& pred, const std::string& gt,
                                         const SpatialConfig& cfg = {}) {
  auto gold = parse_relation(gt, cfg.relations);
  if (!gold)
    throw std::invalid_argument("ground-truth statement has no known spatial relation: " + gt);
  auto got = parse_relation(pred, cfg.relations);
  bool correct = false;
  if (got) {
    const RelationEntry* rel = cfg.relations.find(gold->relation);
    bool direct = got->relation == gold->relation && got->subject == gold->subject &&
                  got->object == gold->object;
    bool swapped_antonym = rel && !rel->antonym.empty() && got->relation == rel->antonym &&
                           got->subject == gold->object && got->object == gold->subject;
    bool swapped_symmetric = rel && rel->symmetric && got->relation == gold->relation &&
                             got->subject == gold->object && got->object == gold->subject;
    correct = direct || swapped_antonym || swapped_symmetric;
  }
  return (correct ? 1.0 : 0.0) * verbosity_penalty_factor(pred, gt, cfg.beta, cfg.gamma);
}

enum class SpatialTaskKind { multiple_choice, descriptive };

inline double spatial_reward(const std::string& pred, const std::string& gt, SpatialTaskKind kind,
                             const SpatialConfig& cfg = {}) {
  return kind == SpatialTaskKind::multiple_choice ? spatial_mcq_reward(pred, gt, cfg)
                                                  : spatial_descriptive_reward(pred, gt, cfg);
}

}  // namespace planbench
