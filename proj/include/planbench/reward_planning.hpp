#pragma once

// Training-time rewards for planning outputs: a deterministic format reward,
// a generative-reward-model score extracted from judge replies, their linear
// combination, and a judge-backed correctness check for instruction answers.

#include <cmath>
#include <cstdlib>
#include <optional>
#include <stdexcept>
#include <string>

#include "planbench/action_set.hpp"
#include "planbench/judge_client.hpp"
#include "planbench/plan_format.hpp"

namespace planbench {

struct FormatRewardWeights {
  double completeness = 1.0 / 3.0;
  double closure = 1.0 / 3.0;
  double adherence = 1.0 / 3.0;
};

struct FormatRewardBreakdown {
  double completeness = 0.0;  // fraction of the three tag pairs present
  double closure = 0.0;       // fraction properly closed and correctly ordered
  double adherence = 0.0;     // fraction of parsed actions with a valid verb
  double total = 0.0;
};

// Rule-based format reward over the raw model text. Never throws on bad
// input; arbitrary bytes are simply worth 0.
inline FormatRewardBreakdown format_reward(const std::string& raw, const ActionSet& set,
                                           const FormatRewardWeights& w = {}) {
  if (w.completeness < 0 || w.closure < 0 || w.adherence < 0 ||
      std::abs(w.completeness + w.closure + w.adherence - 1.0) > 1e-9)
    throw std::invalid_argument("format reward weights must be nonnegative and sum to 1");

  ParseReport rep;
  parse_structured_output(raw, /*strict=*/false, &rep);

  FormatRewardBreakdown out;
  out.completeness =
      (int(rep.response.present) + int(rep.plans.present) + int(rep.actions.present)) / 3.0;
  out.closure = rep.well_placed_count() / 3.0;

  if (rep.actions.present) {
    std::vector<ParseIssue> issues;
    auto acts = detail::parse_action_list(raw, rep.actions, /*lenient=*/true, issues);
    if (acts.empty()) {
      out.adherence = issues.empty() ? 1.0 : 0.0;  // well-formed [] vs unparseable
    } else {
      size_t valid = 0;
      for (const auto& a : acts)
        if (set.contains(a.verb)) ++valid;
      out.adherence = static_cast<double>(valid) / static_cast<double>(acts.size());
    }
  }

  out.total = w.completeness * out.completeness + w.closure * out.closure +
              w.adherence * out.adherence;
  return out;
}

// Scoring prompt for the generative reward model. The four payload slots are
// {question}, {sol}, {ATOMIC_ACTION_SET} and {completion}.
inline constexpr const char* kGrmPromptTemplate =
    R"(You are an expert reviewer in the field of robotic task response and planning. Your task is to provide a rigorous, objective, and fair evaluation of the model-generated response, task plan, and action sequence. Scores must range from 0.00 to 1.00, with exactly two decimal places. Please provide a brief reasoning before assigning the score.

---

Scoring Guidelines
Evaluate the model's output against the reference answer based on, but not limited to, the following four core dimensions:

---

1. <response> Response Quality
- Politeness: Does it naturally acknowledge the user request with a friendly tone?
- Accuracy: Does it correctly reflect the task intent?
- Conciseness: Is it clear and free of redundancy?
- Naturalness: Does the language sound fluent and idiomatic?

---

2. <plans> Planning Quality
- Completeness: Does it cover all necessary steps from start to task completion?
- Logical Order: Is the step sequence reasonable? (e.g., no "manipulate before navigate" errors)
- Executability: Is each step grounded in visible scene content, without assuming unseen objects?
- Formatting Compliance:
  - Are only the two uppercase tags [Navigate] and [Manipulate] used strictly?
- Redundancy: Are there any meaningless or repetitive steps?

---

3. <actions> Action Sequence Quality
- Verb Accuracy: Are all verbs in <actions> exclusively from the predefined atomic action set? Any verb outside this set results in penalty.
- Structural Consistency:
  - Is the semantic meaning aligned with <plans>?
- Alignment with <plans>: Does the <actions> sequence semantically match the <plans> steps, using consistent object and location names?
- Argument Completeness: Are required objects and locations included?
- Order Consistency: Does the action sequence correspond one-to-one with the <plans> steps?

---

4. Format Compliance
- Overall Structure: Does it strictly follow the XML format: <response>...</response><plans>...</plans><actions>...</actions>, with all tags properly closed and no extra/missing parts?
- Nesting and Order: Are the tags correctly nested and sequenced?

---

Critical Error Criteria (trigger low scores if any apply)
- Use of undefined action verbs.
- Reference to objects or locations not present in the reference answer.
- Missing critical steps (e.g., failing to grasp an item or deliver to user).
- Severe action ordering errors (e.g., placing before grasping).
- Invalid output format (e.g., missing XML tags, malformed JSON).

---

Scoring Rubric (for reference)
- 1.00: Nearly identical to reference; natural language, flawless logic.
- 0.90-0.99: Semantically equivalent; minor phrasing differences, no logical errors.
- 0.75-0.89: Reasonable structure; slight omissions or redundancies, but still executable.
- 0.50-0.74: Minor logical or formatting issues; partially executable.
- 0.25-0.49: Clear errors (e.g., wrong order, missing actions).
- 0.00-0.24: Severe errors (e.g., illegal actions, nonexistent objects, format collapse).

---

Original Question
{question}

---

Reference Answer
{sol}

---

Atomic Action Set
{ATOMIC_ACTION_SET}

---

Model-Generated Output
{completion}

---

Please place your final score inside <score></score> tags. Include an extremely concise reasoning inside <think></think> tags. Do not provide lengthy or detailed analysis.

Example response: <think>Brief reasoning</think><score>0.75</score>)";

inline std::string build_grm_prompt(const std::string& question, const std::string& reference,
                                    const ActionSet& set, const std::string& completion) {
  return substitute_placeholders(kGrmPromptTemplate, {{"question", question},
                                                      {"sol", reference},
                                                      {"ATOMIC_ACTION_SET", set.joined()},
                                                      {"completion", completion}});
}

struct GrmScore {
  double value = 0.0;
  std::string reasoning;   // first <think> block, if any
  bool clamped = false;    // reply score fell outside [0, 1]
};

namespace detail {
inline std::optional<std::string> first_tag_block(const std::string& text, const char* tag) {
  std::string open = std::string("<") + tag + ">", close = std::string("</") + tag + ">";
  size_t b = text.find(open);
  if (b == std::string::npos) return std::nullopt;
  b += open.size();
  size_t e = text.find(close, b);
  if (e == std::string::npos) return std::nullopt;
  return text.substr(b, e - b);
}
}  // namespace detail

// Reads the first <score> pair out of a judge reply. Missing, empty or
// non-numeric score tags are extraction failures (nullopt) so the caller can
// decide whether to re-ask.
inline std::optional<GrmScore> extract_grm_score(const std::string& reply) {
  auto block = detail::first_tag_block(reply, "score");
  if (!block) return std::nullopt;
  std::string body = trim(*block);
  if (body.empty()) return std::nullopt;
  char* end = nullptr;
  double value = std::strtod(body.c_str(), &end);
  if (end != body.c_str() + body.size() || !std::isfinite(value)) return std::nullopt;

  GrmScore score;
  score.clamped = value < 0.0 || value > 1.0;
  score.value = std::min(1.0, std::max(0.0, value));
  if (auto think = detail::first_tag_block(reply, "think")) score.reasoning = trim(*think);
  return score;
}

struct GrmOutcome {
  GrmScore score;
  int asks = 1;        // prompts sent, including extraction re-asks
  bool failed = false; // retries exhausted; score.value forced to 0
};

// Full GRM scoring round: prompt, judge call, extraction, and up to
// `extraction_retries` fresh asks when the reply has no usable score.
// Transport-level retrying is the client's own job.
inline GrmOutcome grm_reward(JudgeClient& client, const std::string& question,
                             const std::string& reference, const ActionSet& set,
                             const std::string& completion, int extraction_retries = 2) {
  JudgeRequest req;
  req.user_prompt = build_grm_prompt(question, reference, set, completion);
  GrmOutcome out;
  for (int ask = 0; ask <= extraction_retries; ++ask) {
    out.asks = ask + 1;
    if (auto score = extract_grm_score(client.complete(req))) {
      out.score = *score;
      return out;
    }
  }
  out.failed = true;
  out.score = GrmScore{};
  return out;
}

// w_rule * rule + (1 - w_rule) * grm, all three operands in [0, 1].
inline double combined_planning_reward(double rule_total, double grm_value, double w_rule = 0.5) {
  auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!in_unit(rule_total) || !in_unit(grm_value) || !in_unit(w_rule))
    throw std::invalid_argument("combined reward inputs must lie in [0, 1]");
  return w_rule * rule_total + (1.0 - w_rule) * grm_value;
}

// 1.0 when the judged answer is semantically consistent with the reference
// answer, else 0.0. Judge transport/format errors propagate.
inline double instruction_correctness_reward(const std::string& question, const std::string& answer,
                                             const std::string& reference, JudgeClient& client) {
  return consistency_check(question, answer, reference, client).consistent ? 1.0 : 0.0;
}

}  // namespace planbench
