#pragma once

// Structured planner output: a <response> narration, a <plans> section of
// numbered tagged steps, and an <actions> section holding a list of atomic
// action tuples.
//
// Canonical serialized form (strict round-trip target):
//
//   <response>TEXT</response>
//   <plans>
//   1.[Navigate] step text
//   2.[Manipulate] step text
//   </plans>
//   <actions>
//   [['Verb', 'Arg'], ['Verb', 'Arg', 'Target']]
//   </actions>
//
// Plan lines match ^\d+\.\[(Navigate|Manipulate|Map)\] .+$ with the tag read
// case-insensitively. Action tuples carry a verb plus one or two arguments;
// single or double quotes are accepted on parse, single quotes are emitted.
// Strict parsing demands all three sections present, closed, ordered and
// clean; lenient parsing salvages whatever sections and tuples survive and
// reports every defect with its byte offset.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "planbench/action_set.hpp"
#include "planbench/core.hpp"

namespace planbench {

enum class PlanTag { Navigate, Manipulate, Map };

inline const char* plan_tag_name(PlanTag t) {
  switch (t) {
    case PlanTag::Navigate: return "Navigate";
    case PlanTag::Manipulate: return "Manipulate";
    case PlanTag::Map: return "Map";
  }
  return "Navigate";
}

inline std::optional<PlanTag> parse_plan_tag(std::string_view s) {
  if (iequals(s, "navigate")) return PlanTag::Navigate;
  if (iequals(s, "manipulate")) return PlanTag::Manipulate;
  if (iequals(s, "map")) return PlanTag::Map;
  return std::nullopt;
}

struct PlanStep {
  int index = 0;
  PlanTag tag = PlanTag::Navigate;
  std::string text;
  bool operator==(const PlanStep&) const = default;
};

struct AtomicAction {
  std::string verb;
  std::vector<std::string> args;  // 1 or 2 entries: object, optional target
  bool operator==(const AtomicAction&) const = default;
};

struct StructuredOutput {
  std::string response;
  std::vector<PlanStep> plans;
  std::vector<AtomicAction> actions;
  std::string raw;  // original text when parsed; not part of equality

  bool operator==(const StructuredOutput& o) const {
    return response == o.response && plans == o.plans && actions == o.actions;
  }
};

struct ParseIssue {
  size_t offset = 0;  // byte offset into the raw input
  std::string message;
};

struct ParseReport {
  struct TagInfo {
    bool present = false;
    bool closed = false;
    size_t open_pos = std::string::npos;   // position of '<tag>'
    size_t close_pos = std::string::npos;  // position of '</tag>'
    size_t inner_begin = 0, inner_end = 0;
  };
  TagInfo response, plans, actions;
  std::vector<ParseIssue> errors;

  bool clean() const {
    return response.present && response.closed && plans.present && plans.closed &&
           actions.present && actions.closed && errors.empty();
  }

  // Closed and ordered relative to whichever neighbor sections are present.
  bool well_placed(const TagInfo& t, const TagInfo& before, const TagInfo& after) const {
    if (!t.closed) return false;
    if (before.present && !(before.closed && before.close_pos < t.open_pos)) return false;
    if (after.present && t.close_pos > after.open_pos) return false;
    return true;
  }
  int well_placed_count() const {
    ParseReport::TagInfo none;
    return int(well_placed(response, none, plans)) + int(well_placed(plans, response, actions)) +
           int(well_placed(actions, plans, none));
  }
};

namespace detail {

inline void scan_tag(std::string_view raw, const char* name, ParseReport::TagInfo& info,
                     std::vector<ParseIssue>& errors) {
  std::string open = std::string("<") + name + ">";
  std::string close = std::string("</") + name + ">";
  info.open_pos = raw.find(open);
  info.present = info.open_pos != std::string_view::npos;
  if (!info.present) {
    errors.push_back({0, std::string("missing <") + name + "> section"});
    if (raw.find(close) != std::string_view::npos)
      errors.push_back({raw.find(close), std::string("</") + name + "> without opening tag"});
    return;
  }
  size_t dup = raw.find(open, info.open_pos + open.size());
  if (dup != std::string_view::npos)
    errors.push_back({dup, std::string("duplicate <") + name + "> tag"});
  info.close_pos = raw.find(close, info.open_pos + open.size());
  info.closed = info.close_pos != std::string_view::npos;
  info.inner_begin = info.open_pos + open.size();
  info.inner_end = info.closed ? info.close_pos : raw.size();
  if (!info.closed) errors.push_back({info.open_pos, std::string("<") + name + "> never closed"});
}

// When a section is unclosed its inner text stops at the next section's opening tag.
inline void clip_inner(ParseReport::TagInfo& info, const ParseReport::TagInfo& other) {
  if (info.present && !info.closed && other.present && other.open_pos > info.inner_begin &&
      other.open_pos < info.inner_end)
    info.inner_end = other.open_pos;
}

inline void parse_plan_lines(std::string_view raw, const ParseReport::TagInfo& sec,
                             std::vector<PlanStep>& out, std::vector<ParseIssue>& errors) {
  size_t pos = sec.inner_begin;
  int expected = 1;
  while (pos < sec.inner_end) {
    size_t eol = raw.find('\n', pos);
    if (eol == std::string_view::npos || eol > sec.inner_end) eol = sec.inner_end;
    std::string line = trim(raw.substr(pos, eol - pos));
    size_t line_off = pos;
    pos = eol + 1;
    if (line.empty()) continue;

    size_t i = 0;
    while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
    size_t digits = i;
    bool ok = digits > 0 && i + 1 < line.size() && line[i] == '.' && line[i + 1] == '[';
    size_t tag_end = ok ? line.find(']', i + 2) : std::string::npos;
    if (!ok || tag_end == std::string::npos) {
      errors.push_back({line_off, "malformed plan line: " + line});
      continue;
    }
    auto tag = parse_plan_tag(std::string_view(line).substr(i + 2, tag_end - (i + 2)));
    if (!tag) {
      errors.push_back({line_off, "unknown plan tag in line: " + line});
      continue;
    }
    std::string text = tag_end + 1 < line.size() ? line.substr(tag_end + 1) : std::string();
    if (!text.empty() && text.front() == ' ') text.erase(0, 1);
    if (text.empty()) {
      errors.push_back({line_off, "plan line has no step text: " + line});
      continue;
    }
    int index = 0;
    try {
      index = std::stoi(line.substr(0, digits));
    } catch (const std::exception&) {
      errors.push_back({line_off, "plan index out of range: " + line});
      continue;
    }
    if (index != expected)
      errors.push_back({line_off, "plan step " + std::to_string(index) + " breaks 1..n numbering"});
    expected = index + 1;
    out.push_back({index, *tag, text});
  }
}

inline bool parse_quoted(std::string_view raw, size_t& pos, size_t end, std::string& out) {
  if (pos >= end || (raw[pos] != '\'' && raw[pos] != '"')) return false;
  char q = raw[pos++];
  out.clear();
  while (pos < end) {
    char c = raw[pos];
    if (c == '\\' && pos + 1 < end) {
      out += raw[pos + 1];
      pos += 2;
      continue;
    }
    if (c == q) {
      ++pos;
      return true;
    }
    out += c;
    ++pos;
  }
  return false;
}

inline void skip_ws(std::string_view raw, size_t& pos, size_t end) {
  while (pos < end && std::isspace(static_cast<unsigned char>(raw[pos]))) ++pos;
}

// Parses "[['Verb', 'Obj'], ...]" between inner_begin and inner_end.
// In lenient mode bad tuples are skipped with a diagnostic; in strict mode any
// defect keeps the report dirty, which the caller turns into failure.
inline std::vector<AtomicAction> parse_action_list(std::string_view raw,
                                                   const ParseReport::TagInfo& sec, bool lenient,
                                                   std::vector<ParseIssue>& errors) {
  std::vector<AtomicAction> acts;
  size_t pos = sec.inner_begin, end = sec.inner_end;
  skip_ws(raw, pos, end);
  if (pos >= end || raw[pos] != '[') {
    errors.push_back({pos, "actions section holds no action list"});
    return acts;
  }
  ++pos;  // outer '['
  skip_ws(raw, pos, end);
  if (pos < end && raw[pos] == ']') return acts;  // well-formed empty list

  while (pos < end) {
    skip_ws(raw, pos, end);
    size_t tuple_off = pos;
    if (pos >= end) {
      errors.push_back({tuple_off, "action list never closed"});
      break;
    }
    if (raw[pos] != '[') {
      errors.push_back({pos, "expected action tuple"});
      if (!lenient) break;
      while (pos < end && raw[pos] != '[') ++pos;
      continue;
    }
    ++pos;
    std::vector<std::string> elems;
    bool tuple_ok = true;
    while (true) {
      skip_ws(raw, pos, end);
      std::string elem;
      if (!parse_quoted(raw, pos, end, elem)) {
        errors.push_back({pos, "expected quoted element in action tuple"});
        tuple_ok = false;
        break;
      }
      elems.push_back(std::move(elem));
      skip_ws(raw, pos, end);
      if (pos < end && raw[pos] == ',') {
        ++pos;
        continue;
      }
      if (pos < end && raw[pos] == ']') {
        ++pos;
        break;
      }
      errors.push_back({pos, "unterminated action tuple"});
      tuple_ok = false;
      break;
    }
    if (tuple_ok && (elems.size() < 2 || elems.size() > 3)) {
      errors.push_back({tuple_off, "action tuple needs a verb plus 1-2 arguments, got " +
                                       std::to_string(elems.size()) + " elements"});
      tuple_ok = false;
    }
    if (tuple_ok) {
      AtomicAction a;
      a.verb = elems[0];
      a.args.assign(elems.begin() + 1, elems.end());
      acts.push_back(std::move(a));
    } else if (!lenient) {
      break;
    } else {
      while (pos < end && raw[pos] != ']' && raw[pos] != '[') ++pos;  // resync
      if (pos < end && raw[pos] == ']') ++pos;
    }
    skip_ws(raw, pos, end);
    if (pos < end && raw[pos] == ',') {
      ++pos;
      continue;
    }
    if (pos < end && raw[pos] == ']') return acts;
    if (pos >= end) {
      errors.push_back({end, "action list never closed"});
      break;
    }
  }
  return acts;
}

}  // namespace detail

// Strict mode returns a value only for fully clean input; lenient mode always
// returns a best-effort StructuredOutput. Pass a report to receive tag
// presence/closure flags and offset diagnostics either way.
inline std::optional<StructuredOutput> parse_structured_output(std::string_view raw,
                                                               bool strict = true,
                                                               ParseReport* report = nullptr) {
  ParseReport local;
  ParseReport& rep = report ? *report : local;
  rep = ParseReport{};

  detail::scan_tag(raw, "response", rep.response, rep.errors);
  detail::scan_tag(raw, "plans", rep.plans, rep.errors);
  detail::scan_tag(raw, "actions", rep.actions, rep.errors);

  detail::clip_inner(rep.response, rep.plans);
  detail::clip_inner(rep.response, rep.actions);
  detail::clip_inner(rep.plans, rep.actions);

  // section order: response, plans, actions, non-nested
  if (rep.response.present && rep.plans.present && rep.response.closed &&
      !(rep.response.close_pos < rep.plans.open_pos))
    rep.errors.push_back({rep.plans.open_pos, "<plans> must follow closed <response>"});
  if (rep.plans.present && rep.actions.present && rep.plans.closed &&
      !(rep.plans.close_pos < rep.actions.open_pos))
    rep.errors.push_back({rep.actions.open_pos, "<actions> must follow closed <plans>"});

  StructuredOutput out;
  out.raw.assign(raw);
  if (rep.response.present)
    out.response.assign(raw.substr(rep.response.inner_begin,
                                   rep.response.inner_end - rep.response.inner_begin));
  if (rep.plans.present) detail::parse_plan_lines(raw, rep.plans, out.plans, rep.errors);
  if (rep.actions.present)
    out.actions = detail::parse_action_list(raw, rep.actions, !strict, rep.errors);

  if (strict && !rep.clean()) return std::nullopt;
  return out;
}

inline std::string quote_element(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\\' || c == '\'') out += '\\';
    out += c;
  }
  out += '\'';
  return out;
}

inline std::string serialize_actions(const std::vector<AtomicAction>& actions) {
  std::string out = "[";
  for (size_t i = 0; i < actions.size(); ++i) {
    if (i) out += ", ";
    out += "[";
    out += quote_element(actions[i].verb);
    for (const auto& a : actions[i].args) {
      out += ", ";
      out += quote_element(a);
    }
    out += "]";
  }
  out += "]";
  return out;
}

inline std::string serialize(const StructuredOutput& o) {
  std::string out = "<response>";
  out += o.response;
  out += "</response>\n<plans>\n";
  for (const auto& step : o.plans) {
    out += std::to_string(step.index);
    out += ".[";
    out += plan_tag_name(step.tag);
    out += "] ";
    out += step.text;
    out += '\n';
  }
  out += "</plans>\n<actions>\n";
  out += serialize_actions(o.actions);
  out += "\n</actions>";
  return out;
}

// One verdict per action, in order.
inline std::vector<VerbResolution> validate_actions(const std::vector<AtomicAction>& actions,
                                                    const ActionSet& set) {
  std::vector<VerbResolution> out;
  out.reserve(actions.size());
  for (const auto& a : actions) out.push_back(set.resolve(a.verb));
  return out;
}

// Appends the first floor(f * n_steps) gold plan lines to the prompt, with f
// drawn uniformly from [hint_lo, hint_hi] under the given seed. A zero-step
// draw returns the prompt untouched.
inline std::string augment_with_step_hints(const std::string& prompt, const StructuredOutput& gold,
                                           double hint_lo, double hint_hi, uint64_t seed) {
  if (gold.plans.empty()) throw std::invalid_argument("step hints need a non-empty gold plan");
  if (!(0.0 <= hint_lo && hint_lo <= hint_hi && hint_hi <= 1.0))
    throw std::invalid_argument("hint fraction bounds must satisfy 0 <= lo <= hi <= 1");
  std::mt19937_64 rng(seed);
  double f = hint_lo + uniform_unit(rng) * (hint_hi - hint_lo);
  size_t k = static_cast<size_t>(f * static_cast<double>(gold.plans.size()));
  if (k == 0) return prompt;
  k = std::min(k, gold.plans.size());
  std::string out = prompt;
  out += "\n\nGuided precursor:\n";
  for (size_t i = 0; i < k; ++i) {
    if (i) out += '\n';
    const auto& step = gold.plans[i];
    out += std::to_string(step.index);
    out += ".[";
    out += plan_tag_name(step.tag);
    out += "] ";
    out += step.text;
  }
  return out;
}

}  // namespace planbench
