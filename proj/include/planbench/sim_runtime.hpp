#pragma once

// Execution half of the simulator: input adaptation, instruction-to-skill
// translation, the skill engine with its precondition codes, plan execution
// traces, and task specs with goal checks.

#include <sstream>

#include "planbench/action_set.hpp"
#include "planbench/sim_world.hpp"

namespace planbench {

// ---------------------------------------------------------------------------
// Input adaptation: tolerate whole structured outputs or bare action lists,
// drop what cannot be salvaged, canonicalize verb spellings.

struct AdaptResult {
  std::vector<AtomicAction> actions;
  std::vector<std::string> warnings;
  bool ok = false;  // false when nothing usable was found
};

inline AdaptResult adapt_input(const std::string& raw,
                               const ActionSet& set = ActionSet::defaults()) {
  AdaptResult out;
  std::vector<ParseIssue> issues;
  if (raw.find("<actions>") != std::string::npos) {
    ParseReport rep;
    parse_structured_output(raw, /*strict=*/false, &rep);
    out.actions = detail::parse_action_list(raw, rep.actions, /*lenient=*/true, issues);
  } else {
    ParseReport::TagInfo whole;
    whole.present = whole.closed = true;
    whole.inner_begin = 0;
    whole.inner_end = raw.size();
    out.actions = detail::parse_action_list(raw, whole, /*lenient=*/true, issues);
  }
  for (const auto& issue : issues)
    out.warnings.push_back(issue.message + " at offset " + std::to_string(issue.offset));
  // an explicitly empty list is usable (a vacuous plan); pure garbage is not
  out.ok = !out.actions.empty() || issues.empty();

  for (auto& a : out.actions) {
    VerbResolution v = set.resolve(a.verb);
    if (v.verdict != VerbVerdict::unknown) a.verb = v.canonical;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Instruction translation

enum class SkillKind { Navigate, Pick, Place, Open, Close, ToggleOn, ToggleOff, Clean, Heat, Cool, Slice };

inline const char* skill_name(SkillKind k) {
  switch (k) {
    case SkillKind::Navigate: return "Navigate";
    case SkillKind::Pick: return "Pick";
    case SkillKind::Place: return "Place";
    case SkillKind::Open: return "Open";
    case SkillKind::Close: return "Close";
    case SkillKind::ToggleOn: return "ToggleOn";
    case SkillKind::ToggleOff: return "ToggleOff";
    case SkillKind::Clean: return "Clean";
    case SkillKind::Heat: return "Heat";
    case SkillKind::Cool: return "Cool";
    case SkillKind::Slice: return "Slice";
  }
  return "Navigate";
}

struct Skill {
  SkillKind kind = SkillKind::Navigate;
  std::vector<std::string> params;  // resolved object ids: 1, or 2 for Place
};

// Verb (lowercased) -> skill. All the movement verbs collapse onto Navigate;
// toggles are split by direction, so a bare "Toggle" has no row on purpose.
inline const std::map<std::string, SkillKind>& skill_translation_table() {
  static const std::map<std::string, SkillKind> table = {
      {"navigate", SkillKind::Navigate}, {"gotoobject", SkillKind::Navigate},
      {"find", SkillKind::Navigate},     {"search", SkillKind::Navigate},
      {"map", SkillKind::Navigate},      {"pick", SkillKind::Pick},
      {"place", SkillKind::Place},       {"put", SkillKind::Place},
      {"open", SkillKind::Open},         {"close", SkillKind::Close},
      {"toggleon", SkillKind::ToggleOn}, {"toggleoff", SkillKind::ToggleOff},
      {"clean", SkillKind::Clean},       {"wash", SkillKind::Clean},
      {"heat", SkillKind::Heat},         {"cool", SkillKind::Cool},
      {"slice", SkillKind::Slice},
  };
  return table;
}

struct TranslationResult {
  bool ok = false;
  SkillKind kind = SkillKind::Navigate;
  std::vector<std::string> raw_params;  // unresolved object references
  std::string reason;
};

inline TranslationResult translate_instruction(const AtomicAction& action) {
  TranslationResult res;
  auto it = skill_translation_table().find(to_lower(action.verb));
  if (it == skill_translation_table().end()) {
    res.reason = "no skill translation for verb '" + action.verb + "'";
    return res;
  }
  res.kind = it->second;
  size_t need = res.kind == SkillKind::Place ? 2 : 1;
  if (action.args.size() != need) {
    res.reason = std::string(skill_name(res.kind)) + " takes " + std::to_string(need) +
                 (need == 1 ? " object, got " : " objects, got ") +
                 std::to_string(action.args.size());
    return res;
  }
  res.ok = true;
  res.raw_params = action.args;
  return res;
}

// ---------------------------------------------------------------------------
// Skill engine

struct SkillOutcome {
  bool ok = false;
  std::string reason;  // machine-readable code on failure
  std::string detail;  // human-readable note
};

namespace detail {

inline bool reachable(const WorldState& w, const std::string& id) {
  return anchor_of(w, id) == w.agent_at;
}

// Nearest enclosing container of the given type, if any.
inline const SimObject* enclosing_of_type(const WorldState& w, const std::string& id,
                                          const std::string& type) {
  const SimObject* obj = w.find(id);
  std::set<std::string> seen;
  while (obj && seen.insert(obj->id).second) {
    const SimObject* host = w.find(obj->location);
    if (!host) return nullptr;
    if (iequals(host->type, type)) return host;
    obj = host;
  }
  return nullptr;
}

inline void wash_sink_contents(WorldState& w, const std::string& faucet_id) {
  std::string zone = anchor_of(w, faucet_id);
  for (auto& [id, sink] : w.objects) {
    if (!iequals(sink.type, "Sink") || anchor_of(w, id) != zone) continue;
    for (auto& [oid, obj] : w.objects)
      if (oid != id && located_in(w, oid, id)) obj.set_state("clean", "dirty");
  }
}

// Objects that stayed inside a closed fridge across a step become cooled.
inline void cooling_sweep(WorldState& w) {
  std::set<std::string> now;
  for (const auto& [id, obj] : w.objects) {
    const SimObject* fridge = enclosing_of_type(w, id, "Fridge");
    if (fridge && fridge->has("closed")) now.insert(id);
  }
  for (const auto& id : now)
    if (w.chilling.count(id)) w.at(id).set_state("cooled", "heated");
  w.chilling = std::move(now);
}

}  // namespace detail

// Applies one skill. Failed preconditions leave the world bitwise untouched;
// effects land atomically. The cooling sweep runs only after a success.
inline SkillOutcome execute_skill(WorldState& w, const Skill& skill) {
  auto fail = [](std::string code, std::string detail) {
    return SkillOutcome{false, std::move(code), std::move(detail)};
  };
  const std::string& target = skill.params.at(0);
  SimObject& obj = w.at(target);

  SkillOutcome out;
  switch (skill.kind) {
    case SkillKind::Navigate: {
      w.agent_at = anchor_of(w, target);
      out = {true, "", "agent now at " + w.agent_at};
      break;
    }
    case SkillKind::Pick: {
      if (w.held.has_value()) return fail("HAND_FULL", "already holding " + *w.held);
      if (!detail::reachable(w, target))
        return fail("NOT_REACHABLE", target + " is at " + anchor_of(w, target) +
                                          ", agent at " + w.agent_at);
      obj.location = "agent";
      obj.states.insert("held_by_agent");
      w.held = target;
      out = {true, "", "holding " + target};
      break;
    }
    case SkillKind::Place: {
      const std::string& dest = skill.params.at(1);
      SimObject& rec = w.at(dest);
      if (w.held != target) return fail("NOT_HOLDING", "not holding " + target);
      if (dest == target) return fail("NOT_A_RECEPTACLE", "cannot place an object into itself");
      if (!rec.receptacle) return fail("NOT_A_RECEPTACLE", dest + " cannot hold objects");
      if (!detail::reachable(w, dest))
        return fail("NOT_REACHABLE", dest + " is at " + anchor_of(w, dest) + ", agent at " +
                                         w.agent_at);
      if (rec.openable && !rec.has("open")) return fail("NOT_OPEN", dest + " is closed");
      obj.location = dest;
      obj.states.erase("held_by_agent");
      w.held.reset();
      out = {true, "", target + " now in " + dest};
      break;
    }
    case SkillKind::Open: {
      if (!detail::reachable(w, target)) return fail("NOT_REACHABLE", target + " is out of reach");
      if (!obj.openable) return fail("NOT_OPENABLE", target + " does not open");
      if (obj.has("open")) return fail("ALREADY_OPEN", target + " is already open");
      obj.set_state("open", "closed");
      out = {true, "", target + " open"};
      break;
    }
    case SkillKind::Close: {
      if (!detail::reachable(w, target)) return fail("NOT_REACHABLE", target + " is out of reach");
      if (!obj.openable) return fail("NOT_OPENABLE", target + " does not close");
      if (!obj.has("open")) return fail("NOT_OPEN", target + " is not open");
      obj.set_state("closed", "open");
      out = {true, "", target + " closed"};
      break;
    }
    case SkillKind::ToggleOn:
    case SkillKind::ToggleOff: {
      if (!detail::reachable(w, target)) return fail("NOT_REACHABLE", target + " is out of reach");
      if (!obj.toggleable) return fail("NOT_TOGGLEABLE", target + " has no switch");
      bool was_on = obj.has("on");
      if (skill.kind == SkillKind::ToggleOn) {
        obj.set_state("on", "off");
        out = {true, "", target + " on"};
      } else {
        obj.set_state("off", "on");
        out = {true, "", target + " off"};
        // shutting off a running faucet is what washes whatever sits in its sink
        if (iequals(obj.type, "Faucet") && was_on) detail::wash_sink_contents(w, target);
      }
      break;
    }
    case SkillKind::Clean: {
      const SimObject* sink = detail::enclosing_of_type(w, target, "Sink");
      if (!sink) return fail("NOT_IN_SINK", target + " is not in a sink");
      const SimObject* faucet = nullptr;
      for (const auto& [id, cand] : w.objects)
        if (iequals(cand.type, "Faucet") && anchor_of(w, id) == anchor_of(w, sink->id))
          faucet = &cand;
      if (!faucet || !faucet->has("on"))
        return fail("FAUCET_OFF", "no running faucet at " + anchor_of(w, sink->id));
      obj.set_state("clean", "dirty");
      out = {true, "", target + " clean"};
      break;
    }
    case SkillKind::Heat: {
      const SimObject* micro = detail::enclosing_of_type(w, target, "Microwave");
      if (!micro) return fail("NOT_IN_MICROWAVE", target + " is not in a microwave");
      if (!micro->has("closed")) return fail("NOT_CLOSED", micro->id + " is not closed");
      if (!micro->has("on")) return fail("NOT_ON", micro->id + " is not running");
      obj.set_state("heated", "cooled");
      out = {true, "", target + " heated"};
      break;
    }
    case SkillKind::Cool: {
      const SimObject* fridge = detail::enclosing_of_type(w, target, "Fridge");
      if (!fridge) return fail("NOT_IN_FRIDGE", target + " is not in a fridge");
      if (!fridge->has("closed")) return fail("NOT_CLOSED", fridge->id + " is not closed");
      obj.set_state("cooled", "heated");
      out = {true, "", target + " cooled"};
      break;
    }
    case SkillKind::Slice: {
      bool knife = w.held.has_value() && iequals(w.at(*w.held).type, "Knife");
      if (!knife) return fail("NO_KNIFE", "slicing needs a knife in hand");
      if (!detail::reachable(w, target)) return fail("NOT_REACHABLE", target + " is out of reach");
      obj.states.insert("sliced");
      out = {true, "", target + " sliced"};
      break;
    }
  }
  detail::cooling_sweep(w);
  return out;
}

// ---------------------------------------------------------------------------
// Plan execution

struct StepRecord {
  size_t index = 0;
  AtomicAction action;
  std::string stage;  // how far the step got: "translate", "resolve", "execute"
  bool has_skill = false;
  SkillKind skill = SkillKind::Navigate;
  std::vector<std::string> resolved;
  bool ok = false;
  std::string reason;  // failure code: TRANSLATION_FAILED, RESOLUTION_FAILED, or a skill code
  std::string detail;
  uint64_t snapshot = 0;  // world hash after the step
};

struct ExecutionTrace {
  std::vector<StepRecord> steps;
  std::vector<std::string> adapt_warnings;
  bool adapted = true;
  bool final_success = false;
  size_t steps_executed = 0;  // attempted steps, == history entries
  uint64_t final_snapshot = 0;

  const StepRecord* first_failure() const {
    for (const auto& s : steps)
      if (!s.ok) return &s;
    return nullptr;
  }
};

struct SimConfig {
  bool continue_on_error = false;
  ActionSet actions = ActionSet::defaults();
  ResolverConfig resolver;
};

namespace detail {

inline std::string describe_delta(const WorldState& before, const WorldState& after) {
  std::vector<std::string> parts;
  if (before.agent_at != after.agent_at)
    parts.push_back("agent: " + before.agent_at + "->" + after.agent_at);
  if (before.held != after.held)
    parts.push_back("held: " + before.held.value_or("-") + "->" + after.held.value_or("-"));
  for (const auto& [id, obj] : after.objects) {
    const SimObject* old = before.find(id);
    if (!old) continue;
    if (old->location != obj.location)
      parts.push_back(id + ".location: " + old->location + "->" + obj.location);
    if (old->states != obj.states)
      parts.push_back(id + ".states: " +
                      join(std::vector<std::string>(obj.states.begin(), obj.states.end()), ","));
  }
  return join(parts, "; ");
}

}  // namespace detail

// Runs translate -> resolve -> execute per action, recording one step record
// and one history event per attempted action. Stops at the first failure
// unless cfg.continue_on_error; success is the goal check on the final state.
inline ExecutionTrace execute_plan(WorldState& w, const std::vector<AtomicAction>& actions,
                                   const std::vector<GoalPredicate>& goals,
                                   const SimConfig& cfg = {}) {
  ExecutionTrace trace;
  ResolutionContext ctx;
  for (size_t i = 0; i < actions.size(); ++i) {
    StepRecord rec;
    rec.index = i;
    rec.action = actions[i];
    WorldState before = w;

    TranslationResult tr = translate_instruction(actions[i]);
    if (!tr.ok) {
      rec.stage = "translate";
      rec.reason = "TRANSLATION_FAILED";
      rec.detail = tr.reason;
    } else {
      rec.has_skill = true;
      rec.skill = tr.kind;
      rec.stage = "resolve";
      Skill skill;
      skill.kind = tr.kind;
      bool resolved_all = true;
      for (const auto& ref : tr.raw_params) {
        ResolutionResult rr = resolve_object(ref, w, ctx, cfg.resolver);
        if (!rr.ok) {
          rec.reason = "RESOLUTION_FAILED";
          rec.detail = rr.reason;
          resolved_all = false;
          break;
        }
        skill.params.push_back(rr.id);
      }
      if (resolved_all) {
        rec.stage = "execute";
        rec.resolved = skill.params;
        SkillOutcome out = execute_skill(w, skill);
        rec.ok = out.ok;
        rec.reason = out.ok ? "" : out.reason;
        rec.detail = out.detail;
        if (out.ok && skill.kind != SkillKind::Navigate)
          for (const auto& id : skill.params) ctx.touch(id);
      }
    }

    rec.snapshot = snapshot_hash(w);
    w.history.push_back({i, serialize_actions({actions[i]}), rec.ok ? "ok" : rec.reason,
                         rec.ok ? detail::describe_delta(before, w) : ""});
    trace.steps.push_back(rec);
    ++trace.steps_executed;
    if (!rec.ok && !cfg.continue_on_error) break;
  }
  trace.final_snapshot = snapshot_hash(w);
  trace.final_success = goals_hold(w, goals);
  return trace;
}

inline double success_rate(const std::vector<ExecutionTrace>& traces) {
  if (traces.empty()) throw std::invalid_argument("success rate over zero traces");
  size_t wins = 0;
  for (const auto& t : traces) wins += t.final_success ? 1 : 0;
  return static_cast<double>(wins) / static_cast<double>(traces.size());
}

// ---------------------------------------------------------------------------
// Task specs

struct TaskSpec {
  std::string id;
  std::string instruction;
  std::string scene;  // scene name, resolved to a file by the caller
  std::vector<GoalPredicate> goals;
  std::vector<AtomicAction> gold_actions;

  static TaskSpec from_json(const nlohmann::json& node) {
    if (!node.is_object()) throw config_error("task spec must be a JSON object");
    detail::reject_unknown_keys(node, {"id", "instruction", "scene", "goal", "gold_actions"},
                                "task");
    TaskSpec t;
    for (const char* key : {"id", "instruction", "scene", "gold_actions"})
      if (!node.contains(key) || !node[key].is_string())
        throw config_error("task needs a string '" + std::string(key) + "'");
    t.id = node["id"].get<std::string>();
    t.instruction = node["instruction"].get<std::string>();
    t.scene = node["scene"].get<std::string>();
    if (!node.contains("goal") || !node["goal"].is_array() || node["goal"].empty())
      throw config_error("task " + t.id + " needs a non-empty goal array");
    for (const auto& g : node["goal"]) t.goals.push_back(GoalPredicate::parse(g.get<std::string>()));
    AdaptResult gold = adapt_input(node["gold_actions"].get<std::string>());
    if (!gold.ok || !gold.warnings.empty() || gold.actions.empty())
      throw config_error("task " + t.id + " has malformed gold actions");
    t.gold_actions = std::move(gold.actions);
    return t;
  }
};

// One JSON object per line; blank lines ignored.
inline std::vector<TaskSpec> load_tasks(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open task suite: " + path);
  std::vector<TaskSpec> tasks;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    nlohmann::json node = nlohmann::json::parse(line, nullptr, false);
    if (node.is_discarded())
      throw config_error(path + ":" + std::to_string(lineno) + ": not valid JSON");
    tasks.push_back(TaskSpec::from_json(node));
  }
  return tasks;
}

}  // namespace planbench
