#pragma once

// World model for the miniature household simulator: scene loading, object and
// agent state, goal predicates, and the layered object-reference resolver.
// Discrete and physics-free: "reachable" means the agent stands at the anchor
// an object transitively sits on, nothing more.

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "planbench/core.hpp"
#include "planbench/judge_client.hpp"
#include "planbench/plan_format.hpp"

namespace planbench {

inline const std::set<std::string>& allowed_states() {
  static const std::set<std::string> s = {"dirty",  "clean", "open",   "closed", "on",
                                          "off",    "heated", "cooled", "sliced",
                                          "held_by_agent"};
  return s;
}

struct SimObject {
  std::string id;        // unique, e.g. "Apple_1"
  std::string type;      // noun, e.g. "Apple"
  std::string location;  // anchor name, containing object id, or "agent" while held
  std::set<std::string> states;
  bool receptacle = false;
  bool openable = false;
  bool toggleable = false;

  bool operator==(const SimObject&) const = default;

  bool has(const std::string& state) const { return states.count(state) != 0; }
  void set_state(const std::string& on_state, const std::string& off_state) {
    states.erase(off_state);
    states.insert(on_state);
  }
};

struct HistoryEvent {
  size_t step = 0;
  std::string action;   // the input tuple, canonical serialization
  std::string outcome;  // "ok" or the failure reason code
  std::string delta;    // human-readable state change summary, empty on failure

  bool operator==(const HistoryEvent&) const = default;
};

struct WorldState {
  std::map<std::string, SimObject> objects;  // id -> object, deterministic order
  std::vector<std::string> anchors;
  std::string agent_at;
  std::optional<std::string> held;
  std::vector<HistoryEvent> history;
  std::set<std::string> chilling;  // ids sitting in a closed fridge since last step

  bool operator==(const WorldState&) const = default;

  bool is_anchor(const std::string& name) const {
    return std::find(anchors.begin(), anchors.end(), name) != anchors.end();
  }
  const SimObject* find(const std::string& id) const {
    auto it = objects.find(id);
    return it == objects.end() ? nullptr : &it->second;
  }
  SimObject& at(const std::string& id) {
    auto it = objects.find(id);
    if (it == objects.end()) throw scene_error("no such object: " + id);
    return it->second;
  }
};

// Follows the location chain up to the room anchor. Held objects anchor at
// the agent's position.
inline std::string anchor_of(const WorldState& w, const std::string& id) {
  std::string cur = id;
  std::set<std::string> seen;
  while (true) {
    if (w.is_anchor(cur)) return cur;
    if (cur == "agent") return w.agent_at;
    const SimObject* obj = w.find(cur);
    if (!obj) throw scene_error("dangling location reference: " + cur);
    if (!seen.insert(cur).second) throw scene_error("containment cycle at: " + cur);
    cur = obj->location;
  }
}

// True when `id` sits inside `container` at any containment depth.
inline bool located_in(const WorldState& w, const std::string& id, const std::string& container) {
  const SimObject* obj = w.find(id);
  std::set<std::string> seen;
  while (obj) {
    if (obj->location == container) return true;
    if (!seen.insert(obj->id).second) return false;
    obj = w.find(obj->location);
  }
  return false;
}

// Census hash covering everything a step may change; equal worlds hash equal.
inline uint64_t snapshot_hash(const WorldState& w) {
  uint64_t h = fnv1a64("agent=" + w.agent_at);
  h = fnv1a64("held=" + w.held.value_or("-"), h);
  for (const auto& [id, obj] : w.objects) {
    h = fnv1a64(id + "|" + obj.type + "|" + obj.location + "|", h);
    for (const auto& s : obj.states) h = fnv1a64(s + ",", h);
  }
  for (const auto& id : w.chilling) h = fnv1a64("~" + id, h);
  return h;
}

// ---------------------------------------------------------------------------
// Scene loading

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& obj, const std::set<std::string>& known,
                                const std::string& path) {
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!known.count(it.key())) throw scene_error("unknown key at " + path + ": " + it.key());
}

}  // namespace detail

// Scene document: {anchors: [..], agent_at?: anchor, objects: [{type, id?,
// location, states?: [..], flags?: {openable, toggleable, receptacle}}]}.
// Objects without an explicit id get Type_N in file order; locations may
// reference anchors or any object in the file, in any order.
inline WorldState load_scene(const nlohmann::json& spec) {
  if (!spec.is_object()) throw scene_error("scene spec must be a JSON object");
  detail::reject_unknown_keys(spec, {"anchors", "agent_at", "objects"}, "scene");
  WorldState w;

  if (!spec.contains("anchors") || !spec["anchors"].is_array() || spec["anchors"].empty())
    throw scene_error("scene needs a non-empty anchors array");
  for (const auto& a : spec["anchors"]) {
    if (!a.is_string()) throw scene_error("anchors must be strings");
    if (w.is_anchor(a.get<std::string>()))
      throw scene_error("duplicate anchor: " + a.get<std::string>());
    w.anchors.push_back(a.get<std::string>());
  }

  w.agent_at = spec.value("agent_at", w.anchors.front());
  if (!w.is_anchor(w.agent_at)) throw scene_error("agent_at is not an anchor: " + w.agent_at);

  std::map<std::string, int> type_counts;
  std::vector<std::string> order;  // file order, for the second validation pass
  const nlohmann::json objects = spec.value("objects", nlohmann::json::array());
  if (!objects.is_array()) throw scene_error("objects must be an array");
  for (size_t i = 0; i < objects.size(); ++i) {
    const auto& node = objects[i];
    std::string path = "objects[" + std::to_string(i) + "]";
    if (!node.is_object()) throw scene_error(path + " must be an object");
    detail::reject_unknown_keys(node, {"id", "type", "location", "states", "flags"}, path);

    SimObject obj;
    if (!node.contains("type") || !node["type"].is_string())
      throw scene_error(path + " needs a string type");
    obj.type = node["type"].get<std::string>();
    if (node.contains("id")) {
      obj.id = node["id"].get<std::string>();
    } else {
      int n = ++type_counts[obj.type];
      obj.id = obj.type + "_" + std::to_string(n);
      while (w.objects.count(obj.id)) obj.id = obj.type + "_" + std::to_string(++n);
    }
    if (w.objects.count(obj.id)) throw scene_error("duplicate object id: " + obj.id);
    if (!node.contains("location") || !node["location"].is_string())
      throw scene_error(path + " needs a string location");
    obj.location = node["location"].get<std::string>();

    if (node.contains("flags")) {
      const auto& f = node["flags"];
      detail::reject_unknown_keys(f, {"openable", "toggleable", "receptacle"}, path + ".flags");
      obj.openable = f.value("openable", false);
      obj.toggleable = f.value("toggleable", false);
      obj.receptacle = f.value("receptacle", false);
    }
    for (const auto& s : node.value("states", nlohmann::json::array())) {
      std::string state = s.get<std::string>();
      if (!allowed_states().count(state)) throw scene_error(path + ": unknown state " + state);
      if (state == "held_by_agent")
        throw scene_error(path + ": scenes cannot start with held objects");
      obj.states.insert(state);
    }

    // state/flag consistency
    if ((obj.has("open") || obj.has("closed")) && !obj.openable)
      throw scene_error(path + ": open/closed on a non-openable object");
    if (obj.has("open") && obj.has("closed")) throw scene_error(path + ": both open and closed");
    if ((obj.has("on") || obj.has("off")) && !obj.toggleable)
      throw scene_error(path + ": on/off on a non-toggleable object");
    if (obj.has("on") && obj.has("off")) throw scene_error(path + ": both on and off");
    if (obj.has("dirty") && obj.has("clean")) throw scene_error(path + ": both dirty and clean");
    if (obj.has("heated") && obj.has("cooled"))
      throw scene_error(path + ": both heated and cooled");
    if (obj.openable && !obj.has("open") && !obj.has("closed")) obj.states.insert("closed");
    if (obj.toggleable && !obj.has("on") && !obj.has("off")) obj.states.insert("off");

    order.push_back(obj.id);
    w.objects.emplace(obj.id, std::move(obj));
  }

  // locations may point forward, so validate after every object exists
  for (const auto& id : order) {
    const SimObject& obj = *w.find(id);
    if (w.is_anchor(obj.location)) continue;
    const SimObject* host = w.find(obj.location);
    if (!host)
      throw scene_error("object " + id + " located in unknown '" + obj.location + "'");
    if (!host->receptacle)
      throw scene_error("object " + id + " located in non-receptacle " + host->id);
    anchor_of(w, id);  // rejects containment cycles
  }
  return w;
}

inline WorldState load_scene_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw scene_error("cannot open scene: " + path);
  nlohmann::json spec = nlohmann::json::parse(in, nullptr, false);
  if (spec.is_discarded()) throw scene_error("scene is not valid JSON: " + path);
  return load_scene(spec);
}

// ---------------------------------------------------------------------------
// Goal predicates

struct GoalPredicate {
  enum class Kind { located_in, has_state };
  Kind kind = Kind::located_in;
  std::string object;
  std::string arg;  // container for located_in, state flag for has_state

  bool operator==(const GoalPredicate&) const = default;

  // "located_in(Apple_1, Fridge_1)" / "has_state(Apple_1, clean)"
  static GoalPredicate parse(const std::string& text) {
    size_t open = text.find('('), comma = text.find(',', open), close = text.rfind(')');
    if (open == std::string::npos || comma == std::string::npos || close == std::string::npos ||
        !(open < comma && comma < close))
      throw config_error("malformed goal predicate: " + text);
    GoalPredicate g;
    std::string head = trim(text.substr(0, open));
    if (head == "located_in")
      g.kind = Kind::located_in;
    else if (head == "has_state")
      g.kind = Kind::has_state;
    else
      throw config_error("unknown goal predicate: " + head);
    g.object = trim(text.substr(open + 1, comma - open - 1));
    g.arg = trim(text.substr(comma + 1, close - comma - 1));
    if (g.object.empty() || g.arg.empty()) throw config_error("empty goal term: " + text);
    if (g.kind == Kind::has_state && !allowed_states().count(g.arg))
      throw config_error("goal names unknown state: " + g.arg);
    return g;
  }

  std::string str() const {
    return std::string(kind == Kind::located_in ? "located_in" : "has_state") + "(" + object +
           ", " + arg + ")";
  }
};

// Goal terms name object ids, or a type held by exactly one object.
inline const SimObject& goal_object(const WorldState& w, const std::string& term) {
  if (const SimObject* obj = w.find(term)) return *obj;
  const SimObject* only = nullptr;
  for (const auto& [id, obj] : w.objects)
    if (iequals(obj.type, term)) {
      if (only) throw scene_error("goal term '" + term + "' is ambiguous");
      only = &obj;
    }
  if (!only) throw scene_error("goal names unknown object: " + term);
  return *only;
}

inline bool goal_holds(const WorldState& w, const GoalPredicate& g) {
  const SimObject& obj = goal_object(w, g.object);
  if (g.kind == GoalPredicate::Kind::has_state) return obj.has(g.arg);
  return located_in(w, obj.id, goal_object(w, g.arg).id);
}

inline bool goals_hold(const WorldState& w, const std::vector<GoalPredicate>& goals) {
  for (const auto& g : goals)
    if (!goal_holds(w, g)) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Object reference resolution

// Most-recently manipulated objects, newest first. Navigation does not count
// as manipulation; picking, placing, toggling and the rest do.
struct ResolutionContext {
  std::vector<std::string> recent;

  void touch(const std::string& id) {
    recent.erase(std::remove(recent.begin(), recent.end(), id), recent.end());
    recent.insert(recent.begin(), id);
    if (recent.size() > 8) recent.resize(8);
  }
};

inline bool is_pronoun(const std::string& normalized) {
  return normalized == "it" || normalized == "them" || normalized == "this" ||
         normalized == "that";
}

// Phrase -> type name. Looked up on the normalized reference; the lowest
// numbered object of the mapped type wins.
inline const std::map<std::string, std::string>& default_object_aliases() {
  static const std::map<std::string, std::string> aliases = {
      {"washer", "WashingMachine"},   {"washing machine", "WashingMachine"},
      {"fridge", "Fridge"},           {"refrigerator", "Fridge"},
      {"tap", "Faucet"},              {"faucet", "Faucet"},
      {"counter", "CounterTop"},      {"countertop", "CounterTop"},
      {"tv", "Television"},           {"television", "Television"},
      {"couch", "Sofa"},              {"sofa", "Sofa"},
      {"trash can", "GarbageCan"},    {"garbage can", "GarbageCan"},
      {"microwave", "Microwave"},     {"oven", "Microwave"},
      {"remote", "RemoteControl"},    {"lamp", "FloorLamp"},
  };
  return aliases;
}

// Splits Foo_12 into ("foo", 12) so Apple_2 precedes Apple_10.
inline std::pair<std::string, long> id_sort_key(const std::string& id) {
  size_t us = id.rfind('_');
  if (us != std::string::npos && us + 1 < id.size() &&
      std::all_of(id.begin() + us + 1, id.end(),
                  [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }))
    return {to_lower(id.substr(0, us)), std::stol(id.substr(us + 1))};
  return {to_lower(id), 0};
}

inline bool id_less(const std::string& a, const std::string& b) {
  return id_sort_key(a) < id_sort_key(b);
}

struct ResolutionResult {
  bool ok = false;
  std::string id;
  std::string layer;   // "judge", "exact_id", "alias", "context", "fuzzy"
  std::string reason;  // failure explanation with top candidates
};

struct ResolverConfig {
  std::map<std::string, std::string> aliases = default_object_aliases();
  JudgeClient* judge = nullptr;  // optional layer, off by default
};

namespace detail {

inline std::vector<std::string> reference_tokens(const std::string& ref) {
  std::vector<std::string> toks;
  for (const auto& t : strip_articles(tokenize(to_lower(ref)))) {
    auto sub = tokenize_identifier(t);
    toks.insert(toks.end(), sub.begin(), sub.end());
  }
  return toks;
}

inline std::vector<std::string> object_tokens(const SimObject& obj) {
  std::vector<std::string> toks = tokenize_identifier(obj.id);
  auto ty = tokenize_identifier(obj.type);
  toks.insert(toks.end(), ty.begin(), ty.end());
  return toks;
}

inline const SimObject* lowest_of_type(const WorldState& w, const std::string& type) {
  const SimObject* best = nullptr;
  for (const auto& [id, obj] : w.objects)
    if (iequals(obj.type, type) && (!best || id_less(id, best->id))) best = &obj;
  return best;
}

}  // namespace detail

// Layered resolution: judge (when enabled) -> exact id -> static alias ->
// context cache -> fuzzy token overlap. Earlier layers always win.
inline ResolutionResult resolve_object(const std::string& reference, const WorldState& w,
                                       const ResolutionContext& ctx,
                                       const ResolverConfig& cfg = {}) {
  std::string ref = trim(reference);
  ResolutionResult res;

  if (cfg.judge && !w.objects.empty()) {
    JudgeRequest req;
    req.user_prompt = "Pick the object id the phrase refers to.\nPhrase: " + ref + "\nIds:";
    for (const auto& [id, obj] : w.objects) req.user_prompt += " " + id;
    req.user_prompt += "\nReply with one id, or NONE.";
    try {
      std::string reply = trim(cfg.judge->complete(req));
      // accept a bare id or {"id": "..."}
      if (auto obj = extract_first_json_object(reply);
          obj && obj->contains("id") && (*obj)["id"].is_string())
        reply = (*obj)["id"].get<std::string>();
      else
        reply = reply.substr(0, reply.find_first_of(" \t\r\n"));
      if (w.find(reply)) return {true, reply, "judge", ""};
    } catch (const judge_error&) {
      // unavailable judge falls through to the deterministic layers
    }
  }

  if (const SimObject* obj = w.find(ref)) return {true, obj->id, "exact_id", ""};

  std::string norm = normalize_name(ref);
  if (auto it = cfg.aliases.find(norm); it != cfg.aliases.end())
    if (const SimObject* obj = detail::lowest_of_type(w, it->second))
      return {true, obj->id, "alias", ""};

  // context cache: pronouns take the newest manipulated object; otherwise the
  // newest one whose id/type tokens cover the reference
  if (is_pronoun(norm) && !ctx.recent.empty() && w.find(ctx.recent.front()))
    return {true, ctx.recent.front(), "context", ""};
  std::vector<std::string> ref_toks = detail::reference_tokens(ref);
  if (!ref_toks.empty()) {
    for (const auto& id : ctx.recent) {
      const SimObject* obj = w.find(id);
      if (!obj) continue;
      auto toks = detail::object_tokens(*obj);
      bool covers = std::all_of(ref_toks.begin(), ref_toks.end(), [&](const std::string& t) {
        return std::find(toks.begin(), toks.end(), t) != toks.end();
      });
      if (covers) return {true, id, "context", ""};
    }
  }

  // fuzzy: overlap between reference tokens and object tokens, best ratio wins
  struct Scored {
    double score;
    std::string id;
  };
  std::vector<Scored> scored;
  for (const auto& [id, obj] : w.objects) {
    auto toks = detail::object_tokens(obj);
    size_t hit = 0;
    for (const auto& t : ref_toks)
      hit += std::find(toks.begin(), toks.end(), t) != toks.end() ? 1 : 0;
    double score = ref_toks.empty() ? 0.0 : double(hit) / double(ref_toks.size());
    scored.push_back({score, id});
  }
  std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
    if (a.score != b.score) return a.score > b.score;
    return id_less(a.id, b.id);
  });
  if (!scored.empty() && scored.front().score > 0.0)
    return {true, scored.front().id, "fuzzy", ""};

  std::string top;
  for (size_t i = 0; i < scored.size() && i < 3; ++i)
    top += (i ? ", " : "") + scored[i].id;
  res.reason = "cannot resolve '" + ref + "'" + (top.empty() ? "" : "; closest: " + top);
  return res;
}

}  // namespace planbench
