#pragma once

// Orchestration behind the CLI: run configuration with file/flag precedence,
// line-delimited record IO, a bounded worker pool with ordered reduction, and
// report emission as a structured JSON document plus a flat tab table.

#include <atomic>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <functional>
#include <mutex>
#include <thread>

#include "planbench/difficulty.hpp"
#include "planbench/reward_perception.hpp"
#include "planbench/reward_planning.hpp"
#include "planbench/sim_runtime.hpp"

namespace planbench {

inline constexpr const char* kToolkitVersion = "0.1.0";

// ---------------------------------------------------------------------------
// Run configuration. Precedence: CLI flags > config file > these defaults.

struct RunConfig {
  // shared
  std::string input;   // primary record file
  std::string second;  // counterpart file: --gt for eval-plan, --pred for simulate
  std::string out;     // report path; empty prints the document to stdout
  uint64_t seed = 0;
  int workers = 1;
  std::string action_set_path;  // empty = built-in vocabulary

  // eval-plan
  std::string matcher = "rule";  // rule | judge
  bool strict_parse = true;      // predictions must parse fully or score zero

  // judge access; the bearer token is read from the env var the config NAMES,
  // never from the config itself
  std::string judge_stub;  // stub:echo | stub:equality | stub:grm=<v> | stub:fixed=<text>
  JudgeConfig judge;       // endpoint settings; empty endpoint_url = no judge

  // reward
  std::vector<std::string> kinds = {"format"};
  double w_rule = 0.5;
  double iou_threshold = 0.5;

  // simulate
  std::string scene_dir;  // empty = <tasks dir>/../scenes

  // difficulty
  std::string predictor = "stub:always_correct";
  DifficultyConfig difficulty;

  ActionSet action_set() const {
    return action_set_path.empty() ? ActionSet::defaults() : ActionSet::from_file(action_set_path);
  }

  std::unique_ptr<JudgeClient> make_judge() const {
    if (!judge_stub.empty()) {
      if (judge_stub == "stub:echo") return make_echo_stub();
      if (judge_stub == "stub:equality") return make_equality_consistency_stub();
      if (judge_stub.rfind("stub:grm=", 0) == 0)
        return make_fixed_stub("<score>" + judge_stub.substr(9) + "</score>");
      if (judge_stub.rfind("stub:fixed=", 0) == 0) return make_fixed_stub(judge_stub.substr(11));
      throw config_error("unknown judge stub: " + judge_stub);
    }
    if (!judge.endpoint_url.empty()) return std::make_unique<HttpJudgeClient>(judge);
    return nullptr;
  }

  // everything that shapes results, hashed into the report metadata
  nlohmann::json canonical() const {
    return nlohmann::json{
        {"input", input},
        {"second", second},
        {"seed", seed},
        {"workers", workers},
        {"action_set", action_set_path},
        {"matcher", matcher},
        {"strict_parse", strict_parse},
        {"judge_stub", judge_stub},
        {"judge",
         {{"endpoint_url", judge.endpoint_url},
          {"model", judge.model},
          {"auth_env_var", judge.auth_env_var},
          {"max_concurrency", judge.max_concurrency},
          {"timeout_ms", judge.timeout_ms},
          {"retries", judge.retries},
          {"backoff_ms", judge.backoff_ms}}},
        {"kinds", kinds},
        {"w_rule", w_rule},
        {"iou_threshold", iou_threshold},
        {"scene_dir", scene_dir},
        {"predictor", predictor},
        {"difficulty",
         {{"lambdas", difficulty.lambdas},
          {"k", difficulty.k},
          {"tau", difficulty.tau},
          {"fill", mask_fill_name(difficulty.fill)},
          {"easy_min", difficulty.easy_min},
          {"moderate_min", difficulty.moderate_min}}},
    };
  }

  void validate() const {
    if (workers < 1) throw config_error("workers must be at least 1");
    if (matcher != "rule" && matcher != "judge")
      throw config_error("matcher must be 'rule' or 'judge', got '" + matcher + "'");
    static const std::set<std::string> known_kinds = {"format", "grm", "perception", "spatial",
                                                      "instruction"};
    for (const auto& k : kinds)
      if (!known_kinds.count(k)) throw config_error("unknown reward kind: " + k);
    if (kinds.empty()) throw config_error("at least one reward kind is required");
    if (!(w_rule >= 0.0 && w_rule <= 1.0)) throw config_error("w_rule must lie in [0, 1]");
    if (!(iou_threshold > 0.0 && iou_threshold <= 1.0))
      throw config_error("iou_threshold must lie in (0, 1]");
    difficulty.validate();
    if (predictor != "endpoint" && predictor != "stub:always_correct" &&
        predictor != "stub:always_wrong") {
      if (predictor.rfind("stub:threshold=", 0) != 0)
        throw config_error("unknown predictor: " + predictor);
      char* end = nullptr;
      std::string c = predictor.substr(15);
      double v = std::strtod(c.c_str(), &end);
      if (end != c.c_str() + c.size() || !(v >= 0.0 && v <= 1.0))
        throw config_error("predictor threshold must lie in [0, 1]: " + predictor);
    }
  }
};

namespace detail {

inline void apply_judge_section(JudgeConfig& judge, const nlohmann::json& node) {
  reject_unknown_keys(node,
                      {"endpoint_url", "model", "auth_env_var", "max_concurrency", "timeout_ms",
                       "retries", "backoff_ms"},
                      "config.judge");
  judge.endpoint_url = node.value("endpoint_url", judge.endpoint_url);
  judge.model = node.value("model", judge.model);
  judge.auth_env_var = node.value("auth_env_var", judge.auth_env_var);
  judge.max_concurrency = node.value("max_concurrency", judge.max_concurrency);
  judge.timeout_ms = node.value("timeout_ms", judge.timeout_ms);
  judge.retries = node.value("retries", judge.retries);
  judge.backoff_ms = node.value("backoff_ms", judge.backoff_ms);
}

inline void apply_difficulty_section(DifficultyConfig& d, const nlohmann::json& node) {
  reject_unknown_keys(node, {"lambdas", "k", "tau", "fill", "easy_min", "moderate_min"},
                      "config.difficulty");
  if (node.contains("lambdas")) d.lambdas = node["lambdas"].get<std::vector<double>>();
  d.k = node.value("k", d.k);
  d.tau = node.value("tau", d.tau);
  if (node.contains("fill")) d.fill = mask_fill_from_name(node["fill"].get<std::string>());
  d.easy_min = node.value("easy_min", d.easy_min);
  d.moderate_min = node.value("moderate_min", d.moderate_min);
}

}  // namespace detail

// Loads a JSON config file over the defaults already in `cfg`. Unknown keys
// are rejected outright; misspelled options must not silently no-op.
inline void apply_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config: " + path);
  nlohmann::json doc = nlohmann::json::parse(in, nullptr, false);
  if (doc.is_discarded() || !doc.is_object())
    throw config_error("config is not a JSON object: " + path);
  detail::reject_unknown_keys(doc,
                              {"seed", "workers", "action_set", "matcher", "strict_parse",
                               "judge_stub", "judge", "kinds", "w_rule", "iou_threshold",
                               "scene_dir", "predictor", "difficulty", "out"},
                              "config");
  cfg.seed = doc.value("seed", cfg.seed);
  cfg.workers = doc.value("workers", cfg.workers);
  cfg.action_set_path = doc.value("action_set", cfg.action_set_path);
  cfg.matcher = doc.value("matcher", cfg.matcher);
  cfg.strict_parse = doc.value("strict_parse", cfg.strict_parse);
  cfg.judge_stub = doc.value("judge_stub", cfg.judge_stub);
  if (doc.contains("judge")) detail::apply_judge_section(cfg.judge, doc["judge"]);
  if (doc.contains("kinds")) cfg.kinds = doc["kinds"].get<std::vector<std::string>>();
  cfg.w_rule = doc.value("w_rule", cfg.w_rule);
  cfg.iou_threshold = doc.value("iou_threshold", cfg.iou_threshold);
  cfg.scene_dir = doc.value("scene_dir", cfg.scene_dir);
  cfg.predictor = doc.value("predictor", cfg.predictor);
  if (doc.contains("difficulty")) detail::apply_difficulty_section(cfg.difficulty, doc["difficulty"]);
  cfg.out = doc.value("out", cfg.out);
}

// ---------------------------------------------------------------------------
// Record IO: one JSON object per line, ids mandatory, blank lines ignored.

struct RecordLine {
  size_t line = 0;
  nlohmann::json value;
};

struct RecordFile {
  std::vector<RecordLine> records;
  std::vector<nlohmann::json> malformed;  // {"line": N, "error": ...}
};

inline RecordFile load_record_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open input: " + path);
  RecordFile out;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    nlohmann::json v = nlohmann::json::parse(line, nullptr, false);
    if (v.is_discarded())
      out.malformed.push_back({{"line", lineno}, {"error", "line is not valid JSON"}});
    else if (!v.is_object())
      out.malformed.push_back({{"line", lineno}, {"error", "record is not a JSON object"}});
    else if (!v.contains("id") || !v["id"].is_string() || v["id"].get<std::string>().empty())
      out.malformed.push_back({{"line", lineno}, {"error", "record has no string id"}});
    else
      out.records.push_back({lineno, std::move(v)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Bounded worker pool; results land at their input index, so assembly order
// never depends on scheduling.

template <typename Fn>
inline std::vector<nlohmann::json> parallel_map(size_t count, int workers, Fn fn) {
  std::vector<nlohmann::json> out(count);
  if (count == 0) return out;
  int n = std::max(1, std::min<int>(workers, static_cast<int>(count)));
  std::atomic<size_t> next{0};
  std::exception_ptr first_error;
  std::mutex err_mu;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(n));
  for (int t = 0; t < n; ++t)
    pool.emplace_back([&] {
      for (size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
        try {
          out[i] = fn(i);
        } catch (...) {
          std::lock_guard lock(err_mu);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
  return out;
}

// ---------------------------------------------------------------------------
// Reports

inline std::string iso8601_utc_now() {
  std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[80];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02dZ", tm.tm_year + 1900,
                tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec);
  return buf;
}

struct Report {
  using Aggregator = std::function<nlohmann::json(const std::vector<nlohmann::json>&)>;

  nlohmann::json meta = nlohmann::json::object();
  std::vector<nlohmann::json> records;
  Aggregator aggregator;  // pure function of the records
  nlohmann::json aggregates = nlohmann::json::object();

  void finalize() {
    if (aggregator) aggregates = aggregator(records);
  }

  // aggregates are recomputed on every emit and must match their records
  nlohmann::json to_json() const {
    nlohmann::json fresh = aggregator ? aggregator(records) : aggregates;
    if (aggregator && !aggregates.empty() && fresh != aggregates)
      throw std::logic_error("report aggregates do not match their records");
    return nlohmann::json{{"meta", meta}, {"records", records}, {"aggregates", fresh}};
  }

  // flat table: scalar leaves only, dotted keys, columns in first-seen order
  std::string to_table() const {
    std::vector<std::string> cols;
    std::set<std::string> seen;
    std::vector<std::map<std::string, std::string>> rows;
    for (const auto& rec : records) {
      std::map<std::string, std::string> row;
      flatten(rec, "", cols, seen, row);
      rows.push_back(std::move(row));
    }
    std::string out = join(cols, "\t") + "\n";
    for (const auto& row : rows) {
      std::string line;
      for (size_t c = 0; c < cols.size(); ++c) {
        if (c) line += '\t';
        auto it = row.find(cols[c]);
        if (it != row.end()) line += it->second;
      }
      out += line + "\n";
    }
    return out;
  }

 private:
  static void flatten(const nlohmann::json& v, const std::string& prefix,
                      std::vector<std::string>& cols, std::set<std::string>& seen,
                      std::map<std::string, std::string>& row) {
    if (v.is_object()) {
      for (auto it = v.begin(); it != v.end(); ++it)
        flatten(it.value(), prefix.empty() ? it.key() : prefix + "." + it.key(), cols, seen, row);
      return;
    }
    if (v.is_array()) return;  // the structured document carries the deep fields
    std::string cell = v.is_string() ? v.get<std::string>() : v.dump();
    for (char& ch : cell)
      if (ch == '\t' || ch == '\n' || ch == '\r') ch = ' ';
    if (seen.insert(prefix).second) cols.push_back(prefix);
    row[prefix] = cell;
  }
};

inline nlohmann::json make_meta(const RunConfig& cfg, const std::string& subcommand) {
  nlohmann::json canon = cfg.canonical();
  canon["subcommand"] = subcommand;
  return nlohmann::json{{"subcommand", subcommand},
                        {"version", kToolkitVersion},
                        {"config_hash", to_hex(fnv1a64(canon.dump()))},
                        {"seed", cfg.seed},
                        {"timestamp", iso8601_utc_now()}};
}

inline std::string table_sibling_path(const std::string& out_path) {
  size_t dot = out_path.find_last_of('.');
  size_t slash = out_path.find_last_of("/\\");
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash))
    return out_path + ".tsv";
  return out_path.substr(0, dot) + ".tsv";
}

inline void write_report(const Report& rep, const std::string& out_path) {
  std::string doc = rep.to_json().dump(2) + "\n";
  if (out_path.empty()) {
    std::fwrite(doc.data(), 1, doc.size(), stdout);
    return;
  }
  std::ofstream o(out_path);
  if (!o) throw config_error("cannot write report: " + out_path);
  o << doc;
  std::string table_path = table_sibling_path(out_path);
  std::ofstream t(table_path);
  if (!t) throw config_error("cannot write table: " + table_path);
  t << rep.to_table();
}

// 0 clean, 1 when evaluation produced failures; config/IO problems throw and
// the CLI maps them to 2.
inline int report_exit_code(const Report& rep) {
  return rep.aggregates.value("failures", size_t{0}) > 0 ? 1 : 0;
}

// ---------------------------------------------------------------------------
// parse: strict-parse every record's output, diagnostics per line

inline Report run_parse(const RunConfig& cfg) {
  cfg.validate();
  RecordFile in = load_record_file(cfg.input);
  Report rep;
  rep.meta = make_meta(cfg, "parse");
  rep.records = parallel_map(in.records.size(), cfg.workers, [&](size_t i) {
    const nlohmann::json& src = in.records[i].value;
    nlohmann::json r{{"id", src["id"]}};
    if (!src.contains("output") || !src["output"].is_string()) {
      r["ok"] = false;
      r["error"] = "record needs a string 'output'";
      return r;
    }
    ParseReport pr;
    auto parsed = parse_structured_output(src["output"].get<std::string>(), /*strict=*/true, &pr);
    r["ok"] = parsed.has_value();
    nlohmann::json issues = nlohmann::json::array();
    for (const auto& e : pr.errors) issues.push_back({{"offset", e.offset}, {"message", e.message}});
    r["issues"] = std::move(issues);
    if (parsed) {
      r["plan_steps"] = parsed->plans.size();
      r["actions"] = parsed->actions.size();
    }
    return r;
  });
  for (auto& bad : in.malformed) {
    bad["ok"] = false;
    rep.records.push_back(bad);
  }
  rep.aggregator = [](const std::vector<nlohmann::json>& records) {
    size_t ok = 0;
    for (const auto& r : records) ok += r.value("ok", false) ? 1 : 0;
    return nlohmann::json{
        {"count", records.size()}, {"ok", ok}, {"failures", records.size() - ok}};
  };
  rep.finalize();
  return rep;
}

// ---------------------------------------------------------------------------
// eval-plan: match-matrix metrics per aligned (prediction, ground truth) pair

namespace detail {

inline nlohmann::json prf1_json(const PRF1& p) {
  return nlohmann::json{{"precision", p.precision}, {"recall", p.recall}, {"f1", p.f1}};
}

inline nlohmann::json prf1_json(double precision, double recall) {
  double f1 = precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
  return nlohmann::json{{"precision", precision}, {"recall", recall}, {"f1", f1}};
}

}  // namespace detail

inline nlohmann::json aggregate_eval_plan(const std::vector<nlohmann::json>& records) {
  size_t evaluated = 0, failures = 0;
  double qp = 0, qr = 0, qf = 0, op = 0, orr = 0, of = 0;
  double sq = 0, so = 0, sm = 0, sn = 0;
  for (const auto& r : records) {
    if (r.contains("error") || !r.contains("quantity")) {
      ++failures;
      continue;
    }
    ++evaluated;
    qp += r["quantity"]["precision"].get<double>();
    qr += r["quantity"]["recall"].get<double>();
    qf += r["quantity"]["f1"].get<double>();
    op += r["order"]["precision"].get<double>();
    orr += r["order"]["recall"].get<double>();
    of += r["order"]["f1"].get<double>();
    sq += r["quantity_score"].get<double>();
    so += r["order_score"].get<double>();
    sm += r["m"].get<double>();
    sn += r["n"].get<double>();
  }
  auto div = [](double a, double b) { return b > 0.0 ? a / b : 0.0; };
  nlohmann::json macro = {
      {"quantity",
       {{"precision", div(qp, evaluated)}, {"recall", div(qr, evaluated)}, {"f1", div(qf, evaluated)}}},
      {"order",
       {{"precision", div(op, evaluated)}, {"recall", div(orr, evaluated)}, {"f1", div(of, evaluated)}}}};
  nlohmann::json micro = {{"quantity", detail::prf1_json(div(sq, sm), div(sq, sn))},
                          {"order", detail::prf1_json(div(so, sm), div(so, sn))}};
  return nlohmann::json{{"count", records.size()},
                        {"evaluated", evaluated},
                        {"failures", failures},
                        {"macro", std::move(macro)},
                        {"micro", std::move(micro)}};
}

// Optional judge_override lets tests inject fault-injected stubs; normal runs
// build the client the config describes.
inline Report run_eval_plan(const RunConfig& cfg, JudgeClient* judge_override = nullptr) {
  cfg.validate();
  std::unique_ptr<JudgeClient> owned;
  JudgeClient* judge = judge_override;
  if (cfg.matcher == "judge" && !judge) {
    owned = cfg.make_judge();
    if (!owned) throw config_error("matcher 'judge' needs a judge endpoint or stub");
    judge = owned.get();
  }

  struct WorkItem {
    std::string id, pred, gt;
    std::string error;
  };
  std::vector<WorkItem> work;
  RecordFile pred_file = load_record_file(cfg.input);
  std::vector<nlohmann::json> extra;
  for (auto& bad : pred_file.malformed) extra.push_back(std::move(bad));

  if (cfg.second.empty()) {
    // single-file mode: each record carries both sides
    for (const auto& rec : pred_file.records) {
      WorkItem item;
      item.id = rec.value["id"].get<std::string>();
      if (!rec.value.contains("prediction") || !rec.value.contains("ground_truth"))
        item.error = "record needs 'prediction' and 'ground_truth'";
      else {
        item.pred = rec.value["prediction"].get<std::string>();
        item.gt = rec.value["ground_truth"].get<std::string>();
      }
      work.push_back(std::move(item));
    }
  } else {
    RecordFile gt_file = load_record_file(cfg.second);
    for (auto& bad : gt_file.malformed) extra.push_back(std::move(bad));
    std::map<std::string, std::string> gt_by_id;
    for (const auto& rec : gt_file.records) {
      std::string id = rec.value["id"].get<std::string>();
      if (!gt_by_id.emplace(id, rec.value.value("output", "")).second)
        extra.push_back({{"id", id}, {"error", "duplicate ground-truth id"}});
    }
    std::set<std::string> seen;
    for (const auto& rec : pred_file.records) {
      WorkItem item;
      item.id = rec.value["id"].get<std::string>();
      if (!seen.insert(item.id).second) {
        extra.push_back({{"id", item.id}, {"error", "duplicate prediction id"}});
        continue;
      }
      auto it = gt_by_id.find(item.id);
      if (it == gt_by_id.end())
        item.error = "no ground truth for id";
      else if (!rec.value.contains("output"))
        item.error = "record needs a string 'output'";
      else {
        item.pred = rec.value["output"].get<std::string>();
        item.gt = it->second;
      }
      work.push_back(std::move(item));
    }
    // the mismatch listing runs both ways
    for (const auto& [id, unused] : gt_by_id)
      if (!seen.count(id)) extra.push_back({{"id", id}, {"error", "no prediction for id"}});
  }

  EvalConfig ecfg;
  ecfg.strict_parse = cfg.strict_parse;
  ecfg.action_set = cfg.action_set();

  Report rep;
  rep.meta = make_meta(cfg, "eval-plan");
  rep.records = parallel_map(work.size(), cfg.workers, [&](size_t i) {
    const WorkItem& item = work[i];
    nlohmann::json r{{"id", item.id}};
    if (!item.error.empty()) {
      r["error"] = item.error;
      return r;
    }
    try {
      std::unique_ptr<ActionMatcher> matcher;
      if (judge)
        matcher = std::make_unique<LlmActionMatcher>(*judge);
      else
        matcher = std::make_unique<RuleBasedMatcher>(MatcherConfig{ecfg.action_set, {}});
      PairEvaluation pe = evaluate_plan_pair(item.pred, item.gt, *matcher, ecfg);
      r["m"] = pe.m;
      r["n"] = pe.n;
      r["quantity_score"] = pe.quantity_score;
      r["order_score"] = pe.order_score;
      r["quantity"] = detail::prf1_json(pe.metrics.quantity);
      r["order"] = detail::prf1_json(pe.metrics.order);
      r["flags"] = pe.flags;
    } catch (const std::exception& e) {
      r["error"] = e.what();
    }
    return r;
  });
  for (auto& e : extra) rep.records.push_back(std::move(e));
  rep.aggregator = aggregate_eval_plan;
  rep.finalize();
  return rep;
}

// ---------------------------------------------------------------------------
// simulate: run gold plans (suite self-check) or predicted plans

inline std::string resolve_scene_path(const RunConfig& cfg, const std::string& scene) {
  namespace fs = std::filesystem;
  fs::path p(scene);
  if (p.is_absolute()) return scene;
  fs::path tasks_dir = fs::path(cfg.input).parent_path();
  if (has_suffix(scene, ".json")) return (tasks_dir / p).string();
  fs::path dir = cfg.scene_dir.empty() ? tasks_dir.parent_path() / "scenes"
                                       : fs::path(cfg.scene_dir);
  return (dir / (scene + ".json")).string();
}

inline Report run_simulate(const RunConfig& cfg) {
  cfg.validate();
  std::vector<TaskSpec> tasks = load_tasks(cfg.input);
  bool self_check = cfg.second.empty();

  std::map<std::string, std::string> pred_by_id;
  std::vector<nlohmann::json> extra;
  if (!self_check) {
    RecordFile preds = load_record_file(cfg.second);
    for (auto& bad : preds.malformed) extra.push_back(std::move(bad));
    std::set<std::string> task_ids;
    for (const auto& t : tasks) task_ids.insert(t.id);
    for (const auto& rec : preds.records) {
      std::string id = rec.value["id"].get<std::string>();
      if (!task_ids.count(id)) {
        extra.push_back({{"id", id}, {"error", "no task for prediction"}});
        continue;
      }
      // predictions carry raw plan text under "actions", or a full structured
      // output under "output"; adapt_input copes with either shape
      std::string text;
      for (const char* key : {"actions", "output"}) {
        auto field = rec.value.find(key);
        if (field != rec.value.end() && field->is_string()) {
          text = field->get<std::string>();
          break;
        }
      }
      if (!pred_by_id.emplace(id, std::move(text)).second)
        extra.push_back({{"id", id}, {"error", "duplicate prediction id"}});
    }
  }

  ActionSet set = cfg.action_set();
  Report rep;
  rep.meta = make_meta(cfg, "simulate");
  rep.records = parallel_map(tasks.size(), cfg.workers, [&](size_t i) {
    const TaskSpec& t = tasks[i];
    nlohmann::json r{{"id", t.id}, {"success", false}};
    std::vector<AtomicAction> plan;
    nlohmann::json warnings = nlohmann::json::array();
    if (self_check) {
      plan = t.gold_actions;
    } else {
      auto it = pred_by_id.find(t.id);
      if (it == pred_by_id.end()) {
        r["error"] = "no prediction for task";
        return r;
      }
      AdaptResult adapted = adapt_input(it->second, set);
      for (const auto& w : adapted.warnings) warnings.push_back(w);
      if (!adapted.ok) {
        r["adapt_warnings"] = std::move(warnings);
        r["flags"] = nlohmann::json::array({"adaptation_failed"});
        return r;
      }
      plan = std::move(adapted.actions);
    }

    WorldState world;
    try {
      world = load_scene_file(resolve_scene_path(cfg, t.scene));
    } catch (const std::exception& e) {
      r["error"] = e.what();
      return r;
    }
    ExecutionTrace trace = execute_plan(world, plan, t.goals);
    r["success"] = trace.final_success;
    r["steps_executed"] = trace.steps_executed;
    r["final_snapshot"] = to_hex(trace.final_snapshot);
    nlohmann::json steps = nlohmann::json::array();
    for (const auto& s : trace.steps)
      steps.push_back({{"index", s.index},
                       {"action", serialize_actions({s.action})},
                       {"stage", s.stage},
                       {"ok", s.ok},
                       {"reason", s.reason},
                       {"detail", s.detail}});
    r["steps"] = std::move(steps);
    if (!self_check) r["adapt_warnings"] = std::move(warnings);
    if (const StepRecord* fail = trace.first_failure())
      r["first_failure"] = {{"index", fail->index}, {"reason", fail->reason}};
    return r;
  });
  for (auto& e : extra) rep.records.push_back(std::move(e));
  rep.aggregator = [self_check](const std::vector<nlohmann::json>& records) {
    size_t evaluated = 0, succeeded = 0, errors = 0;
    for (const auto& r : records) {
      if (r.contains("error")) {
        ++errors;
        continue;
      }
      ++evaluated;
      succeeded += r.value("success", false) ? 1 : 0;
    }
    size_t failures = errors + (self_check ? evaluated - succeeded : 0);
    nlohmann::json agg{{"count", records.size()},
                       {"evaluated", evaluated},
                       {"succeeded", succeeded},
                       {"errors", errors},
                       {"failures", failures}};
    agg["success_rate"] = evaluated > 0
                              ? nlohmann::json(static_cast<double>(succeeded) /
                                               static_cast<double>(evaluated))
                              : nlohmann::json();
    return agg;
  };
  rep.finalize();
  return rep;
}

// ---------------------------------------------------------------------------
// reward: per-sample rewards by kind

inline Report run_reward(const RunConfig& cfg, JudgeClient* judge_override = nullptr) {
  cfg.validate();
  bool needs_judge = false;
  for (const auto& k : cfg.kinds) needs_judge = needs_judge || k == "grm" || k == "instruction";
  std::unique_ptr<JudgeClient> owned;
  JudgeClient* judge = judge_override;
  if (needs_judge && !judge) {
    owned = cfg.make_judge();
    if (!owned)
      throw config_error("reward kinds grm/instruction need a judge endpoint or stub");
    judge = owned.get();
  }

  RecordFile in = load_record_file(cfg.input);
  ActionSet set = cfg.action_set();
  std::set<std::string> kinds(cfg.kinds.begin(), cfg.kinds.end());

  Report rep;
  rep.meta = make_meta(cfg, "reward");
  rep.records = parallel_map(in.records.size(), cfg.workers, [&](size_t i) {
    const nlohmann::json& src = in.records[i].value;
    nlohmann::json r{{"id", src["id"]}};
    nlohmann::json flags = nlohmann::json::array();
    auto need = [&](const char* kind, const char* field) -> const nlohmann::json* {
      if (src.contains(field)) return &src[field];
      r["error"] = std::string("kind '") + kind + "' needs field '" + field + "'";
      return nullptr;
    };
    try {
      if (kinds.count("format")) {
        if (const auto* output = need("format", "output")) {
          FormatRewardBreakdown b = format_reward(output->get<std::string>(), set);
          r["format"] = b.total;
          r["format_breakdown"] = {{"completeness", b.completeness},
                                   {"closure", b.closure},
                                   {"adherence", b.adherence}};
        }
      }
      if (kinds.count("grm") && !r.contains("error")) {
        const auto* q = need("grm", "question");
        const auto* ref = q ? need("grm", "reference") : nullptr;
        const auto* output = ref ? need("grm", "output") : nullptr;
        if (output) {
          GrmOutcome g = grm_reward(*judge, q->get<std::string>(), ref->get<std::string>(), set,
                                    output->get<std::string>());
          r["grm"] = g.score.value;
          r["grm_asks"] = g.asks;
          if (g.failed) flags.push_back("grm_extraction_failed");
          if (g.score.clamped) flags.push_back("grm_score_clamped");
        }
      }
      if (r.contains("format") && r.contains("grm"))
        r["combined"] = combined_planning_reward(r["format"].get<double>(),
                                                 r["grm"].get<double>(), cfg.w_rule);
      if (kinds.count("perception") && !r.contains("error")) {
        bool handled = false;
        if (src.contains("pred_boxes") && src.contains("gt_boxes")) {
          auto to_boxes = [](const nlohmann::json& arr) {
            std::vector<BBox> boxes;
            for (const auto& b : arr)
              boxes.push_back({b.at(0).get<double>(), b.at(1).get<double>(),
                               b.at(2).get<double>(), b.at(3).get<double>()});
            return boxes;
          };
          r["detection"] = detection_reward(to_boxes(src["pred_boxes"]),
                                            to_boxes(src["gt_boxes"]), cfg.iou_threshold);
          handled = true;
        }
        if (src.contains("gt_count")) {
          if (const auto* output = need("perception", "output")) {
            r["counting"] =
                counting_reward(output->get<std::string>(), src["gt_count"].get<long long>());
            handled = true;
          }
        }
        if (!handled && !r.contains("error"))
          r["error"] = "kind 'perception' needs 'pred_boxes'/'gt_boxes' or 'gt_count'";
      }
      if (kinds.count("spatial") && !r.contains("error")) {
        const auto* output = need("spatial", "output");
        const auto* ref = output ? need("spatial", "reference") : nullptr;
        const auto* kindfield = ref ? need("spatial", "spatial_kind") : nullptr;
        if (kindfield) {
          std::string sk = kindfield->get<std::string>();
          if (sk != "multiple_choice" && sk != "descriptive")
            throw config_error("spatial_kind must be multiple_choice or descriptive");
          SpatialConfig scfg;
          if (src.contains("options"))
            scfg.options = src["options"].get<std::vector<std::string>>();
          r["spatial"] = spatial_reward(output->get<std::string>(), ref->get<std::string>(),
                                        sk == "multiple_choice" ? SpatialTaskKind::multiple_choice
                                                                : SpatialTaskKind::descriptive,
                                        scfg);
        }
      }
      if (kinds.count("instruction") && !r.contains("error")) {
        const auto* q = need("instruction", "question");
        const auto* output = q ? need("instruction", "output") : nullptr;
        const auto* ref = output ? need("instruction", "reference") : nullptr;
        if (ref)
          r["instruction"] = instruction_correctness_reward(
              q->get<std::string>(), output->get<std::string>(), ref->get<std::string>(), *judge);
      }
    } catch (const std::exception& e) {
      r["error"] = e.what();
    }
    if (!flags.empty()) r["flags"] = std::move(flags);
    return r;
  });
  for (auto& bad : in.malformed) rep.records.push_back(std::move(bad));
  rep.aggregator = [](const std::vector<nlohmann::json>& records) {
    size_t failures = 0;
    std::map<std::string, std::pair<double, size_t>> sums;
    for (const auto& r : records) {
      if (r.contains("error")) {
        ++failures;
        continue;
      }
      for (const char* kind :
           {"format", "grm", "combined", "detection", "counting", "spatial", "instruction"})
        if (r.contains(kind)) {
          auto& [sum, n] = sums[kind];
          sum += r[kind].get<double>();
          ++n;
        }
    }
    nlohmann::json mean = nlohmann::json::object();
    for (const auto& [kind, acc] : sums) mean[kind] = acc.first / static_cast<double>(acc.second);
    return nlohmann::json{
        {"count", records.size()}, {"failures", failures}, {"mean", std::move(mean)}};
  };
  rep.finalize();
  return rep;
}

// ---------------------------------------------------------------------------
// difficulty: masking profiles per image sample

// Remote predictor speaking the chat-completions vision form: the question as
// text plus the masked image as a base64 PNG data url.
class ClientPredictor : public Predictor {
 public:
  explicit ClientPredictor(JudgeClient& client) : client_(client) {}

  std::string predict(const ImageBuffer& img, const std::string& question) override {
#ifdef PLANBENCH_HAS_PNG
    JudgeRequest req;
    req.user_prompt = question;
    req.image_data_url = "data:image/png;base64," + base64_encode(write_png_to_memory(img));
    return client_.complete(req);
#else
    (void)img;
    (void)question;
    throw config_error("remote predictors need png support compiled in");
#endif
  }

 private:
  JudgeClient& client_;
};

// stub:always_* answer relative to the record's ground truth, so the factory
// takes it per record.
inline std::unique_ptr<Predictor> make_predictor(const RunConfig& cfg, const std::string& gt,
                                                 JudgeClient* client) {
  if (cfg.predictor == "stub:always_correct")
    return std::make_unique<CallbackPredictor>(
        [gt](const ImageBuffer&, const std::string&) { return gt; });
  if (cfg.predictor == "stub:always_wrong")
    return std::make_unique<CallbackPredictor>(
        [gt](const ImageBuffer&, const std::string&) { return gt + " (wrong)"; });
  if (cfg.predictor.rfind("stub:threshold=", 0) == 0)
    return std::make_unique<ThresholdStubPredictor>(std::stod(cfg.predictor.substr(15)));
  if (cfg.predictor == "endpoint") {
    if (!client) throw config_error("predictor 'endpoint' needs a judge endpoint or stub");
    return std::make_unique<ClientPredictor>(*client);
  }
  throw config_error("unknown predictor: " + cfg.predictor);
}

inline Report run_difficulty(const RunConfig& cfg, JudgeClient* judge_override = nullptr) {
  cfg.validate();
  std::unique_ptr<JudgeClient> owned;
  JudgeClient* client = judge_override;
  if (cfg.predictor == "endpoint" && !client) {
    owned = cfg.make_judge();
    if (!owned) throw config_error("predictor 'endpoint' needs a judge endpoint or stub");
    client = owned.get();
  }

  RecordFile in = load_record_file(cfg.input);
  std::filesystem::path input_dir = std::filesystem::path(cfg.input).parent_path();

  Report rep;
  rep.meta = make_meta(cfg, "difficulty");
  rep.records = parallel_map(in.records.size(), cfg.workers, [&](size_t i) {
    const nlohmann::json& src = in.records[i].value;
    std::string id = src["id"].get<std::string>();
    nlohmann::json r{{"id", id}};
    try {
      for (const char* field : {"image", "question", "answer"})
        if (!src.contains(field) || !src[field].is_string())
          throw config_error(std::string("record needs a string '") + field + "'");
      std::filesystem::path img_path(src["image"].get<std::string>());
      if (!img_path.is_absolute()) img_path = input_dir / img_path;
      ImageBuffer img = read_image(img_path.string());
      std::string question = src["question"].get<std::string>();
      std::string answer = src["answer"].get<std::string>();

      auto predictor = make_predictor(cfg, answer, client);
      EqualityJudge judge;
      MaskingProfile profile =
          compute_masking_profile(*predictor, judge, img, question, answer, cfg.difficulty,
                                  derive_seed(cfg.seed, fnv1a64(id)));
      r["lambdas"] = profile.lambdas;
      r["accuracies"] = profile.accuracies;
      r["lambda_star"] =
          profile.lambda_star ? nlohmann::json(*profile.lambda_star) : nlohmann::json();
      r["bucket"] = bucket_name(difficulty_bucket(profile.lambda_star, cfg.difficulty.easy_min,
                                                  cfg.difficulty.moderate_min));
    } catch (const std::exception& e) {
      r["error"] = e.what();
    }
    return r;
  });
  for (auto& bad : in.malformed) rep.records.push_back(std::move(bad));
  rep.aggregator = [](const std::vector<nlohmann::json>& records) {
    size_t failures = 0;
    std::map<std::string, size_t> buckets = {{"easy", 0}, {"moderate", 0}, {"hard", 0}};
    for (const auto& r : records) {
      if (r.contains("error")) {
        ++failures;
        continue;
      }
      ++buckets[r["bucket"].get<std::string>()];
    }
    return nlohmann::json{
        {"count", records.size()}, {"failures", failures}, {"buckets", buckets}};
  };
  rep.finalize();
  return rep;
}

}  // namespace planbench
