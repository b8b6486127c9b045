#pragma once

// LLM judge access. One wire protocol (chat completions), one retry/backoff
// policy, one shared concurrency bound, and a family of deterministic stub
// clients so every judge-backed code path can run hermetically in tests.

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "planbench/core.hpp"
#include "planbench/match_metrics.hpp"

namespace planbench {

struct JudgeRequest {
  std::string system_prompt;
  std::string user_prompt;
  std::string image_data_url;  // optional; sent as an image_url content part
  double temperature = 0.0;
  int max_tokens = 1024;
  std::string model;  // empty = config default
};

struct JudgeConfig {
  std::string endpoint_url;  // e.g. http://host:8000/v1/chat/completions
  std::string model = "judge";
  std::string auth_env_var = "JUDGE_API_KEY";  // name of the env var holding the bearer token
  int max_concurrency = 4;
  int timeout_ms = 30000;
  int retries = 2;     // transport retries after the first attempt
  int backoff_ms = 250;  // doubled per retry
};

// Counting semaphore with a runtime limit. All requests issued through one
// client funnel through its limiter, which bounds in-flight judge calls.
class ConcurrencyLimiter {
 public:
  explicit ConcurrencyLimiter(int limit) : limit_(limit < 1 ? 1 : limit) {}

  void acquire() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return in_flight_ < limit_; });
    ++in_flight_;
  }
  void release() {
    {
      std::lock_guard lock(mu_);
      --in_flight_;
    }
    cv_.notify_one();
  }

  struct Guard {
    ConcurrencyLimiter& l;
    explicit Guard(ConcurrencyLimiter& lim) : l(lim) { l.acquire(); }
    ~Guard() { l.release(); }
  };

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  int limit_;
  int in_flight_ = 0;
};

struct CompletionInfo {
  std::string text;
  int attempts = 1;
};

class JudgeClient {
 public:
  explicit JudgeClient(int max_concurrency = 4, int retries = 2, int backoff_ms = 0)
      : limiter_(std::make_shared<ConcurrencyLimiter>(max_concurrency)),
        retries_(retries < 0 ? 0 : retries),
        backoff_ms_(backoff_ms) {}
  virtual ~JudgeClient() = default;

  std::string complete(const JudgeRequest& req) { return complete_info(req).text; }

  // Transport failures retry with doubling backoff; the last error propagates.
  CompletionInfo complete_info(const JudgeRequest& req) {
    ConcurrencyLimiter::Guard guard(*limiter_);
    int delay = backoff_ms_;
    for (int attempt = 1;; ++attempt) {
      try {
        return {do_complete(req), attempt};
      } catch (const judge_error&) {
        if (attempt > retries_) throw;
        if (delay > 0) std::this_thread::sleep_for(std::chrono::milliseconds(delay));
        delay *= 2;
      }
    }
  }

 protected:
  virtual std::string do_complete(const JudgeRequest& req) = 0;

 private:
  std::shared_ptr<ConcurrencyLimiter> limiter_;
  int retries_;
  int backoff_ms_;
};

// Stub driven by a callback; the building block for every other stub.
class CallbackStubClient : public JudgeClient {
 public:
  using Fn = std::function<std::string(const JudgeRequest&)>;
  explicit CallbackStubClient(Fn fn, int max_concurrency = 4, int retries = 2)
      : JudgeClient(max_concurrency, retries, /*backoff_ms=*/0), fn_(std::move(fn)) {}

 protected:
  std::string do_complete(const JudgeRequest& req) override { return fn_(req); }

 private:
  Fn fn_;
};

inline std::unique_ptr<JudgeClient> make_echo_stub() {
  return std::make_unique<CallbackStubClient>([](const JudgeRequest& r) { return r.user_prompt; });
}

inline std::unique_ptr<JudgeClient> make_fixed_stub(std::string reply) {
  return std::make_unique<CallbackStubClient>(
      [reply = std::move(reply)](const JudgeRequest&) { return reply; });
}

// Fault injection: the first `failures` calls raise a transport error, later
// calls defer to the inner callback. Counts calls across retries.
class FlakyStubClient : public JudgeClient {
 public:
  FlakyStubClient(int failures, std::string reply, int retries = 2, int max_concurrency = 4)
      : JudgeClient(max_concurrency, retries, 0), failures_(failures), reply_(std::move(reply)) {}

  int calls() const { return calls_.load(); }

 protected:
  std::string do_complete(const JudgeRequest&) override {
    int n = ++calls_;
    if (n <= failures_) throw judge_error("injected timeout on call " + std::to_string(n));
    return reply_;
  }

 private:
  int failures_;
  std::string reply_;
  std::atomic<int> calls_{0};
};

// Talks to a chat-completions endpoint. Request body:
//   {model, messages: [{role, content}...], temperature, max_tokens}
// Reply text is choices[0].message.content. The bearer token is read from the
// environment variable named in the config, never from the config itself.
class HttpJudgeClient : public JudgeClient {
 public:
  explicit HttpJudgeClient(JudgeConfig cfg)
      : JudgeClient(cfg.max_concurrency, cfg.retries, cfg.backoff_ms), cfg_(std::move(cfg)) {
    if (cfg_.endpoint_url.empty()) throw config_error("judge endpoint_url is empty");
    auto scheme_end = cfg_.endpoint_url.find("://");
    if (scheme_end == std::string::npos)
      throw config_error("judge endpoint_url needs a scheme: " + cfg_.endpoint_url);
    auto path_start = cfg_.endpoint_url.find('/', scheme_end + 3);
    base_ = cfg_.endpoint_url.substr(0, path_start);
    path_ = path_start == std::string::npos ? "/v1/chat/completions"
                                            : cfg_.endpoint_url.substr(path_start);
  }

 protected:
  std::string do_complete(const JudgeRequest& req) override {
    nlohmann::json body;
    body["model"] = req.model.empty() ? cfg_.model : req.model;
    auto& messages = body["messages"] = nlohmann::json::array();
    if (!req.system_prompt.empty())
      messages.push_back({{"role", "system"}, {"content", req.system_prompt}});
    if (req.image_data_url.empty()) {
      messages.push_back({{"role", "user"}, {"content", req.user_prompt}});
    } else {
      // vision form: the content becomes an array of typed parts
      nlohmann::json parts = nlohmann::json::array();
      parts.push_back({{"type", "text"}, {"text", req.user_prompt}});
      parts.push_back({{"type", "image_url"}, {"image_url", {{"url", req.image_data_url}}}});
      messages.push_back({{"role", "user"}, {"content", std::move(parts)}});
    }
    body["temperature"] = req.temperature;
    body["max_tokens"] = req.max_tokens;

    httplib::Client http(base_);
    http.set_connection_timeout(0, cfg_.timeout_ms * 1000);
    http.set_read_timeout(cfg_.timeout_ms / 1000, (cfg_.timeout_ms % 1000) * 1000);
    httplib::Headers headers;
    if (!cfg_.auth_env_var.empty()) {
      if (const char* token = std::getenv(cfg_.auth_env_var.c_str()); token && *token)
        headers.emplace("Authorization", std::string("Bearer ") + token);
    }
    auto res = http.Post(path_, headers, body.dump(), "application/json");
    if (!res) throw judge_error("judge transport error: " + httplib::to_string(res.error()));
    if (res->status != 200)
      throw judge_error("judge endpoint returned status " + std::to_string(res->status));
    auto parsed = nlohmann::json::parse(res->body, nullptr, false);
    if (parsed.is_discarded() || !parsed.contains("choices") || parsed["choices"].empty() ||
        !parsed["choices"][0].contains("message"))
      throw judge_error("malformed completion response: " + res->body);
    return parsed["choices"][0]["message"].value("content", "");
  }

 private:
  JudgeConfig cfg_;
  std::string base_, path_;
};

// Finds the first balanced {...} region that parses as a JSON object.
inline std::optional<nlohmann::json> extract_first_json_object(const std::string& text) {
  for (size_t start = text.find('{'); start != std::string::npos;
       start = text.find('{', start + 1)) {
    int depth = 0;
    bool in_str = false;
    for (size_t i = start; i < text.size(); ++i) {
      char c = text[i];
      if (in_str) {
        if (c == '\\')
          ++i;
        else if (c == '"')
          in_str = false;
        continue;
      }
      if (c == '"') in_str = true;
      if (c == '{') ++depth;
      if (c == '}') --depth;
      if (depth == 0) {
        auto parsed = nlohmann::json::parse(text.substr(start, i - start + 1), nullptr,
                                            /*allow_exceptions=*/false);
        if (!parsed.is_discarded() && parsed.is_object()) return parsed;
        break;
      }
    }
  }
  return std::nullopt;
}

inline std::optional<nlohmann::json> extract_first_json_array(const std::string& text) {
  for (size_t start = text.find('['); start != std::string::npos;
       start = text.find('[', start + 1)) {
    int depth = 0;
    bool in_str = false;
    for (size_t i = start; i < text.size(); ++i) {
      char c = text[i];
      if (in_str) {
        if (c == '\\')
          ++i;
        else if (c == '"')
          in_str = false;
        continue;
      }
      if (c == '"') in_str = true;
      if (c == '[') ++depth;
      if (c == ']') --depth;
      if (depth == 0) {
        auto parsed = nlohmann::json::parse(text.substr(start, i - start + 1), nullptr, false);
        if (!parsed.is_discarded() && parsed.is_array()) return parsed;
        break;
      }
    }
  }
  return std::nullopt;
}

inline constexpr const char* kConsistencyCheckerPrompt =
    R"(You are an evaluation assistant (consistency checker).
Your task:
1. Receive a question (Question) and two responses (Answer A / Answer B).
2. Determine whether the two responses are semantically consistent or inconsistent.
3. Output strictly in JSON format:
  {"consistent": true_or_false, "reason": "..."}
  - consistent=true means the responses are semantically equivalent or non-conflicting.
  - consistent=false means the responses contradict or are inconsistent in meaning.
4. Return only the JSON object with no additional text or explanation.)";

struct ConsistencyVerdict {
  bool consistent = false;
  std::string reason;
};

// Asks the judge whether two answers to the same question agree. Tolerates
// prose around the verdict; the first well-formed object with a boolean
// "consistent" wins. No such object -> judge_error.
inline ConsistencyVerdict consistency_check(const std::string& question, const std::string& answer_a,
                                            const std::string& answer_b, JudgeClient& client) {
  JudgeRequest req;
  req.system_prompt = kConsistencyCheckerPrompt;
  req.user_prompt =
      "Question: " + question + "\nAnswer A: " + answer_a + "\nAnswer B: " + answer_b;
  std::string reply = client.complete(req);
  for (size_t pos = 0; pos < reply.size();) {
    size_t brace = reply.find('{', pos);
    if (brace == std::string::npos) break;
    auto obj = extract_first_json_object(reply.substr(brace));
    if (obj && obj->contains("consistent") && (*obj)["consistent"].is_boolean()) {
      ConsistencyVerdict v;
      v.consistent = (*obj)["consistent"].get<bool>();
      if (obj->contains("reason") && (*obj)["reason"].is_string())
        v.reason = (*obj)["reason"].get<std::string>();
      return v;
    }
    pos = brace + 1;
  }
  throw judge_error("consistency reply carries no JSON verdict: " + reply);
}

// Stub consistency judge: consistent iff the two answers normalize equal.
inline std::unique_ptr<JudgeClient> make_equality_consistency_stub() {
  return std::make_unique<CallbackStubClient>([](const JudgeRequest& r) -> std::string {
    auto grab = [&](const std::string& key) -> std::string {
      size_t at = r.user_prompt.find(key);
      if (at == std::string::npos) return "";
      at += key.size();
      size_t end = r.user_prompt.find('\n', at);
      return trim(r.user_prompt.substr(at, end == std::string::npos ? std::string::npos : end - at));
    };
    bool same = normalize_name(grab("Answer A: ")) == normalize_name(grab("Answer B: "));
    nlohmann::json out = {{"consistent", same}, {"reason", same ? "answers agree" : "answers differ"}};
    return out.dump();
  });
}

// Single-pass "{name}" substitution; replacement text is never rescanned.
inline std::string substitute_placeholders(
    std::string_view tmpl, const std::vector<std::pair<std::string, std::string>>& subs) {
  std::string out;
  out.reserve(tmpl.size());
  size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      bool hit = false;
      for (const auto& [name, value] : subs) {
        if (tmpl.compare(i + 1, name.size(), name) == 0 && i + 1 + name.size() < tmpl.size() &&
            tmpl[i + 1 + name.size()] == '}') {
          out += value;
          i += name.size() + 2;
          hit = true;
          break;
        }
      }
      if (hit) continue;
    }
    out += tmpl[i++];
  }
  return out;
}

inline constexpr const char* kActionMatcherPromptVersion = "action_matcher_v1";

// Fallback copy of data/prompts/action_matcher_v1.txt.
inline constexpr const char* kActionMatcherPromptDefault =
    R"(You match predicted robot actions against ground-truth actions.
Given one predicted atomic action and a numbered list of ground-truth atomic
actions, list every ground-truth index whose action is semantically equivalent
to the predicted action: the same operation applied to the same objects, even
if the wording differs.

Predicted action:
{pred_action}

Ground-truth actions:
{gt_actions}

Reply with only a JSON list of the matching indices between 1 and {n}, for
example [1, 3]. Reply [] if nothing matches.)";

// Judge-backed ActionMatcher. Replies are 1-based index lists; out-of-range
// entries are dropped with a warning and an unparseable reply matches nothing.
class LlmActionMatcher : public ActionMatcher {
 public:
  explicit LlmActionMatcher(JudgeClient& client, std::string prompt_template = "")
      : client_(client),
        template_(prompt_template.empty() ? kActionMatcherPromptDefault
                                          : std::move(prompt_template)) {}

  static std::string load_template(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open matcher prompt template: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  MatchResult match(const AtomicAction& pred, const std::vector<AtomicAction>& gt) override {
    auto tuple = [](const AtomicAction& a) {
      std::string s = serialize_actions({a});
      return s.substr(1, s.size() - 2);  // drop the outer list brackets
    };
    std::string gt_lines;
    for (size_t j = 0; j < gt.size(); ++j)
      gt_lines += std::to_string(j + 1) + ". " + tuple(gt[j]) + "\n";
    JudgeRequest req;
    req.user_prompt = substitute_placeholders(template_, {{"pred_action", tuple(pred)},
                                                          {"gt_actions", gt_lines},
                                                          {"n", std::to_string(gt.size())}});
    std::string reply = client_.complete(req);

    MatchResult res;
    auto arr = extract_first_json_array(reply);
    if (!arr) {
      res.parse_warning = true;
      return res;
    }
    for (const auto& v : *arr) {
      if (!v.is_number_integer()) {
        res.parse_warning = true;
        continue;
      }
      long long idx = v.get<long long>();
      if (idx < 1 || idx > static_cast<long long>(gt.size())) {
        res.range_warning = true;
        continue;
      }
      res.indices.push_back(static_cast<size_t>(idx - 1));
    }
    std::sort(res.indices.begin(), res.indices.end());
    res.indices.erase(std::unique(res.indices.begin(), res.indices.end()), res.indices.end());
    return res;
  }

 private:
  JudgeClient& client_;
  std::string template_;
};

}  // namespace planbench
