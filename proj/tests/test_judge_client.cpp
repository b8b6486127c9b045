#include <catch2/catch_amalgamated.hpp>

#include <atomic>
#include <cstdlib>
#include <thread>

#include "planbench/judge_client.hpp"

using namespace planbench;

TEST_CASE("stub clients") {
  auto echo = make_echo_stub();
  JudgeRequest req;
  req.user_prompt = "hello judge";
  CHECK(echo->complete(req) == "hello judge");

  auto fixed = make_fixed_stub("<score>0.5</score>");
  CHECK(fixed->complete(req) == "<score>0.5</score>");
  req.user_prompt = "different prompt, same reply";
  CHECK(fixed->complete(req) == "<score>0.5</score>");
}

TEST_CASE("transport retries with fault injection") {
  JudgeRequest req;
  SECTION("recovers within the retry budget and reports attempts") {
    FlakyStubClient flaky(/*failures=*/2, "ok", /*retries=*/2);
    auto info = flaky.complete_info(req);
    CHECK(info.text == "ok");
    CHECK(info.attempts == 3);
    CHECK(flaky.calls() == 3);
  }
  SECTION("exhausted retries rethrow the transport error") {
    FlakyStubClient flaky(/*failures=*/3, "ok", /*retries=*/2);
    CHECK_THROWS_AS(flaky.complete_info(req), judge_error);
    CHECK(flaky.calls() == 3);  // initial attempt + 2 retries
  }
  SECTION("zero retries means one shot") {
    FlakyStubClient flaky(/*failures=*/1, "ok", /*retries=*/0);
    CHECK_THROWS_AS(flaky.complete(req), judge_error);
    CHECK(flaky.calls() == 1);
  }
}

TEST_CASE("concurrency limiter bounds in-flight requests") {
  std::atomic<int> in_flight{0}, peak{0};
  CallbackStubClient client(
      [&](const JudgeRequest&) {
        int now = ++in_flight;
        int prev = peak.load();
        while (now > prev && !peak.compare_exchange_weak(prev, now)) {
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(15));
        --in_flight;
        return std::string("done");
      },
      /*max_concurrency=*/3);

  std::vector<std::thread> workers;
  for (int i = 0; i < 16; ++i)
    workers.emplace_back([&] {
      JudgeRequest req;
      CHECK(client.complete(req) == "done");
    });
  for (auto& t : workers) t.join();
  REQUIRE(peak.load() <= 3);
  CHECK(peak.load() >= 2);  // the limit is actually exercised
}

TEST_CASE("http client validates its endpoint") {
  JudgeConfig cfg;
  cfg.endpoint_url = "";
  CHECK_THROWS_AS(HttpJudgeClient(cfg), config_error);
  cfg.endpoint_url = "localhost:8000/v1/chat/completions";  // no scheme
  CHECK_THROWS_AS(HttpJudgeClient(cfg), config_error);
  cfg.endpoint_url = "http://localhost:8000";  // bare host gets the default path
  CHECK_NOTHROW(HttpJudgeClient(cfg));
}

TEST_CASE("http judge round trip over loopback") {
  httplib::Server svr;
  std::atomic<int> hits{0};
  std::string seen_auth, seen_model, seen_user;
  nlohmann::json seen_content;
  svr.Post("/v1/chat/completions", [&](const httplib::Request& hreq, httplib::Response& res) {
    int n = ++hits;
    seen_auth = hreq.get_header_value("Authorization");
    auto body = nlohmann::json::parse(hreq.body, nullptr, false);
    if (!body.is_discarded()) {
      seen_model = body.value("model", "");
      if (body.contains("messages") && !body["messages"].empty()) {
        seen_content = body["messages"].back()["content"];
        if (seen_content.is_string()) seen_user = seen_content.get<std::string>();
      }
    }
    if (n == 1) {  // first call fails so the retry path gets exercised
      res.status = 503;
      return;
    }
    nlohmann::json msg{{"role", "assistant"}, {"content", "pong"}};
    nlohmann::json out;
    out["choices"] = nlohmann::json::array();
    out["choices"].push_back({{"message", msg}});
    res.set_content(out.dump(), "application/json");
  });
  svr.Post("/plain", [&](const httplib::Request&, httplib::Response& res) {
    res.set_content("no json here", "text/plain");
  });

  int port = svr.bind_to_any_port("127.0.0.1");
  if (port <= 0) {
    WARN("cannot bind a loopback port in this environment; skipping http round trip");
    return;
  }
  std::thread server([&] { svr.listen_after_bind(); });
  svr.wait_until_ready();

  setenv("PLANBENCH_TEST_TOKEN", "sekrit", 1);
  JudgeConfig cfg;
  cfg.endpoint_url = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
  cfg.auth_env_var = "PLANBENCH_TEST_TOKEN";
  cfg.retries = 2;
  cfg.backoff_ms = 1;
  cfg.timeout_ms = 5000;

  {
    HttpJudgeClient client(cfg);
    JudgeRequest req;
    req.user_prompt = "ping";
    auto info = client.complete_info(req);
    CHECK(info.text == "pong");
    CHECK(info.attempts == 2);
    CHECK(hits.load() == 2);
    CHECK(seen_auth == "Bearer sekrit");
    CHECK(seen_model == "judge");
    CHECK(seen_user == "ping");
  }
  {
    // attaching an image switches the user content to the parts form
    HttpJudgeClient client(cfg);
    JudgeRequest req;
    req.user_prompt = "what is shown?";
    req.image_data_url = "data:image/png;base64,AAAA";
    CHECK(client.complete(req) == "pong");
    REQUIRE(seen_content.is_array());
    REQUIRE(seen_content.size() == 2);
    CHECK(seen_content[0]["type"] == "text");
    CHECK(seen_content[0]["text"] == "what is shown?");
    CHECK(seen_content[1]["type"] == "image_url");
    CHECK(seen_content[1]["image_url"]["url"] == "data:image/png;base64,AAAA");
  }
  {
    JudgeConfig bad = cfg;
    bad.endpoint_url = "http://127.0.0.1:" + std::to_string(port) + "/plain";
    bad.retries = 0;
    HttpJudgeClient client(bad);
    JudgeRequest req;
    CHECK_THROWS_AS(client.complete(req), judge_error);
  }
  {
    JudgeConfig bad = cfg;
    bad.endpoint_url = "http://127.0.0.1:" + std::to_string(port) + "/missing";
    bad.retries = 0;
    HttpJudgeClient client(bad);
    JudgeRequest req;
    CHECK_THROWS_WITH(client.complete(req), Catch::Matchers::ContainsSubstring("404"));
  }

  svr.stop();
  server.join();
}

TEST_CASE("balanced json extraction") {
  SECTION("objects") {
    auto obj = extract_first_json_object("prose {\"a\": 1} trailing");
    REQUIRE(obj.has_value());
    CHECK((*obj)["a"] == 1);

    obj = extract_first_json_object("{\"reason\": \"has } inside\", \"ok\": true}");
    REQUIRE(obj.has_value());
    CHECK((*obj)["ok"] == true);

    obj = extract_first_json_object("{oops {\"second\": 2}");
    REQUIRE(obj.has_value());
    CHECK((*obj)["second"] == 2);

    obj = extract_first_json_object("{\"esc\": \"quote \\\" and } brace\"} rest");
    REQUIRE(obj.has_value());
    CHECK((*obj)["esc"] == "quote \" and } brace");

    CHECK_FALSE(extract_first_json_object("no braces at all").has_value());
    CHECK_FALSE(extract_first_json_object("{never closes").has_value());
  }
  SECTION("arrays") {
    auto arr = extract_first_json_array("indices: [1, 3] done");
    REQUIRE(arr.has_value());
    CHECK(arr->size() == 2);

    arr = extract_first_json_array("[1, [2, 3], \"a ] b\"]");
    REQUIRE(arr.has_value());
    CHECK(arr->size() == 3);

    arr = extract_first_json_array("[broken, [4]");
    REQUIRE(arr.has_value());  // resyncs on the inner list
    CHECK((*arr)[0] == 4);

    CHECK_FALSE(extract_first_json_array("nothing").has_value());
  }
}

TEST_CASE("placeholder substitution") {
  CHECK(substitute_placeholders("a {x} b {y}", {{"x", "1"}, {"y", "2"}}) == "a 1 b 2");
  CHECK(substitute_placeholders("{x}{x}", {{"x", "z"}}) == "zz");
  // unknown names and stray braces survive untouched
  CHECK(substitute_placeholders("keep {unknown} and { spaced }", {{"x", "1"}}) ==
        "keep {unknown} and { spaced }");
  // substituted text is not rescanned, so payloads may contain placeholder syntax
  CHECK(substitute_placeholders("{a} {b}", {{"a", "{b}"}, {"b", "X"}}) == "{b} X");
  CHECK(substitute_placeholders("{completion}", {{"completion", "code { nested } here"}}) ==
        "code { nested } here");
}

TEST_CASE("consistency checker verdict parsing") {
  SECTION("clean verdict") {
    auto stub = make_fixed_stub(R"({"consistent": true, "reason": "same quantity"})");
    auto v = consistency_check("how many?", "4", "four", *stub);
    CHECK(v.consistent);
    CHECK(v.reason == "same quantity");
  }
  SECTION("negative verdict") {
    auto stub = make_fixed_stub(R"({"consistent": false, "reason": "contradiction"})");
    CHECK_FALSE(consistency_check("q", "a", "b", *stub).consistent);
  }
  SECTION("prose-wrapped verdicts still parse") {
    const std::string core = R"({"consistent": true, "reason": "same"})";
    const std::string prefixes[] = {"", "Sure! ", "```json\n", "Verdict:\n\n",
                                    "After comparing both answers { carefully } I conclude "};
    const std::string suffixes[] = {"", "\n```", " Thanks for asking!",
                                    "\nLet me know if you need anything else."};
    int cases = 0;
    for (const auto& p : prefixes)
      for (const auto& s : suffixes) {
        auto stub = make_fixed_stub(p + core + s);
        CHECK(consistency_check("q", "a", "b", *stub).consistent);
        ++cases;
      }
    CHECK(cases == 20);
  }
  SECTION("objects without a boolean verdict are skipped") {
    auto stub = make_fixed_stub(
        R"({"consistent": "yes"} hmm {"foo": 1} {"consistent": false, "reason": "later object"})");
    auto v = consistency_check("q", "a", "b", *stub);
    CHECK_FALSE(v.consistent);
    CHECK(v.reason == "later object");
  }
  SECTION("no verdict at all raises") {
    auto prose = make_fixed_stub("I cannot decide between the two answers.");
    CHECK_THROWS_AS(consistency_check("q", "a", "b", *prose), judge_error);
    auto stringy = make_fixed_stub(R"({"consistent": "true"})");
    CHECK_THROWS_AS(consistency_check("q", "a", "b", *stringy), judge_error);
  }
  SECTION("equality stub") {
    auto stub = make_equality_consistency_stub();
    CHECK(consistency_check("count", "The Mug", "mug", *stub).consistent);
    CHECK(consistency_check("count", "4", " 4 ", *stub).consistent);
    CHECK_FALSE(consistency_check("count", "4", "5", *stub).consistent);
  }
}

TEST_CASE("llm action matcher") {
  std::vector<AtomicAction> gt = {{"Find", {"mug"}},
                                  {"Pick", {"mug"}},
                                  {"Place", {"mug", "sink"}}};
  AtomicAction pred{"Pick", {"the mug"}};

  SECTION("reply indices are 1-based") {
    auto stub = make_fixed_stub("[3]");
    LlmActionMatcher matcher(*stub);
    auto res = matcher.match(pred, gt);
    CHECK(res.indices == std::vector<size_t>{2});
    CHECK_FALSE(res.range_warning);
    CHECK_FALSE(res.parse_warning);
  }
  SECTION("empty list matches nothing") {
    auto stub = make_fixed_stub("[]");
    LlmActionMatcher matcher(*stub);
    auto res = matcher.match(pred, gt);
    CHECK(res.indices.empty());
    CHECK_FALSE(res.parse_warning);
  }
  SECTION("out-of-range entries are dropped with a warning") {
    auto stub = make_fixed_stub("The matches are [1, 4].");
    LlmActionMatcher matcher(*stub);
    auto res = matcher.match(pred, gt);
    CHECK(res.indices == std::vector<size_t>{0});
    CHECK(res.range_warning);
    auto zero = make_fixed_stub("[0]");
    LlmActionMatcher mz(*zero);
    CHECK(mz.match(pred, gt).range_warning);
  }
  SECTION("duplicates collapse and order is canonical") {
    auto stub = make_fixed_stub("[2, 2, 1]");
    LlmActionMatcher matcher(*stub);
    CHECK(matcher.match(pred, gt).indices == std::vector<size_t>({0, 1}));
  }
  SECTION("junk replies match nothing but flag the parse") {
    auto stub = make_fixed_stub("these two actions feel similar");
    LlmActionMatcher matcher(*stub);
    auto res = matcher.match(pred, gt);
    CHECK(res.indices.empty());
    CHECK(res.parse_warning);
  }
  SECTION("non-integer entries are flagged, integer ones kept") {
    auto stub = make_fixed_stub(R"([1, "two"])");
    LlmActionMatcher matcher(*stub);
    auto res = matcher.match(pred, gt);
    CHECK(res.indices == std::vector<size_t>{0});
    CHECK(res.parse_warning);
  }
  SECTION("prompt carries the tuple, the numbered list, and the bound") {
    std::string captured;
    CallbackStubClient spy([&](const JudgeRequest& r) {
      captured = r.user_prompt;
      return std::string("[]");
    });
    LlmActionMatcher matcher(spy);
    matcher.match(pred, gt);
    CHECK(captured.find("['Pick', 'the mug']") != std::string::npos);
    CHECK(captured.find("1. ['Find', 'mug']") != std::string::npos);
    CHECK(captured.find("2. ['Pick', 'mug']") != std::string::npos);
    CHECK(captured.find("3. ['Place', 'mug', 'sink']") != std::string::npos);
    CHECK(captured.find("between 1 and 3") != std::string::npos);
    CHECK(captured.find('{') == std::string::npos);  // nothing unsubstituted
  }
  SECTION("template loads from the data file and matches the fallback") {
    std::string path = std::string(PLANBENCH_SOURCE_DATA_DIR) + "/prompts/action_matcher_v1.txt";
    CHECK(LlmActionMatcher::load_template(path) == kActionMatcherPromptDefault);
    CHECK_THROWS_AS(LlmActionMatcher::load_template("/nonexistent/prompt.txt"), config_error);
  }
}

TEST_CASE("matcher warnings surface through matrix construction") {
  auto stub = make_fixed_stub("[1, 9]");
  LlmActionMatcher matcher(*stub);
  std::vector<AtomicAction> pred = {{"Pick", {"mug"}}};
  std::vector<AtomicAction> gt = {{"Pick", {"mug"}}, {"Find", {"mug"}}};
  std::vector<std::string> flags;
  auto M = build_match_matrix(pred, gt, matcher, &flags);
  CHECK(M.at(0, 0) == 1);
  CHECK(M.at(0, 1) == 0);
  REQUIRE_FALSE(flags.empty());
  CHECK(flags[0].find("range") != std::string::npos);
}
