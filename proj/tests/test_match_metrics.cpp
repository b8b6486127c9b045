#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "planbench/match_metrics.hpp"

using namespace planbench;

namespace {

// The worked 5x4 example matrix used across the scoring docs.
MatchMatrix example_matrix() {
  return MatchMatrix::from_rows({{1, 1, 0, 0}, {1, 0, 0, 0}, {0, 0, 1, 1}, {0, 0, 1, 0},
                                 {0, 0, 0, 0}});
}

MatchMatrix random_matrix(std::mt19937_64& rng, size_t max_dim = 8) {
  size_t m = rng() % max_dim + 1, n = rng() % max_dim + 1;
  MatchMatrix M(m, n);
  for (size_t i = 0; i < m; ++i)
    for (size_t j = 0; j < n; ++j) M.set(i, j, rng() % 3 == 0);
  return M;
}

}  // namespace

TEST_CASE("low-level actions are filtered from scoring") {
  std::vector<AtomicAction> acts = {{"Navigate", {"Basket"}},
                                    {"Pick", {"Clothes"}},
                                    {"Find", {"Machine"}},
                                    {"Place", {"Clothes", "Machine"}}};
  auto kept = filter_low_level(acts, default_low_level_verbs());
  REQUIRE(kept.size() == 2);
  CHECK(kept[0].verb == "Pick");
  CHECK(kept[1].verb == "Place");

  SECTION("aliases resolve before the low-level check") {
    ActionSet set = ActionSet::defaults();
    set.add_alias("Goto", "GotoObject");
    auto kept2 = filter_low_level({{"Goto", {"Sink"}}, {"Pick", {"Cup"}}},
                                  default_low_level_verbs(), &set);
    REQUIRE(kept2.size() == 1);
    CHECK(kept2[0].verb == "Pick");
  }
}

TEST_CASE("match matrix built with the rule matcher") {
  RuleBasedMatcher matcher;
  SECTION("duplicate-free example") {
    std::vector<AtomicAction> pred = {{"Pick", {"Apple"}}, {"Place", {"Cup", "Table"}}};
    std::vector<AtomicAction> gt = {{"Pick", {"Apple"}},
                                    {"Open", {"Fridge"}},
                                    {"Place", {"Cup", "Table"}}};
    MatchMatrix M = build_match_matrix(pred, gt, matcher);
    CHECK(M.at(0, 0) == 1);
    CHECK(M.at(0, 1) == 0);
    CHECK(M.at(0, 2) == 0);
    CHECK(M.at(1, 0) == 0);
    CHECK(M.at(1, 1) == 0);
    CHECK(M.at(1, 2) == 1);
  }
  SECTION("one predicted action may match many gold steps") {
    std::vector<AtomicAction> gt = {{"Pick", {"Apple"}}, {"Pick", {"Apple"}}};
    MatchMatrix M = build_match_matrix({{"Pick", {"Apple"}}}, gt, matcher);
    CHECK(M.at(0, 0) == 1);
    CHECK(M.at(0, 1) == 1);
  }
  SECTION("matcher failure propagates with the row index") {
    struct Boom : ActionMatcher {
      MatchResult match(const AtomicAction& pred, const std::vector<AtomicAction>&) override {
        if (pred.verb == "Place") throw std::runtime_error("socket closed");
        return {};
      }
    } boom;
    std::vector<AtomicAction> pred = {{"Pick", {"A"}}, {"Place", {"B"}}};
    REQUIRE_THROWS_WITH(build_match_matrix(pred, {{"Open", {"C"}}}, boom),
                        Catch::Matchers::ContainsSubstring("row 1"));
  }
}

TEST_CASE("rule matcher equivalence") {
  MatcherConfig cfg;
  cfg.object_aliases["washer"] = "washing machine";
  RuleBasedMatcher m(cfg);

  CHECK(m.actions_equivalent({"pick", {"the Apple"}}, {"Pick", {"apple"}}));
  CHECK(m.actions_equivalent({"Place", {"Apple", "Table"}}, {"Place", {"Table", "Apple"}}));
  CHECK(m.actions_equivalent({"Pick", {"Washer"}}, {"Pick", {"Washing machine"}}));
  CHECK_FALSE(m.actions_equivalent({"Pick", {"Apple"}}, {"Place", {"Apple"}}));
  CHECK_FALSE(m.actions_equivalent({"Pick", {"Apple"}}, {"Pick", {"Apple", "Table"}}));

  SECTION("verb aliases from the action set") {
    MatcherConfig cfg2;
    cfg2.action_set.add_alias("Grasp", "Pick");
    RuleBasedMatcher m2(cfg2);
    CHECK(m2.actions_equivalent({"Grasp", {"Cup"}}, {"Pick", {"Cup"}}));
  }
  SECTION("symmetry on random pairs") {
    std::mt19937_64 rng(4);
    const char* verbs[] = {"Pick", "Place", "Open"};
    const char* objs[] = {"apple", "the apple", "Table", "cup"};
    for (int i = 0; i < 200; ++i) {
      AtomicAction a{verbs[rng() % 3], {objs[rng() % 4]}};
      AtomicAction b{verbs[rng() % 3], {objs[rng() % 4]}};
      if (rng() % 2) a.args.push_back(objs[rng() % 4]);
      if (rng() % 2) b.args.push_back(objs[rng() % 4]);
      CHECK(m.actions_equivalent(a, b) == m.actions_equivalent(b, a));
    }
  }
}

TEST_CASE("matching cardinality against the exhaustive oracle") {
  CHECK(hungarian_quantity(example_matrix()) == 4);
  CHECK(hungarian_quantity(example_matrix()) == oracle::max_matching(example_matrix()));

  CHECK(hungarian_quantity(MatchMatrix::from_rows({{1, 0}, {0, 1}})) == 2);
  CHECK(hungarian_quantity(MatchMatrix(0, 0)) == 0);
  CHECK(hungarian_quantity(MatchMatrix(3, 0)) == 0);

  std::mt19937_64 rng(11);
  for (int i = 0; i < 500; ++i) {
    MatchMatrix M = random_matrix(rng);
    REQUIRE(hungarian_quantity(M) == oracle::max_matching(M));
  }
}

TEST_CASE("order score against the exhaustive chain oracle") {
  MatchMatrix M = example_matrix();
  size_t brute = oracle::lcs_chain(M);
  CHECK(lcs_order(M) == brute);
  CHECK(brute == 2);  // frozen from the oracle: no increasing chain of 3 exists

  CHECK(lcs_order(MatchMatrix::from_rows({{0, 0, 1}, {0, 1, 0}, {1, 0, 0}})) == 1);
  CHECK(lcs_order(MatchMatrix::from_rows({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}})) == 3);
  CHECK(lcs_order(MatchMatrix(0, 0)) == 0);

  std::mt19937_64 rng(12);
  for (int i = 0; i < 500; ++i) {
    MatchMatrix R = random_matrix(rng);
    size_t ours = lcs_order(R);
    REQUIRE(ours == oracle::lcs_chain(R));
    REQUIRE(ours <= hungarian_quantity(R));  // a chain is a matching
  }
}

TEST_CASE("adding a match never lowers either score") {
  std::mt19937_64 rng(13);
  for (int i = 0; i < 200; ++i) {
    MatchMatrix M = random_matrix(rng, 6);
    size_t q = hungarian_quantity(M), o = lcs_order(M);
    MatchMatrix M2 = M;
    M2.set(rng() % M.m, rng() % M.n, true);
    CHECK(hungarian_quantity(M2) >= q);
    CHECK(lcs_order(M2) >= o);
  }
}

TEST_CASE("precision, recall and F1") {
  PRF1 r = prf1(4, 5, 4);
  CHECK(r.precision == Catch::Approx(0.8).margin(1e-12));
  CHECK(r.recall == Catch::Approx(1.0).margin(1e-12));
  CHECK(r.f1 == Catch::Approx(2.0 * 0.8 / 1.8).margin(1e-12));

  CHECK(prf1(0, 0, 0) == PRF1{});
  CHECK(prf1(0, 0, 4) == PRF1{});
  CHECK(prf1(0, 4, 0) == PRF1{});
  CHECK(prf1(3, 3, 7).precision == 1.0);
  CHECK_THROWS_AS(prf1(5, 4, 5), std::invalid_argument);

  std::mt19937_64 rng(14);
  for (int i = 0; i < 1000; ++i) {
    size_t m = rng() % 10, n = rng() % 10;
    size_t score = std::min(m, n) ? rng() % (std::min(m, n) + 1) : 0;
    PRF1 p = prf1(score, m, n);
    CHECK(p.precision >= 0.0);
    CHECK(p.precision <= 1.0);
    CHECK(p.recall >= 0.0);
    CHECK(p.recall <= 1.0);
    CHECK(p.f1 >= 0.0);
    CHECK(p.f1 <= 1.0);
    CHECK(p.f1 <= std::max(p.precision, p.recall) + 1e-12);
    if (p.precision + p.recall > 0)
      CHECK(p.f1 == Catch::Approx(2 * p.precision * p.recall / (p.precision + p.recall)));
  }
}

TEST_CASE("plan pair evaluation end to end") {
  RuleBasedMatcher matcher;
  SECTION("gold against itself is perfect") {
    auto r = evaluate_plan_pair(fixtures::kWashingMachineRaw, fixtures::kWashingMachineRaw, matcher);
    CHECK(r.metrics.quantity.f1 == 1.0);
    CHECK(r.metrics.order.f1 == 1.0);
    CHECK(r.m == 2);  // Search/Navigate/Navigate filtered out
    CHECK(r.flags.empty());
  }
  SECTION("permuted actions keep quantity but lose order") {
    auto r = evaluate_plan_pair(fixtures::kWashingMachinePermutedRaw, fixtures::kWashingMachineRaw,
                                matcher);
    CHECK(r.metrics.quantity.f1 == 1.0);
    CHECK(r.metrics.order.f1 == Catch::Approx(0.5));
  }
  SECTION("empty prediction scores zero with a flag") {
    auto r = evaluate_plan_pair(fixtures::minimal_output("[]"), fixtures::kWashingMachineRaw,
                                matcher);
    CHECK(r.metrics.quantity.f1 == 0.0);
    CHECK(r.metrics.order.f1 == 0.0);
    REQUIRE_FALSE(r.flags.empty());
    CHECK(r.flags[0] == "empty_prediction");
  }
  SECTION("unparseable prediction in strict mode") {
    auto r = evaluate_plan_pair("no tags at all", fixtures::kWashingMachineRaw, matcher);
    CHECK(r.metrics.quantity.f1 == 0.0);
    REQUIRE(r.flags.size() == 1);
    CHECK(r.flags[0] == "format_failure");
  }
  SECTION("unparseable ground truth is a caller error") {
    CHECK_THROWS_AS(evaluate_plan_pair(fixtures::kWashingMachineRaw, "garbage", matcher),
                    std::invalid_argument);
  }
}
