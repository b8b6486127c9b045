#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "oracles.hpp"
#include "planbench/reward_perception.hpp"

using namespace planbench;

TEST_CASE("iou basics") {
  BBox a{0, 0, 2, 2}, b{1, 1, 3, 3};
  CHECK(iou(a, a) == 1.0);
  CHECK(iou(a, b) == Catch::Approx(1.0 / 7.0).margin(1e-12));
  CHECK(iou(a, BBox{5, 5, 6, 6}) == 0.0);
  CHECK(iou(a, BBox{2, 0, 4, 2}) == 0.0);  // touching edges share no area
  CHECK_THROWS_AS(iou(BBox{1, 0, 1, 2}, a), std::invalid_argument);
  CHECK_THROWS_AS(iou(a, BBox{3, 3, 2, 4}), std::invalid_argument);

  std::mt19937_64 rng(3);
  auto rnd_box = [&] {
    double x = rng() % 80 / 10.0, y = rng() % 80 / 10.0;
    return BBox{x, y, x + 0.5 + rng() % 40 / 10.0, y + 0.5 + rng() % 40 / 10.0};
  };
  for (int i = 0; i < 300; ++i) {
    BBox p = rnd_box(), q = rnd_box();
    double v = iou(p, q);
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    CHECK(v == iou(q, p));
  }
}

TEST_CASE("detection reward") {
  std::vector<BBox> gt = {{0, 0, 1, 1}, {2, 2, 3, 3}};
  SECTION("perfect lists") { CHECK(detection_reward(gt, gt) == 1.0); }
  SECTION("both empty is vacuous success") { CHECK(detection_reward({}, {}) == 1.0); }
  SECTION("one side empty") {
    CHECK(detection_reward({}, gt) == 0.0);
    CHECK(detection_reward(gt, {}) == 0.0);
  }
  SECTION("an extra disjoint prediction dilutes to 2/3") {
    std::vector<BBox> pred = gt;
    pred.push_back({10, 10, 11, 11});
    CHECK(detection_reward(pred, gt) == Catch::Approx(2.0 / 3.0).margin(1e-12));
  }
  SECTION("pairs under the threshold stay unmatched") {
    CHECK(detection_reward({{0.9, 0.0, 1.9, 1.0}}, {{0, 0, 1, 1}}) == 0.0);
    // same overlap, lower bar
    CHECK(detection_reward({{0.9, 0.0, 1.9, 1.0}}, {{0, 0, 1, 1}}, 0.05) > 0.0);
  }
  SECTION("assignment matches the exhaustive oracle on small instances") {
    std::mt19937_64 rng(17);
    auto rnd_box = [&] {
      double x = rng() % 60 / 10.0, y = rng() % 60 / 10.0;
      return BBox{x, y, x + 0.4 + rng() % 30 / 10.0, y + 0.4 + rng() % 30 / 10.0};
    };
    for (int iter = 0; iter < 300; ++iter) {
      std::vector<BBox> pred(rng() % 5 + 1), gold(rng() % 5 + 1);
      for (auto& b : pred) b = rnd_box();
      for (auto& b : gold) b = rnd_box();
      std::vector<std::vector<double>> w(pred.size(), std::vector<double>(gold.size(), 0.0));
      for (size_t i = 0; i < pred.size(); ++i)
        for (size_t j = 0; j < gold.size(); ++j) {
          double v = iou(pred[i], gold[j]);
          if (v >= 0.5) w[i][j] = v;
        }
      double expect = oracle::max_weight(w) / std::max(pred.size(), gold.size());
      REQUIRE(detection_reward(pred, gold) == Catch::Approx(expect).margin(1e-9));
    }
  }
}

TEST_CASE("count extraction and reward") {
  CHECK(extract_count("there are 12 apples") == 12);
  CHECK(counting_reward("there are 12 apples", 12) == 1.0);
  CHECK(counting_reward("there are 12 apples", 11) == 0.0);
  CHECK(extract_count("boxes [0, 0, 52, 40] and [3, 9, 12, 20], so 3 cats") == 3);
  CHECK_FALSE(extract_count("[0, 0, 5, 5]").has_value());
  CHECK(counting_reward("[0, 0, 5, 5]", 5) == 0.0);
  CHECK(extract_count("5 or maybe 6") == 6);
  CHECK(extract_count("") == std::nullopt);
  CHECK(extract_count("nothing numeric") == std::nullopt);
  CHECK(extract_count("count: 0") == 0);
}

TEST_CASE("verbosity penalty factor") {
  CHECK(verbosity_penalty_factor("one two three", "x") == 1.0);  // ratio 3 == gamma
  CHECK(verbosity_penalty_factor("a b c d", "x") == Catch::Approx(0.5));
  CHECK(verbosity_penalty_factor("a b c d e", "x") == 0.0);
  CHECK(verbosity_penalty_factor("short", "longer gt here") == 1.0);
  CHECK(verbosity_penalty_factor("a b c d", "x", 0.25, 3.0) == Catch::Approx(0.75));
  CHECK(verbosity_penalty_factor("a b c d e f", "x y", 0.5, 1.0) == 0.0);
}

TEST_CASE("multiple-choice spatial reward") {
  SECTION("option letters") {
    CHECK(spatial_mcq_reward("B", "B") == 1.0);
    CHECK(spatial_mcq_reward("b", "B") == 1.0);  // whole answer, any case
    CHECK(spatial_mcq_reward("(B)", "B") == 1.0);
    CHECK(spatial_mcq_reward("A", "B") == 0.0);
    CHECK(spatial_mcq_reward("Answer: B", "B") == 1.0);  // short enough to dodge the penalty
    // 4 tokens against 1 puts the ratio at 4, one past gamma
    CHECK(spatial_mcq_reward("The answer is B.", "B") == Catch::Approx(0.5));
    CHECK(spatial_mcq_reward("bright", "B") == 0.0);  // no standalone letter
  }
  SECTION("a correct letter buried in a long paragraph pays the verbosity price") {
    std::string essay =
        "Considering every region of this image carefully, the answer here must surely be B";
    double expected = verbosity_penalty_factor(essay, "B");
    CHECK(spatial_mcq_reward(essay, "B") == Catch::Approx(expected));
    CHECK(spatial_mcq_reward(essay, "B") < 1.0);
  }
  SECTION("option phrases") {
    SpatialConfig cfg;
    cfg.options = {"red basket", "blue box"};
    CHECK(spatial_mcq_reward("the red basket", "red basket", cfg) == 1.0);
    CHECK(spatial_mcq_reward("red basket", "red basket", cfg) == 1.0);
    CHECK(spatial_mcq_reward("blue box", "red basket", cfg) == 0.0);
    CHECK(spatial_mcq_reward("red basket or the blue box", "red basket", cfg) == 0.0);  // hedging
    CHECK(spatial_mcq_reward("basket", "red basket", cfg) == 0.0);  // partial phrase
  }
  SECTION("sentence ground truths need every content token") {
    std::string gt = "The cup is on the wooden table beside the lamp";
    CHECK(spatial_mcq_reward("cup on wooden table beside lamp", gt) == 1.0);
    CHECK(spatial_mcq_reward("a cup sits beside the lamp on the wooden table", gt) == 1.0);
    CHECK(spatial_mcq_reward("the cup is on the table", gt) == 0.0);  // wooden, beside, lamp gone
  }
}

TEST_CASE("descriptive spatial reward") {
  SECTION("relation parsing") {
    auto st = parse_relation("The cup is to the left of the plate", RelationTable::defaults());
    REQUIRE(st.has_value());
    CHECK(st->subject == "cup");
    CHECK(st->relation == "left");
    CHECK(st->object == "plate");

    auto st2 = parse_relation("a book lying on top of the shelf", RelationTable::defaults());
    REQUIRE(st2.has_value());
    CHECK(st2->relation == "above");
    CHECK(st2->object == "shelf");

    CHECK_FALSE(parse_relation("the cup and the plate", RelationTable::defaults()).has_value());
  }
  SECTION("direct match") {
    CHECK(spatial_descriptive_reward("the cup is left of the plate",
                                     "The cup is to the left of the plate") == 1.0);
  }
  SECTION("antonym with swapped operands is equivalent") {
    CHECK(spatial_descriptive_reward("the plate is right of the cup",
                                     "the cup is left of the plate") == 1.0);
    CHECK(spatial_descriptive_reward("the box is in front of the chair",
                                     "the chair is behind the box") == 1.0);
  }
  SECTION("same relation with swapped operands is wrong unless symmetric") {
    CHECK(spatial_descriptive_reward("the plate is left of the cup",
                                     "the cup is left of the plate") == 0.0);
    CHECK(spatial_descriptive_reward("the plate is near the cup",
                                     "the cup is near the plate") == 1.0);
  }
  SECTION("wrong relation or objects") {
    CHECK(spatial_descriptive_reward("the cup is above the plate",
                                     "the cup is left of the plate") == 0.0);
    CHECK(spatial_descriptive_reward("the mug is left of the plate",
                                     "the cup is left of the plate") == 0.0);
    CHECK(spatial_descriptive_reward("no spatial words at all",
                                     "the cup is left of the plate") == 0.0);
  }
  SECTION("unknown gt vocabulary throws") {
    CHECK_THROWS_AS(spatial_descriptive_reward("x", "the cup is sideways of the plate"),
                    std::invalid_argument);
  }
  SECTION("gt used as its own prediction scores 1 across the table") {
    const char* gts[] = {"the cup is left of the plate", "the box is behind the chair",
                         "the apple is inside the fridge", "the lamp is above the desk",
                         "the shoe is near the door"};
    for (const char* gt : gts) CHECK(spatial_descriptive_reward(gt, gt) == 1.0);
  }
  SECTION("verbosity penalty applies to correct descriptive answers") {
    std::string gt = "cup left of plate";
    std::string wordy =
        "after carefully inspecting the whole scene I am quite confident that the small cup "
        "appears just left of the plate";  // 20 tokens vs 4
    double expected = verbosity_penalty_factor(wordy, gt);
    CHECK(expected < 1.0);
    CHECK(spatial_descriptive_reward(wordy, gt) == Catch::Approx(expected));
  }
}

TEST_CASE("relation table round-trips through the data file") {
  RelationTable file = RelationTable::from_file(std::string(PLANBENCH_SOURCE_DATA_DIR) +
                                                "/relations.json");
  RelationTable def = RelationTable::defaults();
  REQUIRE(file.entries().size() == def.entries().size());
  for (size_t i = 0; i < def.entries().size(); ++i) {
    CHECK(file.entries()[i].id == def.entries()[i].id);
    CHECK(file.entries()[i].synonyms == def.entries()[i].synonyms);
    CHECK(file.entries()[i].antonym == def.entries()[i].antonym);
    CHECK(file.entries()[i].symmetric == def.entries()[i].symmetric);
  }
  SpatialConfig cfg;
  cfg.relations = file;
  CHECK(spatial_descriptive_reward("plate right of cup", "cup left of plate", cfg) == 1.0);
}

TEST_CASE("spatial kind dispatch") {
  CHECK(spatial_reward("B", "B", SpatialTaskKind::multiple_choice) == 1.0);
  CHECK(spatial_reward("cup left of plate", "cup left of plate",
                       SpatialTaskKind::descriptive) == 1.0);
}
