#pragma once

// Sample difficulty probing by progressive pixel masking. A predictor answers
// a visual question on increasingly masked copies of the image; the masking
// ratio where its accuracy collapses below tau is the failure threshold, and
// the threshold maps to a difficulty bucket.

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "planbench/core.hpp"
#include "planbench/image_io.hpp"

namespace planbench {

enum class MaskFill { zero, mean, noise };

inline const char* mask_fill_name(MaskFill f) {
  switch (f) {
    case MaskFill::zero: return "zero";
    case MaskFill::mean: return "mean";
    case MaskFill::noise: return "noise";
  }
  return "zero";
}

inline MaskFill mask_fill_from_name(const std::string& s) {
  if (iequals(s, "zero")) return MaskFill::zero;
  if (iequals(s, "mean")) return MaskFill::mean;
  if (iequals(s, "noise")) return MaskFill::noise;
  throw config_error("unknown mask fill: " + s);
}

// Masks exactly round(lambda * pixel_count) distinct pixels, drawn without
// replacement by a seeded partial Fisher-Yates shuffle. lambda = 0 returns a
// bitwise-identical copy.
inline ImageBuffer mask_image(const ImageBuffer& img, double lambda, uint64_t seed,
                              MaskFill fill = MaskFill::zero) {
  img.validate();
  if (!(lambda >= 0.0 && lambda <= 1.0))
    throw std::invalid_argument("masking ratio must lie in [0, 1]");
  ImageBuffer out = img;
  size_t total = img.pixel_count();
  size_t n_mask = static_cast<size_t>(std::llround(lambda * static_cast<double>(total)));
  if (n_mask == 0) return out;

  uint8_t mean_fill[3] = {0, 0, 0};
  if (fill == MaskFill::mean) {
    for (int c = 0; c < img.channels; ++c) {
      uint64_t sum = 0;
      for (size_t p = 0; p < total; ++p) sum += img.data[p * img.channels + c];
      mean_fill[c] = static_cast<uint8_t>((sum + total / 2) / total);
    }
  }

  std::mt19937_64 rng(seed);
  std::vector<uint32_t> order(total);
  for (size_t i = 0; i < total; ++i) order[i] = static_cast<uint32_t>(i);
  for (size_t i = 0; i < n_mask; ++i) {
    size_t j = i + uniform_below(rng, total - i);
    std::swap(order[i], order[j]);
    uint8_t* px = out.data.data() + static_cast<size_t>(order[i]) * img.channels;
    for (int c = 0; c < img.channels; ++c) {
      switch (fill) {
        case MaskFill::zero: px[c] = 0; break;
        case MaskFill::mean: px[c] = mean_fill[c]; break;
        case MaskFill::noise: px[c] = static_cast<uint8_t>(uniform_below(rng, 256)); break;
      }
    }
  }
  return out;
}

class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual std::string predict(const ImageBuffer& img, const std::string& question) = 0;
};

class CorrectnessJudge {
 public:
  virtual ~CorrectnessJudge() = default;
  virtual bool correct(const std::string& answer, const std::string& ground_truth) = 0;
};

class CallbackPredictor : public Predictor {
 public:
  using Fn = std::function<std::string(const ImageBuffer&, const std::string&)>;
  explicit CallbackPredictor(Fn fn) : fn_(std::move(fn)) {}
  std::string predict(const ImageBuffer& img, const std::string& q) override { return fn_(img, q); }

 private:
  Fn fn_;
};

// Answers "yes" while the fraction of fully black pixels stays under the
// cutoff, "no" from the cutoff up. Paired with ground truth "yes" and the
// equality judge it fails exactly at grid ratios >= cutoff (assuming the
// unmasked image has no black pixels).
class ThresholdStubPredictor : public Predictor {
 public:
  explicit ThresholdStubPredictor(double cutoff, std::string below = "yes", std::string above = "no")
      : cutoff_(cutoff), below_(std::move(below)), above_(std::move(above)) {}

  std::string predict(const ImageBuffer& img, const std::string&) override {
    size_t zeroed = 0;
    for (size_t p = 0; p < img.pixel_count(); ++p) {
      const uint8_t* px = img.data.data() + p * img.channels;
      bool black = true;
      for (int c = 0; c < img.channels; ++c) black = black && px[c] == 0;
      zeroed += black;
    }
    double frac = static_cast<double>(zeroed) / static_cast<double>(img.pixel_count());
    return frac < cutoff_ ? below_ : above_;
  }

 private:
  double cutoff_;
  std::string below_, above_;
};

inline std::unique_ptr<Predictor> make_fixed_predictor(std::string answer) {
  return std::make_unique<CallbackPredictor>(
      [answer = std::move(answer)](const ImageBuffer&, const std::string&) { return answer; });
}

// Normalized string equality; the deterministic judge used everywhere a full
// consistency check is overkill.
class EqualityJudge : public CorrectnessJudge {
 public:
  bool correct(const std::string& answer, const std::string& gt) override {
    return normalize_name(answer) == normalize_name(gt);
  }
};

class CallbackJudge : public CorrectnessJudge {
 public:
  using Fn = std::function<bool(const std::string&, const std::string&)>;
  explicit CallbackJudge(Fn fn) : fn_(std::move(fn)) {}
  bool correct(const std::string& a, const std::string& g) override { return fn_(a, g); }

 private:
  Fn fn_;
};

// Mean correctness over k independently masked copies of the image. Repeat
// seeds derive from (base_seed, lambda_index, repeat) so every grid point and
// repeat gets its own mask realization, reproducibly.
inline double robust_accuracy(Predictor& predictor, CorrectnessJudge& judge,
                              const ImageBuffer& img, const std::string& question,
                              const std::string& ground_truth, double lambda, int k = 10,
                              uint64_t base_seed = 0, size_t lambda_index = 0,
                              MaskFill fill = MaskFill::zero) {
  if (k < 1) throw std::invalid_argument("robust accuracy needs k >= 1 repeats");
  int hits = 0;
  for (int rep = 0; rep < k; ++rep) {
    ImageBuffer masked =
        mask_image(img, lambda, derive_seed(base_seed, static_cast<uint64_t>(lambda_index),
                                            static_cast<uint64_t>(rep)),
                   fill);
    std::string answer;
    try {
      answer = predictor.predict(masked, question);
    } catch (const std::exception& e) {
      throw judge_error("predictor failed on repeat " + std::to_string(rep) + ": " + e.what());
    }
    hits += judge.correct(answer, ground_truth) ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(k);
}

inline std::vector<double> default_lambda_grid() {
  std::vector<double> grid(10);
  for (int i = 0; i < 10; ++i) grid[i] = i / 10.0;
  return grid;
}

// Smallest grid ratio whose accuracy is strictly below tau; absent when the
// predictor never fails on the tested grid. Accuracy exactly equal to tau
// does not trigger.
inline std::optional<double> failure_threshold(const std::vector<double>& lambdas,
                                               const std::vector<double>& accuracies,
                                               double tau = 0.1) {
  if (lambdas.size() != accuracies.size())
    throw std::invalid_argument("accuracies must cover the lambda grid");
  for (size_t i = 0; i < lambdas.size(); ++i)
    if (accuracies[i] < tau) return lambdas[i];
  return std::nullopt;
}

struct MaskingProfile {
  std::vector<double> lambdas;
  std::vector<double> accuracies;
  int k = 10;
  double tau = 0.1;
  std::optional<double> lambda_star;
};

struct DifficultyConfig {
  std::vector<double> lambdas = default_lambda_grid();
  int k = 10;
  double tau = 0.1;
  MaskFill fill = MaskFill::zero;
  double easy_min = 0.7;      // lambda_star at or above this is easy
  double moderate_min = 0.3;  // below easy_min but at or above this is moderate

  void validate() const {
    if (lambdas.empty()) throw config_error("lambda grid is empty");
    for (size_t i = 0; i < lambdas.size(); ++i) {
      if (!(lambdas[i] >= 0.0 && lambdas[i] < 1.0))
        throw config_error("grid ratios must lie in [0, 1)");
      if (i && !(lambdas[i] > lambdas[i - 1]))
        throw config_error("lambda grid must be strictly increasing");
    }
    if (k < 1) throw config_error("repeats per ratio must be >= 1");
    if (!(tau > 0.0 && tau <= 1.0)) throw config_error("tau must lie in (0, 1]");
    if (!(moderate_min <= easy_min)) throw config_error("bucket boundaries are inverted");
  }
};

inline MaskingProfile compute_masking_profile(Predictor& predictor, CorrectnessJudge& judge,
                                              const ImageBuffer& img, const std::string& question,
                                              const std::string& ground_truth,
                                              const DifficultyConfig& cfg = {},
                                              uint64_t base_seed = 0) {
  cfg.validate();
  MaskingProfile profile;
  profile.lambdas = cfg.lambdas;
  profile.k = cfg.k;
  profile.tau = cfg.tau;
  profile.accuracies.reserve(cfg.lambdas.size());
  for (size_t i = 0; i < cfg.lambdas.size(); ++i)
    profile.accuracies.push_back(robust_accuracy(predictor, judge, img, question, ground_truth,
                                                 cfg.lambdas[i], cfg.k, base_seed, i, cfg.fill));
  profile.lambda_star = failure_threshold(profile.lambdas, profile.accuracies, cfg.tau);
  return profile;
}

enum class DifficultyBucket { easy, moderate, hard };

inline const char* bucket_name(DifficultyBucket b) {
  switch (b) {
    case DifficultyBucket::easy: return "easy";
    case DifficultyBucket::moderate: return "moderate";
    case DifficultyBucket::hard: return "hard";
  }
  return "easy";
}

// No failure on the grid means the sample is text-solvable or mask-insensitive;
// the earlier the collapse, the more the sample leans on the pixels.
inline DifficultyBucket difficulty_bucket(const std::optional<double>& lambda_star,
                                          double easy_min = 0.7, double moderate_min = 0.3) {
  if (!lambda_star.has_value() || *lambda_star >= easy_min) return DifficultyBucket::easy;
  if (*lambda_star >= moderate_min) return DifficultyBucket::moderate;
  return DifficultyBucket::hard;
}

}  // namespace planbench
