// Copyright 2026 The CCSR Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <set>

#include <fmt/format.h>

#include "json.hpp"

#include "ccsr/detectfilter.hpp"
#include "ccsr/mock_backends.hpp"
#include "test_support.hpp"

namespace ccsr {
namespace {

using nlohmann::json;
using testing::TempDir;
using testing::write_file;

CandidateSet fake_set(const std::string& prompt_id, int n) {
  CandidateSet set;
  set.prompt_id = prompt_id;
  set.n = n;
  for (int i = 0; i < n; ++i) {
    set.images.push_back(ImageRef{prompt_id + "-img" + std::to_string(i), 64, 64,
                                  "images/" + prompt_id + "/" + std::to_string(i) + ".png"});
  }
  return set;
}

PromptRecord prompt(const std::string& id, const std::string& cls = "Elephant") {
  return PromptRecord{id, cls, "a photo of " + cls, {}, {}};
}

std::shared_ptr<MockScript> script_from(const TempDir& dir, const json& detector) {
  write_file(dir.path() / "script.json", json{{"detector", detector}}.dump());
  return std::make_shared<MockScript>(MockScript::load(dir.path() / "script.json"));
}

// Reference: filter by threshold, then the maximum confidence, then lowest index.
std::optional<std::size_t> oracle(const std::vector<CandidateConfidence>& cs, double t) {
  std::optional<std::size_t> best;
  double best_conf = -1;
  for (const auto& c : cs) {
    if (!c.max_confidence || *c.max_confidence < t) continue;
    if (*c.max_confidence > best_conf ||
        (*c.max_confidence == best_conf && c.image_index < *best)) {
      best = c.image_index;
      best_conf = *c.max_confidence;
    }
  }
  return best;
}

TEST(FilterAndSelect, PicksHighestConfidenceAboveThreshold) {
  TempDir dir;
  const auto set = fake_set("p", 10);
  json det;
  const std::map<std::size_t, double> conf = {{4, 0.55}, {6, 0.72}, {7, 0.61}, {9, 0.58}};
  for (const auto& [i, c] : conf) det[set.images[i].content_id]["Elephant"] = {c};
  MockDetector detector(0, script_from(dir, det));
  const std::vector<std::size_t> best = {4, 6, 7, 9};
  const auto out = filter_and_select(best, set, prompt("p"), 8, FilterPolicy{}, detector);
  ASSERT_TRUE(out.pair.has_value());
  EXPECT_EQ(out.pair->image_index, 6u);  // the seventh image
  EXPECT_DOUBLE_EQ(out.pair->detection_confidence, 0.72);
  EXPECT_EQ(out.pair->score_total, 8);
  EXPECT_EQ(out.pair->image, set.images[6]);
  EXPECT_EQ(out.pair->class_name, "Elephant");
  ASSERT_EQ(out.confidences.size(), 4u);
  EXPECT_DOUBLE_EQ(*out.confidences[0].max_confidence, 0.55);
}

TEST(FilterAndSelect, NoneWhenAllBelowThreshold) {
  TempDir dir;
  const auto set = fake_set("p", 3);
  json det;
  for (const auto& img : set.images) det[img.content_id]["Elephant"] = {0.59, 0.2};
  MockDetector detector(0, script_from(dir, det));
  const std::vector<std::size_t> best = {0, 1, 2};
  EXPECT_FALSE(filter_and_select(best, set, prompt("p"), 5, {}, detector).pair);
}

TEST(FilterAndSelect, TakesMaxBoxAndIgnoresOtherLabels) {
  TempDir dir;
  const auto set = fake_set("p", 2);
  json det;
  det[set.images[0].content_id]["Elephant"] = {0.3, 0.9, 0.65};
  det[set.images[1].content_id]["Zebra"] = {0.99};
  MockDetector detector(0, script_from(dir, det));
  const std::vector<std::size_t> best = {0, 1};
  const auto out = filter_and_select(best, set, prompt("p"), 5, {}, detector);
  ASSERT_TRUE(out.pair);
  EXPECT_EQ(out.pair->image_index, 0u);
  EXPECT_DOUBLE_EQ(out.pair->detection_confidence, 0.9);
  EXPECT_FALSE(out.confidences[1].max_confidence.has_value());
}

TEST(FilterAndSelect, ExactTiePicksLowestIndex) {
  TempDir dir;
  const auto set = fake_set("p", 4);
  json det;
  det[set.images[3].content_id]["Elephant"] = {0.8};
  det[set.images[1].content_id]["Elephant"] = {0.8};
  MockDetector detector(0, script_from(dir, det));
  const std::vector<std::size_t> best = {3, 1};
  const auto out = filter_and_select(best, set, prompt("p"), 5, {}, detector);
  ASSERT_TRUE(out.pair);
  EXPECT_EQ(out.pair->image_index, 1u);
  const std::vector<std::size_t> single = {3};
  EXPECT_EQ(filter_and_select(single, set, prompt("p"), 5, {}, detector).pair->image_index, 3u);
  const std::vector<std::size_t> out_of_range = {4};
  EXPECT_THROW(filter_and_select(out_of_range, set, prompt("p"), 5, {}, detector),
               ArgumentError);
}

TEST(SelectByConfidence, HighestScoreTieBreak) {
  const std::vector<CandidateConfidence> cs = {{0, 6, 0.8}, {2, 9, 0.8}, {5, 9, 0.8},
                                               {7, 9, 0.7}};
  FilterPolicy policy;
  EXPECT_EQ(select_by_confidence(cs, policy), 0u);
  policy.tie_break = TieBreak::highest_score;
  EXPECT_EQ(select_by_confidence(cs, policy), 2u);
  EXPECT_EQ(parse_tie_break("highest-score"), TieBreak::highest_score);
  EXPECT_THROW(parse_tie_break("random"), ConfigError);
}

TEST(SelectByConfidence, MatchesOracleOnRandomInputs) {
  std::mt19937 rng(42);
  std::uniform_int_distribution<int> size(0, 10);
  std::uniform_int_distribution<int> level(0, 10);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<CandidateConfidence> cs;
    const int n = size(rng);
    std::vector<std::size_t> idx(10);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    for (int i = 0; i < n; ++i) {
      const int l = level(rng);
      // Coarse levels make exact ties common; level 0 means undetected.
      cs.push_back({idx[static_cast<std::size_t>(i)], 0,
                    l == 0 ? std::nullopt : std::optional<double>(l / 10.0)});
    }
    for (double t : {0.0, 0.3, 0.6, 1.0}) {
      FilterPolicy policy;
      policy.confidence_threshold = t;
      const auto got = select_by_confidence(cs, policy);
      ASSERT_EQ(got, oracle(cs, t)) << "trial " << trial << " threshold " << t;
      if (got) {
        const auto it = std::find_if(cs.begin(), cs.end(),
                                     [&](const auto& c) { return c.image_index == *got; });
        EXPECT_GE(*it->max_confidence, t);
      }
    }
  }
}

TEST(SelectByConfidence, RaisingThresholdNeverAddsSurvivors) {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<CandidateConfidence> cs;
    for (std::size_t i = 0; i < 6; ++i) cs.push_back({i, 0, u(rng)});
    bool selected_before = true;
    for (double t = 0; t <= 1.0; t += 0.05) {
      FilterPolicy policy;
      policy.confidence_threshold = t;
      const bool selected = select_by_confidence(cs, policy).has_value();
      EXPECT_FALSE(selected && !selected_before);
      selected_before = selected;
    }
  }
}

TEST(FilterPolicy, ValidatesThreshold) {
  FilterPolicy p;
  EXPECT_NO_THROW(p.validate());
  p.confidence_threshold = 1.5;
  EXPECT_THROW(p.validate(), ConfigError);
  p.confidence_threshold = -0.1;
  EXPECT_THROW(p.validate(), ConfigError);
}

class BrokenDetector : public ObjectDetector {
 public:
  std::vector<Detection> detect(const DetectRequest& request) override {
    if (request.image.content_id.find("img0") != std::string::npos) {
      throw BackendError("detector down", false);
    }
    return {Detection{request.class_names[0], 0.7, {}}};
  }
};

TEST(FilterAndSelect, DetectorFailureCountsAsBelowThreshold) {
  const auto set = fake_set("p", 2);
  BrokenDetector detector;
  const std::vector<std::size_t> best = {0, 1};
  const auto out = filter_and_select(best, set, prompt("p"), 5, {}, detector);
  EXPECT_EQ(out.detector_failures, 1u);
  ASSERT_TRUE(out.pair);
  EXPECT_EQ(out.pair->image_index, 1u);
}

JudgedSet judged(const std::string& id, const std::vector<int>& totals) {
  JudgedSet j;
  j.prompt_id = id;
  for (std::size_t i = 0; i < totals.size(); ++i) {
    ScoreCard c;
    c.prompt_id = id;
    c.image_index = i;
    c.total = totals[i];
    j.cards.push_back(c);
  }
  return j;
}

TEST(ExtractPairs, PartitionsPromptsAndOrdersById) {
  TempDir dir;
  RunState state;
  json det;
  // Prompts listed out of id order on purpose.
  for (const std::string id : {"c-002", "a-000", "b-001", "d-003", "e-004"}) {
    state.prompts.push_back(prompt(id));
    state.candidates[id] = fake_set(id, 4);
  }
  state.candidates["d-003"].complete = false;
  state.judgments["a-000"] = judged("a-000", {3, 9, 9, 1});
  state.judgments["b-001"] = judged("b-001", {5, 5, 5, 5});
  state.judgments["c-002"] = judged("c-002", {2, 1, 0, 7});
  state.judgments["e-004"] = judged("e-004", {});
  det["a-000-img1"]["Elephant"] = {0.7};
  det["a-000-img2"]["Elephant"] = {0.95};
  det["a-000-img0"]["Elephant"] = {0.99};  // not best-scoring, never asked
  for (int i = 0; i < 4; ++i) det["b-001-img" + std::to_string(i)]["Elephant"] = {0.1};
  det["c-002-img3"]["Elephant"] = {0.61};
  MockDetector detector(0, script_from(dir, det));

  const auto out = extract_pairs(state, FilterPolicy{}, detector, 3);
  ASSERT_EQ(out.pairs.size(), 2u);
  EXPECT_EQ(out.pairs[0].prompt_id, "a-000");
  EXPECT_EQ(out.pairs[0].image_index, 2u);
  EXPECT_EQ(out.pairs[0].score_total, 9);
  EXPECT_EQ(out.pairs[1].prompt_id, "c-002");
  EXPECT_EQ(out.pairs[1].image_index, 3u);
  ASSERT_EQ(out.rejections.size(), 3u);
  EXPECT_EQ(out.rejections[0].prompt_id, "b-001");
  EXPECT_EQ(out.rejections[0].reason, RejectionReason::no_detection);
  EXPECT_EQ(out.rejections[1].prompt_id, "d-003");
  EXPECT_EQ(out.rejections[1].reason, RejectionReason::judging_excluded);
  EXPECT_EQ(out.rejections[2].reason, RejectionReason::judging_excluded);
  EXPECT_EQ(out.confidences.at("b-001").size(), 4u);

  std::set<std::string> seen;
  for (const auto& p : out.pairs) EXPECT_TRUE(seen.insert(p.prompt_id).second);
  for (const auto& r : out.rejections) EXPECT_TRUE(seen.insert(r.prompt_id).second);
  EXPECT_EQ(seen.size(), state.prompts.size());
}

TEST(ExtractPairs, SurvivorsSatisfyPairInvariants) {
  RunState state;
  MockDetector detector(3, nullptr);  // hash-based confidences
  std::mt19937 rng(5);
  std::uniform_int_distribution<int> score(0, 4);
  for (int p = 0; p < 40; ++p) {
    const auto id = fmt::format("zebra-{:03}", p);
    state.prompts.push_back(prompt(id, "Zebra"));
    state.candidates[id] = fake_set(id, 6);
    std::vector<int> totals(6);
    for (auto& t : totals) t = score(rng);
    state.judgments[id] = judged(id, totals);
  }
  FilterPolicy policy;
  policy.confidence_threshold = 0.5;
  const auto out = extract_pairs(state, policy, detector, 2);
  EXPECT_EQ(out.pairs.size() + out.rejections.size(), 40u);
  EXPECT_FALSE(out.pairs.empty());
  for (const auto& pair : out.pairs) {
    EXPECT_GE(pair.detection_confidence, 0.5);
    const auto best = select_best(state.judgments.at(pair.prompt_id).cards);
    EXPECT_NE(std::find(best.begin(), best.end(), pair.image_index), best.end());
    // Hash-based mock: confidence is reproducible from the image alone.
    EXPECT_DOUBLE_EQ(pair.detection_confidence,
                     detector.hashed_confidence(pair.image.content_id, "Zebra"));
  }
  const auto again = extract_pairs(state, policy, detector, 1);
  ASSERT_EQ(again.pairs.size(), out.pairs.size());
  for (std::size_t i = 0; i < out.pairs.size(); ++i) {
    EXPECT_EQ(again.pairs[i].image, out.pairs[i].image);
  }
}

TEST(PairFiles, RoundTrip) {
  TempDir dir;
  ArtifactStore store(dir.path());
  OptimalPair p{"a-000", "a text", ImageRef{"cid", 8, 8, "images/a-000/2.png"}, 2, 9, 0.75,
                "Elephant"};
  std::vector<OptimalPair> pairs = {p};
  write_pairs(dir.path() / "pairs.jsonl", pairs);
  const auto back = read_pairs(dir.path() / "pairs.jsonl", store);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].image, p.image);
  EXPECT_EQ(back[0].score_total, 9);
  EXPECT_EQ(back[0].class_name, "Elephant");
  std::vector<Rejection> rejections = {{"b", RejectionReason::no_detection, "d"},
                                       {"c", RejectionReason::judging_excluded, ""}};
  write_rejections(dir.path() / "r.jsonl", rejections);
  const auto r = read_rejections(dir.path() / "r.jsonl");
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[1].reason, RejectionReason::judging_excluded);
  EXPECT_EQ(to_string(RejectionReason::no_detection), "no-detection");
}

}  // namespace
}  // namespace ccsr
