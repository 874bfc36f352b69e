// Copyright 2026 The CCSR Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cstdlib>

#include "json.hpp"

#include "ccsr/config.hpp"
#include "test_support.hpp"

namespace ccsr {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using testing::TempDir;
using testing::write_file;

ConfigValidation parse(const json& j, const fs::path& base = "/cfg") {
  return validate_config_text(j.dump(), base);
}

bool mentions(const std::vector<std::string>& violations, const std::string& key) {
  return std::any_of(violations.begin(), violations.end(),
                     [&](const auto& v) { return v.rfind(key, 0) == 0; });
}

json strip_nulls(json j) {
  if (j.is_object()) {
    json out = json::object();
    for (auto& [k, v] : j.items()) {
      if (!v.is_null()) out[k] = strip_nulls(v);
    }
    return out;
  }
  return j;
}

TEST(Config, MinimalConfigGetsDocumentedDefaults) {
  const auto result = parse({{"classes", {"Elephant", "Zebra"}}});
  ASSERT_TRUE(result.ok()) << result.violations.front();
  const auto& c = *result.config;
  EXPECT_EQ(c.classes.size(), 2u);
  EXPECT_EQ(c.classes[1].class_name, "Zebra");
  EXPECT_EQ(c.classes[0].prompt_count, 100);
  EXPECT_EQ(c.n_candidates, 10);
  EXPECT_EQ(c.resolution, (Resolution{512, 512}));
  EXPECT_FALSE(c.grid.has_value());
  EXPECT_DOUBLE_EQ(c.filter.confidence_threshold, 0.6);
  EXPECT_EQ(c.filter.tie_break, TieBreak::lowest_index);
  EXPECT_EQ(c.scoring_rule, ScoringRule::plus_one);
  EXPECT_EQ(c.eval.validation_prompts, 50);
  EXPECT_EQ(c.eval.seeds, 4);
  EXPECT_DOUBLE_EQ(c.eval.tie_epsilon, 0.01);
  EXPECT_EQ(c.backend(BackendKind::text2image).model_id, "stable-diffusion-2-1");
  EXPECT_EQ(c.backend(BackendKind::vqa).endpoint, "mock");
  EXPECT_EQ(c.output_root, fs::path("/cfg/ccsr_out"));
  EXPECT_EQ(c.eval.seed_values(), (std::vector<std::int64_t>{0, 1, 2, 3}));
}

TEST(Config, ThresholdOutsideUnitIntervalIsNamed) {
  const auto result = parse({{"classes", {"Zebra"}}, {"confidence_threshold", 1.5}});
  EXPECT_FALSE(result.ok());
  ASSERT_EQ(result.violations.size(), 1u);
  EXPECT_TRUE(mentions(result.violations, "confidence_threshold"));
}

TEST(Config, ReportsEveryViolation) {
  const auto result = parse({{"classes", {"Zebra"}},
                             {"n_candidates", 0},
                             {"top_p", 0},
                             {"scoring_rule", "double"},
                             {"epochs", "ten"},
                             {"mystery", 1}});
  EXPECT_FALSE(result.ok());
  EXPECT_EQ(result.violations.size(), 5u);
  for (const auto* key : {"n_candidates", "top_p", "scoring_rule", "epochs", "mystery"}) {
    EXPECT_TRUE(mentions(result.violations, key)) << key;
  }
}

TEST(Config, ValidatesStructuredEntries) {
  auto r = parse({{"classes", json::array()}});
  EXPECT_TRUE(mentions(r.violations, "classes"));
  r = parse({{"classes", {{{"class_name", "Zebra"}, {"prompt_count", 0}}}}});
  EXPECT_FALSE(r.ok());
  r = parse({{"classes", {"Zebra"}}, {"n_candidates", 6}, {"grid", {{"rows", 2}, {"cols", 5}}}});
  EXPECT_TRUE(mentions(r.violations, "grid."));
  r = parse({{"classes", {"Zebra"}}, {"n_candidates", 10}, {"grid", {{"rows", 2}, {"cols", 5}}}});
  ASSERT_TRUE(r.ok());
  EXPECT_EQ(r.config->grid->cols, 5);
  r = parse({{"classes", {"Zebra"}}, {"backends", {{"vqa", {{"endpoint", "ftp://x"}}}}}});
  EXPECT_TRUE(mentions(r.violations, "backends.vqa"));
  r = parse({{"classes", {"Zebra"}}, {"backends", {{"painter", json::object()}}}});
  EXPECT_FALSE(r.ok());
  r = parse({{"classes", {"Zebra"}}, {"sweep_scales", {0.5, 0.2}}});
  EXPECT_TRUE(mentions(r.violations, "sweep_scales"));
  r = parse({{"classes", {"Zebra"}}, {"template_id", "missing"}});
  EXPECT_TRUE(mentions(r.violations, "template_id"));
  r = parse({{"classes", {"Zebra"}}, {"battery_id", "missing"}});
  EXPECT_TRUE(mentions(r.violations, "battery_id"));
  EXPECT_FALSE(validate_config_text("{broken", "/").ok());
  EXPECT_FALSE(validate_config_text("[1, 2]", "/").ok());
}

TEST(Config, ClassObjectsCarryCountsAndStyles) {
  const auto r = parse({{"classes",
                         {{{"class_name", "Zebra"},
                           {"prompt_count", 7},
                           {"style_directives", {"watercolor"}}},
                          "Elephant"}}});
  ASSERT_TRUE(r.ok());
  EXPECT_EQ(r.config->classes[0].prompt_count, 7);
  EXPECT_EQ(r.config->classes[0].style_directives, (std::vector<std::string>{"watercolor"}));
  EXPECT_EQ(r.config->classes[1].style_directives.size(), 3u);
}

TEST(Config, EnvironmentOverridesEndpoints) {
  ::setenv("CCSR_VQA_ENDPOINT", "http://127.0.0.1:9999/llava", 1);
  const auto r = parse({{"classes", {"Zebra"}},
                        {"backends", {{"vqa", {{"endpoint", "mock"}}}}}});
  ::unsetenv("CCSR_VQA_ENDPOINT");
  ASSERT_TRUE(r.ok());
  EXPECT_EQ(r.config->backend(BackendKind::vqa).endpoint, "http://127.0.0.1:9999/llava");
  EXPECT_EQ(r.config->backend(BackendKind::chat).endpoint, "mock");
}

TEST(Config, RelativePathsResolveAgainstTheFile) {
  TempDir dir;
  write_file(dir.path() / "conf/run.json",
             json{{"classes", {"Zebra"}},
                  {"output_root", "../out"},
                  {"backends", {{"chat", {{"endpoint", "mock"}, {"script", "chat.json"}}}}}}
                 .dump());
  write_file(dir.path() / "conf/chat.json", "{}");
  const auto r = validate_config(dir.path() / "conf/run.json");
  ASSERT_TRUE(r.ok()) << r.violations.front();
  EXPECT_EQ(fs::weakly_canonical(r.config->output_root), fs::weakly_canonical(dir.path() / "out"));
  EXPECT_EQ(r.config->backend(BackendKind::chat).script,
            (dir.path() / "conf/chat.json").string());
  EXPECT_THROW(validate_config(dir.path() / "nope.json"), IoError);
}

TEST(Config, SnapshotReloadsToTheSameConfig) {
  const auto r = parse({{"classes", {"Zebra"}},
                        {"run_id", "snap"},
                        {"epochs", 3},
                        {"n_candidates", 4},
                        {"grid", {{"rows", 2}, {"cols", 2}}},
                        {"scoring_rule", "neutral"},
                        {"backends", {{"detector", {{"seed", 5}}}}}});
  ASSERT_TRUE(r.ok());
  const auto snapshot = strip_nulls(json::parse(r.config->canonical_json()));
  const auto back = validate_config_text(snapshot.dump(), "/elsewhere");
  ASSERT_TRUE(back.ok()) << back.violations.front();
  EXPECT_EQ(back.config->digest(), r.config->digest());
}

TEST(Config, StageSlicesOnlyTrackTheirOwnSettings) {
  const auto a = parse({{"classes", {"Zebra"}}});
  const auto b = parse({{"classes", {"Zebra"}}, {"confidence_threshold", 0.7}});
  ASSERT_TRUE(a.ok() && b.ok());
  for (auto s : {Stage::promptgen, Stage::generation, Stage::judge}) {
    EXPECT_EQ(a.config->stage_json(s), b.config->stage_json(s));
  }
  EXPECT_NE(a.config->stage_json(Stage::filter), b.config->stage_json(Stage::filter));
  EXPECT_NE(a.config->digest(), b.config->digest());
}

}  // namespace
}  // namespace ccsr
