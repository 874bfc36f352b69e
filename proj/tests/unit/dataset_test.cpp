// Copyright 2026 The CCSR Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "json.hpp"

#include "ccsr/dataset.hpp"
#include "ccsr/digest.hpp"
#include "ccsr/image.hpp"
#include "test_support.hpp"

namespace ccsr {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using testing::TempDir;
using testing::write_file;

StageDigests digests(std::string in, std::string out) {
  return StageDigests{std::move(in), std::move(out)};
}

TEST(Manifest, FreshManifestResumesAtTheStart) {
  const auto m = RunManifest::create("r", "cfg");
  EXPECT_EQ(m.resume_point(), Stage::promptgen);
  for (auto s : kStages) EXPECT_EQ(m.stage(s).status, StageStatus::pending);
  EXPECT_EQ(parse_stage(to_string(Stage::export_pairs)), Stage::export_pairs);
  EXPECT_EQ(to_string(Stage::export_pairs), "export");
  EXPECT_THROW(parse_stage("bake"), ArgumentError);
}

TEST(Manifest, CompletingOutOfOrderIsRejected) {
  auto m = RunManifest::create("r", "cfg");
  EXPECT_THROW(apply_transition(m, Stage::judge, StageStatus::complete, digests("i", "a")),
               StateError);
  apply_transition(m, Stage::promptgen, StageStatus::complete, digests("i0", "a0"));
  apply_transition(m, Stage::generation, StageStatus::complete, digests("i1", "a1"));
  EXPECT_EQ(m.resume_point(), Stage::judge);
  // Marking a later stage failed is allowed regardless of upstream.
  EXPECT_NO_THROW(apply_transition(m, Stage::eval, StageStatus::failed, digests("", "")));
}

TEST(Manifest, ChangedArtifactsResetDownstream) {
  auto m = RunManifest::create("r", "cfg");
  for (std::size_t i = 0; i < kStages.size(); ++i) {
    apply_transition(m, kStages[i], StageStatus::complete,
                     digests("in" + std::to_string(i), "out" + std::to_string(i)));
  }
  EXPECT_FALSE(m.resume_point().has_value());

  // Same artifacts: downstream survives.
  apply_transition(m, Stage::judge, StageStatus::complete, digests("new-in", "out2"));
  EXPECT_FALSE(m.resume_point().has_value());
  EXPECT_EQ(m.stage(Stage::eval).digests.artifacts, "out6");

  // New artifacts: everything after judge is pending again.
  apply_transition(m, Stage::judge, StageStatus::complete, digests("new-in", "changed"));
  EXPECT_EQ(m.resume_point(), Stage::filter);
  for (auto s : {Stage::filter, Stage::export_pairs, Stage::train, Stage::eval}) {
    EXPECT_EQ(m.stage(s).status, StageStatus::pending);
    EXPECT_TRUE(m.stage(s).digests.artifacts.empty());
  }
  EXPECT_EQ(m.stage(Stage::generation).status, StageStatus::complete);

  apply_transition(m, Stage::generation, StageStatus::failed, digests("x", ""));
  EXPECT_EQ(m.resume_point(), Stage::generation);
  EXPECT_EQ(m.stage(Stage::judge).status, StageStatus::pending);
}

TEST(Manifest, PersistsAtomicallyAndChecksRunId) {
  TempDir dir;
  const auto file = dir.path() / "run.json";
  auto m = update_manifest(file, "r1", Stage::promptgen, StageStatus::complete,
                           digests("a", "b"));
  m.counters["prompts"] = 12;
  m.save(file);
  const auto loaded = RunManifest::load(file);
  EXPECT_EQ(loaded.run_id, "r1");
  EXPECT_EQ(loaded.stage(Stage::promptgen).digests.input, "a");
  EXPECT_EQ(loaded.counters.at("prompts"), 12u);
  EXPECT_EQ(loaded.resume_point(), Stage::generation);

  const auto before = testing::read_file(file);
  EXPECT_THROW(update_manifest(file, "r1", Stage::train, StageStatus::complete,
                               digests("c", "d")),
               StateError);
  EXPECT_EQ(testing::read_file(file), before);
  EXPECT_THROW(update_manifest(file, "other", Stage::promptgen, StageStatus::failed, {}),
               StateError);
}

class ExportTest : public ::testing::Test {
 protected:
  ExportTest() : store(dir.path() / "run") {}

  OptimalPair pair(const std::string& id, std::uint8_t shade) {
    Image img(4, 4);
    img.at(1, 1)[0] = shade;
    OptimalPair p;
    p.prompt_id = id;
    p.prompt_text = "a zebra, shade " + std::to_string(shade);
    p.image = store.put(img);
    p.class_name = "Zebra";
    return p;
  }

  TempDir dir;
  ArtifactStore store;
};

TEST_F(ExportTest, WritesSortedMetadataAndImages) {
  const std::vector<OptimalPair> pairs = {pair("zebra-001", 1), pair("elephant-000", 2)};
  const auto root = dir.path() / "bundle";
  const auto bundle = export_pairs(pairs, root, store);
  EXPECT_EQ(bundle.pair_count, 2u);
  const auto lines = testing::read_lines(bundle.metadata_file);
  ASSERT_EQ(lines.size(), 2u);
  EXPECT_EQ(json::parse(lines[0]),
            (json{{"file_name", "images/elephant-000.png"}, {"text", "a zebra, shade 2"}}));
  EXPECT_EQ(json::parse(lines[1]).at("file_name"), "images/zebra-001.png");
  EXPECT_EQ(content_id(decode_png(read_binary(root / "images/zebra-001.png"))),
            pairs[0].image.content_id);
  EXPECT_EQ(open_bundle(root).pair_count, 2u);
}

TEST_F(ExportTest, ReexportIsANoOp) {
  const std::vector<OptimalPair> pairs = {pair("a-000", 1), pair("a-001", 2)};
  const auto root = dir.path() / "bundle";
  export_pairs(pairs, root, store);
  const auto digest = digest_tree(root);
  const auto mtime = fs::last_write_time(root / "metadata.jsonl");
  const auto img_mtime = fs::last_write_time(root / "images/a-000.png");
  export_pairs(pairs, root, store);
  EXPECT_EQ(digest_tree(root), digest);
  EXPECT_EQ(fs::last_write_time(root / "metadata.jsonl"), mtime);
  EXPECT_EQ(fs::last_write_time(root / "images/a-000.png"), img_mtime);
}

TEST_F(ExportTest, RemovesStraysAndRewritesChangedImages) {
  const auto root = dir.path() / "bundle";
  std::vector<OptimalPair> pairs = {pair("a-000", 1), pair("a-001", 2)};
  export_pairs(pairs, root, store);
  write_file(root / "images/old.png", "stale");
  write_file(root / "README.txt", "kept");
  pairs[1] = pair("a-001", 9);
  pairs.erase(pairs.begin());
  export_pairs(pairs, root, store);
  EXPECT_FALSE(fs::exists(root / "images/old.png"));
  EXPECT_FALSE(fs::exists(root / "images/a-000.png"));
  EXPECT_TRUE(fs::exists(root / "README.txt"));
  EXPECT_EQ(content_id(decode_png(read_binary(root / "images/a-001.png"))),
            pairs[0].image.content_id);
  EXPECT_EQ(testing::read_lines(root / "metadata.jsonl").size(), 1u);
}

TEST_F(ExportTest, MissingImagesAreListed) {
  auto good = pair("a-000", 1);
  auto bad = good;
  bad.prompt_id = "a-001";
  bad.image.content_id = std::string(64, 'f');
  const std::vector<OptimalPair> pairs = {good, bad};
  try {
    export_pairs(pairs, dir.path() / "bundle", store);
    FAIL();
  } catch (const MissingArtifactError& e) {
    EXPECT_EQ(e.content_ids(), (std::vector<std::string>{std::string(64, 'f')}));
  }
  EXPECT_FALSE(fs::exists(dir.path() / "bundle/metadata.jsonl"));
}

TEST_F(ExportTest, RejectsDuplicateAndUnsafeIds) {
  const auto p = pair("a-000", 1);
  const std::vector<OptimalPair> dup = {p, p};
  EXPECT_THROW(export_pairs(dup, dir.path() / "b", store), ArgumentError);
  auto unsafe = p;
  unsafe.prompt_id = "../escape";
  const std::vector<OptimalPair> bad = {unsafe};
  EXPECT_THROW(export_pairs(bad, dir.path() / "b", store), ArgumentError);
}

TEST_F(ExportTest, OpenBundleDetectsDamage) {
  const auto root = dir.path() / "bundle";
  EXPECT_THROW(open_bundle(root), IntegrityError);
  const std::vector<OptimalPair> pairs = {pair("a-000", 1)};
  export_pairs(pairs, root, store);
  fs::remove(root / "images/a-000.png");
  EXPECT_THROW(open_bundle(root), IntegrityError);
  write_file(root / "metadata.jsonl", "{not json\n");
  EXPECT_THROW(open_bundle(root), IntegrityError);
}

TEST(Digests, TreeAndFileDigestsTrackContentAndNames) {
  TempDir dir;
  write_file(dir.path() / "a/x.txt", "one");
  write_file(dir.path() / "b.txt", "two");
  const auto d1 = digest_tree(dir.path());
  write_file(dir.path() / "b.txt", "two!");
  const auto d2 = digest_tree(dir.path());
  EXPECT_NE(d1, d2);
  write_file(dir.path() / "b.txt", "two");
  EXPECT_EQ(digest_tree(dir.path()), d1);
  fs::rename(dir.path() / "b.txt", dir.path() / "c.txt");
  EXPECT_NE(digest_tree(dir.path()), d1);
  EXPECT_EQ(digest_tree(dir.path() / "none"), digest_tree(dir.path() / "none2"));

  const std::vector<std::string> files = {"a/x.txt", "missing.txt"};
  const auto f1 = digest_files(dir.path(), files);
  write_file(dir.path() / "missing.txt", "");
  EXPECT_NE(digest_files(dir.path(), files), f1);
}

}  // namespace
}  // namespace ccsr
