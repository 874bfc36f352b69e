// Copyright 2026 The CCSR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "ccsr/detectfilter.hpp"
#include "ccsr/store.hpp"

namespace ccsr {

/// Pipeline stages in dependency order; each depends on all earlier ones.
enum class Stage { promptgen, generation, judge, filter, export_pairs, train, eval };

inline constexpr std::array<Stage, 7> kStages = {
    Stage::promptgen, Stage::generation, Stage::judge, Stage::filter,
    Stage::export_pairs, Stage::train, Stage::eval};

std::string_view to_string(Stage s);
Stage parse_stage(std::string_view text);

enum class StageStatus { pending, complete, failed };
std::string_view to_string(StageStatus s);
StageStatus parse_stage_status(std::string_view text);

struct StageDigests {
  /// Digest of what the stage consumed (its config slice + upstream output).
  std::string input;
  /// Digest of the files the stage produced.
  std::string artifacts;
};

struct StageRecord {
  StageStatus status = StageStatus::pending;
  StageDigests digests;
};

struct RunManifest {
  std::string run_id;
  std::string config_digest;
  std::map<Stage, StageRecord> stages;
  std::map<std::string, std::uint64_t> counters;

  /// Fresh manifest with every stage pending.
  static RunManifest create(std::string run_id, std::string config_digest);
  static RunManifest load(const std::filesystem::path& file);
  /// Temp-file-and-rename.
  void save(const std::filesystem::path& file) const;

  const StageRecord& stage(Stage s) const;
  /// First stage that is not complete, or nullopt when all are.
  std::optional<Stage> resume_point() const;
};

/// Loads (or creates) the manifest at `file`, applies the transition and
/// persists it. Completing a stage whose predecessors are not all complete
/// raises StateError and leaves the file untouched.
RunManifest update_manifest(const std::filesystem::path& file,
                            const std::string& run_id, Stage stage,
                            StageStatus status, const StageDigests& digests);

/// Applies the same transition rule in memory.
void apply_transition(RunManifest& manifest, Stage stage, StageStatus status,
                      const StageDigests& digests);

struct DatasetBundle {
  std::filesystem::path root;
  std::filesystem::path image_dir;
  std::filesystem::path metadata_file;
  std::size_t pair_count = 0;
};

/// Writes `root/images/<prompt_id>.png` and `root/metadata.jsonl` with one
/// {file_name, text} record per pair, sorted by prompt id. Files already
/// holding the right bytes are left alone and strays are removed, so
/// re-exporting the same pairs changes nothing.
DatasetBundle export_pairs(std::span<const OptimalPair> pairs,
                           const std::filesystem::path& root,
                           const ArtifactStore& store);

/// Throws IntegrityError when a metadata record is malformed or points at a
/// missing file.
DatasetBundle open_bundle(const std::filesystem::path& root);

/// Digest over every regular file below `dir` (relative path + contents).
std::string digest_tree(const std::filesystem::path& dir);

/// Digest over the listed files (relative to `base`); missing files hash as
/// absent.
std::string digest_files(const std::filesystem::path& base,
                         std::span<const std::string> relative_paths);

}  // namespace ccsr
