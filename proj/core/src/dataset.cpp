// Copyright 2026 The CCSR Authors
// SPDX-License-Identifier: Apache-2.0

#include "ccsr/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "json.hpp"

#include "ccsr/digest.hpp"

namespace ccsr {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::promptgen: return "promptgen";
    case Stage::generation: return "generation";
    case Stage::judge: return "judge";
    case Stage::filter: return "filter";
    case Stage::export_pairs: return "export";
    case Stage::train: return "train";
    case Stage::eval: return "eval";
  }
  return "?";
}

Stage parse_stage(std::string_view text) {
  for (const auto s : kStages) {
    if (to_string(s) == text) return s;
  }
  throw ArgumentError(fmt::format("unknown stage '{}'", text));
}

std::string_view to_string(StageStatus s) {
  switch (s) {
    case StageStatus::pending: return "pending";
    case StageStatus::complete: return "complete";
    case StageStatus::failed: return "failed";
  }
  return "?";
}

StageStatus parse_stage_status(std::string_view text) {
  if (text == "pending") return StageStatus::pending;
  if (text == "complete") return StageStatus::complete;
  if (text == "failed") return StageStatus::failed;
  throw IoError(fmt::format("unknown stage status '{}'", text));
}

RunManifest RunManifest::create(std::string run_id, std::string config_digest) {
  RunManifest m;
  m.run_id = std::move(run_id);
  m.config_digest = std::move(config_digest);
  for (const auto s : kStages) m.stages[s] = StageRecord{};
  return m;
}

RunManifest RunManifest::load(const fs::path& file) {
  try {
    const auto j = json::parse(read_text(file));
    auto m = create(j.at("run_id").get<std::string>(), j.value("config_digest", ""));
    for (const auto& [name, rec] : j.at("stages").items()) {
      StageRecord r;
      r.status = parse_stage_status(rec.at("status").get<std::string>());
      r.digests.input = rec.value("input_digest", "");
      r.digests.artifacts = rec.value("artifact_digest", "");
      m.stages[parse_stage(name)] = r;
    }
    if (j.contains("counters")) {
      m.counters = j.at("counters").get<std::map<std::string, std::uint64_t>>();
    }
    return m;
  } catch (const json::exception& e) {
    throw IoError(fmt::format("manifest {}: {}", file.string(), e.what()));
  }
}

void RunManifest::save(const fs::path& file) const {
  json stages_json = json::object();
  for (const auto s : kStages) {
    const auto& r = stage(s);
    stages_json[std::string(to_string(s))] = {{"status", std::string(to_string(r.status))},
                                              {"input_digest", r.digests.input},
                                              {"artifact_digest", r.digests.artifacts}};
  }
  const json j = {{"run_id", run_id},
                  {"config_digest", config_digest},
                  {"stages", stages_json},
                  {"counters", counters}};
  write_atomic(file, j.dump(2) + "\n");
}

const StageRecord& RunManifest::stage(Stage s) const {
  static const StageRecord pending{};
  auto it = stages.find(s);
  return it == stages.end() ? pending : it->second;
}

std::optional<Stage> RunManifest::resume_point() const {
  for (const auto s : kStages) {
    if (stage(s).status != StageStatus::complete) return s;
  }
  return std::nullopt;
}

void apply_transition(RunManifest& manifest, Stage stage, StageStatus status,
                      const StageDigests& digests) {
  const auto index = static_cast<std::size_t>(stage);
  if (status == StageStatus::complete) {
    for (std::size_t i = 0; i < index; ++i) {
      if (manifest.stage(kStages[i]).status != StageStatus::complete) {
        throw StateError(fmt::format("cannot complete {}: {} is {}", to_string(stage),
                                     to_string(kStages[i]),
                                     to_string(manifest.stage(kStages[i]).status)));
      }
    }
  }
  auto& rec = manifest.stages[stage];
  // Downstream results built on different (or no) output of this stage are stale.
  const bool invalidates =
      status != StageStatus::complete || rec.digests.artifacts != digests.artifacts;
  rec.status = status;
  rec.digests = digests;
  if (invalidates) {
    for (std::size_t i = index + 1; i < kStages.size(); ++i) {
      manifest.stages[kStages[i]] = StageRecord{};
    }
  }
}

RunManifest update_manifest(const fs::path& file, const std::string& run_id, Stage stage,
                            StageStatus status, const StageDigests& digests) {
  RunManifest m = fs::exists(file) ? RunManifest::load(file) : RunManifest::create(run_id, "");
  if (m.run_id != run_id) {
    throw StateError(
        fmt::format("manifest {} belongs to run {}, not {}", file.string(), m.run_id, run_id));
  }
  apply_transition(m, stage, status, digests);
  m.save(file);
  return m;
}

namespace {

std::string metadata_line(const OptimalPair& p) {
  return json{{"file_name", fmt::format("images/{}.png", p.prompt_id)},
              {"text", p.prompt_text}}
             .dump();
}

bool same_bytes(const fs::path& a, const fs::path& b) {
  if (!fs::exists(a) || !fs::exists(b)) return false;
  if (fs::file_size(a) != fs::file_size(b)) return false;
  return read_binary(a) == read_binary(b);
}

}  // namespace

DatasetBundle export_pairs(std::span<const OptimalPair> pairs, const fs::path& root,
                           const ArtifactStore& store) {
  std::vector<const OptimalPair*> sorted;
  std::set<std::string> ids;
  std::vector<std::string> missing;
  for (const auto& p : pairs) {
    if (!ids.insert(p.prompt_id).second) {
      throw ArgumentError(fmt::format("duplicate pair for prompt {}", p.prompt_id));
    }
    if (p.prompt_id.empty() || p.prompt_id.find('/') != std::string::npos) {
      throw ArgumentError(fmt::format("prompt id '{}' is not a file name", p.prompt_id));
    }
    if (!store.contains(p.image.content_id)) missing.push_back(p.image.content_id);
    sorted.push_back(&p);
  }
  if (!missing.empty()) {
    throw MissingArtifactError(
        fmt::format("{} pair image(s) are missing from {}", missing.size(),
                    store.root().string()),
        std::move(missing));
  }
  std::sort(sorted.begin(), sorted.end(),
            [](const auto* a, const auto* b) { return a->prompt_id < b->prompt_id; });

  DatasetBundle bundle{root, root / "images", root / "metadata.jsonl", sorted.size()};
  fs::create_directories(bundle.image_dir);

  std::set<fs::path> wanted;
  std::string metadata;
  for (const auto* p : sorted) {
    const auto target = bundle.image_dir / (p->prompt_id + ".png");
    const auto source = store.object_path(p->image.content_id);
    wanted.insert(target.filename());
    if (!same_bytes(source, target)) {
      const auto bytes = read_binary(source);
      write_atomic(target, std::string_view(reinterpret_cast<const char*>(bytes.data()),
                                            bytes.size()));
    }
    metadata += metadata_line(*p);
    metadata += '\n';
  }
  for (const auto& entry : fs::directory_iterator(bundle.image_dir)) {
    if (!wanted.count(entry.path().filename())) fs::remove_all(entry.path());
  }
  if (!fs::exists(bundle.metadata_file) || read_text(bundle.metadata_file) != metadata) {
    write_atomic(bundle.metadata_file, metadata);
  }
  return bundle;
}

DatasetBundle open_bundle(const fs::path& root) {
  DatasetBundle bundle{root, root / "images", root / "metadata.jsonl", 0};
  if (!fs::exists(bundle.metadata_file)) {
    throw IntegrityError(fmt::format("{} has no metadata.jsonl", root.string()));
  }
  std::istringstream in(read_text(bundle.metadata_file));
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = json::parse(line);
      const auto file_name = j.at("file_name").get<std::string>();
      j.at("text").get<std::string>();
      if (!fs::is_regular_file(root / file_name)) {
        throw IntegrityError(fmt::format("metadata line {} points at missing {}", line_no,
                                         file_name));
      }
    } catch (const json::exception& e) {
      throw IntegrityError(
          fmt::format("metadata line {} is malformed: {}", line_no, e.what()));
    }
    ++bundle.pair_count;
  }
  return bundle;
}

std::string digest_tree(const fs::path& dir) {
  std::vector<fs::path> files;
  if (fs::exists(dir)) {
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
      if (entry.is_regular_file()) files.push_back(fs::relative(entry.path(), dir));
    }
  }
  std::sort(files.begin(), files.end());
  Sha256 h;
  for (const auto& rel : files) {
    h.update(rel.generic_string());
    h.update(std::string_view("\0", 1));
    h.update(sha256_file(dir / rel));
    h.update(std::string_view("\n", 1));
  }
  return h.hex();
}

std::string digest_files(const fs::path& base, std::span<const std::string> relative_paths) {
  Sha256 h;
  for (const auto& rel : relative_paths) {
    h.update(rel);
    h.update(std::string_view("\0", 1));
    const auto path = base / rel;
    h.update(fs::is_regular_file(path) ? sha256_file(path) : std::string("absent"));
    h.update(std::string_view("\n", 1));
  }
  return h.hex();
}

}  // namespace ccsr
