// Copyright 2026 The CCSR Authors
// SPDX-License-Identifier: Apache-2.0

#include "ccsr/generation.hpp"

#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "json.hpp"

#include "ccsr/digest.hpp"

namespace ccsr {

namespace fs = std::filesystem;
using nlohmann::json;

std::string generation_cache_key(std::string_view prompt_text, int n,
                                 Resolution resolution, std::string_view model_id,
                                 std::string_view run_salt) {
  // JSON framing keeps field boundaries unambiguous.
  const json key = json::array({std::string(prompt_text), n, resolution.width,
                                resolution.height, std::string(model_id),
                                std::string(run_salt)});
  return sha256_hex(key.dump());
}

namespace {

fs::path layout_path(const std::string& prompt_id, std::size_t index) {
  return fs::path("images") / prompt_id / fmt::format("{}.png", index);
}

std::optional<std::vector<ImageRef>> cache_lookup(const fs::path& entry,
                                                  const ArtifactStore& store,
                                                  Resolution resolution) {
  if (!fs::exists(entry)) return std::nullopt;
  try {
    const auto j = json::parse(read_text(entry));
    std::vector<ImageRef> refs;
    for (const auto& cid : j.at("content_ids")) {
      const auto id = cid.get<std::string>();
      if (!store.contains(id)) return std::nullopt;
      refs.push_back(ImageRef{id, resolution.width, resolution.height,
                              (fs::path("objects") / (id + ".png")).generic_string()});
    }
    return refs;
  } catch (const json::exception&) {
    return std::nullopt;
  }
}

}  // namespace

CandidateSet generate_candidates(const PromptRecord& prompt, int n,
                                 Resolution resolution, ImageGenerator& backend,
                                 ArtifactStore& store, const GenerationOptions& options) {
  if (n < 1) throw ArgumentError(fmt::format("n must be >= 1, got {}", n));

  CandidateSet set;
  set.prompt_id = prompt.prompt_id;
  set.n = n;
  set.resolution = resolution;

  fs::path cache_entry;
  std::optional<std::vector<ImageRef>> cached;
  if (!options.cache_dir.empty()) {
    cache_entry = options.cache_dir /
                  (generation_cache_key(prompt.text, n, resolution, backend.model_id(),
                                        options.run_salt) +
                   ".json");
    cached = cache_lookup(cache_entry, store, resolution);
  }

  std::vector<ImageRef> refs;
  if (cached) {
    refs = std::move(*cached);
  } else {
    GenerationRequest request;
    request.prompt = prompt.text;
    request.n = n;
    request.width = resolution.width;
    request.height = resolution.height;
    try {
      refs = backend.generate(request);
    } catch (const PartialGenerationError& e) {
      set.complete = false;
      set.failure = e.what();
      refs = e.completed();
    } catch (const BackendError& e) {
      set.complete = false;
      set.failure = e.what();
    }
    if (set.complete && !cache_entry.empty()) {
      json ids = json::array();
      for (const auto& r : refs) ids.push_back(r.content_id);
      write_atomic(cache_entry, json{{"content_ids", ids}}.dump());
    }
  }
  if (!set.complete) {
    spdlog::warn("generation for {} incomplete ({} of {} images): {}", prompt.prompt_id,
                 refs.size(), n, set.failure);
  }

  for (std::size_t i = 0; i < refs.size(); ++i) {
    set.images.push_back(store.materialize(refs[i], layout_path(prompt.prompt_id, i)));
  }
  return set;
}

ImageRef compose_grid(CandidateSet& set, int rows, int cols, ArtifactStore& store) {
  if (rows < 1 || cols < 1 || rows * cols != set.n) {
    throw ArgumentError(fmt::format("a {}x{} grid cannot hold {} candidates", rows,
                                    cols, set.n));
  }
  if (set.images.size() != static_cast<std::size_t>(set.n)) {
    throw ArgumentError(fmt::format("candidate set {} is incomplete", set.prompt_id));
  }
  const int w = set.resolution.width;
  const int h = set.resolution.height;
  Image grid(cols * w, rows * h);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const Image tile =
          store.load(set.images[static_cast<std::size_t>(r * cols + c)]);
      if (tile.width != w || tile.height != h) {
        throw ArgumentError(fmt::format("candidate {} of {} is {}x{}, expected {}x{}",
                                        r * cols + c, set.prompt_id, tile.width,
                                        tile.height, w, h));
      }
      blit(grid, tile, c * w, r * h);
    }
  }
  const auto ref = store.put(grid);
  set.grid_ref =
      store.materialize(ref, fs::path("images") / set.prompt_id / "grid.png");
  return *set.grid_ref;
}

std::vector<Image> split_grid(const Image& grid, int rows, int cols) {
  if (rows < 1 || cols < 1 || grid.width % cols != 0 || grid.height % rows != 0) {
    throw ArgumentError(fmt::format("{}x{} image does not split into a {}x{} grid",
                                    grid.width, grid.height, rows, cols));
  }
  const int w = grid.width / cols;
  const int h = grid.height / rows;
  std::vector<Image> tiles;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) tiles.push_back(crop(grid, c * w, r * h, w, h));
  }
  return tiles;
}

void write_candidates(const fs::path& file, std::span<const CandidateSet> sets) {
  std::string out;
  for (const auto& s : sets) {
    json ids = json::array();
    for (const auto& r : s.images) ids.push_back(r.content_id);
    json j{{"prompt_id", s.prompt_id},
           {"n", s.n},
           {"content_ids", ids},
           {"width", s.resolution.width},
           {"height", s.resolution.height},
           {"complete", s.complete}};
    j["grid"] = s.grid_ref ? json{{"content_id", s.grid_ref->content_id},
                                  {"width", s.grid_ref->width},
                                  {"height", s.grid_ref->height}}
                           : json(nullptr);
    if (!s.failure.empty()) j["failure"] = s.failure;
    out += j.dump();
    out += '\n';
  }
  write_atomic(file, out);
}

std::vector<CandidateSet> read_candidates(const fs::path& file) {
  std::vector<CandidateSet> out;
  std::istringstream in(read_text(file));
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = json::parse(line);
      CandidateSet s;
      s.prompt_id = j.at("prompt_id").get<std::string>();
      s.n = j.at("n").get<int>();
      s.resolution = {j.at("width").get<int>(), j.at("height").get<int>()};
      s.complete = j.at("complete").get<bool>();
      s.failure = j.value("failure", "");
      std::size_t k = 0;
      for (const auto& cid : j.at("content_ids")) {
        s.images.push_back(ImageRef{cid.get<std::string>(), s.resolution.width,
                                    s.resolution.height,
                                    layout_path(s.prompt_id, k++).generic_string()});
      }
      if (!j.at("grid").is_null()) {
        const auto& g = j.at("grid");
        s.grid_ref = ImageRef{g.at("content_id").get<std::string>(), g.at("width").get<int>(),
                              g.at("height").get<int>(),
                              (fs::path("images") / s.prompt_id / "grid.png").generic_string()};
      }
      out.push_back(std::move(s));
    } catch (const json::exception& e) {
      throw IoError(fmt::format("{}:{}: {}", file.string(), line_no, e.what()));
    }
  }
  return out;
}

}  // namespace ccsr
