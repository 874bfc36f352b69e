// Copyright 2026 The CCSR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ccsr/adapters.hpp"
#include "ccsr/promptgen.hpp"

namespace ccsr {

struct Resolution {
  int width = 512;
  int height = 512;
  friend bool operator==(const Resolution&, const Resolution&) = default;
};

/// The N candidates for one prompt, in generation order.
struct CandidateSet {
  std::string prompt_id;
  std::vector<ImageRef> images;
  int n = 0;
  Resolution resolution;
  std::optional<ImageRef> grid_ref;
  bool complete = true;
  std::string failure;
};

struct GenerationOptions {
  std::string run_salt;
  /// Cache entries live here; empty disables caching.
  std::filesystem::path cache_dir;
};

/// Key over (prompt text, n, resolution, model id, run salt).
std::string generation_cache_key(std::string_view prompt_text, int n,
                                 Resolution resolution,
                                 std::string_view model_id,
                                 std::string_view run_salt);

/// Generates unseeded candidates and lays them out as
/// `images/<prompt_id>/<index>.png`. A backend failure yields an incomplete
/// set carrying whatever was produced.
CandidateSet generate_candidates(const PromptRecord& prompt, int n,
                                 Resolution resolution, ImageGenerator& backend,
                                 ArtifactStore& store,
                                 const GenerationOptions& options = {});

/// Tiles the candidates row-major into one (cols*w) x (rows*h) image and
/// records it as the set's grid_ref.
ImageRef compose_grid(CandidateSet& set, int rows, int cols,
                      ArtifactStore& store);

/// Inverse of compose_grid.
std::vector<Image> split_grid(const Image& grid, int rows, int cols);

void write_candidates(const std::filesystem::path& file,
                      std::span<const CandidateSet> sets);
std::vector<CandidateSet> read_candidates(const std::filesystem::path& file);

}  // namespace ccsr
