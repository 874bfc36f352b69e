// Copyright 2026 The CCSR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ccsr/adapters.hpp"
#include "ccsr/generation.hpp"
#include "ccsr/judge.hpp"
#include "ccsr/promptgen.hpp"

namespace ccsr {

enum class TieBreak { lowest_index, highest_score };
std::string_view to_string(TieBreak t);
TieBreak parse_tie_break(std::string_view text);

struct FilterPolicy {
  double confidence_threshold = 0.6;
  TieBreak tie_break = TieBreak::lowest_index;

  void validate() const;
};

struct OptimalPair {
  std::string prompt_id;
  std::string prompt_text;
  ImageRef image;
  std::size_t image_index = 0;
  int score_total = 0;
  double detection_confidence = 0;
  std::string class_name;
};

/// Detector outcome for one best-scoring candidate. No confidence means the
/// class was not detected (or the detector failed).
struct CandidateConfidence {
  std::size_t image_index = 0;
  int score_total = 0;
  std::optional<double> max_confidence;
};

/// Threshold first, then argmax confidence; equal confidences resolved by the
/// policy (lowest index, or higher score then lowest index).
std::optional<std::size_t> select_by_confidence(
    std::span<const CandidateConfidence> candidates, const FilterPolicy& policy);

struct FilterOutcome {
  std::optional<OptimalPair> pair;
  std::vector<CandidateConfidence> confidences;
  std::size_t detector_failures = 0;
};

/// Detects `prompt.class_name` on every best index, keeps each image's
/// highest box confidence and returns the selected pair, if any survives.
FilterOutcome filter_and_select(std::span<const std::size_t> best_indices,
                                const CandidateSet& set,
                                const PromptRecord& prompt, int score_total,
                                const FilterPolicy& policy,
                                ObjectDetector& detector);

enum class RejectionReason { no_detection, judging_excluded };
std::string_view to_string(RejectionReason r);

struct Rejection {
  std::string prompt_id;
  RejectionReason reason = RejectionReason::no_detection;
  std::string detail;
};

/// Everything extract_pairs needs, keyed by prompt id.
struct RunState {
  std::vector<PromptRecord> prompts;
  std::map<std::string, CandidateSet> candidates;
  std::map<std::string, JudgedSet> judgments;
};

struct Extraction {
  std::vector<OptimalPair> pairs;
  std::vector<Rejection> rejections;
  /// prompt_id -> per-candidate confidences, for the detection log.
  std::map<std::string, std::vector<CandidateConfidence>> confidences;
};

/// At most one pair per prompt; pairs and rejections partition the prompts
/// and are ordered by prompt id.
Extraction extract_pairs(const RunState& state, const FilterPolicy& policy,
                         ObjectDetector& detector, std::size_t parallelism = 1);

void write_pairs(const std::filesystem::path& file,
                 std::span<const OptimalPair> pairs);
std::vector<OptimalPair> read_pairs(const std::filesystem::path& file,
                                    const ArtifactStore& store);
void write_rejections(const std::filesystem::path& file,
                      std::span<const Rejection> rejections);
std::vector<Rejection> read_rejections(const std::filesystem::path& file);

}  // namespace ccsr
