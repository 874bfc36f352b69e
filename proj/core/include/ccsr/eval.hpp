// Copyright 2026 The CCSR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ccsr/adapters.hpp"
#include "ccsr/finetune.hpp"
#include "ccsr/generation.hpp"
#include "ccsr/promptgen.hpp"

namespace ccsr {

inline constexpr double kDefaultTieEpsilon = 0.01;

struct ScoreSample {
  std::string prompt_id;
  std::int64_t seed = 0;
  std::string model_id;
  std::optional<double> lora_scale;
  /// nullopt marks a sample lost to a backend failure.
  std::optional<double> clip_score;

  bool missing() const noexcept { return !clip_score.has_value(); }
};

struct WinRateReport {
  std::string model_a;
  std::string model_b;
  std::size_t wins = 0;
  std::size_t losses = 0;
  std::size_t ties = 0;
  /// Keys skipped because either side was missing.
  std::size_t dropped = 0;
  double win_rate = 0;
  double win_plus_tie_rate = 0;
  double tie_epsilon = kDefaultTieEpsilon;

  std::size_t total() const noexcept { return wins + losses + ties; }
  friend bool operator==(const WinRateReport&, const WinRateReport&) = default;
};

enum class Outcome { win, loss, tie };

/// d = a - b. Tie when |d| < epsilon (or d == 0), win when d >= epsilon,
/// loss when d <= -epsilon.
Outcome classify_difference(double a, double b, double tie_epsilon);

struct ScoreOptions {
  Resolution resolution;
  std::size_t parallelism = 1;
  /// Defaults to the backend's model id.
  std::string model_id;
  std::optional<double> lora_scale;
};

/// One seeded generation and score per (prompt, seed), prompt-major.
std::vector<ScoreSample> score_model(std::span<const PromptRecord> prompts,
                                     std::span<const std::int64_t> seeds,
                                     ImageGenerator& backend,
                                     ImageTextScorer& scorer,
                                     const ScoreOptions& options = {});

/// Pairs samples by (prompt_id, seed). ArgumentError lists keys present on
/// one side only.
WinRateReport compare(std::span<const ScoreSample> a,
                      std::span<const ScoreSample> b,
                      double tie_epsilon = kDefaultTieEpsilon);

struct CurvePoint {
  double scale = 0;
  /// Mean over the non-missing seeds; nullopt when every seed failed.
  std::optional<double> mean_score;
};

struct ScaleCurve {
  std::string prompt_id;
  std::vector<CurvePoint> points;
};

/// Per prompt, the mean score at each scale (ascending, within [0,1]).
std::vector<ScaleCurve> sweep_scales(std::span<const PromptRecord> prompts,
                                     std::span<const double> scales,
                                     std::span<const std::int64_t> seeds,
                                     std::shared_ptr<ImageGenerator> base,
                                     const AdapterWeightsRef& weights,
                                     ImageTextScorer& scorer,
                                     const ScoreOptions& options = {});

struct ReportArtifacts {
  std::filesystem::path summary;
  /// Empty when there were no curves.
  std::filesystem::path curves;
};

/// Writes `winrate.json` and, when curves exist, `curves.csv`
/// (prompt_id,scale,mean_score).
ReportArtifacts render_report(const WinRateReport& report,
                              std::span<const ScaleCurve> curves,
                              const std::filesystem::path& dir);

WinRateReport read_report(const std::filesystem::path& summary);
std::vector<ScaleCurve> read_curves(const std::filesystem::path& csv);

void write_samples(const std::filesystem::path& file,
                   std::span<const ScoreSample> samples);
std::vector<ScoreSample> read_samples(const std::filesystem::path& file);

}  // namespace ccsr
