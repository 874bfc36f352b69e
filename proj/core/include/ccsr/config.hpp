// Copyright 2026 The CCSR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ccsr/adapters.hpp"
#include "ccsr/dataset.hpp"
#include "ccsr/detectfilter.hpp"
#include "ccsr/finetune.hpp"
#include "ccsr/generation.hpp"
#include "ccsr/judge.hpp"
#include "ccsr/promptgen.hpp"

namespace ccsr {

struct GridSpec {
  int rows = 2;
  int cols = 5;
};

struct TrainSettings {
  /// Shell command template; see TrainerInvocation.
  std::string command;
  std::string weights_file = "pytorch_lora_weights.safetensors";
  TrainOverrides overrides;
};

struct EvalSettings {
  int validation_prompts = 50;
  int seeds = 4;
  std::int64_t seed_base = 0;
  double tie_epsilon = 0.01;
  /// Adapter scale of the fine-tuned model in the win-rate comparison.
  double lora_scale = 0.7;
  std::vector<double> sweep_scales = {0.0, 0.2, 0.4, 0.7, 1.0};
  int sweep_prompts = 3;

  std::vector<std::int64_t> seed_values() const;
};

/// Fully resolved run configuration.
struct RunConfig {
  std::string run_id = "run";
  std::filesystem::path output_root = "ccsr_out";
  std::string run_salt;
  std::size_t parallelism = 0;

  std::vector<ClassSeed> classes;

  std::string template_id = "default";
  std::filesystem::path template_dir;
  std::size_t token_budget = kDefaultTokenBudget;
  SamplingParams sampling;

  int n_candidates = 10;
  Resolution resolution;
  std::optional<GridSpec> grid;

  std::string battery_id = "default";
  std::filesystem::path battery_dir;
  ScoringRule scoring_rule = ScoringRule::plus_one;

  FilterPolicy filter;

  /// Indexed by BackendKind.
  std::array<BackendDescriptor, 5> backends;

  TrainSettings train;
  EvalSettings eval;

  /// Directory relative paths in the file were resolved against.
  std::filesystem::path base_dir;

  const BackendDescriptor& backend(BackendKind kind) const {
    return backends[static_cast<std::size_t>(kind)];
  }
  BackendDescriptor& backend(BackendKind kind) {
    return backends[static_cast<std::size_t>(kind)];
  }

  /// Canonical JSON dump of the whole resolved config.
  std::string canonical_json() const;
  /// Canonical JSON of the settings a stage consumes.
  std::string stage_json(Stage stage) const;
  std::string digest() const;
};

/// Defaults with no classes; validation requires at least one.
RunConfig default_config();

struct ConfigValidation {
  std::optional<RunConfig> config;
  std::vector<std::string> violations;

  bool ok() const noexcept { return config.has_value(); }
};

/// Parses and validates a JSON run configuration, reporting every violation.
/// CCSR_<KIND>_ENDPOINT environment variables override backend endpoints.
/// Throws IoError when the file cannot be read.
ConfigValidation validate_config(const std::filesystem::path& file);
ConfigValidation validate_config_text(const std::string& text,
                                      const std::filesystem::path& base_dir);

}  // namespace ccsr
