// Copyright 2026 The CCSR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "ccsr/adapters.hpp"
#include "ccsr/dataset.hpp"

namespace ccsr {

enum class Precision { mixed16, full32 };
std::string_view to_string(Precision p);
Precision parse_precision(std::string_view text);

inline constexpr int kDefaultLoraRank = 4;

/// LoRA training hyperparameters handed to the external trainer.
struct TrainConfig {
  std::filesystem::path dataset_path;
  int resolution = 512;
  int epochs = 100;
  int batch_size = 18;
  double learning_rate = 1.0e-4;
  bool horizontal_flip = true;
  Precision precision = Precision::mixed16;
  int lora_rank = kDefaultLoraRank;
  std::string base_model_id;
  std::filesystem::path output_path;

  void validate() const;
  /// Flat `key=value` lines, one per field, fixed order.
  std::string serialize() const;
  static TrainConfig parse(std::string_view text);
  std::string digest() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct TrainOverrides {
  std::optional<int> resolution;
  std::optional<int> epochs;
  std::optional<int> batch_size;
  std::optional<double> learning_rate;
  std::optional<bool> horizontal_flip;
  std::optional<Precision> precision;
  std::optional<int> lora_rank;
};

/// Defaults first, overrides win; the result is validated.
TrainConfig build_train_config(const DatasetBundle& bundle,
                               const TrainOverrides& overrides,
                               std::string base_model_id,
                               std::filesystem::path output_path);

struct AdapterWeightsRef {
  std::filesystem::path path;
  std::string base_model_id;
  std::string config_digest;
  std::string weights_digest;
};

/// How to run the trainer. The command template receives shell-quoted
/// {dataset_path}, {config_path} and {output_path}.
struct TrainerInvocation {
  std::string command_template;
  /// Holds train_config.txt, trainer.log and adapter.json.
  std::filesystem::path work_dir;
  std::string weights_file = "pytorch_lora_weights.safetensors";
  /// Directory the command runs in; empty keeps the caller's.
  std::filesystem::path cwd;
};

/// Serializes the config, runs the trainer to completion and checks that the
/// config it was given is unchanged and the weights exist.
AdapterWeightsRef launch_training(const TrainConfig& config,
                                  const TrainerInvocation& invocation);

/// IntegrityError unless the weights match their digest and the config.
void verify_weights(const AdapterWeightsRef& ref, const TrainConfig& config);

void save_weights_ref(const std::filesystem::path& file,
                      const AdapterWeightsRef& ref);
AdapterWeightsRef load_weights_ref(const std::filesystem::path& file);

inline constexpr std::array<double, 3> kShowcaseLoraScales = {0.2, 0.4, 0.7};

/// Generator applying the adapter at `scale` in [0, 1]. Scale 0 behaves
/// exactly like `base`.
std::shared_ptr<ImageGenerator> scaled_backend(
    std::shared_ptr<ImageGenerator> base, const AdapterWeightsRef& weights,
    double scale);

}  // namespace ccsr
