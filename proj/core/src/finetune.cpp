// Copyright 2026 The CCSR Authors
// SPDX-License-Identifier: Apache-2.0

#include "ccsr/finetune.hpp"

#include <cmath>
#include <map>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "json.hpp"

#include "ccsr/digest.hpp"
#include "ccsr/process.hpp"

namespace ccsr {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(Precision p) {
  return p == Precision::mixed16 ? "mixed-16" : "full-32";
}

Precision parse_precision(std::string_view text) {
  if (text == "mixed-16") return Precision::mixed16;
  if (text == "full-32") return Precision::full32;
  throw ValidationError(fmt::format("precision must be mixed-16 or full-32, got '{}'", text));
}

void TrainConfig::validate() const {
  if (resolution <= 0) throw ValidationError(fmt::format("resolution {} must be > 0", resolution));
  if (epochs < 1) throw ValidationError(fmt::format("epochs {} must be >= 1", epochs));
  if (batch_size < 1) {
    throw ValidationError(fmt::format("batch_size {} must be >= 1", batch_size));
  }
  if (!(learning_rate > 0) || !std::isfinite(learning_rate)) {
    throw ValidationError(fmt::format("learning_rate {} must be > 0", learning_rate));
  }
  if (lora_rank < 1) throw ValidationError(fmt::format("lora_rank {} must be >= 1", lora_rank));
  if (dataset_path.empty()) throw ValidationError("dataset_path is empty");
  if (output_path.empty()) throw ValidationError("output_path is empty");
}

std::string TrainConfig::serialize() const {
  std::string out;
  const auto line = [&](std::string_view key, const auto& value) {
    out += fmt::format("{}={}\n", key, value);
  };
  line("dataset_path", dataset_path.string());
  line("resolution", resolution);
  line("epochs", epochs);
  line("batch_size", batch_size);
  line("learning_rate", learning_rate);
  line("horizontal_flip", horizontal_flip ? "true" : "false");
  line("precision", to_string(precision));
  line("lora_rank", lora_rank);
  line("base_model_id", base_model_id);
  line("output_path", output_path.string());
  return out;
}

TrainConfig TrainConfig::parse(std::string_view text) {
  std::map<std::string, std::string> kv;
  std::istringstream in{std::string(text)};
  for (std::string line; std::getline(in, line);) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ValidationError(fmt::format("train config line without '=': {}", line));
    }
    if (!kv.emplace(line.substr(0, eq), line.substr(eq + 1)).second) {
      throw ValidationError(fmt::format("duplicate train config key {}", line.substr(0, eq)));
    }
  }
  const auto take = [&](const char* key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw ValidationError(fmt::format("train config lacks {}", key));
    auto v = it->second;
    kv.erase(it);
    return v;
  };
  const auto to_int = [](const std::string& key, const std::string& v) {
    try {
      std::size_t used = 0;
      const int n = std::stoi(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return n;
    } catch (const std::exception&) {
      throw ValidationError(fmt::format("{}: '{}' is not an integer", key, v));
    }
  };
  TrainConfig c;
  c.dataset_path = take("dataset_path");
  c.resolution = to_int("resolution", take("resolution"));
  c.epochs = to_int("epochs", take("epochs"));
  c.batch_size = to_int("batch_size", take("batch_size"));
  const auto lr = take("learning_rate");
  try {
    c.learning_rate = std::stod(lr);
  } catch (const std::exception&) {
    throw ValidationError(fmt::format("learning_rate: '{}' is not a number", lr));
  }
  const auto flip = take("horizontal_flip");
  if (flip != "true" && flip != "false") {
    throw ValidationError(fmt::format("horizontal_flip: '{}' is not a boolean", flip));
  }
  c.horizontal_flip = flip == "true";
  c.precision = parse_precision(take("precision"));
  c.lora_rank = to_int("lora_rank", take("lora_rank"));
  c.base_model_id = take("base_model_id");
  c.output_path = take("output_path");
  if (!kv.empty()) {
    throw ValidationError(fmt::format("unknown train config key {}", kv.begin()->first));
  }
  c.validate();
  return c;
}

std::string TrainConfig::digest() const { return sha256_hex(serialize()); }

TrainConfig build_train_config(const DatasetBundle& bundle, const TrainOverrides& overrides,
                               std::string base_model_id, fs::path output_path) {
  open_bundle(bundle.root);
  TrainConfig c;
  c.dataset_path = bundle.root;
  c.base_model_id = std::move(base_model_id);
  c.output_path = std::move(output_path);
  if (overrides.resolution) c.resolution = *overrides.resolution;
  if (overrides.epochs) c.epochs = *overrides.epochs;
  if (overrides.batch_size) c.batch_size = *overrides.batch_size;
  if (overrides.learning_rate) c.learning_rate = *overrides.learning_rate;
  if (overrides.horizontal_flip) c.horizontal_flip = *overrides.horizontal_flip;
  if (overrides.precision) c.precision = *overrides.precision;
  if (overrides.lora_rank) c.lora_rank = *overrides.lora_rank;
  c.validate();
  return c;
}

namespace {

void replace_all(std::string& text, std::string_view from, std::string_view to) {
  for (std::size_t pos = text.find(from); pos != std::string::npos;
       pos = text.find(from, pos + to.size())) {
    text.replace(pos, from.size(), to);
  }
}

}  // namespace

AdapterWeightsRef launch_training(const TrainConfig& config,
                                  const TrainerInvocation& invocation) {
  config.validate();
  if (invocation.command_template.empty()) {
    throw ConfigError("no trainer command configured (train.command)");
  }
  fs::create_directories(invocation.work_dir);
  fs::create_directories(config.output_path);
  const auto config_path = invocation.work_dir / "train_config.txt";
  const auto log_path = invocation.work_dir / "trainer.log";
  write_atomic(config_path, config.serialize());
  const auto config_digest = sha256_file(config_path);
  fs::remove(log_path);

  std::string command = invocation.command_template;
  replace_all(command, "{dataset_path}", shell_quote(config.dataset_path.string()));
  replace_all(command, "{config_path}", shell_quote(config_path.string()));
  replace_all(command, "{output_path}", shell_quote(config.output_path.string()));
  if (!invocation.cwd.empty()) {
    command = fmt::format("cd {} && {}", shell_quote(invocation.cwd.string()), command);
  }

  spdlog::info("launching trainer: {}", command);
  const int status = run_shell(command, log_path);
  if (status == 126 || status == 127) {
    throw ConfigError(fmt::format("trainer command not runnable (exit {}): {}\n{}", status,
                                  command, tail_lines(log_path, 5)));
  }
  if (status != 0) {
    throw TrainingError(fmt::format("trainer exited with status {}", status),
                        tail_lines(log_path, 20));
  }
  if (sha256_file(config_path) != config_digest) {
    throw IntegrityError(
        fmt::format("{} changed while the trainer ran", config_path.string()));
  }
  const auto weights = config.output_path / invocation.weights_file;
  if (!fs::is_regular_file(weights)) {
    throw TrainingError(
        fmt::format("trainer succeeded but wrote no {}", weights.string()),
        tail_lines(log_path, 20));
  }
  AdapterWeightsRef ref{weights, config.base_model_id, config.digest(), sha256_file(weights)};
  save_weights_ref(invocation.work_dir / "adapter.json", ref);
  return ref;
}

void verify_weights(const AdapterWeightsRef& ref, const TrainConfig& config) {
  if (ref.config_digest != config.digest()) {
    throw IntegrityError("adapter weights were trained with a different config");
  }
  if (!fs::is_regular_file(ref.path)) {
    throw IntegrityError(fmt::format("adapter weights {} are missing", ref.path.string()));
  }
  if (sha256_file(ref.path) != ref.weights_digest) {
    throw IntegrityError(fmt::format("adapter weights {} do not match their digest",
                                     ref.path.string()));
  }
}

void save_weights_ref(const fs::path& file, const AdapterWeightsRef& ref) {
  const json j = {{"path", ref.path.string()},
                  {"base_model_id", ref.base_model_id},
                  {"config_digest", ref.config_digest},
                  {"weights_digest", ref.weights_digest}};
  write_atomic(file, j.dump(2) + "\n");
}

AdapterWeightsRef load_weights_ref(const fs::path& file) {
  try {
    const auto j = json::parse(read_text(file));
    return AdapterWeightsRef{j.at("path").get<std::string>(),
                             j.at("base_model_id").get<std::string>(),
                             j.at("config_digest").get<std::string>(),
                             j.at("weights_digest").get<std::string>()};
  } catch (const json::exception& e) {
    throw IoError(fmt::format("{}: {}", file.string(), e.what()));
  }
}

namespace {

class ScaledGenerator final : public ImageGenerator {
 public:
  ScaledGenerator(std::shared_ptr<ImageGenerator> base, AdapterWeightsRef weights,
                  double scale)
      : base_(std::move(base)), weights_(std::move(weights)), scale_(scale) {}

  std::vector<ImageRef> generate(const GenerationRequest& request) override {
    // Zero scale is the base model, so the request goes through untouched.
    if (scale_ == 0.0) return base_->generate(request);
    GenerationRequest scaled = request;
    scaled.adapter = AdapterSpec{weights_.path.string(), weights_.weights_digest, scale_};
    return base_->generate(scaled);
  }

  std::string model_id() const override {
    if (scale_ == 0.0) return base_->model_id();
    return fmt::format("{}+lora:{}@{}", base_->model_id(),
                       weights_.weights_digest.substr(0, 12), scale_);
  }

 private:
  std::shared_ptr<ImageGenerator> base_;
  AdapterWeightsRef weights_;
  double scale_;
};

}  // namespace

std::shared_ptr<ImageGenerator> scaled_backend(std::shared_ptr<ImageGenerator> base,
                                               const AdapterWeightsRef& weights,
                                               double scale) {
  if (!(scale >= 0.0 && scale <= 1.0)) {
    throw ArgumentError(fmt::format("LoRA scale {} is outside [0, 1]", scale));
  }
  if (!base) throw ArgumentError("scaled_backend needs a base generator");
  return std::make_shared<ScaledGenerator>(std::move(base), weights, scale);
}

}  // namespace ccsr
