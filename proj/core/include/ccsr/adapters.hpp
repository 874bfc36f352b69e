// Copyright 2026 The CCSR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ccsr/errors.hpp"
#include "ccsr/store.hpp"

namespace ccsr {

class CallLog;
class Transcript;

enum class BackendKind { chat, text2image, vqa, detector, scorer };

std::string_view to_string(BackendKind kind);
BackendKind parse_backend_kind(std::string_view text);

struct SamplingParams {
  double temperature = 0.7;
  double top_p = 0.95;
  int max_tokens = 1024;

  /// Throws ArgumentError when temperature < 0, top_p outside (0,1] or
  /// max_tokens < 1.
  void validate() const;
  friend bool operator==(const SamplingParams&, const SamplingParams&) = default;
};

struct BBox {
  double x = 0;
  double y = 0;
  double w = 0;
  double h = 0;
};

struct Detection {
  std::string class_label;
  double confidence = 0;
  BBox bbox;
};

/// Where a capability is served from. `endpoint` is "mock", "replay:<path to
/// transcript.jsonl>" or an http:// base URL. `seed` and `script` only apply
/// to mock backends.
struct BackendDescriptor {
  BackendKind kind = BackendKind::chat;
  std::string endpoint = "mock";
  std::string model_id;
  double timeout_seconds = 120.0;
  int retry_limit = 3;
  int retry_backoff_ms = 200;
  std::uint64_t seed = 0;
  std::string script;
};

struct ChatRequest {
  std::string system_prompt;
  std::string user_prompt;
  SamplingParams params;
};

/// Low-rank adapter applied by the generator at `scale`. The weights path is
/// transport detail; the digest identifies the adapter.
struct AdapterSpec {
  std::string weights_path;
  std::string weights_digest;
  double scale = 1.0;
};

struct GenerationRequest {
  std::string prompt;
  int n = 1;
  int width = 512;
  int height = 512;
  std::optional<std::int64_t> seed;
  std::optional<AdapterSpec> adapter;
};

/// Battery metadata forwarded to backends that can use it (the mock VQA does;
/// remote models only see the question text).
struct QuestionMeta {
  std::string question_id;
  bool positive = true;
};

struct VqaRequest {
  ImageRef image;
  std::string question;
  std::optional<QuestionMeta> question_meta;
  std::optional<QuestionMeta> depends_on;
};

struct DetectRequest {
  ImageRef image;
  std::vector<std::string> class_names;
};

struct ScoreRequest {
  ImageRef image;
  std::string text;
};

/// Generation died after producing some images; `completed` holds them in
/// generation order.
class PartialGenerationError : public BackendError {
 public:
  PartialGenerationError(const std::string& message,
                         std::vector<ImageRef> completed, bool retriable)
      : BackendError(message, retriable), completed_(std::move(completed)) {}
  const std::vector<ImageRef>& completed() const noexcept { return completed_; }

 private:
  std::vector<ImageRef> completed_;
};

class ChatModel {
 public:
  virtual ~ChatModel() = default;
  virtual std::string complete(const ChatRequest& request) = 0;
};

class ImageGenerator {
 public:
  virtual ~ImageGenerator() = default;
  virtual std::vector<ImageRef> generate(const GenerationRequest& request) = 0;
  virtual std::string model_id() const = 0;
};

class VisualQa {
 public:
  virtual ~VisualQa() = default;
  virtual std::string answer(const VqaRequest& request) = 0;
};

class ObjectDetector {
 public:
  virtual ~ObjectDetector() = default;
  virtual std::vector<Detection> detect(const DetectRequest& request) = 0;
};

class ImageTextScorer {
 public:
  virtual ~ImageTextScorer() = default;
  virtual double score(const ScoreRequest& request) = 0;
};

struct RetryPolicy {
  int retry_limit = 3;
  std::chrono::milliseconds initial_backoff{200};
  double multiplier = 2.0;
  std::chrono::milliseconds max_backoff{10'000};

  static RetryPolicy from(const BackendDescriptor& descriptor);
};

// Guards add request validation, bounded retries with exponential backoff,
// response validation and call logging around any backend. `log` may be null.
std::shared_ptr<ChatModel> guard(std::shared_ptr<ChatModel> inner,
                                 RetryPolicy policy,
                                 std::shared_ptr<CallLog> log);
std::shared_ptr<ImageGenerator> guard(std::shared_ptr<ImageGenerator> inner,
                                      RetryPolicy policy,
                                      std::shared_ptr<CallLog> log);
std::shared_ptr<VisualQa> guard(std::shared_ptr<VisualQa> inner,
                                RetryPolicy policy,
                                std::shared_ptr<CallLog> log);
std::shared_ptr<ObjectDetector> guard(std::shared_ptr<ObjectDetector> inner,
                                      RetryPolicy policy,
                                      std::shared_ptr<CallLog> log);
std::shared_ptr<ImageTextScorer> guard(std::shared_ptr<ImageTextScorer> inner,
                                       RetryPolicy policy,
                                       std::shared_ptr<CallLog> log);

/// Rejects detections outside [0,1] confidence, outside the image, or for
/// labels that were not requested.
void validate_detections(std::span<const Detection> detections,
                         const DetectRequest& request);

// Convenience front ends mirroring the adapter contract.
std::string chat_complete(ChatModel& backend, std::string_view system_prompt,
                          std::string_view user_prompt,
                          const SamplingParams& params);
std::vector<ImageRef> generate_images(ImageGenerator& backend,
                                      std::string_view prompt, int n,
                                      int width, int height,
                                      std::optional<std::int64_t> seed = {});
std::string vqa_answer(VisualQa& backend, const ImageRef& image,
                       std::string_view question_prompt);
std::vector<Detection> detect(ObjectDetector& backend, const ImageRef& image,
                              std::span<const std::string> class_names);
double image_text_score(ImageTextScorer& backend, const ImageRef& image,
                        std::string_view text);

struct BackendContext {
  std::shared_ptr<ArtifactStore> store;
  std::shared_ptr<CallLog> log;
  /// Base directory for relative script / transcript paths.
  std::filesystem::path base_dir;
};

// Factories return guarded backends. Kind mismatch or an unsupported
// endpoint scheme raises ConfigError.
std::shared_ptr<ChatModel> make_chat(const BackendDescriptor& d,
                                     const BackendContext& ctx);
std::shared_ptr<ImageGenerator> make_image_generator(
    const BackendDescriptor& d, const BackendContext& ctx);
std::shared_ptr<VisualQa> make_vqa(const BackendDescriptor& d,
                                   const BackendContext& ctx);
std::shared_ptr<ObjectDetector> make_detector(const BackendDescriptor& d,
                                              const BackendContext& ctx);
std::shared_ptr<ImageTextScorer> make_scorer(const BackendDescriptor& d,
                                             const BackendContext& ctx);

}  // namespace ccsr
