// Copyright 2026 The CCSR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Deterministic stand-ins for the five model capabilities. Every output is a
// pure function of the request, the configured seed and the optional script.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ccsr/adapters.hpp"

namespace ccsr {

/// Scripted responses. Keys for vqa/detector/scorer are image content ids;
/// the vqa table additionally accepts "*" as a wildcard image.
struct MockScript {
  struct ChatEntry {
    std::optional<std::string> system_prompt;
    std::string user_prompt;
    std::string response;
  };

  std::vector<ChatEntry> chat;
  // content_id -> question_id -> raw answer
  std::map<std::string, std::map<std::string, std::string>> vqa;
  // Probability that an unscripted default answer is flipped.
  double vqa_noise = 0.0;
  // content_id -> label -> box confidences
  std::map<std::string, std::map<std::string, std::vector<double>>> detector;
  // content_id -> text -> score
  std::map<std::string, std::map<std::string, double>> scorer;

  static MockScript load(const std::filesystem::path& file);
};

using MockScriptPtr = std::shared_ptr<const MockScript>;

/// Writes class-conditioned keyword prompts when asked for "<k> ... prompts
/// for <Class>"; otherwise returns a seeded pseudo-sentence.
class MockChat final : public ChatModel {
 public:
  MockChat(std::uint64_t seed, MockScriptPtr script = nullptr);
  std::string complete(const ChatRequest& request) override;

 private:
  std::uint64_t seed_;
  MockScriptPtr script_;
};

/// Renders procedural images (gradient plus rectangles). Unseeded requests
/// derive from the backend seed, which acts as the run salt.
class MockImageGenerator final : public ImageGenerator {
 public:
  MockImageGenerator(std::uint64_t seed, std::string model_id,
                     std::shared_ptr<ArtifactStore> store);
  std::vector<ImageRef> generate(const GenerationRequest& request) override;
  std::string model_id() const override { return model_id_; }

  /// The k-th image of a request, without touching the store.
  Image render(const GenerationRequest& request, int k) const;

 private:
  std::uint64_t seed_;
  std::string model_id_;
  std::shared_ptr<ArtifactStore> store_;
};

/// Script lookup by (content id, question id); falls back to "Yes." for
/// positive and "No." for negative questions (optionally noisy), and answers
/// "Nan" when the question's dependency would be answered "no".
class MockVqa final : public VisualQa {
 public:
  MockVqa(std::uint64_t seed, MockScriptPtr script = nullptr);
  std::string answer(const VqaRequest& request) override;

 private:
  std::string answer_for(const std::string& content_id,
                         const QuestionMeta& meta) const;

  std::uint64_t seed_;
  MockScriptPtr script_;
};

/// Scripted images report exactly their scripted boxes; other images get
/// one box per requested class with a hashed confidence.
class MockDetector final : public ObjectDetector {
 public:
  MockDetector(std::uint64_t seed, MockScriptPtr script = nullptr);
  std::vector<Detection> detect(const DetectRequest& request) override;

  /// Confidence the unscripted path assigns to (content id, label).
  double hashed_confidence(const std::string& content_id,
                           const std::string& label) const;

 private:
  std::uint64_t seed_;
  MockScriptPtr script_;
};

class MockScorer final : public ImageTextScorer {
 public:
  MockScorer(std::uint64_t seed, MockScriptPtr script = nullptr);
  double score(const ScoreRequest& request) override;

 private:
  std::uint64_t seed_;
  MockScriptPtr script_;
};

}  // namespace ccsr
