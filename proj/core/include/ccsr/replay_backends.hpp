// Copyright 2026 The CCSR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Backends answering from a previously recorded transcript. A request that was
// never recorded fails with a non-retriable BackendError.

#include <filesystem>
#include <memory>
#include <string>

#include "ccsr/adapters.hpp"
#include "ccsr/call_log.hpp"

namespace ccsr {

class ReplayChat final : public ChatModel {
 public:
  explicit ReplayChat(std::shared_ptr<Transcript> transcript);
  std::string complete(const ChatRequest& request) override;

 private:
  std::shared_ptr<Transcript> transcript_;
};

/// Recorded generations list content ids; the pixels are imported from the
/// recording run's object store (`<transcript dir>/objects`).
class ReplayImageGenerator final : public ImageGenerator {
 public:
  ReplayImageGenerator(std::shared_ptr<Transcript> transcript,
                       std::filesystem::path source_objects,
                       std::shared_ptr<ArtifactStore> store,
                       std::string model_id);
  std::vector<ImageRef> generate(const GenerationRequest& request) override;
  std::string model_id() const override { return model_id_; }

 private:
  std::shared_ptr<Transcript> transcript_;
  std::filesystem::path source_objects_;
  std::shared_ptr<ArtifactStore> store_;
  std::string model_id_;
};

class ReplayVqa final : public VisualQa {
 public:
  explicit ReplayVqa(std::shared_ptr<Transcript> transcript);
  std::string answer(const VqaRequest& request) override;

 private:
  std::shared_ptr<Transcript> transcript_;
};

class ReplayDetector final : public ObjectDetector {
 public:
  explicit ReplayDetector(std::shared_ptr<Transcript> transcript);
  std::vector<Detection> detect(const DetectRequest& request) override;

 private:
  std::shared_ptr<Transcript> transcript_;
};

class ReplayScorer final : public ImageTextScorer {
 public:
  explicit ReplayScorer(std::shared_ptr<Transcript> transcript);
  double score(const ScoreRequest& request) override;

 private:
  std::shared_ptr<Transcript> transcript_;
};

}  // namespace ccsr
