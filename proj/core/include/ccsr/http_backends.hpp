// Copyright 2026 The CCSR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// HTTP clients for remote model servers.
//
//   chat        POST <base>/v1/chat/completions   (OpenAI-compatible)
//   text2image  POST <base>/generate  {prompt, n, width, height, seed?,
//                                      adapter?: {path, digest, scale}}
//                                  -> {images: [base64 png, ...]}
//   vqa         POST <base>/vqa       {image: base64 png, question} -> {answer}
//   detector    POST <base>/detect    {image, classes}
//                                  -> {detections: [{label, confidence,
//                                                    bbox: [x, y, w, h]}]}
//   scorer      POST <base>/score     {image, text} -> {score}
//
// Connection failures and 5xx responses are retriable; 4xx are not.

#include <memory>
#include <string>

#include "ccsr/adapters.hpp"

namespace ccsr {

class HttpTransport;

class HttpChat final : public ChatModel {
 public:
  explicit HttpChat(const BackendDescriptor& descriptor);
  ~HttpChat() override;
  std::string complete(const ChatRequest& request) override;

 private:
  std::string model_id_;
  std::unique_ptr<HttpTransport> transport_;
};

class HttpImageGenerator final : public ImageGenerator {
 public:
  HttpImageGenerator(const BackendDescriptor& descriptor,
                     std::shared_ptr<ArtifactStore> store);
  ~HttpImageGenerator() override;
  std::vector<ImageRef> generate(const GenerationRequest& request) override;
  std::string model_id() const override { return model_id_; }

 private:
  std::string model_id_;
  std::shared_ptr<ArtifactStore> store_;
  std::unique_ptr<HttpTransport> transport_;
};

class HttpVqa final : public VisualQa {
 public:
  HttpVqa(const BackendDescriptor& descriptor,
          std::shared_ptr<ArtifactStore> store);
  ~HttpVqa() override;
  std::string answer(const VqaRequest& request) override;

 private:
  std::shared_ptr<ArtifactStore> store_;
  std::unique_ptr<HttpTransport> transport_;
};

class HttpDetector final : public ObjectDetector {
 public:
  HttpDetector(const BackendDescriptor& descriptor,
               std::shared_ptr<ArtifactStore> store);
  ~HttpDetector() override;
  std::vector<Detection> detect(const DetectRequest& request) override;

 private:
  std::shared_ptr<ArtifactStore> store_;
  std::unique_ptr<HttpTransport> transport_;
};

class HttpScorer final : public ImageTextScorer {
 public:
  HttpScorer(const BackendDescriptor& descriptor,
             std::shared_ptr<ArtifactStore> store);
  ~HttpScorer() override;
  double score(const ScoreRequest& request) override;

 private:
  std::shared_ptr<ArtifactStore> store_;
  std::unique_ptr<HttpTransport> transport_;
};

}  // namespace ccsr
