// Copyright 2026 The CCSR Authors
// SPDX-License-Identifier: Apache-2.0

#include "ccsr/replay_backends.hpp"

#include <fmt/format.h>

#include "ccsr/wire.hpp"

namespace ccsr {

namespace {

nlohmann::json lookup(Transcript& transcript, BackendKind kind,
                      const nlohmann::json& request) {
  const auto digest = wire::digest(request);
  auto response = transcript.next(kind, digest);
  if (!response) {
    throw BackendError(fmt::format("{} has no recorded {} response for request {}",
                                   transcript.file().string(), to_string(kind), digest),
                       false);
  }
  return *response;
}

}  // namespace

ReplayChat::ReplayChat(std::shared_ptr<Transcript> transcript)
    : transcript_(std::move(transcript)) {}

std::string ReplayChat::complete(const ChatRequest& request) {
  return lookup(*transcript_, BackendKind::chat, wire::request_json(request))
      .get<std::string>();
}

ReplayImageGenerator::ReplayImageGenerator(std::shared_ptr<Transcript> transcript,
                                           std::filesystem::path source_objects,
                                           std::shared_ptr<ArtifactStore> store,
                                           std::string model_id)
    : transcript_(std::move(transcript)),
      source_objects_(std::move(source_objects)),
      store_(std::move(store)),
      model_id_(std::move(model_id)) {}

std::vector<ImageRef> ReplayImageGenerator::generate(const GenerationRequest& request) {
  auto refs = wire::image_refs_from_json(
      lookup(*transcript_, BackendKind::text2image, wire::request_json(request)));
  for (auto& ref : refs) {
    if (!store_->contains(ref.content_id)) {
      ref = store_->import_object(source_objects_ / (ref.content_id + ".png"),
                                  ref.content_id);
    }
  }
  return refs;
}

ReplayVqa::ReplayVqa(std::shared_ptr<Transcript> transcript)
    : transcript_(std::move(transcript)) {}

std::string ReplayVqa::answer(const VqaRequest& request) {
  return lookup(*transcript_, BackendKind::vqa, wire::request_json(request))
      .get<std::string>();
}

ReplayDetector::ReplayDetector(std::shared_ptr<Transcript> transcript)
    : transcript_(std::move(transcript)) {}

std::vector<Detection> ReplayDetector::detect(const DetectRequest& request) {
  return wire::detections_from_json(
      lookup(*transcript_, BackendKind::detector, wire::request_json(request)));
}

ReplayScorer::ReplayScorer(std::shared_ptr<Transcript> transcript)
    : transcript_(std::move(transcript)) {}

double ReplayScorer::score(const ScoreRequest& request) {
  return lookup(*transcript_, BackendKind::scorer, wire::request_json(request))
      .get<double>();
}

}  // namespace ccsr
