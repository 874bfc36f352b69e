// Copyright 2026 The CCSR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// JSON shapes shared by the call log, replay and HTTP backends.

#include <string>
#include <vector>

#include "json.hpp"

#include "ccsr/adapters.hpp"

namespace ccsr::wire {

nlohmann::json request_json(const ChatRequest& r);
nlohmann::json request_json(const GenerationRequest& r);
nlohmann::json request_json(const VqaRequest& r);
nlohmann::json request_json(const DetectRequest& r);
nlohmann::json request_json(const ScoreRequest& r);

/// SHA-256 of the canonical (sorted-key) dump of a request.
std::string digest(const nlohmann::json& request);

nlohmann::json image_refs_json(const std::vector<ImageRef>& refs);
std::vector<ImageRef> image_refs_from_json(const nlohmann::json& j);

nlohmann::json detections_json(const std::vector<Detection>& detections);
std::vector<Detection> detections_from_json(const nlohmann::json& j);

}  // namespace ccsr::wire
