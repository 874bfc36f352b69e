// Copyright 2026 The CCSR Authors
// SPDX-License-Identifier: Apache-2.0

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

#include "ccsr/http_backends.hpp"

#include <fmt/format.h>

#include "json.hpp"

#include "ccsr/digest.hpp"
#include "ccsr/wire.hpp"

namespace ccsr {

using nlohmann::json;

/// Splits "http://host:port/prefix" into origin and path prefix. Every call
/// opens its own client, so concurrent calls share no connection state.
class HttpTransport {
 public:
  explicit HttpTransport(const BackendDescriptor& d) : kind_(d.kind) {
    const std::string& url = d.endpoint;
    const auto scheme_end = url.find("://");
    const auto path_start = url.find('/', scheme_end + 3);
    origin_ = url.substr(0, path_start);
    if (path_start != std::string::npos) prefix_ = url.substr(path_start);
    while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
    if (!httplib::Client(origin_).is_valid()) {
      throw ConfigError(fmt::format("invalid {} endpoint '{}'", to_string(kind_), url));
    }
    seconds_ = static_cast<time_t>(d.timeout_seconds);
    micros_ = static_cast<time_t>((d.timeout_seconds - static_cast<double>(seconds_)) * 1e6);
  }

  json post(const std::string& path, const json& body) {
    httplib::Client client(origin_);
    client.set_connection_timeout(seconds_, micros_);
    client.set_read_timeout(seconds_, micros_);
    client.set_write_timeout(seconds_, micros_);
    const auto full = prefix_ + path;
    auto res = client.Post(full, body.dump(), "application/json");
    if (!res) {
      throw BackendError(fmt::format("{} POST {}: {}", to_string(kind_), full,
                                     httplib::to_string(res.error())),
                         true);
    }
    if (res->status >= 500) {
      throw BackendError(fmt::format("{} POST {}: HTTP {}", to_string(kind_), full,
                                     res->status),
                         true);
    }
    if (res->status >= 400) {
      throw BackendError(fmt::format("{} POST {}: HTTP {}: {}", to_string(kind_), full,
                                     res->status, res->body.substr(0, 200)),
                         false);
    }
    try {
      return json::parse(res->body);
    } catch (const json::exception& e) {
      throw ValidationError(fmt::format("{} POST {}: malformed JSON response: {}",
                                        to_string(kind_), full, e.what()));
    }
  }

 private:
  BackendKind kind_;
  std::string origin_;
  std::string prefix_;
  time_t seconds_ = 0;
  time_t micros_ = 0;
};

namespace {

std::string encoded_image(const ArtifactStore& store, const ImageRef& ref) {
  return base64_encode(read_binary(store.object_path(ref.content_id)));
}

template <typename T>
T field(const json& j, const char* name, BackendKind kind) {
  try {
    return j.at(name).get<T>();
  } catch (const json::exception& e) {
    throw ValidationError(fmt::format("{} response lacks a valid '{}': {}",
                                      to_string(kind), name, e.what()));
  }
}

}  // namespace

HttpChat::HttpChat(const BackendDescriptor& d)
    : model_id_(d.model_id), transport_(std::make_unique<HttpTransport>(d)) {}
HttpChat::~HttpChat() = default;

std::string HttpChat::complete(const ChatRequest& request) {
  json body{{"model", model_id_},
            {"messages",
             json::array({{{"role", "system"}, {"content", request.system_prompt}},
                          {{"role", "user"}, {"content", request.user_prompt}}})},
            {"temperature", request.params.temperature},
            {"top_p", request.params.top_p},
            {"max_tokens", request.params.max_tokens}};
  const auto res = transport_->post("/v1/chat/completions", body);
  try {
    return res.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw ValidationError(fmt::format("chat response has no message content: {}", e.what()));
  }
}

HttpImageGenerator::HttpImageGenerator(const BackendDescriptor& d,
                                       std::shared_ptr<ArtifactStore> store)
    : model_id_(d.model_id),
      store_(std::move(store)),
      transport_(std::make_unique<HttpTransport>(d)) {}
HttpImageGenerator::~HttpImageGenerator() = default;

std::vector<ImageRef> HttpImageGenerator::generate(const GenerationRequest& request) {
  json body{{"model", model_id_},
            {"prompt", request.prompt},
            {"n", request.n},
            {"width", request.width},
            {"height", request.height}};
  if (request.seed) body["seed"] = *request.seed;
  if (request.adapter) {
    body["adapter"] = {{"path", request.adapter->weights_path},
                       {"digest", request.adapter->weights_digest},
                       {"scale", request.adapter->scale}};
  }
  const auto res = transport_->post("/generate", body);
  const auto images = field<std::vector<std::string>>(res, "images", BackendKind::text2image);
  std::vector<ImageRef> refs;
  for (const auto& b64 : images) {
    refs.push_back(store_->put(decode_png(base64_decode(b64))));
  }
  return refs;
}

HttpVqa::HttpVqa(const BackendDescriptor& d, std::shared_ptr<ArtifactStore> store)
    : store_(std::move(store)), transport_(std::make_unique<HttpTransport>(d)) {}
HttpVqa::~HttpVqa() = default;

std::string HttpVqa::answer(const VqaRequest& request) {
  const auto res = transport_->post(
      "/vqa", {{"image", encoded_image(*store_, request.image)},
               {"question", request.question}});
  return field<std::string>(res, "answer", BackendKind::vqa);
}

HttpDetector::HttpDetector(const BackendDescriptor& d,
                           std::shared_ptr<ArtifactStore> store)
    : store_(std::move(store)), transport_(std::make_unique<HttpTransport>(d)) {}
HttpDetector::~HttpDetector() = default;

std::vector<Detection> HttpDetector::detect(const DetectRequest& request) {
  const auto res = transport_->post(
      "/detect", {{"image", encoded_image(*store_, request.image)},
                  {"classes", request.class_names}});
  try {
    return wire::detections_from_json(res.at("detections"));
  } catch (const json::exception& e) {
    throw ValidationError(fmt::format("detector response malformed: {}", e.what()));
  }
}

HttpScorer::HttpScorer(const BackendDescriptor& d, std::shared_ptr<ArtifactStore> store)
    : store_(std::move(store)), transport_(std::make_unique<HttpTransport>(d)) {}
HttpScorer::~HttpScorer() = default;

double HttpScorer::score(const ScoreRequest& request) {
  const auto res = transport_->post(
      "/score", {{"image", encoded_image(*store_, request.image)},
                 {"text", request.text}});
  return field<double>(res, "score", BackendKind::scorer);
}

}  // namespace ccsr
