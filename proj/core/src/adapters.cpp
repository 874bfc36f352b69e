// Copyright 2026 The CCSR Authors
// SPDX-License-Identifier: Apache-2.0

#include "ccsr/adapters.hpp"

#include <cmath>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "ccsr/call_log.hpp"
#include "ccsr/http_backends.hpp"
#include "ccsr/mock_backends.hpp"
#include "ccsr/replay_backends.hpp"
#include "ccsr/wire.hpp"

namespace ccsr {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(BackendKind kind) {
  switch (kind) {
    case BackendKind::chat: return "chat";
    case BackendKind::text2image: return "text2image";
    case BackendKind::vqa: return "vqa";
    case BackendKind::detector: return "detector";
    case BackendKind::scorer: return "scorer";
  }
  return "?";
}

BackendKind parse_backend_kind(std::string_view text) {
  for (auto k : {BackendKind::chat, BackendKind::text2image, BackendKind::vqa,
                 BackendKind::detector, BackendKind::scorer}) {
    if (to_string(k) == text) return k;
  }
  throw ConfigError(fmt::format("unknown backend kind '{}'", text));
}

void SamplingParams::validate() const {
  if (!(temperature >= 0)) {
    throw ArgumentError(fmt::format("temperature must be >= 0, got {}", temperature));
  }
  if (!(top_p > 0 && top_p <= 1)) {
    throw ArgumentError(fmt::format("top_p must be in (0, 1], got {}", top_p));
  }
  if (max_tokens < 1) {
    throw ArgumentError(fmt::format("max_tokens must be >= 1, got {}", max_tokens));
  }
}

RetryPolicy RetryPolicy::from(const BackendDescriptor& d) {
  RetryPolicy p;
  p.retry_limit = std::max(0, d.retry_limit);
  p.initial_backoff = std::chrono::milliseconds(std::max(0, d.retry_backoff_ms));
  return p;
}

namespace {

template <typename Fn>
auto with_retry(const RetryPolicy& policy, BackendKind kind, Fn&& fn)
    -> decltype(fn()) {
  auto delay = policy.initial_backoff;
  for (int attempt = 0;; ++attempt) {
    try {
      return fn();
    } catch (const BackendError& e) {
      const bool exhausted = attempt >= policy.retry_limit;
      if (!e.retriable() || exhausted) {
        const auto message =
            e.retriable()
                ? fmt::format("{} backend failed after {} attempts: {}",
                              to_string(kind), attempt + 1, e.what())
                : std::string(e.what());
        if (const auto* partial = dynamic_cast<const PartialGenerationError*>(&e)) {
          throw PartialGenerationError(message, partial->completed(), false);
        }
        throw BackendError(message, false);
      }
      spdlog::warn("{} backend: {} (retry {}/{})", to_string(kind), e.what(),
                   attempt + 1, policy.retry_limit);
      std::this_thread::sleep_for(delay);
      delay = std::min(policy.max_backoff,
                       std::chrono::milliseconds(static_cast<long long>(
                           static_cast<double>(delay.count()) * policy.multiplier)));
    }
  }
}

void record(const std::shared_ptr<CallLog>& log, BackendKind kind,
            const json& request, json response) {
  if (log) log->append(kind, wire::digest(request), std::move(response));
}

class GuardedChat final : public ChatModel {
 public:
  GuardedChat(std::shared_ptr<ChatModel> inner, RetryPolicy policy,
              std::shared_ptr<CallLog> log)
      : inner_(std::move(inner)), policy_(policy), log_(std::move(log)) {}

  std::string complete(const ChatRequest& request) override {
    request.params.validate();
    auto text = with_retry(policy_, BackendKind::chat,
                           [&] { return inner_->complete(request); });
    record(log_, BackendKind::chat, wire::request_json(request), text);
    return text;
  }

 private:
  std::shared_ptr<ChatModel> inner_;
  RetryPolicy policy_;
  std::shared_ptr<CallLog> log_;
};

class GuardedImageGenerator final : public ImageGenerator {
 public:
  GuardedImageGenerator(std::shared_ptr<ImageGenerator> inner, RetryPolicy policy,
                        std::shared_ptr<CallLog> log)
      : inner_(std::move(inner)), policy_(policy), log_(std::move(log)) {}

  std::vector<ImageRef> generate(const GenerationRequest& request) override {
    if (request.n < 1) {
      throw ArgumentError(fmt::format("n must be >= 1, got {}", request.n));
    }
    if (request.width <= 0 || request.height <= 0) {
      throw ArgumentError(fmt::format("resolution must be positive, got {}x{}",
                                      request.width, request.height));
    }
    if (request.adapter &&
        !(request.adapter->scale >= 0 && request.adapter->scale <= 1)) {
      throw ArgumentError(fmt::format("adapter scale must be in [0, 1], got {}",
                                      request.adapter->scale));
    }
    auto refs = with_retry(policy_, BackendKind::text2image,
                           [&] { return inner_->generate(request); });
    if (refs.size() != static_cast<std::size_t>(request.n)) {
      throw ValidationError(fmt::format("text2image backend returned {} images, expected {}",
                                        refs.size(), request.n));
    }
    for (const auto& r : refs) {
      if (r.width != request.width || r.height != request.height) {
        throw ValidationError(fmt::format(
            "text2image backend returned a {}x{} image, expected {}x{}", r.width,
            r.height, request.width, request.height));
      }
    }
    record(log_, BackendKind::text2image, wire::request_json(request),
           wire::image_refs_json(refs));
    return refs;
  }

  std::string model_id() const override { return inner_->model_id(); }

 private:
  std::shared_ptr<ImageGenerator> inner_;
  RetryPolicy policy_;
  std::shared_ptr<CallLog> log_;
};

class GuardedVqa final : public VisualQa {
 public:
  GuardedVqa(std::shared_ptr<VisualQa> inner, RetryPolicy policy,
             std::shared_ptr<CallLog> log)
      : inner_(std::move(inner)), policy_(policy), log_(std::move(log)) {}

  std::string answer(const VqaRequest& request) override {
    auto text = with_retry(policy_, BackendKind::vqa,
                           [&] { return inner_->answer(request); });
    record(log_, BackendKind::vqa, wire::request_json(request), text);
    return text;
  }

 private:
  std::shared_ptr<VisualQa> inner_;
  RetryPolicy policy_;
  std::shared_ptr<CallLog> log_;
};

class GuardedDetector final : public ObjectDetector {
 public:
  GuardedDetector(std::shared_ptr<ObjectDetector> inner, RetryPolicy policy,
                  std::shared_ptr<CallLog> log)
      : inner_(std::move(inner)), policy_(policy), log_(std::move(log)) {}

  std::vector<Detection> detect(const DetectRequest& request) override {
    if (request.class_names.empty()) {
      throw ArgumentError("detect needs at least one class name");
    }
    auto detections = with_retry(policy_, BackendKind::detector,
                                 [&] { return inner_->detect(request); });
    validate_detections(detections, request);
    record(log_, BackendKind::detector, wire::request_json(request),
           wire::detections_json(detections));
    return detections;
  }

 private:
  std::shared_ptr<ObjectDetector> inner_;
  RetryPolicy policy_;
  std::shared_ptr<CallLog> log_;
};

class GuardedScorer final : public ImageTextScorer {
 public:
  GuardedScorer(std::shared_ptr<ImageTextScorer> inner, RetryPolicy policy,
                std::shared_ptr<CallLog> log)
      : inner_(std::move(inner)), policy_(policy), log_(std::move(log)) {}

  double score(const ScoreRequest& request) override {
    const double s = with_retry(policy_, BackendKind::scorer,
                                [&] { return inner_->score(request); });
    if (!std::isfinite(s)) throw ValidationError("scorer returned a non-finite score");
    record(log_, BackendKind::scorer, wire::request_json(request), s);
    return s;
  }

 private:
  std::shared_ptr<ImageTextScorer> inner_;
  RetryPolicy policy_;
  std::shared_ptr<CallLog> log_;
};

}  // namespace

std::shared_ptr<ChatModel> guard(std::shared_ptr<ChatModel> inner,
                                 RetryPolicy policy, std::shared_ptr<CallLog> log) {
  return std::make_shared<GuardedChat>(std::move(inner), policy, std::move(log));
}
std::shared_ptr<ImageGenerator> guard(std::shared_ptr<ImageGenerator> inner,
                                      RetryPolicy policy,
                                      std::shared_ptr<CallLog> log) {
  return std::make_shared<GuardedImageGenerator>(std::move(inner), policy,
                                                 std::move(log));
}
std::shared_ptr<VisualQa> guard(std::shared_ptr<VisualQa> inner, RetryPolicy policy,
                                std::shared_ptr<CallLog> log) {
  return std::make_shared<GuardedVqa>(std::move(inner), policy, std::move(log));
}
std::shared_ptr<ObjectDetector> guard(std::shared_ptr<ObjectDetector> inner,
                                      RetryPolicy policy,
                                      std::shared_ptr<CallLog> log) {
  return std::make_shared<GuardedDetector>(std::move(inner), policy, std::move(log));
}
std::shared_ptr<ImageTextScorer> guard(std::shared_ptr<ImageTextScorer> inner,
                                       RetryPolicy policy,
                                       std::shared_ptr<CallLog> log) {
  return std::make_shared<GuardedScorer>(std::move(inner), policy, std::move(log));
}

void validate_detections(std::span<const Detection> detections,
                         const DetectRequest& request) {
  for (const auto& d : detections) {
    if (!(d.confidence >= 0 && d.confidence <= 1)) {
      throw ValidationError(fmt::format("detection confidence {} outside [0, 1]",
                                        d.confidence));
    }
    if (std::find(request.class_names.begin(), request.class_names.end(),
                  d.class_label) == request.class_names.end()) {
      throw ValidationError(fmt::format("detector returned unrequested label '{}'",
                                        d.class_label));
    }
    const auto& b = d.bbox;
    const bool inside = b.x >= 0 && b.y >= 0 && b.w >= 0 && b.h >= 0 &&
                        b.x + b.w <= request.image.width &&
                        b.y + b.h <= request.image.height;
    if (!inside) {
      throw ValidationError(fmt::format(
          "bbox ({}, {}, {}, {}) outside the {}x{} image", b.x, b.y, b.w, b.h,
          request.image.width, request.image.height));
    }
  }
}

std::string chat_complete(ChatModel& backend, std::string_view system_prompt,
                          std::string_view user_prompt, const SamplingParams& params) {
  return backend.complete(
      ChatRequest{std::string(system_prompt), std::string(user_prompt), params});
}

std::vector<ImageRef> generate_images(ImageGenerator& backend,
                                      std::string_view prompt, int n, int width,
                                      int height, std::optional<std::int64_t> seed) {
  GenerationRequest r;
  r.prompt = prompt;
  r.n = n;
  r.width = width;
  r.height = height;
  r.seed = seed;
  return backend.generate(r);
}

std::string vqa_answer(VisualQa& backend, const ImageRef& image,
                       std::string_view question_prompt) {
  return backend.answer(VqaRequest{image, std::string(question_prompt), {}, {}});
}

std::vector<Detection> detect(ObjectDetector& backend, const ImageRef& image,
                              std::span<const std::string> class_names) {
  return backend.detect(
      DetectRequest{image, {class_names.begin(), class_names.end()}});
}

double image_text_score(ImageTextScorer& backend, const ImageRef& image,
                        std::string_view text) {
  return backend.score(ScoreRequest{image, std::string(text)});
}

namespace {

enum class Scheme { mock, replay, http };

struct Endpoint {
  Scheme scheme = Scheme::mock;
  fs::path transcript;
};

Endpoint parse_endpoint(const BackendDescriptor& d, const BackendContext& ctx,
                        BackendKind expected) {
  if (d.kind != expected) {
    throw ConfigError(fmt::format("descriptor of kind {} used where {} is required",
                                  to_string(d.kind), to_string(expected)));
  }
  const std::string_view e = d.endpoint;
  if (e == "mock") return {Scheme::mock, {}};
  if (e.starts_with("replay:")) {
    fs::path p(std::string(e.substr(7)));
    if (p.is_relative()) p = ctx.base_dir / p;
    return {Scheme::replay, p};
  }
  if (e.starts_with("http://") || e.starts_with("https://")) return {Scheme::http, {}};
  throw ConfigError(fmt::format("unsupported {} endpoint '{}'", to_string(d.kind), e));
}

MockScriptPtr load_script(const BackendDescriptor& d, const BackendContext& ctx) {
  if (d.script.empty()) return nullptr;
  fs::path p(d.script);
  if (p.is_relative()) p = ctx.base_dir / p;
  return std::make_shared<const MockScript>(MockScript::load(p));
}

std::shared_ptr<Transcript> load_transcript(const Endpoint& ep) {
  return std::make_shared<Transcript>(Transcript::load(ep.transcript));
}

void require_store(const BackendContext& ctx, BackendKind kind) {
  if (!ctx.store) {
    throw ConfigError(fmt::format("{} backend needs an artifact store", to_string(kind)));
  }
}

}  // namespace

std::shared_ptr<ChatModel> make_chat(const BackendDescriptor& d,
                                     const BackendContext& ctx) {
  const auto ep = parse_endpoint(d, ctx, BackendKind::chat);
  std::shared_ptr<ChatModel> inner;
  switch (ep.scheme) {
    case Scheme::mock: inner = std::make_shared<MockChat>(d.seed, load_script(d, ctx)); break;
    case Scheme::replay: inner = std::make_shared<ReplayChat>(load_transcript(ep)); break;
    case Scheme::http: inner = std::make_shared<HttpChat>(d); break;
  }
  return guard(std::move(inner), RetryPolicy::from(d), ctx.log);
}

std::shared_ptr<ImageGenerator> make_image_generator(const BackendDescriptor& d,
                                                     const BackendContext& ctx) {
  const auto ep = parse_endpoint(d, ctx, BackendKind::text2image);
  require_store(ctx, d.kind);
  std::shared_ptr<ImageGenerator> inner;
  switch (ep.scheme) {
    case Scheme::mock:
      inner = std::make_shared<MockImageGenerator>(d.seed, d.model_id, ctx.store);
      break;
    case Scheme::replay:
      inner = std::make_shared<ReplayImageGenerator>(
          load_transcript(ep), ep.transcript.parent_path() / "objects", ctx.store,
          d.model_id);
      break;
    case Scheme::http: inner = std::make_shared<HttpImageGenerator>(d, ctx.store); break;
  }
  return guard(std::move(inner), RetryPolicy::from(d), ctx.log);
}

std::shared_ptr<VisualQa> make_vqa(const BackendDescriptor& d,
                                   const BackendContext& ctx) {
  const auto ep = parse_endpoint(d, ctx, BackendKind::vqa);
  std::shared_ptr<VisualQa> inner;
  switch (ep.scheme) {
    case Scheme::mock: inner = std::make_shared<MockVqa>(d.seed, load_script(d, ctx)); break;
    case Scheme::replay: inner = std::make_shared<ReplayVqa>(load_transcript(ep)); break;
    case Scheme::http:
      require_store(ctx, d.kind);
      inner = std::make_shared<HttpVqa>(d, ctx.store);
      break;
  }
  return guard(std::move(inner), RetryPolicy::from(d), ctx.log);
}

std::shared_ptr<ObjectDetector> make_detector(const BackendDescriptor& d,
                                              const BackendContext& ctx) {
  const auto ep = parse_endpoint(d, ctx, BackendKind::detector);
  std::shared_ptr<ObjectDetector> inner;
  switch (ep.scheme) {
    case Scheme::mock:
      inner = std::make_shared<MockDetector>(d.seed, load_script(d, ctx));
      break;
    case Scheme::replay: inner = std::make_shared<ReplayDetector>(load_transcript(ep)); break;
    case Scheme::http:
      require_store(ctx, d.kind);
      inner = std::make_shared<HttpDetector>(d, ctx.store);
      break;
  }
  return guard(std::move(inner), RetryPolicy::from(d), ctx.log);
}

std::shared_ptr<ImageTextScorer> make_scorer(const BackendDescriptor& d,
                                             const BackendContext& ctx) {
  const auto ep = parse_endpoint(d, ctx, BackendKind::scorer);
  std::shared_ptr<ImageTextScorer> inner;
  switch (ep.scheme) {
    case Scheme::mock: inner = std::make_shared<MockScorer>(d.seed, load_script(d, ctx)); break;
    case Scheme::replay: inner = std::make_shared<ReplayScorer>(load_transcript(ep)); break;
    case Scheme::http:
      require_store(ctx, d.kind);
      inner = std::make_shared<HttpScorer>(d, ctx.store);
      break;
  }
  return guard(std::move(inner), RetryPolicy::from(d), ctx.log);
}

}  // namespace ccsr
