// Copyright 2026 The CCSR Authors
// SPDX-License-Identifier: Apache-2.0

#include "ccsr/mock_backends.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <random>
#include <regex>

#include <fmt/format.h>

#include "json.hpp"

#include "ccsr/digest.hpp"

namespace ccsr {

using nlohmann::json;

MockScript MockScript::load(const std::filesystem::path& file) {
  json j;
  try {
    j = json::parse(read_text(file));
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("mock script {}: {}", file.string(), e.what()));
  }
  MockScript s;
  try {
    if (j.contains("chat")) {
      for (const auto& e : j.at("chat")) {
        ChatEntry entry;
        if (e.contains("system")) entry.system_prompt = e.at("system").get<std::string>();
        entry.user_prompt = e.at("user").get<std::string>();
        entry.response = e.at("response").get<std::string>();
        s.chat.push_back(std::move(entry));
      }
    }
    if (j.contains("vqa")) {
      s.vqa = j.at("vqa").get<std::map<std::string, std::map<std::string, std::string>>>();
    }
    s.vqa_noise = j.value("vqa_noise", 0.0);
    if (j.contains("detector")) {
      s.detector = j.at("detector")
                       .get<std::map<std::string, std::map<std::string, std::vector<double>>>>();
    }
    if (j.contains("scorer")) {
      s.scorer = j.at("scorer").get<std::map<std::string, std::map<std::string, double>>>();
    }
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("mock script {}: {}", file.string(), e.what()));
  }
  return s;
}

namespace {

constexpr std::array kQuantities = {"a single", "a lone", "one", "a large",
                                    "a young", "an adult"};
constexpr std::array kFraming = {"in the foreground",   "centered in frame",
                                 "seen from the side",  "close-up portrait",
                                 "wide shot",           "partially in shadow",
                                 "in motion",           "resting"};
constexpr std::array kSettings = {"open savanna", "dense forest edge", "riverbank",
                                  "dusty plain",  "misty hills",       "city park",
                                  "snowy field",  "desert dunes"};
constexpr std::array kLight = {"golden hour",     "overcast morning", "midday sun",
                               "blue hour",       "soft dawn light",  "dramatic sunset"};
constexpr std::array kStyle = {"photo-realistic, 8k, sharp focus",
                               "photo-realistic, highly detailed",
                               "realistic photograph, 35mm lens",
                               "photo-realistic, natural colors"};

template <typename Array>
const char* pick(std::mt19937_64& rng, const Array& options) {
  return options[rng() % options.size()];
}

std::string trim(std::string s) {
  auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

bool starts_with_no(std::string_view answer) {
  std::string token;
  for (char c : answer) {
    if (std::isalpha(static_cast<unsigned char>(c))) {
      token += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else if (!token.empty()) {
      break;
    }
  }
  return token == "no";
}

}  // namespace

MockChat::MockChat(std::uint64_t seed, MockScriptPtr script)
    : seed_(seed), script_(std::move(script)) {}

std::string MockChat::complete(const ChatRequest& request) {
  if (script_) {
    for (const auto& e : script_->chat) {
      if (e.user_prompt == request.user_prompt &&
          (!e.system_prompt || *e.system_prompt == request.system_prompt)) {
        return e.response;
      }
    }
  }
  std::mt19937_64 rng(hash64(fmt::format(
      "chat|{}|{}|{}|{}|{}|{}", seed_, request.system_prompt, request.user_prompt,
      request.params.temperature, request.params.top_p, request.params.max_tokens)));

  static const std::regex ask(R"((\d+)\s+(?:[A-Za-z-]+\s+){0,3}prompts?\s+for\s+([^\n.]+))",
                              std::regex::icase);
  std::smatch m;
  if (!std::regex_search(request.user_prompt, m, ask)) {
    return fmt::format("mock completion {:016x}", rng());
  }
  const int count = std::min(std::stoi(m[1].str()), 1000);
  const std::string cls = lower(trim(m[2].str()));

  std::string out;
  for (int i = 0; i < count; ++i) {
    out += fmt::format("{}. {} {}, {}, {}, {}, {}\n", i + 1, pick(rng, kQuantities),
                       cls, pick(rng, kFraming), pick(rng, kSettings),
                       pick(rng, kLight), pick(rng, kStyle));
  }
  return out;
}

MockImageGenerator::MockImageGenerator(std::uint64_t seed, std::string model_id,
                                       std::shared_ptr<ArtifactStore> store)
    : seed_(seed), model_id_(std::move(model_id)), store_(std::move(store)) {}

namespace {

void paint(Image& img, std::mt19937_64& rng) {
  std::array<std::uint8_t, 3> top{}, bottom{};
  for (auto& c : top) c = static_cast<std::uint8_t>(rng() & 0xff);
  for (auto& c : bottom) c = static_cast<std::uint8_t>(rng() & 0xff);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      auto* px = img.at(x, y);
      for (int c = 0; c < 3; ++c) {
        px[c] = static_cast<std::uint8_t>((top[c] * (img.height - 1 - y) + bottom[c] * y) /
                                          std::max(1, img.height - 1));
      }
    }
  }
  const int rects = 3 + static_cast<int>(rng() % 4);
  for (int r = 0; r < rects; ++r) {
    const int w = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(std::max(1, img.width / 2)));
    const int h = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(std::max(1, img.height / 2)));
    const int x0 = static_cast<int>(rng() % static_cast<std::uint64_t>(img.width - w + 1));
    const int y0 = static_cast<int>(rng() % static_cast<std::uint64_t>(img.height - h + 1));
    std::array<std::uint8_t, 3> color{};
    for (auto& c : color) c = static_cast<std::uint8_t>(rng() & 0xff);
    for (int y = y0; y < y0 + h; ++y) {
      for (int x = x0; x < x0 + w; ++x) {
        std::copy(color.begin(), color.end(), img.at(x, y));
      }
    }
  }
}

}  // namespace

Image MockImageGenerator::render(const GenerationRequest& request, int k) const {
  const std::string base_key =
      request.seed
          ? fmt::format("t2i|seeded|{}|{}|{}x{}", *request.seed + k, request.prompt,
                        request.width, request.height)
          : fmt::format("t2i|salt|{}|{}|{}|{}x{}", seed_, k, request.prompt,
                        request.width, request.height);
  Image img(request.width, request.height);
  std::mt19937_64 rng(hash64(base_key));
  paint(img, rng);

  if (request.adapter) {
    Image tint(request.width, request.height);
    std::mt19937_64 arng(hash64(fmt::format("adapter|{}|{}", request.adapter->weights_digest,
                                            base_key)));
    paint(tint, arng);
    const double s = request.adapter->scale;
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
      const double v = (1.0 - s) * img.pixels[i] + s * tint.pixels[i];
      img.pixels[i] = static_cast<std::uint8_t>(std::lround(v));
    }
  }
  return img;
}

std::vector<ImageRef> MockImageGenerator::generate(const GenerationRequest& request) {
  std::vector<ImageRef> refs;
  refs.reserve(static_cast<std::size_t>(request.n));
  for (int k = 0; k < request.n; ++k) refs.push_back(store_->put(render(request, k)));
  return refs;
}

MockVqa::MockVqa(std::uint64_t seed, MockScriptPtr script)
    : seed_(seed), script_(std::move(script)) {}

std::string MockVqa::answer_for(const std::string& content_id,
                                const QuestionMeta& meta) const {
  if (script_) {
    for (const auto& key : {content_id, std::string("*")}) {
      auto img = script_->vqa.find(key);
      if (img == script_->vqa.end()) continue;
      auto q = img->second.find(meta.question_id);
      if (q != img->second.end()) return q->second;
    }
  }
  bool yes = meta.positive;
  const double noise = script_ ? script_->vqa_noise : 0.0;
  if (noise > 0 &&
      unit_hash(fmt::format("vqa|{}|{}|{}", seed_, content_id, meta.question_id)) < noise) {
    yes = !yes;
  }
  return yes ? "Yes." : "No.";
}

std::string MockVqa::answer(const VqaRequest& request) {
  const QuestionMeta meta =
      request.question_meta
          ? *request.question_meta
          : QuestionMeta{sha256_hex(request.question).substr(0, 16), true};
  const auto& cid = request.image.content_id;
  if (script_ && request.question_meta) {
    for (const auto& key : {cid, std::string("*")}) {
      auto img = script_->vqa.find(key);
      if (img != script_->vqa.end() && img->second.count(meta.question_id)) {
        return img->second.at(meta.question_id);
      }
    }
  }
  if (request.depends_on && starts_with_no(answer_for(cid, *request.depends_on))) {
    return "Nan";
  }
  return answer_for(cid, meta);
}

MockDetector::MockDetector(std::uint64_t seed, MockScriptPtr script)
    : seed_(seed), script_(std::move(script)) {}

double MockDetector::hashed_confidence(const std::string& content_id,
                                       const std::string& label) const {
  return unit_hash(fmt::format("det|{}|{}|{}", seed_, content_id, label));
}

std::vector<Detection> MockDetector::detect(const DetectRequest& request) {
  const auto& img = request.image;
  const BBox box{img.width / 4.0, img.height / 4.0, img.width / 2.0, img.height / 2.0};
  std::vector<Detection> out;
  if (script_) {
    auto it = script_->detector.find(img.content_id);
    if (it != script_->detector.end()) {
      for (const auto& label : request.class_names) {
        auto l = it->second.find(label);
        if (l == it->second.end()) continue;
        for (double c : l->second) out.push_back(Detection{label, c, box});
      }
      return out;
    }
  }
  for (const auto& label : request.class_names) {
    out.push_back(Detection{label, hashed_confidence(img.content_id, label), box});
  }
  return out;
}

MockScorer::MockScorer(std::uint64_t seed, MockScriptPtr script)
    : seed_(seed), script_(std::move(script)) {}

double MockScorer::score(const ScoreRequest& request) {
  if (script_) {
    auto it = script_->scorer.find(request.image.content_id);
    if (it != script_->scorer.end()) {
      auto s = it->second.find(request.text);
      if (s != it->second.end()) return s->second;
    }
  }
  return 0.15 + 0.2 * unit_hash(fmt::format("clip|{}|{}|{}", seed_,
                                            request.image.content_id, request.text));
}

}  // namespace ccsr
