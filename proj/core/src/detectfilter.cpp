// Copyright 2026 The CCSR Authors
// SPDX-License-Identifier: Apache-2.0

#include "ccsr/detectfilter.hpp"

#include <algorithm>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "json.hpp"

#include "ccsr/digest.hpp"
#include "ccsr/parallel.hpp"

namespace ccsr {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(TieBreak t) {
  return t == TieBreak::lowest_index ? "lowest-index" : "highest-score";
}

TieBreak parse_tie_break(std::string_view text) {
  if (text == "lowest-index") return TieBreak::lowest_index;
  if (text == "highest-score") return TieBreak::highest_score;
  throw ConfigError(
      fmt::format("tie_break must be lowest-index or highest-score, got '{}'", text));
}

void FilterPolicy::validate() const {
  if (!(confidence_threshold >= 0.0 && confidence_threshold <= 1.0)) {
    throw ConfigError(
        fmt::format("confidence_threshold {} is outside [0, 1]", confidence_threshold));
  }
}

std::string_view to_string(RejectionReason r) {
  return r == RejectionReason::no_detection ? "no-detection" : "judging-excluded";
}

namespace {

RejectionReason parse_rejection_reason(std::string_view text) {
  if (text == "no-detection") return RejectionReason::no_detection;
  if (text == "judging-excluded") return RejectionReason::judging_excluded;
  throw IoError(fmt::format("unknown rejection reason '{}'", text));
}

}  // namespace

std::optional<std::size_t> select_by_confidence(
    std::span<const CandidateConfidence> candidates, const FilterPolicy& policy) {
  const CandidateConfidence* best = nullptr;
  for (const auto& c : candidates) {
    if (!c.max_confidence || *c.max_confidence < policy.confidence_threshold) continue;
    if (!best) {
      best = &c;
      continue;
    }
    const double a = *c.max_confidence;
    const double b = *best->max_confidence;
    if (a > b) {
      best = &c;
    } else if (a == b) {
      bool take = false;
      if (policy.tie_break == TieBreak::highest_score && c.score_total != best->score_total) {
        take = c.score_total > best->score_total;
      } else {
        take = c.image_index < best->image_index;
      }
      if (take) best = &c;
    }
  }
  if (!best) return std::nullopt;
  return best->image_index;
}

FilterOutcome filter_and_select(std::span<const std::size_t> best_indices,
                                const CandidateSet& set, const PromptRecord& prompt,
                                int score_total, const FilterPolicy& policy,
                                ObjectDetector& detector) {
  FilterOutcome outcome;
  const std::vector<std::string> classes = {prompt.class_name};
  for (const auto index : best_indices) {
    if (index >= set.images.size()) {
      throw ArgumentError(fmt::format("{}: best index {} out of range", set.prompt_id, index));
    }
    CandidateConfidence cc{index, score_total, std::nullopt};
    try {
      const auto boxes = detector.detect(DetectRequest{set.images[index], classes});
      for (const auto& box : boxes) {
        if (box.class_label != prompt.class_name) continue;
        cc.max_confidence = std::max(cc.max_confidence.value_or(0.0), box.confidence);
      }
    } catch (const BackendError& e) {
      ++outcome.detector_failures;
      spdlog::warn("{} image {}: detector failed, treating as below threshold: {}",
                   set.prompt_id, index, e.what());
    }
    outcome.confidences.push_back(cc);
  }
  if (const auto chosen = select_by_confidence(outcome.confidences, policy)) {
    const auto it = std::find_if(outcome.confidences.begin(), outcome.confidences.end(),
                                 [&](const auto& c) { return c.image_index == *chosen; });
    OptimalPair pair;
    pair.prompt_id = prompt.prompt_id;
    pair.prompt_text = prompt.text;
    pair.image = set.images[*chosen];
    pair.image_index = *chosen;
    pair.score_total = it->score_total;
    pair.detection_confidence = *it->max_confidence;
    pair.class_name = prompt.class_name;
    outcome.pair = std::move(pair);
  }
  return outcome;
}

Extraction extract_pairs(const RunState& state, const FilterPolicy& policy,
                         ObjectDetector& detector, std::size_t parallelism) {
  policy.validate();
  struct Slot {
    std::optional<OptimalPair> pair;
    std::optional<Rejection> rejection;
    std::vector<CandidateConfidence> confidences;
  };
  std::vector<Slot> slots(state.prompts.size());

  parallel_for(state.prompts.size(), parallelism, [&](std::size_t i) {
    const auto& prompt = state.prompts[i];
    auto& slot = slots[i];
    const auto cand = state.candidates.find(prompt.prompt_id);
    const auto judged = state.judgments.find(prompt.prompt_id);
    if (cand == state.candidates.end() || !cand->second.complete) {
      slot.rejection = Rejection{prompt.prompt_id, RejectionReason::judging_excluded,
                                 "candidate set missing or incomplete"};
      return;
    }
    if (judged == state.judgments.end() || judged->second.cards.empty()) {
      slot.rejection = Rejection{prompt.prompt_id, RejectionReason::judging_excluded,
                                 "no judged candidates"};
      return;
    }
    const auto& cards = judged->second.cards;
    const auto best = select_best(cards);
    const int top = std::max_element(cards.begin(), cards.end(), [](const auto& a,
                                                                    const auto& b) {
                      return a.total < b.total;
                    })->total;
    auto outcome = filter_and_select(best, cand->second, prompt, top, policy, detector);
    slot.confidences = std::move(outcome.confidences);
    if (outcome.pair) {
      slot.pair = std::move(outcome.pair);
    } else {
      slot.rejection =
          Rejection{prompt.prompt_id, RejectionReason::no_detection,
                    fmt::format("no best-scoring image reached confidence {}",
                                policy.confidence_threshold)};
    }
  });

  Extraction out;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    auto& slot = slots[i];
    if (slot.pair) out.pairs.push_back(std::move(*slot.pair));
    if (slot.rejection) out.rejections.push_back(std::move(*slot.rejection));
    if (!slot.confidences.empty()) {
      out.confidences[state.prompts[i].prompt_id] = std::move(slot.confidences);
    }
  }
  std::sort(out.pairs.begin(), out.pairs.end(),
            [](const auto& a, const auto& b) { return a.prompt_id < b.prompt_id; });
  std::sort(out.rejections.begin(), out.rejections.end(),
            [](const auto& a, const auto& b) { return a.prompt_id < b.prompt_id; });
  return out;
}

void write_pairs(const fs::path& file, std::span<const OptimalPair> pairs) {
  std::string out;
  for (const auto& p : pairs) {
    out += json{{"prompt_id", p.prompt_id},
                {"prompt_text", p.prompt_text},
                {"class_name", p.class_name},
                {"content_id", p.image.content_id},
                {"width", p.image.width},
                {"height", p.image.height},
                {"storage_path", p.image.storage_path},
                {"image_index", p.image_index},
                {"score_total", p.score_total},
                {"detection_confidence", p.detection_confidence}}
               .dump();
    out += '\n';
  }
  write_atomic(file, out);
}

std::vector<OptimalPair> read_pairs(const fs::path& file, const ArtifactStore& store) {
  std::vector<OptimalPair> out;
  std::istringstream in(read_text(file));
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = json::parse(line);
      OptimalPair p;
      p.prompt_id = j.at("prompt_id").get<std::string>();
      p.prompt_text = j.at("prompt_text").get<std::string>();
      p.class_name = j.value("class_name", std::string());
      p.image.content_id = j.at("content_id").get<std::string>();
      p.image.width = j.at("width").get<int>();
      p.image.height = j.at("height").get<int>();
      p.image.storage_path = j.value("storage_path", std::string());
      if (p.image.storage_path.empty()) {
        p.image.storage_path =
            fs::relative(store.object_path(p.image.content_id), store.root()).string();
      }
      p.image_index = j.at("image_index").get<std::size_t>();
      p.score_total = j.at("score_total").get<int>();
      p.detection_confidence = j.at("detection_confidence").get<double>();
      out.push_back(std::move(p));
    } catch (const json::exception& e) {
      throw IoError(fmt::format("{}:{}: {}", file.string(), line_no, e.what()));
    }
  }
  return out;
}

void write_rejections(const fs::path& file, std::span<const Rejection> rejections) {
  std::string out;
  for (const auto& r : rejections) {
    out += json{{"prompt_id", r.prompt_id},
                {"reason", std::string(to_string(r.reason))},
                {"detail", r.detail}}
               .dump();
    out += '\n';
  }
  write_atomic(file, out);
}

std::vector<Rejection> read_rejections(const fs::path& file) {
  std::vector<Rejection> out;
  std::istringstream in(read_text(file));
  for (std::string line; std::getline(in, line);) {
    if (line.empty()) continue;
    try {
      const auto j = json::parse(line);
      out.push_back(Rejection{j.at("prompt_id").get<std::string>(),
                              parse_rejection_reason(j.at("reason").get<std::string>()),
                              j.value("detail", std::string())});
    } catch (const json::exception& e) {
      throw IoError(fmt::format("{}: {}", file.string(), e.what()));
    }
  }
  return out;
}

}  // namespace ccsr
