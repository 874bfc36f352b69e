// Copyright 2026 The CCSR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ccsr/adapters.hpp"
#include "ccsr/generation.hpp"
#include "ccsr/promptgen.hpp"

namespace ccsr {

enum class Polarity { positive, negative };
enum class Verdict { yes, no, nan };

std::string_view to_string(Polarity p);
std::string_view to_string(Verdict v);
Polarity parse_polarity(std::string_view text);
Verdict parse_verdict(std::string_view text);

/// One judging question. `text` holds the template until build_battery
/// substitutes {class_name} and {prompt}.
struct QuestionSpec {
  std::string question_id;
  std::string text;
  Polarity polarity = Polarity::positive;
  /// A "no" on this earlier question forces this one to nan.
  std::optional<std::string> depends_on;
};

struct Battery {
  std::string battery_id;
  /// Wraps each question before it is sent to the VQA backend.
  std::string question_template = "{question}";
  std::vector<QuestionSpec> questions;

  /// Unique ids, dependencies point backwards, at least one question.
  void validate() const;
};

class BatteryRegistry {
 public:
  /// Registry holding the built-in ten-question "default" battery.
  static BatteryRegistry with_defaults();

  void add(Battery battery);
  /// JSON file: {battery_id, question_template?, questions: [{question_id,
  /// template, polarity, depends_on?}]}
  void load_file(const std::filesystem::path& file);
  void load_directory(const std::filesystem::path& dir);

  bool contains(std::string_view id) const;
  const Battery& get(std::string_view id) const;

 private:
  std::map<std::string, Battery, std::less<>> batteries_;
};

Battery default_battery();

std::vector<QuestionSpec> build_battery(std::string_view class_name,
                                        std::string_view prompt_text,
                                        std::string_view battery_id,
                                        const BatteryRegistry& registry);

struct AnswerClassification {
  Verdict verdict = Verdict::nan;
  /// False when the answer was neither affirmation, negation nor nan.
  bool recognized = false;
};

AnswerClassification classify_answer(std::string_view raw);
inline Verdict parse_answer(std::string_view raw) {
  return classify_answer(raw).verdict;
}

struct AnswerRecord {
  std::string question_id;
  std::string raw_text;
  Verdict parsed = Verdict::nan;
};

/// How a negative question answered "no" is credited.
enum class ScoringRule {
  plus_one,  // +1, the scoring function as written
  neutral,   // 0
};

struct ScoreCard {
  std::string prompt_id;
  std::size_t image_index = 0;
  std::vector<int> contributions;
  int total = 0;
};

/// Answers after dependency coercion (a referenced "no" turns the dependent
/// answer into nan).
std::vector<Verdict> effective_verdicts(std::span<const AnswerRecord> answers,
                                        std::span<const QuestionSpec> battery);

ScoreCard score_image(std::span<const AnswerRecord> answers,
                      std::span<const QuestionSpec> battery,
                      ScoringRule rule = ScoringRule::plus_one);

/// Every index reaching the maximum total, ascending.
std::vector<std::size_t> select_best(std::span<const ScoreCard> cards);

struct JudgedSet {
  std::string prompt_id;
  std::vector<ScoreCard> cards;
  std::vector<std::size_t> unjudged;
  /// image_index -> answers in battery order (judged images only).
  std::map<std::size_t, std::vector<AnswerRecord>> answers;
  std::size_t unrecognized_answers = 0;
};

struct JudgeOptions {
  ScoringRule rule = ScoringRule::plus_one;
};

JudgedSet judge_candidate_set(const CandidateSet& set,
                              const PromptRecord& prompt,
                              const Battery& battery, VisualQa& backend,
                              const JudgeOptions& options = {});

/// One line per (image, question).
void write_judgments(const std::filesystem::path& file,
                     std::span<const JudgedSet> sets);
void write_scorecards(const std::filesystem::path& file,
                      std::span<const JudgedSet> sets);
std::vector<JudgedSet> read_scorecards(const std::filesystem::path& file);

}  // namespace ccsr
