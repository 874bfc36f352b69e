// Copyright 2026 The CCSR Authors
// SPDX-License-Identifier: Apache-2.0

#include "ccsr/judge.hpp"

#include <algorithm>
#include <cctype>
#include <regex>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "json.hpp"

#include "ccsr/digest.hpp"

namespace ccsr {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(Polarity p) {
  return p == Polarity::positive ? "positive" : "negative";
}

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::yes: return "yes";
    case Verdict::no: return "no";
    case Verdict::nan: return "nan";
  }
  return "nan";
}

Polarity parse_polarity(std::string_view text) {
  if (text == "positive") return Polarity::positive;
  if (text == "negative") return Polarity::negative;
  throw ConfigError(fmt::format("polarity must be positive or negative, got '{}'", text));
}

Verdict parse_verdict(std::string_view text) {
  if (text == "yes") return Verdict::yes;
  if (text == "no") return Verdict::no;
  if (text == "nan") return Verdict::nan;
  throw ArgumentError(fmt::format("unknown verdict '{}'", text));
}

void Battery::validate() const {
  if (questions.empty()) {
    throw ConfigError(fmt::format("battery '{}' has no questions", battery_id));
  }
  std::set<std::string> seen;
  for (const auto& q : questions) {
    if (q.question_id.empty()) {
      throw ConfigError(fmt::format("battery '{}' has a question without id", battery_id));
    }
    if (q.depends_on && !seen.count(*q.depends_on)) {
      throw ConfigError(fmt::format(
          "battery '{}': {} depends on {}, which is not an earlier question", battery_id,
          q.question_id, *q.depends_on));
    }
    if (!seen.insert(q.question_id).second) {
      throw ConfigError(fmt::format("battery '{}': duplicate question id {}", battery_id,
                                    q.question_id));
    }
  }
}

Battery default_battery() {
  const std::string cond = "(if the answer to Q3 is 'No' answer 'Nan' to this question) ";
  Battery b;
  b.battery_id = "default";
  b.questions = {
      {"Q1", "Does this image look realistic, considering lighting, shadows, and reflections?",
       Polarity::positive, std::nullopt},
      {"Q2",
       "Are there any subtle, unexpected patterns or behaviors in the image that might "
       "not be immediately noticeable?",
       Polarity::negative, std::nullopt},
      {"Q3", "can you clearly see {class_name} in the image?", Polarity::positive,
       std::nullopt},
      {"Q4",
       "(if the answer of the previous question is 'No' answer 'Nan' to this question) "
       "Considering specific details like {class_name} posture, head and body shape, "
       "number of legs and form and the surroundings view, does the image look normal?",
       Polarity::positive, "Q3"},
      {"Q5",
       cond + "If {class_name} is present, does it exhibit realistic and natural behavior?",
       Polarity::positive, "Q3"},
      {"Q6",
       cond + "Are there any other objects or elements in the image that might be "
              "mistakenly identified as {class_name}?",
       Polarity::negative, "Q3"},
      {"Q7",
       cond + "Does the representation of {class_name} in the image maintain anatomical "
              "accuracy (e.g., correct number of legs, tail, head)?",
       Polarity::positive, "Q3"},
      {"Q8",
       "Do the colors in the image accurately match the description in the PROMPT "
       "{prompt}, including subtle variations and shades?",
       Polarity::positive, std::nullopt},
      {"Q9",
       "Can you identify any deviations or abnormalities in the image that might be less "
       "obvious but still significant?",
       Polarity::negative, std::nullopt},
      {"Q10", "Given PROMPT: {prompt}. Does the image respect fully the prompt description?",
       Polarity::positive, std::nullopt},
  };
  return b;
}

BatteryRegistry BatteryRegistry::with_defaults() {
  BatteryRegistry r;
  r.add(default_battery());
  return r;
}

void BatteryRegistry::add(Battery battery) {
  battery.validate();
  auto id = battery.battery_id;
  batteries_[std::move(id)] = std::move(battery);
}

void BatteryRegistry::load_file(const fs::path& file) {
  Battery b;
  try {
    const auto j = json::parse(read_text(file));
    b.battery_id = j.value("battery_id", file.stem().string());
    b.question_template = j.value("question_template", std::string("{question}"));
    for (const auto& q : j.at("questions")) {
      QuestionSpec spec;
      spec.question_id = q.at("question_id").get<std::string>();
      spec.text = q.at("template").get<std::string>();
      spec.polarity = parse_polarity(q.at("polarity").get<std::string>());
      if (q.contains("depends_on") && !q.at("depends_on").is_null()) {
        spec.depends_on = q.at("depends_on").get<std::string>();
      }
      b.questions.push_back(std::move(spec));
    }
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("battery file {}: {}", file.string(), e.what()));
  }
  add(std::move(b));
}

void BatteryRegistry::load_directory(const fs::path& dir) {
  if (!fs::is_directory(dir)) {
    throw ConfigError(fmt::format("battery directory {} does not exist", dir.string()));
  }
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") {
      load_file(entry.path());
    }
  }
}

bool BatteryRegistry::contains(std::string_view id) const {
  return batteries_.find(id) != batteries_.end();
}

const Battery& BatteryRegistry::get(std::string_view id) const {
  auto it = batteries_.find(id);
  if (it == batteries_.end()) throw ConfigError(fmt::format("unknown battery '{}'", id));
  return it->second;
}

namespace {

std::string substitute(const std::string& text,
                       const std::map<std::string, std::string, std::less<>>& values) {
  static const std::regex placeholder(R"(\{([A-Za-z_][A-Za-z0-9_]*)\})");
  std::string out;
  std::size_t last = 0;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), placeholder);
       it != std::sregex_iterator(); ++it) {
    const auto& m = *it;
    auto v = values.find(m[1].str());
    if (v == values.end()) {
      throw TemplateError(m[1].str(),
                          fmt::format("question has unresolved placeholder {}", m[0].str()));
    }
    out.append(text, last, static_cast<std::size_t>(m.position(0)) - last);
    out += v->second;
    last = static_cast<std::size_t>(m.position(0) + m.length(0));
  }
  out.append(text, last);
  return out;
}

std::vector<QuestionSpec> instantiate(const Battery& battery, std::string_view class_name,
                                      std::string_view prompt_text) {
  const std::map<std::string, std::string, std::less<>> values = {
      {"class_name", std::string(class_name)}, {"prompt", std::string(prompt_text)}};
  std::vector<QuestionSpec> out = battery.questions;
  for (auto& q : out) q.text = substitute(q.text, values);
  return out;
}

}  // namespace

std::vector<QuestionSpec> build_battery(std::string_view class_name,
                                        std::string_view prompt_text,
                                        std::string_view battery_id,
                                        const BatteryRegistry& registry) {
  return instantiate(registry.get(battery_id), class_name, prompt_text);
}

AnswerClassification classify_answer(std::string_view raw) {
  std::string text;
  for (char c : raw) text += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));

  // Leading token: letters and '/', after skipping anything else.
  std::size_t i = 0;
  while (i < text.size() && !std::isalpha(static_cast<unsigned char>(text[i]))) ++i;
  std::string token;
  while (i < text.size() &&
         (std::isalpha(static_cast<unsigned char>(text[i])) || text[i] == '/')) {
    token += text[i++];
  }
  while (!token.empty() && token.back() == '/') token.pop_back();

  if (token == "yes" || token == "yeah" || token == "yep" || token == "y") {
    return {Verdict::yes, true};
  }
  if (token == "no" || token == "nope" || token == "n") return {Verdict::no, true};
  if (token == "nan" || token == "n/a") return {Verdict::nan, true};
  return {Verdict::nan, false};
}

std::vector<Verdict> effective_verdicts(std::span<const AnswerRecord> answers,
                                        std::span<const QuestionSpec> battery) {
  if (answers.size() != battery.size()) {
    throw ArgumentError(fmt::format("{} answers for a {}-question battery", answers.size(),
                                    battery.size()));
  }
  std::map<std::string_view, std::size_t> position;
  for (std::size_t k = 0; k < battery.size(); ++k) {
    if (!answers[k].question_id.empty() &&
        answers[k].question_id != battery[k].question_id) {
      throw ArgumentError(fmt::format("answer {} is for {}, expected {}", k,
                                      answers[k].question_id, battery[k].question_id));
    }
    position[battery[k].question_id] = k;
  }
  std::vector<Verdict> out(answers.size());
  for (std::size_t k = 0; k < battery.size(); ++k) {
    out[k] = answers[k].parsed;
    if (const auto& dep = battery[k].depends_on) {
      auto it = position.find(*dep);
      if (it == position.end() || it->second >= k) {
        throw ArgumentError(fmt::format("{} depends on {}, which does not precede it",
                                        battery[k].question_id, *dep));
      }
      if (answers[it->second].parsed == Verdict::no) out[k] = Verdict::nan;
    }
  }
  return out;
}

ScoreCard score_image(std::span<const AnswerRecord> answers,
                      std::span<const QuestionSpec> battery, ScoringRule rule) {
  const auto verdicts = effective_verdicts(answers, battery);
  ScoreCard card;
  card.contributions.reserve(verdicts.size());
  for (std::size_t k = 0; k < verdicts.size(); ++k) {
    int c = 0;
    if (battery[k].polarity == Polarity::positive) {
      c = verdicts[k] == Verdict::yes ? 1 : 0;
    } else if (verdicts[k] == Verdict::yes) {
      c = -1;
    } else if (verdicts[k] == Verdict::no) {
      c = rule == ScoringRule::plus_one ? 1 : 0;
    }
    card.contributions.push_back(c);
    card.total += c;
  }
  return card;
}

std::vector<std::size_t> select_best(std::span<const ScoreCard> cards) {
  std::vector<std::size_t> best;
  if (cards.empty()) return best;
  const int top = std::max_element(cards.begin(), cards.end(),
                                   [](const ScoreCard& a, const ScoreCard& b) {
                                     return a.total < b.total;
                                   })->total;
  for (const auto& c : cards) {
    if (c.total == top) best.push_back(c.image_index);
  }
  std::sort(best.begin(), best.end());
  return best;
}

JudgedSet judge_candidate_set(const CandidateSet& set, const PromptRecord& prompt,
                              const Battery& battery, VisualQa& backend,
                              const JudgeOptions& options) {
  if (!set.complete || set.images.size() != static_cast<std::size_t>(set.n)) {
    throw ArgumentError(fmt::format("candidate set {} is incomplete", set.prompt_id));
  }
  const auto questions = instantiate(battery, prompt.class_name, prompt.text);
  std::map<std::string_view, const QuestionSpec*> by_id;
  for (const auto& q : questions) by_id[q.question_id] = &q;

  JudgedSet judged;
  judged.prompt_id = set.prompt_id;
  for (std::size_t i = 0; i < set.images.size(); ++i) {
    std::vector<AnswerRecord> answers;
    answers.reserve(questions.size());
    bool failed = false;
    for (const auto& q : questions) {
      VqaRequest request;
      request.image = set.images[i];
      request.question = substitute(battery.question_template, {{"question", q.text}});
      request.question_meta = QuestionMeta{q.question_id, q.polarity == Polarity::positive};
      if (q.depends_on) {
        const auto* dep = by_id.at(*q.depends_on);
        request.depends_on =
            QuestionMeta{dep->question_id, dep->polarity == Polarity::positive};
      }
      std::string raw;
      try {
        raw = backend.answer(request);
      } catch (const BackendError& e) {
        spdlog::warn("{} image {}: VQA failed on {}: {}", set.prompt_id, i,
                     q.question_id, e.what());
        failed = true;
        break;
      }
      const auto cls = classify_answer(raw);
      if (!cls.recognized) ++judged.unrecognized_answers;
      answers.push_back(AnswerRecord{q.question_id, std::move(raw), cls.verdict});
    }
    if (failed) {
      judged.unjudged.push_back(i);
      continue;
    }
    auto card = score_image(answers, questions, options.rule);
    card.prompt_id = set.prompt_id;
    card.image_index = i;
    judged.cards.push_back(std::move(card));
    judged.answers[i] = std::move(answers);
  }
  if (judged.unrecognized_answers > 0) {
    spdlog::warn("{}: {} VQA answers were neither yes nor no; scored as nan",
                 set.prompt_id, judged.unrecognized_answers);
  }
  return judged;
}

void write_judgments(const fs::path& file, std::span<const JudgedSet> sets) {
  std::string out;
  for (const auto& s : sets) {
    for (const auto& card : s.cards) {
      const auto it = s.answers.find(card.image_index);
      if (it == s.answers.end()) continue;
      for (std::size_t k = 0; k < it->second.size(); ++k) {
        const auto& a = it->second[k];
        out += json{{"prompt_id", s.prompt_id},
                    {"image_index", card.image_index},
                    {"question_id", a.question_id},
                    {"raw_text", a.raw_text},
                    {"parsed", std::string(to_string(a.parsed))},
                    {"contribution", card.contributions.at(k)}}
                   .dump();
        out += '\n';
      }
    }
  }
  write_atomic(file, out);
}

void write_scorecards(const fs::path& file, std::span<const JudgedSet> sets) {
  std::string out;
  for (const auto& s : sets) {
    json cards = json::array();
    for (const auto& c : s.cards) {
      cards.push_back({{"image_index", c.image_index},
                       {"contributions", c.contributions},
                       {"total", c.total}});
    }
    out += json{{"prompt_id", s.prompt_id},
                {"cards", cards},
                {"unjudged", s.unjudged},
                {"unrecognized_answers", s.unrecognized_answers}}
               .dump();
    out += '\n';
  }
  write_atomic(file, out);
}

std::vector<JudgedSet> read_scorecards(const fs::path& file) {
  std::vector<JudgedSet> out;
  std::istringstream in(read_text(file));
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = json::parse(line);
      JudgedSet s;
      s.prompt_id = j.at("prompt_id").get<std::string>();
      for (const auto& c : j.at("cards")) {
        ScoreCard card;
        card.prompt_id = s.prompt_id;
        card.image_index = c.at("image_index").get<std::size_t>();
        card.contributions = c.at("contributions").get<std::vector<int>>();
        card.total = c.at("total").get<int>();
        s.cards.push_back(std::move(card));
      }
      s.unjudged = j.at("unjudged").get<std::vector<std::size_t>>();
      s.unrecognized_answers = j.value("unrecognized_answers", std::size_t{0});
      out.push_back(std::move(s));
    } catch (const json::exception& e) {
      throw IoError(fmt::format("{}:{}: {}", file.string(), line_no, e.what()));
    }
  }
  return out;
}

}  // namespace ccsr
