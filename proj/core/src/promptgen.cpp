// Copyright 2026 The CCSR Authors
// SPDX-License-Identifier: Apache-2.0

#include "ccsr/promptgen.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "json.hpp"

#include "ccsr/digest.hpp"
#include "ccsr/parallel.hpp"

namespace ccsr {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string lowercase(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

constexpr const char* kDefaultTemplate =
    "You write prompts for a text-to-image diffusion model. Every prompt must "
    "show {class_name} as the main subject and must be written as a "
    "comma-separated list of descriptive keywords covering subject, action, "
    "setting, lighting and camera. Each prompt should request a "
    "{style_directives} image. Vary the scenes. Reply with one prompt per "
    "line and nothing else: no numbering, no commentary.";

}  // namespace

void ClassSeed::validate() const {
  if (trim(class_name).empty()) throw ArgumentError("class_name must not be empty");
  if (prompt_count < 1) {
    throw ArgumentError(fmt::format("prompt_count for '{}' must be >= 1, got {}",
                                    class_name, prompt_count));
  }
}

TemplateRegistry TemplateRegistry::with_defaults() {
  TemplateRegistry r;
  r.add("default", kDefaultTemplate);
  return r;
}

void TemplateRegistry::add(std::string id, std::string text) {
  templates_[std::move(id)] = std::move(text);
}

void TemplateRegistry::load_directory(const fs::path& dir) {
  if (!fs::is_directory(dir)) {
    throw ConfigError(fmt::format("template directory {} does not exist", dir.string()));
  }
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".txt") {
      add(entry.path().stem().string(), read_text(entry.path()));
    }
  }
}

bool TemplateRegistry::contains(std::string_view id) const {
  return templates_.find(id) != templates_.end();
}

const std::string& TemplateRegistry::get(std::string_view id) const {
  auto it = templates_.find(id);
  if (it == templates_.end()) throw ConfigError(fmt::format("unknown template '{}'", id));
  return it->second;
}

std::string build_system_prompt(const ClassSeed& seed, std::string_view template_id,
                                const TemplateRegistry& registry) {
  const std::string& tmpl = registry.get(template_id);

  std::string directives;
  for (const auto& d : seed.style_directives) {
    if (!directives.empty()) directives += ", ";
    directives += d;
  }
  if (directives.empty()) directives = "photo-realistic";

  const std::map<std::string, std::string, std::less<>> values = {
      {"class_name", seed.class_name},
      {"class_name_lower", lowercase(seed.class_name)},
      {"style_directives", directives},
  };

  static const std::regex placeholder(R"(\{([A-Za-z_][A-Za-z0-9_]*)\})");
  std::string out;
  auto begin = std::sregex_iterator(tmpl.begin(), tmpl.end(), placeholder);
  std::size_t last = 0;
  for (auto it = begin; it != std::sregex_iterator(); ++it) {
    const auto& m = *it;
    const auto name = m[1].str();
    auto v = values.find(name);
    if (v == values.end()) {
      throw TemplateError(name, fmt::format("template '{}' has unresolved placeholder {{{}}}",
                                            template_id, name));
    }
    out.append(tmpl, last, static_cast<std::size_t>(m.position(0)) - last);
    out += v->second;
    last = static_cast<std::size_t>(m.position(0) + m.length(0));
  }
  out.append(tmpl, last);
  return out;
}

std::string_view to_string(PromptReject reason) {
  switch (reason) {
    case PromptReject::none: return "accept";
    case PromptReject::empty: return "empty";
    case PromptReject::missing_class: return "missing-class";
    case PromptReject::too_long: return "too-long";
  }
  return "?";
}

PromptVerdict validate_prompt(std::string_view text, std::string_view class_name,
                              std::size_t token_budget) {
  const auto trimmed = trim(text);
  if (trimmed.empty()) return {PromptReject::empty};
  if (lowercase(trimmed).find(lowercase(trim(class_name))) == std::string::npos) {
    return {PromptReject::missing_class};
  }
  std::istringstream words(trimmed);
  std::size_t count = 0;
  for (std::string w; words >> w;) ++count;
  if (count > token_budget) return {PromptReject::too_long};
  return {};
}

std::vector<std::string> parse_prompt_lines(std::string_view completion) {
  static const std::regex marker(R"(^(\(?\d+[.):]|[-*•]|prompt\s*\d*\s*:)\s*)",
                                 std::regex::icase);
  std::vector<std::string> out;
  std::istringstream in{std::string(completion)};
  for (std::string line; std::getline(in, line);) {
    auto t = trim(line);
    t = std::regex_replace(t, marker, "", std::regex_constants::format_first_only);
    t = trim(t);
    if (t.size() >= 2 && (t.front() == '"' || t.front() == '\'') && t.back() == t.front()) {
      t = trim(t.substr(1, t.size() - 2));
    }
    if (!t.empty()) out.push_back(std::move(t));
  }
  return out;
}

std::string normalize_prompt(std::string_view text) {
  std::istringstream words{lowercase(text)};
  std::string out;
  for (std::string w; words >> w;) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

std::string class_slug(std::string_view class_name) {
  std::string out;
  for (unsigned char c : class_name) {
    if (std::isalnum(c)) {
      out += static_cast<char>(std::tolower(c));
    } else if (!out.empty() && out.back() != '-') {
      out += '-';
    }
  }
  while (!out.empty() && out.back() == '-') out.pop_back();
  return out.empty() ? "class" : out;
}

namespace {

std::string user_prompt(const ClassSeed& seed, int ask, int batch,
                        const std::string& purpose) {
  const std::string kind = purpose.empty() ? "" : purpose + " ";
  if (batch == 0) {
    return fmt::format("Generate {} {}prompts for {}.", ask, kind, seed.class_name);
  }
  return fmt::format("Generate {} more {}prompts for {}. Batch {}.", ask, kind,
                     seed.class_name, batch + 1);
}

struct ClassOutcome {
  std::vector<std::string> texts;
  int shortfall = 0;
};

ClassOutcome generate_for_class(const ClassSeed& seed, const SamplingParams& params,
                                ChatModel& backend, const TemplateRegistry& registry,
                                const PromptGenOptions& options) {
  const auto system = build_system_prompt(seed, options.template_id, registry);
  const int budget = std::max(1, options.attempt_factor) * seed.prompt_count;

  ClassOutcome outcome;
  std::set<std::string> seen;
  int requested = 0;
  std::size_t rejected = 0;
  for (int batch = 0;
       static_cast<int>(outcome.texts.size()) < seed.prompt_count && requested < budget;
       ++batch) {
    const int missing = seed.prompt_count - static_cast<int>(outcome.texts.size());
    const int ask = std::min(missing, budget - requested);
    requested += ask;
    const auto user = user_prompt(seed, ask, batch, options.purpose);

    std::string completion;
    try {
      completion = backend.complete(ChatRequest{system, user, params});
    } catch (const BackendError& e) {
      throw BackendError(fmt::format("prompt generation for '{}' failed on request "
                                     "\"{}\": {}",
                                     seed.class_name, user, e.what()),
                         false);
    }
    int taken = 0;
    for (auto& line : parse_prompt_lines(completion)) {
      if (taken == ask) break;
      if (!validate_prompt(line, seed.class_name, options.token_budget).accepted()) {
        ++rejected;
        continue;
      }
      if (!seen.insert(normalize_prompt(line)).second) {
        ++rejected;
        continue;
      }
      outcome.texts.push_back(std::move(line));
      ++taken;
    }
  }
  outcome.shortfall = seed.prompt_count - static_cast<int>(outcome.texts.size());
  if (rejected > 0) {
    spdlog::debug("promptgen: {} candidate prompts for '{}' rejected or duplicated",
                  rejected, seed.class_name);
  }
  return outcome;
}

}  // namespace

PromptGenResult generate_prompts(std::span<const ClassSeed> seeds,
                                 const SamplingParams& params, ChatModel& backend,
                                 const TemplateRegistry& registry,
                                 const PromptGenOptions& options) {
  if (seeds.empty()) throw ArgumentError("generate_prompts needs at least one class seed");
  params.validate();
  std::set<std::string> slugs;
  for (const auto& s : seeds) {
    s.validate();
    if (!slugs.insert(class_slug(s.class_name)).second) {
      throw ArgumentError(fmt::format("class '{}' appears twice", s.class_name));
    }
  }
  registry.get(options.template_id);

  std::vector<ClassOutcome> outcomes(seeds.size());
  parallel_for(seeds.size(), options.parallelism, [&](std::size_t i) {
    outcomes[i] = generate_for_class(seeds[i], params, backend, registry, options);
  });

  PromptGenResult result;
  const auto now = std::chrono::system_clock::now();
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const auto slug = class_slug(seeds[i].class_name);
    for (std::size_t k = 0; k < outcomes[i].texts.size(); ++k) {
      result.records.push_back(PromptRecord{
          fmt::format("{}{}-{:03}", options.id_prefix, slug, k), seeds[i].class_name,
          std::move(outcomes[i].texts[k]), params, now});
    }
    if (outcomes[i].shortfall > 0) {
      result.shortfall[seeds[i].class_name] = outcomes[i].shortfall;
    }
  }
  return result;
}

void write_prompts(const fs::path& file, std::span<const PromptRecord> records) {
  std::string out;
  for (const auto& r : records) {
    out += json{{"prompt_id", r.prompt_id},
                {"class_name", r.class_name},
                {"text", r.text},
                {"temperature", r.sampling.temperature},
                {"top_p", r.sampling.top_p}}
               .dump();
    out += '\n';
  }
  write_atomic(file, out);
}

std::vector<PromptRecord> read_prompts(const fs::path& file) {
  std::vector<PromptRecord> out;
  std::istringstream in(read_text(file));
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = json::parse(line);
      PromptRecord r;
      r.prompt_id = j.at("prompt_id").get<std::string>();
      r.class_name = j.at("class_name").get<std::string>();
      r.text = j.at("text").get<std::string>();
      r.sampling.temperature = j.at("temperature").get<double>();
      r.sampling.top_p = j.at("top_p").get<double>();
      out.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw IoError(fmt::format("{}:{}: {}", file.string(), line_no, e.what()));
    }
  }
  return out;
}

}  // namespace ccsr
