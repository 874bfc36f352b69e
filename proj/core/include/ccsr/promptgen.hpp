// Copyright 2026 The CCSR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ccsr/adapters.hpp"

namespace ccsr {

struct ClassSeed {
  std::string class_name;
  int prompt_count = 1;
  std::vector<std::string> style_directives;

  void validate() const;
};

struct PromptRecord {
  std::string prompt_id;
  std::string class_name;
  std::string text;
  SamplingParams sampling;
  std::chrono::system_clock::time_point created_at{};
};

/// Named system-prompt templates. Placeholders use `{name}` syntax; the
/// recognised names are class_name, class_name_lower and style_directives.
class TemplateRegistry {
 public:
  /// Registry holding the built-in "default" template.
  static TemplateRegistry with_defaults();

  void add(std::string id, std::string text);
  /// Adds every `<id>.txt` file of the directory.
  void load_directory(const std::filesystem::path& dir);

  bool contains(std::string_view id) const;
  const std::string& get(std::string_view id) const;

 private:
  std::map<std::string, std::string, std::less<>> templates_;
};

std::string build_system_prompt(const ClassSeed& seed,
                                std::string_view template_id,
                                const TemplateRegistry& registry);

enum class PromptReject { none, empty, missing_class, too_long };
std::string_view to_string(PromptReject reason);

struct PromptVerdict {
  PromptReject reason = PromptReject::none;
  bool accepted() const noexcept { return reason == PromptReject::none; }
};

inline constexpr std::size_t kDefaultTokenBudget = 77;

/// Whitespace-split word count is the token measure.
PromptVerdict validate_prompt(std::string_view text, std::string_view class_name,
                              std::size_t token_budget = kDefaultTokenBudget);

/// Splits a completion into candidate prompts: one per line, blank lines
/// dropped, list markers ("1.", "2)", "-", "*") and wrapping quotes removed.
std::vector<std::string> parse_prompt_lines(std::string_view completion);

/// Case- and whitespace-insensitive dedup key.
std::string normalize_prompt(std::string_view text);

std::string class_slug(std::string_view class_name);

struct PromptGenOptions {
  std::string template_id = "default";
  std::size_t token_budget = kDefaultTokenBudget;
  /// Total prompts requested per class may not exceed factor * prompt_count.
  int attempt_factor = 3;
  std::size_t parallelism = 1;
  /// Prefixed onto prompt ids and used to tag the request ("validation").
  std::string id_prefix;
  std::string purpose;
};

struct PromptGenResult {
  std::vector<PromptRecord> records;
  /// class_name -> prompts missing after the attempt budget ran out.
  std::map<std::string, int> shortfall;

  bool partial() const noexcept { return !shortfall.empty(); }
};

/// Records come out grouped by seed order, each class in acceptance order,
/// with ids `<prefix><class slug>-<nnn>`.
PromptGenResult generate_prompts(std::span<const ClassSeed> seeds,
                                 const SamplingParams& params,
                                 ChatModel& backend,
                                 const TemplateRegistry& registry,
                                 const PromptGenOptions& options = {});

void write_prompts(const std::filesystem::path& file,
                   std::span<const PromptRecord> records);
std::vector<PromptRecord> read_prompts(const std::filesystem::path& file);

}  // namespace ccsr
