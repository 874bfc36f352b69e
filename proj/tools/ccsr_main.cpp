// Copyright 2026 The CCSR Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "ccsr/config.hpp"
#include "ccsr/pipeline.hpp"

namespace fs = std::filesystem;

namespace {

struct Flags {
  std::string config;
  std::string run;
  std::optional<std::size_t> parallelism;
  bool resume = false;
  std::string against = "base";
  bool verbose = false;
  bool quiet = false;
};

void add_run_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config,-c", f.config, "Run configuration (JSON)");
  cmd->add_option("--run,-r", f.run, "Run id (defaults to the config's run_id)");
  cmd->add_option("--stage-parallelism,-j", f.parallelism,
                  "Workers for per-prompt work (0 = one per hardware thread)");
}

int fail(ccsr::ExitCode code, const std::string& message) {
  std::cerr << "ccsr: " << message << "\n";
  return static_cast<int>(code);
}

// Loads --config, or the snapshot stored in an existing run directory.
std::optional<ccsr::RunConfig> load_config(const Flags& f, bool needs_existing_run,
                                           int& exit_code) {
  fs::path file = f.config;
  if (file.empty()) {
    if (f.run.empty()) {
      exit_code = fail(ccsr::ExitCode::config, "either --config or --run is required");
      return std::nullopt;
    }
    const char* root = std::getenv("CCSR_OUTPUT_ROOT");
    file = fs::path(root && *root ? root : "ccsr_out") / "runs" / f.run / "config.json";
    if (!fs::exists(file)) {
      exit_code = needs_existing_run
                      ? fail(ccsr::ExitCode::dependency,
                             "run '" + f.run + "' has no completed stages (" +
                                 file.string() + " not found)")
                      : fail(ccsr::ExitCode::config,
                             "run '" + f.run + "' does not exist; pass --config");
      return std::nullopt;
    }
  }
  try {
    auto result = ccsr::validate_config(file);
    if (!result.ok()) {
      std::cerr << "ccsr: " << file.string() << " has " << result.violations.size()
                << " problem(s):\n";
      for (const auto& v : result.violations) std::cerr << "  - " << v << "\n";
      exit_code = static_cast<int>(ccsr::ExitCode::config);
      return std::nullopt;
    }
    return std::move(result.config);
  } catch (const std::exception& e) {
    exit_code = fail(ccsr::ExitCode::config, e.what());
    return std::nullopt;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Curate class-conditioned fine-tuning data for text-to-image models"};
  app.require_subcommand(1);
  app.fallthrough();
  Flags flags;
  app.add_flag("--verbose,-v", flags.verbose, "Debug logging");
  app.add_flag("--quiet,-q", flags.quiet, "Warnings and errors only");

  struct Command {
    const char* name;
    std::optional<ccsr::Stage> stage;
    const char* help;
  };
  const Command commands[] = {
      {"prompts", ccsr::Stage::promptgen, "Generate class-conditioned prompts"},
      {"generate", ccsr::Stage::generation, "Generate N candidate images per prompt"},
      {"judge", ccsr::Stage::judge, "Score candidates with the VQA question battery"},
      {"filter", ccsr::Stage::filter, "Detection filtering and optimal-pair extraction"},
      {"export", ccsr::Stage::export_pairs, "Write the fine-tuning dataset bundle"},
      {"train", ccsr::Stage::train, "Run the external LoRA trainer"},
      {"eval", ccsr::Stage::eval, "Win-rate comparison and LoRA scale sweep"},
      {"loop", std::nullopt, "Run every stage in order (resumes where the run stopped)"},
  };
  std::map<CLI::App*, const Command*> by_app;
  for (const auto& c : commands) {
    auto* sub = app.add_subcommand(c.name, c.help);
    add_run_flags(sub, flags);
    if (!c.stage || *c.stage == ccsr::Stage::eval) {
      sub->add_option("--against", flags.against,
                      "'base' or a score-sample file to compare against")
          ->capture_default_str();
    }
    if (!c.stage) sub->add_flag("--resume", flags.resume, "Continue an interrupted run");
    by_app[sub] = &c;
  }
  auto* validate = app.add_subcommand("validate", "Check a configuration file");
  validate->add_option("--config,-c", flags.config, "Run configuration (JSON)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(ccsr::ExitCode::config);
  }
  spdlog::set_level(flags.verbose ? spdlog::level::debug
                    : flags.quiet ? spdlog::level::warn
                                  : spdlog::level::info);
  spdlog::set_pattern("[%H:%M:%S] [%^%l%$] %v");

  int exit_code = 0;
  if (validate->parsed()) {
    auto config = load_config(flags, false, exit_code);
    if (!config) return exit_code;
    std::cout << config->canonical_json() << "\n";
    return 0;
  }

  const Command* command = nullptr;
  for (const auto& [sub, c] : by_app) {
    if (sub->parsed()) command = c;
  }
  const bool upstream_needed = command->stage && *command->stage != ccsr::Stage::promptgen;
  auto config = load_config(flags, upstream_needed, exit_code);
  if (!config) return exit_code;

  try {
    ccsr::PipelineOptions options;
    options.parallelism = flags.parallelism;
    options.against = flags.against;
    ccsr::Pipeline pipeline(std::move(*config), flags.run, options);
    ccsr::ExitCode code;
    if (command->stage) {
      code = pipeline.run_stage(*command->stage);
    } else {
      if (flags.resume) {
        const auto point = pipeline.manifest().resume_point();
        spdlog::info("resuming {} at {}", pipeline.run_dir().string(),
                     point ? std::string(ccsr::to_string(*point)) : "(all complete)");
      }
      code = pipeline.loop();
    }
    if (code == ccsr::ExitCode::ok) {
      std::cout << pipeline.run_dir().string() << "\n";
    }
    return static_cast<int>(code);
  } catch (const std::exception& e) {
    return fail(ccsr::exit_code_for(e), e.what());
  }
}
