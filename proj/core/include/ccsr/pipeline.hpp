// Copyright 2026 The CCSR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <exception>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "ccsr/config.hpp"
#include "ccsr/dataset.hpp"

namespace ccsr {

enum class ExitCode : int {
  ok = 0,
  config = 2,
  dependency = 3,
  backend = 4,
  stage = 5,
};

/// Raised when a stage is started before its upstream stages are complete
/// and current.
class DependencyError : public StateError {
 public:
  using StateError::StateError;
};

ExitCode exit_code_for(const std::exception& e);

struct PipelineOptions {
  std::optional<std::size_t> parallelism;
  /// "base" compares against the base model; anything else is a path to a
  /// persisted ScoreSample file.
  std::string against = "base";
};

/// Runs stages against one run directory, `<output_root>/runs/<run_id>`.
///
/// A stage runs only when every earlier stage is complete and current. A
/// complete stage whose input digest is unchanged is skipped, which makes
/// re-invocation a no-op; a changed input re-runs it.
class Pipeline {
 public:
  Pipeline(RunConfig config, std::string run_id, PipelineOptions options = {});
  ~Pipeline();

  /// Throws on failure (see exit_code_for).
  void execute(Stage stage);
  /// Executes every stage from the first non-current one.
  void execute_all();

  /// Error-mapping wrappers that print diagnostics to stderr.
  ExitCode run_stage(Stage stage);
  ExitCode loop();

  const std::filesystem::path& run_dir() const noexcept { return run_dir_; }
  std::filesystem::path dataset_dir() const;
  std::filesystem::path manifest_path() const { return run_dir_ / "run.json"; }
  RunManifest manifest() const;
  /// True when the last execute() skipped the stage as already current.
  bool last_was_noop() const noexcept { return last_noop_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::filesystem::path run_dir_;
  bool last_noop_ = false;
};

}  // namespace ccsr
