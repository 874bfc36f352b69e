// Copyright 2026 The CCSR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace ccsr {

/// Root of every error raised by the pipeline.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad or unresolvable configuration (unknown ids, missing trainer, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A caller passed arguments that violate an operation's precondition.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// A template still carries a placeholder after substitution.
class TemplateError : public Error {
 public:
  TemplateError(const std::string& placeholder, const std::string& message)
      : Error(message), placeholder_(placeholder) {}
  const std::string& placeholder() const noexcept { return placeholder_; }

 private:
  std::string placeholder_;
};

/// Failure talking to a model backend. Retriable errors may be retried by the
/// adapter guard; non-retriable ones (and exhausted budgets) propagate.
class BackendError : public Error {
 public:
  BackendError(const std::string& message, bool retriable)
      : Error(message), retriable_(retriable) {}
  bool retriable() const noexcept { return retriable_; }

 private:
  bool retriable_;
};

/// A backend returned data that violates the adapter contract.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Run-state violation, e.g. completing a stage whose dependencies are not.
class StateError : public Error {
 public:
  using Error::Error;
};

class IntegrityError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  TrainingError(const std::string& message, std::string log_excerpt)
      : Error(message), log_excerpt_(std::move(log_excerpt)) {}
  const std::string& log_excerpt() const noexcept { return log_excerpt_; }

 private:
  std::string log_excerpt_;
};

/// Export could not find the image objects a pair references.
class MissingArtifactError : public Error {
 public:
  MissingArtifactError(const std::string& message,
                       std::vector<std::string> content_ids)
      : Error(message), content_ids_(std::move(content_ids)) {}
  const std::vector<std::string>& content_ids() const noexcept {
    return content_ids_;
  }

 private:
  std::vector<std::string> content_ids_;
};

/// A pipeline stage could not finish; carries the failing work unit.
class StageError : public Error {
 public:
  using Error::Error;
};

}  // namespace ccsr
