// Copyright 2026 The CCSR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "ccsr/adapters.hpp"

namespace ccsr {

/// One adapter call as persisted in `transcript.jsonl`.
struct CallRecord {
  std::uint64_t call_index = 0;
  BackendKind kind = BackendKind::chat;
  std::string request_digest;
  nlohmann::json response;
};

/// Append-only sink of adapter calls. Indices increase monotonically per run;
/// opening an existing transcript continues numbering after its last record.
/// Safe for concurrent writers, each record is written whole.
class CallLog {
 public:
  /// Memory-only log.
  CallLog() = default;
  explicit CallLog(std::filesystem::path file);

  std::uint64_t append(BackendKind kind, std::string request_digest,
                       nlohmann::json response);

  std::size_t size() const;
  std::size_t count(BackendKind kind) const;
  std::vector<CallRecord> records() const;
  const std::filesystem::path& file() const noexcept { return file_; }

 private:
  mutable std::mutex mutex_;
  std::filesystem::path file_;
  std::ofstream out_;
  std::uint64_t next_index_ = 0;
  std::vector<CallRecord> records_;
};

/// Recorded responses keyed by (kind, request digest). Repeated identical
/// requests are answered with successive recorded responses; once exhausted,
/// the last one is reused.
class Transcript {
 public:
  static Transcript load(const std::filesystem::path& file);

  std::optional<nlohmann::json> next(BackendKind kind,
                                     const std::string& request_digest);
  const std::filesystem::path& file() const noexcept { return file_; }
  std::size_t size() const noexcept { return size_; }

 private:
  struct Slot {
    std::vector<nlohmann::json> responses;
    std::size_t cursor = 0;
  };
  std::filesystem::path file_;
  std::size_t size_ = 0;
  std::unique_ptr<std::mutex> mutex_ = std::make_unique<std::mutex>();
  std::map<std::pair<BackendKind, std::string>, Slot> slots_;
};

nlohmann::json to_json(const CallRecord& record);
CallRecord call_record_from_json(const nlohmann::json& j);

}  // namespace ccsr
