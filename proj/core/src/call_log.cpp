// Copyright 2026 The CCSR Authors
// SPDX-License-Identifier: Apache-2.0

#include "ccsr/call_log.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "ccsr/digest.hpp"
#include "ccsr/wire.hpp"

namespace ccsr {

namespace fs = std::filesystem;
using nlohmann::json;

json to_json(const CallRecord& record) {
  return json{{"call_index", record.call_index},
              {"backend_kind", std::string(to_string(record.kind))},
              {"request_digest", record.request_digest},
              {"response", record.response}};
}

CallRecord call_record_from_json(const json& j) {
  CallRecord r;
  r.call_index = j.at("call_index").get<std::uint64_t>();
  r.kind = parse_backend_kind(j.at("backend_kind").get<std::string>());
  r.request_digest = j.at("request_digest").get<std::string>();
  r.response = j.at("response");
  return r;
}

namespace {

std::vector<CallRecord> read_records(const fs::path& file) {
  std::vector<std::string> lines;
  std::ifstream in(file);
  for (std::string line; std::getline(in, line);) lines.push_back(std::move(line));
  std::vector<CallRecord> out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    try {
      out.push_back(call_record_from_json(json::parse(lines[i])));
    } catch (const json::exception& e) {
      // A torn final line is what an interrupted run leaves behind.
      if (i + 1 == lines.size()) break;
      throw IoError(fmt::format("{}:{}: bad transcript record: {}",
                                file.string(), i + 1, e.what()));
    }
  }
  return out;
}

}  // namespace

CallLog::CallLog(fs::path file) : file_(std::move(file)) {
  if (file_.has_parent_path()) fs::create_directories(file_.parent_path());
  if (fs::exists(file_)) {
    for (const auto& r : read_records(file_)) {
      next_index_ = std::max(next_index_, r.call_index + 1);
    }
  }
  out_.open(file_, std::ios::app);
  if (!out_) throw IoError(fmt::format("cannot open {}", file_.string()));
  if (fs::exists(file_) && fs::file_size(file_) > 0) {
    std::ifstream tail(file_, std::ios::binary);
    tail.seekg(-1, std::ios::end);
    if (tail.get() != '\n') out_ << '\n';
  }
}

std::uint64_t CallLog::append(BackendKind kind, std::string request_digest,
                              json response) {
  std::lock_guard lock(mutex_);
  CallRecord record{next_index_++, kind, std::move(request_digest),
                    std::move(response)};
  if (out_.is_open()) {
    out_ << to_json(record).dump() << '\n';
    out_.flush();
  }
  records_.push_back(std::move(record));
  return records_.back().call_index;
}

std::size_t CallLog::size() const {
  std::lock_guard lock(mutex_);
  return records_.size();
}

std::size_t CallLog::count(BackendKind kind) const {
  std::lock_guard lock(mutex_);
  std::size_t n = 0;
  for (const auto& r : records_) n += r.kind == kind ? 1 : 0;
  return n;
}

std::vector<CallRecord> CallLog::records() const {
  std::lock_guard lock(mutex_);
  return records_;
}

Transcript Transcript::load(const fs::path& file) {
  if (!fs::exists(file)) {
    throw ConfigError(fmt::format("transcript {} does not exist", file.string()));
  }
  Transcript t;
  t.file_ = file;
  auto records = read_records(file);
  std::sort(records.begin(), records.end(),
            [](const CallRecord& a, const CallRecord& b) {
              return a.call_index < b.call_index;
            });
  for (auto& r : records) {
    t.slots_[{r.kind, r.request_digest}].responses.push_back(std::move(r.response));
  }
  t.size_ = records.size();
  return t;
}

std::optional<json> Transcript::next(BackendKind kind, const std::string& digest) {
  std::lock_guard lock(*mutex_);
  auto it = slots_.find({kind, digest});
  if (it == slots_.end() || it->second.responses.empty()) return std::nullopt;
  auto& slot = it->second;
  const std::size_t i = std::min(slot.cursor, slot.responses.size() - 1);
  if (slot.cursor < slot.responses.size()) ++slot.cursor;
  return slot.responses[i];
}

namespace wire {

json request_json(const ChatRequest& r) {
  return json{{"system", r.system_prompt},
              {"user", r.user_prompt},
              {"temperature", r.params.temperature},
              {"top_p", r.params.top_p},
              {"max_tokens", r.params.max_tokens}};
}

json request_json(const GenerationRequest& r) {
  json j{{"prompt", r.prompt}, {"n", r.n}, {"width", r.width}, {"height", r.height}};
  j["seed"] = r.seed ? json(*r.seed) : json(nullptr);
  if (r.adapter) {
    j["adapter"] = json{{"digest", r.adapter->weights_digest},
                        {"scale", r.adapter->scale}};
  }
  return j;
}

json request_json(const VqaRequest& r) {
  return json{{"image", r.image.content_id}, {"question", r.question}};
}

json request_json(const DetectRequest& r) {
  return json{{"image", r.image.content_id}, {"classes", r.class_names}};
}

json request_json(const ScoreRequest& r) {
  return json{{"image", r.image.content_id}, {"text", r.text}};
}

std::string digest(const json& request) { return sha256_hex(request.dump()); }

json image_refs_json(const std::vector<ImageRef>& refs) {
  json arr = json::array();
  for (const auto& r : refs) {
    arr.push_back({{"content_id", r.content_id}, {"width", r.width}, {"height", r.height}});
  }
  return arr;
}

std::vector<ImageRef> image_refs_from_json(const json& j) {
  std::vector<ImageRef> out;
  for (const auto& e : j) {
    const auto cid = e.at("content_id").get<std::string>();
    out.push_back(ImageRef{cid, e.at("width").get<int>(), e.at("height").get<int>(),
                           (fs::path("objects") / (cid + ".png")).generic_string()});
  }
  return out;
}

json detections_json(const std::vector<Detection>& detections) {
  json arr = json::array();
  for (const auto& d : detections) {
    arr.push_back({{"label", d.class_label},
                   {"confidence", d.confidence},
                   {"bbox", {d.bbox.x, d.bbox.y, d.bbox.w, d.bbox.h}}});
  }
  return arr;
}

std::vector<Detection> detections_from_json(const json& j) {
  std::vector<Detection> out;
  for (const auto& e : j) {
    Detection d;
    d.class_label = e.at("label").get<std::string>();
    d.confidence = e.at("confidence").get<double>();
    const auto& b = e.at("bbox");
    if (!b.is_array() || b.size() != 4) throw ValidationError("bbox must be [x, y, w, h]");
    d.bbox = BBox{b[0].get<double>(), b[1].get<double>(), b[2].get<double>(),
                  b[3].get<double>()};
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace wire
}  // namespace ccsr
