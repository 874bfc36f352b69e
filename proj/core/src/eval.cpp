// Copyright 2026 The CCSR Authors
// SPDX-License-Identifier: Apache-2.0

#include "ccsr/eval.hpp"

#include <cmath>
#include <map>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "json.hpp"

#include "ccsr/digest.hpp"
#include "ccsr/parallel.hpp"

namespace ccsr {

namespace fs = std::filesystem;
using nlohmann::json;

Outcome classify_difference(double a, double b, double tie_epsilon) {
  const double d = a - b;
  // d == 0 keeps exact equality a tie when epsilon is 0.
  if (d == 0.0 || std::abs(d) < tie_epsilon) return Outcome::tie;
  return d > 0 ? Outcome::win : Outcome::loss;
}

std::vector<ScoreSample> score_model(std::span<const PromptRecord> prompts,
                                     std::span<const std::int64_t> seeds,
                                     ImageGenerator& backend, ImageTextScorer& scorer,
                                     const ScoreOptions& options) {
  if (prompts.empty() || seeds.empty()) {
    throw ArgumentError("score_model needs at least one prompt and one seed");
  }
  const std::string model_id =
      options.model_id.empty() ? backend.model_id() : options.model_id;
  std::vector<ScoreSample> samples(prompts.size() * seeds.size());
  parallel_for(samples.size(), options.parallelism, [&](std::size_t i) {
    const auto& prompt = prompts[i / seeds.size()];
    const auto seed = seeds[i % seeds.size()];
    auto& sample = samples[i];
    sample.prompt_id = prompt.prompt_id;
    sample.seed = seed;
    sample.model_id = model_id;
    sample.lora_scale = options.lora_scale;
    try {
      GenerationRequest request;
      request.prompt = prompt.text;
      request.n = 1;
      request.width = options.resolution.width;
      request.height = options.resolution.height;
      request.seed = seed;
      const auto images = backend.generate(request);
      if (images.empty()) throw BackendError("generator returned no image", false);
      sample.clip_score = scorer.score(ScoreRequest{images.front(), prompt.text});
    } catch (const BackendError& e) {
      spdlog::warn("{} seed {}: sample missing: {}", prompt.prompt_id, seed, e.what());
    }
  });
  return samples;
}

WinRateReport compare(std::span<const ScoreSample> a, std::span<const ScoreSample> b,
                      double tie_epsilon) {
  if (!(tie_epsilon >= 0) || !std::isfinite(tie_epsilon)) {
    throw ArgumentError(fmt::format("tie_epsilon {} must be >= 0", tie_epsilon));
  }
  using Key = std::pair<std::string, std::int64_t>;
  const auto index = [](std::span<const ScoreSample> side, const char* name) {
    std::map<Key, const ScoreSample*> out;
    for (const auto& s : side) {
      if (!out.emplace(Key{s.prompt_id, s.seed}, &s).second) {
        throw ArgumentError(fmt::format("side {} has duplicate sample ({}, {})", name,
                                        s.prompt_id, s.seed));
      }
    }
    return out;
  };
  const auto ia = index(a, "a");
  const auto ib = index(b, "b");

  std::vector<std::string> unmatched;
  for (const auto& [k, _] : ia) {
    if (!ib.count(k)) unmatched.push_back(fmt::format("({}, {}) only in a", k.first, k.second));
  }
  for (const auto& [k, _] : ib) {
    if (!ia.count(k)) unmatched.push_back(fmt::format("({}, {}) only in b", k.first, k.second));
  }
  if (!unmatched.empty()) {
    std::string list;
    for (std::size_t i = 0; i < unmatched.size() && i < 10; ++i) {
      list += (i ? "; " : "") + unmatched[i];
    }
    if (unmatched.size() > 10) list += fmt::format("; ... {} more", unmatched.size() - 10);
    throw ArgumentError(fmt::format("sample keys differ: {}", list));
  }

  WinRateReport r;
  r.tie_epsilon = tie_epsilon;
  if (!a.empty()) r.model_a = a.front().model_id;
  if (!b.empty()) r.model_b = b.front().model_id;
  for (const auto& [k, sa] : ia) {
    const auto* sb = ib.at(k);
    if (sa->missing() || sb->missing()) {
      ++r.dropped;
      continue;
    }
    switch (classify_difference(*sa->clip_score, *sb->clip_score, tie_epsilon)) {
      case Outcome::win: ++r.wins; break;
      case Outcome::loss: ++r.losses; break;
      case Outcome::tie: ++r.ties; break;
    }
  }
  if (r.total() > 0) {
    const auto total = static_cast<double>(r.total());
    r.win_rate = static_cast<double>(r.wins) / total;
    r.win_plus_tie_rate = static_cast<double>(r.wins + r.ties) / total;
  }
  return r;
}

std::vector<ScaleCurve> sweep_scales(std::span<const PromptRecord> prompts,
                                     std::span<const double> scales,
                                     std::span<const std::int64_t> seeds,
                                     std::shared_ptr<ImageGenerator> base,
                                     const AdapterWeightsRef& weights,
                                     ImageTextScorer& scorer, const ScoreOptions& options) {
  for (std::size_t i = 0; i < scales.size(); ++i) {
    if (!(scales[i] >= 0.0 && scales[i] <= 1.0)) {
      throw ArgumentError(fmt::format("sweep scale {} is outside [0, 1]", scales[i]));
    }
    if (i > 0 && !(scales[i] > scales[i - 1])) {
      throw ArgumentError("sweep scales must be strictly ascending");
    }
  }
  std::vector<ScaleCurve> curves(prompts.size());
  for (std::size_t p = 0; p < prompts.size(); ++p) curves[p].prompt_id = prompts[p].prompt_id;
  for (const double scale : scales) {
    auto generator = scaled_backend(base, weights, scale);
    ScoreOptions opts = options;
    opts.lora_scale = scale;
    opts.model_id.clear();
    const auto samples = score_model(prompts, seeds, *generator, scorer, opts);
    for (std::size_t p = 0; p < prompts.size(); ++p) {
      double sum = 0;
      std::size_t n = 0;
      for (std::size_t s = 0; s < seeds.size(); ++s) {
        const auto& sample = samples[p * seeds.size() + s];
        if (sample.missing()) continue;
        sum += *sample.clip_score;
        ++n;
      }
      CurvePoint point{scale, std::nullopt};
      if (n > 0) point.mean_score = sum / static_cast<double>(n);
      curves[p].points.push_back(point);
    }
  }
  return curves;
}

ReportArtifacts render_report(const WinRateReport& report, std::span<const ScaleCurve> curves,
                              const fs::path& dir) {
  fs::create_directories(dir);
  ReportArtifacts out;
  out.summary = dir / "winrate.json";
  const json j = {{"model_a", report.model_a},
                  {"model_b", report.model_b},
                  {"wins", report.wins},
                  {"losses", report.losses},
                  {"ties", report.ties},
                  {"dropped", report.dropped},
                  {"total", report.total()},
                  {"win_rate", report.win_rate},
                  {"win_plus_tie_rate", report.win_plus_tie_rate},
                  {"tie_epsilon", report.tie_epsilon}};
  write_atomic(out.summary, j.dump(2) + "\n");

  const auto csv_path = dir / "curves.csv";
  if (curves.empty()) {
    fs::remove(csv_path);
    return out;
  }
  std::string csv = "prompt_id,scale,mean_score\n";
  for (const auto& c : curves) {
    for (const auto& p : c.points) {
      csv += fmt::format("{},{},{}\n", c.prompt_id, p.scale,
                         p.mean_score ? fmt::format("{}", *p.mean_score) : std::string());
    }
  }
  write_atomic(csv_path, csv);
  out.curves = csv_path;
  return out;
}

WinRateReport read_report(const fs::path& summary) {
  try {
    const auto j = json::parse(read_text(summary));
    WinRateReport r;
    r.model_a = j.at("model_a").get<std::string>();
    r.model_b = j.at("model_b").get<std::string>();
    r.wins = j.at("wins").get<std::size_t>();
    r.losses = j.at("losses").get<std::size_t>();
    r.ties = j.at("ties").get<std::size_t>();
    r.dropped = j.value("dropped", std::size_t{0});
    r.win_rate = j.at("win_rate").get<double>();
    r.win_plus_tie_rate = j.at("win_plus_tie_rate").get<double>();
    r.tie_epsilon = j.at("tie_epsilon").get<double>();
    return r;
  } catch (const json::exception& e) {
    throw IoError(fmt::format("{}: {}", summary.string(), e.what()));
  }
}

std::vector<ScaleCurve> read_curves(const fs::path& csv) {
  std::vector<ScaleCurve> out;
  std::istringstream in(read_text(csv));
  std::string line;
  std::getline(in, line);
  if (line != "prompt_id,scale,mean_score") {
    throw IoError(fmt::format("{}: unexpected header '{}'", csv.string(), line));
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 == std::string::npos ? c1 : c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos) {
      throw IoError(fmt::format("{}: malformed row '{}'", csv.string(), line));
    }
    const auto id = line.substr(0, c1);
    CurvePoint p;
    try {
      p.scale = std::stod(line.substr(c1 + 1, c2 - c1 - 1));
      const auto mean = line.substr(c2 + 1);
      if (!mean.empty()) p.mean_score = std::stod(mean);
    } catch (const std::exception&) {
      throw IoError(fmt::format("{}: malformed row '{}'", csv.string(), line));
    }
    if (out.empty() || out.back().prompt_id != id) out.push_back(ScaleCurve{id, {}});
    out.back().points.push_back(p);
  }
  return out;
}

void write_samples(const fs::path& file, std::span<const ScoreSample> samples) {
  std::string out;
  for (const auto& s : samples) {
    json j = {{"prompt_id", s.prompt_id}, {"seed", s.seed}, {"model_id", s.model_id}};
    j["lora_scale"] = s.lora_scale ? json(*s.lora_scale) : json(nullptr);
    j["clip_score"] = s.clip_score ? json(*s.clip_score) : json(nullptr);
    out += j.dump();
    out += '\n';
  }
  write_atomic(file, out);
}

std::vector<ScoreSample> read_samples(const fs::path& file) {
  std::vector<ScoreSample> out;
  std::istringstream in(read_text(file));
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = json::parse(line);
      ScoreSample s;
      s.prompt_id = j.at("prompt_id").get<std::string>();
      s.seed = j.at("seed").get<std::int64_t>();
      s.model_id = j.value("model_id", std::string());
      if (j.contains("lora_scale") && !j.at("lora_scale").is_null()) {
        s.lora_scale = j.at("lora_scale").get<double>();
      }
      if (j.contains("clip_score") && !j.at("clip_score").is_null()) {
        s.clip_score = j.at("clip_score").get<double>();
      }
      out.push_back(std::move(s));
    } catch (const json::exception& e) {
      throw IoError(fmt::format("{}:{}: {}", file.string(), line_no, e.what()));
    }
  }
  return out;
}

}  // namespace ccsr
