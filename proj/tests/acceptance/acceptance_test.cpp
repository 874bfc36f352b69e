// Copyright 2026 The CCSR Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "json.hpp"

#include "ccsr/config.hpp"
#include "ccsr/dataset.hpp"
#include "ccsr/detectfilter.hpp"
#include "ccsr/eval.hpp"
#include "ccsr/finetune.hpp"
#include "ccsr/judge.hpp"
#include "ccsr/mock_backends.hpp"
#include "test_support.hpp"

namespace {

using namespace ccsr;
namespace fs = std::filesystem;
using nlohmann::json;

struct Failure {
  std::string what;
};

void require(bool ok, const std::string& what) {
  if (!ok) throw Failure{what};
}

// ---------------------------------------------------------------------------
// Reference scoring, independent of the judge module: contribution table per
// (polarity, verdict), dependency read from the referenced raw answer.

int reference_total(const std::vector<QuestionSpec>& battery,
                    const std::vector<Verdict>& raw, ScoringRule rule) {
  int total = 0;
  for (std::size_t k = 0; k < battery.size(); ++k) {
    Verdict v = raw[k];
    if (battery[k].depends_on) {
      for (std::size_t r = 0; r < k; ++r) {
        if (battery[r].question_id == *battery[k].depends_on && raw[r] == Verdict::no) {
          v = Verdict::nan;
        }
      }
    }
    const bool pos = battery[k].polarity == Polarity::positive;
    if (v == Verdict::yes) total += pos ? 1 : -1;
    if (v == Verdict::no && !pos && rule == ScoringRule::plus_one) total += 1;
  }
  return total;
}

std::vector<QuestionSpec> random_battery(std::mt19937_64& rng, std::size_t q) {
  std::vector<QuestionSpec> b;
  for (std::size_t k = 0; k < q; ++k) {
    QuestionSpec s;
    s.question_id = "q" + std::to_string(k);
    s.polarity = rng() % 2 ? Polarity::positive : Polarity::negative;
    if (k > 0 && rng() % 2) s.depends_on = "q" + std::to_string(rng() % k);
    b.push_back(std::move(s));
  }
  return b;
}

std::vector<AnswerRecord> records(const std::vector<QuestionSpec>& battery,
                                  const std::vector<Verdict>& verdicts) {
  std::vector<AnswerRecord> out;
  for (std::size_t k = 0; k < battery.size(); ++k) {
    out.push_back({battery[k].question_id, std::string(to_string(verdicts[k])), verdicts[k]});
  }
  return out;
}

// ---------------------------------------------------------------------------

void table_reproduction() {
  testing::TempDir dir;
  auto store = std::make_shared<ArtifactStore>(dir.path());
  MockImageGenerator gen(1, "sd", store);
  const PromptRecord prompt{"elephant-002", "Elephant",
                            "two elephants bathing in a river at sunset", {}, {}};
  CandidateSet set;
  set.prompt_id = prompt.prompt_id;
  set.n = 10;
  set.images = generate_images(gen, prompt.text, 10, 8, 8);

  // Per-image answers as a VQA model would phrase them: Q2 "-1" is a yes,
  // Q2/Q6 "0" is nan, Q9 "+1" is a no; image 4 could not see the class.
  auto script = std::make_shared<MockScript>();
  const auto battery = default_battery();
  for (int image = 1; image <= 10; ++image) {
    const bool clean = image == 5 || image == 7 || image == 8 || image == 10;
    std::vector<std::string> a = {"Yes.", clean ? "Nan" : "Yes, slightly.", "Yes.", "Yes.",
                                  "Yes.", "Nan",  "Yes.", "Yes.", "No.", "Yes."};
    if (image == 4) a[1] = a[2] = a[3] = a[4] = "Nan";
    auto& per_q = script->vqa[set.images[static_cast<std::size_t>(image - 1)].content_id];
    for (std::size_t k = 0; k < 10; ++k) per_q[battery.questions[k].question_id] = a[k];
  }
  MockVqa vqa(0, script);
  const auto judged = judge_candidate_set(set, prompt, battery, vqa);
  std::vector<int> totals;
  for (const auto& c : judged.cards) totals.push_back(c.total);
  require(totals == std::vector<int>{7, 7, 7, 5, 8, 7, 8, 8, 7, 8},
          fmt::format("totals {}", json(totals).dump()));
  std::vector<std::size_t> best_images;
  for (auto i : select_best(judged.cards)) best_images.push_back(i + 1);
  require(best_images == std::vector<std::size_t>{5, 7, 8, 10},
          fmt::format("best images {}", json(best_images).dump()));
}

void oracle_equivalence() {
  std::mt19937_64 rng(11);
  const Verdict all[] = {Verdict::yes, Verdict::no, Verdict::nan};
  std::size_t cases = 0;
  for (std::size_t q = 1; q <= 4; ++q) {
    for (int b = 0; b < 25; ++b) {
      const auto battery = random_battery(rng, q);
      std::size_t combos = 1;
      for (std::size_t k = 0; k < q; ++k) combos *= 3;
      for (std::size_t code = 0; code < combos; ++code) {
        std::vector<Verdict> v;
        for (std::size_t k = 0, c = code; k < q; ++k, c /= 3) v.push_back(all[c % 3]);
        for (auto rule : {ScoringRule::plus_one, ScoringRule::neutral}) {
          const int got = score_image(records(battery, v), battery, rule).total;
          const int want = reference_total(battery, v, rule);
          require(got == want, fmt::format("q={} battery {} case {}: {} != {}", q, b, code,
                                           got, want));
          ++cases;
        }
      }
    }
  }
  require(cases >= 20 * 81, "too few cases");
}

void bounds_and_monotonicity() {
  std::mt19937_64 rng(12);
  const Verdict all[] = {Verdict::yes, Verdict::no, Verdict::nan};
  for (int instance = 0; instance < 20000; ++instance) {
    const std::size_t q = 1 + rng() % 10;
    const auto battery = random_battery(rng, q);
    std::vector<Verdict> v;
    for (std::size_t k = 0; k < q; ++k) v.push_back(all[rng() % 3]);
    int positives = 0;
    int negatives = 0;
    for (const auto& s : battery) (s.polarity == Polarity::positive ? positives : negatives)++;

    const auto card = score_image(records(battery, v), battery);
    const auto neutral = score_image(records(battery, v), battery, ScoringRule::neutral);
    int sum = 0;
    for (int c : card.contributions) {
      require(c >= -1 && c <= 1, "contribution out of range");
      sum += c;
    }
    require(sum == card.total, "total is not the sum of contributions");
    require(card.total >= -negatives && card.total <= static_cast<int>(q), "total out of bounds");
    require(neutral.total >= -negatives && neutral.total <= positives, "neutral out of bounds");
    require(neutral.total <= card.total, "neutral rule scored higher");

    // Single-answer changes on questions nothing depends on.
    const std::size_t k = rng() % q;
    bool referenced = false;
    for (const auto& s : battery) referenced |= s.depends_on == battery[k].question_id;
    if (referenced) continue;
    auto to_yes = v;
    to_yes[k] = Verdict::yes;
    const int yes_total = score_image(records(battery, to_yes), battery).total;
    if (battery[k].polarity == Polarity::positive) {
      require(yes_total >= card.total, "affirming a positive question lowered the score");
    } else {
      require(yes_total <= card.total, "affirming a negative question raised the score");
    }
  }
}

void filter_properties() {
  std::mt19937_64 rng(13);
  std::uniform_int_distribution<int> level(0, 20);
  for (int table = 0; table < 2000; ++table) {
    const int n = 2 + static_cast<int>(rng() % 9);
    CandidateSet set;
    set.prompt_id = "p";
    set.n = n;
    auto script = std::make_shared<MockScript>();
    std::map<std::size_t, double> max_conf;
    for (int i = 0; i < n; ++i) {
      const std::string cid = fmt::format("t{}-i{}", table, i);
      set.images.push_back(ImageRef{cid, 32, 32, ""});
      auto& boxes = script->detector[cid]["Zebra"];
      const int count = static_cast<int>(rng() % 3);
      for (int b = 0; b < count; ++b) boxes.push_back(level(rng) / 20.0);
      if (!boxes.empty()) max_conf[static_cast<std::size_t>(i)] = *std::max_element(boxes.begin(), boxes.end());
    }
    std::vector<std::size_t> best;
    for (int i = 0; i < n; ++i) {
      if (rng() % 2) best.push_back(static_cast<std::size_t>(i));
    }
    if (best.empty()) best.push_back(0);
    MockDetector detector(0, script);
    const PromptRecord prompt{"p", "Zebra", "a zebra", {}, {}};

    std::optional<std::size_t> previous;
    for (int t = 0; t <= 20; ++t) {
      FilterPolicy policy;
      policy.confidence_threshold = t / 20.0;
      const auto got = filter_and_select(best, set, prompt, 5, policy, detector);
      const auto again = filter_and_select(best, set, prompt, 5, policy, detector);
      require(got.pair.has_value() == again.pair.has_value() &&
                  (!got.pair || got.pair->image_index == again.pair->image_index),
              "selection is not deterministic");
      // Reference: survivors at or above the threshold, maximum confidence,
      // lowest index on ties.
      std::optional<std::size_t> want;
      for (auto i : best) {
        auto it = max_conf.find(i);
        if (it == max_conf.end() || it->second < policy.confidence_threshold) continue;
        if (!want || it->second > max_conf.at(*want) ||
            (it->second == max_conf.at(*want) && i < *want)) {
          want = i;
        }
      }
      const std::optional<std::size_t> have =
          got.pair ? std::optional<std::size_t>(got.pair->image_index) : std::nullopt;
      require(have == want, fmt::format("table {} threshold {}: oracle mismatch", table, t));
      if (have && previous) {
        require(*have == *previous, fmt::format("table {}: winner changed at {}", table, t));
      }
      if (previous && !have) previous.reset();
      if (have) previous = have;
      if (!have) break;
    }
  }
}

void win_rate_protocol() {
  const auto make = [](const std::vector<double>& a_scores, const std::vector<double>& b_scores) {
    std::vector<ScoreSample> a, b;
    for (std::size_t i = 0; i < a_scores.size(); ++i) {
      a.push_back({"p" + std::to_string(i), 0, "a", std::nullopt, a_scores[i]});
      b.push_back({"p" + std::to_string(i), 0, "b", std::nullopt, b_scores[i]});
    }
    return std::make_pair(a, b);
  };
  {
    // Differences +0.05, -0.02, +0.005 and exactly +0.01.
    auto [a, b] = make({0.05, 0.0, 0.005, 0.01}, {0.0, 0.02, 0.0, 0.0});
    const auto r = compare(a, b, 0.01);
    require(r.wins == 2 && r.losses == 1 && r.ties == 1,
            fmt::format("hand example gave {}/{}/{}", r.wins, r.losses, r.ties));
    auto [c, d] = make({0.0, 0.0099}, {0.01, 0.0});
    const auto boundary = compare(c, d, 0.01);
    require(boundary.losses == 1 && boundary.ties == 1, "boundary handling");
  }
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t n = 1 + rng() % 50;
    std::vector<double> sa, sb;
    for (std::size_t i = 0; i < n; ++i) {
      sa.push_back(static_cast<double>(rng() % 40) / 200.0);
      sb.push_back(static_cast<double>(rng() % 40) / 200.0);
    }
    auto [a, b] = make(sa, sb);
    const auto ab = compare(a, b);
    const auto ba = compare(b, a);
    require(ab.wins == ba.losses && ab.losses == ba.wins && ab.ties == ba.ties,
            fmt::format("antisymmetry broken on trial {}", trial));
  }
  std::vector<double> sa, sb;
  for (int i = 0; i < 100; ++i) {
    sb.push_back(0.25);
    // 55 wins, 15 ties, 30 losses.
    sa.push_back(i < 55 ? 0.30 : i < 70 ? 0.25 + 0.001 * (i - 55) / 2 : 0.20);
  }
  auto [a, b] = make(sa, sb);
  const auto r = compare(a, b);
  require(r.wins == 55 && r.ties == 15 && r.losses == 30, "constructed corpus counts");
  require(r.win_plus_tie_rate == 0.70, fmt::format("win+tie rate {}", r.win_plus_tie_rate));
}

std::string run_cli(const fs::path& cwd, const std::string& env, const std::string& args) {
  const auto log = cwd / "cli.log";
  const int rc = testing::run_command("cd " + cwd.string() + " && " + env + " " + CCSR_CLI +
                                      " -q " + args + " > " + log.string() + " 2>&1");
  if (rc != 0) {
    throw Failure{fmt::format("ccsr {} exited {}: {}", args, rc, testing::read_file(log))};
  }
  return testing::read_file(log);
}

void end_to_end_loop() {
  testing::TempDir dir;
  testing::write_file(dir.path() / "vqa_script.json", R"({"vqa_noise": 0.25})");
  testing::write_file(dir.path() / "chat_script.json", R"({"chat": []})");
  json cfg = {
      {"run_id", "accept"},
      {"output_root", "live"},
      {"classes",
       {{{"class_name", "Elephant"}, {"prompt_count", 5}},
        {{"class_name", "Zebra"}, {"prompt_count", 5}}}},
      {"n_candidates", 4},
      {"width", 32},
      {"height", 32},
      {"validation_prompts", 4},
      {"eval_seeds", 2},
      {"sweep_prompts", 2},
      {"train_command",
       std::string(CCSR_STUB_TRAINER) + " {dataset_path} {config_path} {output_path}"},
      {"backends",
       {{"chat", {{"seed", 21}, {"script", "chat_script.json"}}},
        {"text2image", {{"seed", 21}}},
        {"vqa", {{"seed", 21}, {"script", "vqa_script.json"}}},
        {"detector", {{"seed", 21}}},
        {"scorer", {{"seed", 21}}}}}};
  testing::write_file(dir.path() / "run.json", cfg.dump(2));
  run_cli(dir.path(), "", "loop --config run.json");

  const auto run_dir = dir.path() / "live/runs/accept";
  const auto bundle = dir.path() / "live/dataset/accept";
  const auto manifest = RunManifest::load(run_dir / "run.json");
  require(!manifest.resume_point().has_value(), "not every stage completed");
  const auto pairs = testing::read_lines(run_dir / "pairs.jsonl").size();
  const auto meta = testing::read_lines(bundle / "metadata.jsonl").size();
  require(manifest.counters.at("prompts") == 10 && manifest.counters.at("images") == 40,
          "unexpected prompt/image counts");
  require(pairs > 0 && pairs == meta, fmt::format("{} pairs vs {} metadata records", pairs, meta));

  // Replay every backend from the transcript into a fresh output root.
  cfg["output_root"] = "replayed";
  testing::write_file(dir.path() / "replay.json", cfg.dump(2));
  const std::string transcript = "replay:" + (run_dir / "transcript.jsonl").string();
  std::string env;
  for (const char* kind : {"CHAT", "TEXT2IMAGE", "VQA", "DETECTOR", "SCORER"}) {
    env += fmt::format("CCSR_{}_ENDPOINT='{}' ", kind, transcript);
  }
  run_cli(dir.path(), env, "loop --config replay.json");
  const auto replayed = dir.path() / "replayed/dataset/accept";
  require(digest_tree(replayed) == digest_tree(bundle), "replayed bundle differs");
  require(testing::read_file(replayed / "metadata.jsonl") ==
              testing::read_file(bundle / "metadata.jsonl"),
          "replayed metadata differs");
}

void default_hyperparameters() {
  const auto r = validate_config_text(R"({"classes": ["Elephant", "Giraffe"]})", "/tmp");
  require(r.ok(), "minimal config rejected");
  const auto& c = *r.config;
  testing::TempDir dir;
  testing::write_file(dir.path() / "metadata.jsonl", "");
  const DatasetBundle bundle{dir.path(), dir.path() / "images", dir.path() / "metadata.jsonl", 0};
  const auto train = build_train_config(bundle, c.train.overrides, "sd", dir.path() / "out");
  require(c.n_candidates == 10, "N");
  require(c.resolution.width == 512 && c.resolution.height == 512, "resolution");
  require(c.filter.confidence_threshold == 0.6, "confidence threshold");
  require(c.sampling.temperature == 0.7, "temperature");
  require(c.sampling.top_p == 0.95, "top_p");
  require(train.epochs == 100, "epochs");
  require(train.batch_size == 18, "batch size");
  require(train.learning_rate == 1e-4, "learning rate");
  require(train.horizontal_flip, "horizontal flip");
  require(train.resolution == 512, "training resolution");
  require(train.precision == Precision::mixed16, "precision");
  require(c.eval.tie_epsilon == 0.01, "tie epsilon");
  require(c.eval.validation_prompts == 50, "validation prompts");
  require(c.eval.seeds == 4, "seeds");
}

void zero_scale_identity() {
  testing::TempDir dir;
  auto store = std::make_shared<ArtifactStore>(dir.path());
  auto base = std::make_shared<MockImageGenerator>(5, "stable-diffusion-2-1", store);
  const AdapterWeightsRef weights{dir.path() / "w.safetensors", "stable-diffusion-2-1", "cfg",
                                  std::string(64, 'c')};
  auto zero = scaled_backend(base, weights, 0.0);
  auto some = scaled_backend(base, weights, 0.4);
  bool any_difference = false;
  for (int p = 0; p < 120; ++p) {
    const auto prompt = fmt::format("validation prompt {} with a zebra", p);
    const std::optional<std::int64_t> seed =
        p % 2 ? std::optional<std::int64_t>(p) : std::nullopt;
    const auto a = generate_images(*base, prompt, 1, 16, 16, seed);
    const auto b = generate_images(*zero, prompt, 1, 16, 16, seed);
    require(a.front().content_id == b.front().content_id,
            fmt::format("prompt {} differs at scale 0", p));
    any_difference |= generate_images(*some, prompt, 1, 16, 16, seed).front().content_id !=
                      a.front().content_id;
  }
  require(zero->model_id() == base->model_id(), "scale 0 changed the model id");
  require(any_difference, "a non-zero scale had no effect (check is vacuous)");
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double limit_seconds;
    std::function<void()> check;
  };
  const std::vector<Criterion> criteria = {
      {1, "example table reproduction", 1, table_reproduction},
      {2, "scoring oracle equivalence", 5, oracle_equivalence},
      {3, "score bounds and monotonicity", 30, bounds_and_monotonicity},
      {4, "filter determinism and monotone threshold", 10, filter_properties},
      {5, "win-rate protocol", 10, win_rate_protocol},
      {6, "end-to-end mock loop with replay", 60, end_to_end_loop},
      {7, "default hyperparameters", 1, default_hyperparameters},
      {8, "zero-scale identity", 5, zero_scale_identity},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    std::string detail;
    bool ok = true;
    try {
      c.check();
    } catch (const Failure& f) {
      ok = false;
      detail = f.what;
    } catch (const std::exception& e) {
      ok = false;
      detail = std::string("exception: ") + e.what();
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (ok && seconds > c.limit_seconds) {
      ok = false;
      detail = fmt::format("took {:.2f}s, limit {}s", seconds, c.limit_seconds);
    }
    std::cout << (ok ? "PASS" : "FAIL") << " criterion " << c.id << ": " << c.name << " ("
              << fmt::format("{:.2f}s", seconds) << ")" << (detail.empty() ? "" : " - ")
              << detail << std::endl;
    failures += ok ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
