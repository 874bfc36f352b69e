// Copyright 2026 The CCSR Authors
// SPDX-License-Identifier: Apache-2.0

#include "ccsr/pipeline.hpp"

#include <cstdlib>
#include <iostream>
#include <mutex>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "json.hpp"

#include "ccsr/call_log.hpp"
#include "ccsr/digest.hpp"
#include "ccsr/eval.hpp"
#include "ccsr/parallel.hpp"

namespace ccsr {

namespace fs = std::filesystem;
using nlohmann::json;

ExitCode exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const TemplateError*>(&e)) {
    return ExitCode::config;
  }
  if (dynamic_cast<const StateError*>(&e)) return ExitCode::dependency;
  if (dynamic_cast<const BackendError*>(&e) || dynamic_cast<const ValidationError*>(&e)) {
    return ExitCode::backend;
  }
  return ExitCode::stage;
}

namespace {

constexpr const char* kPrompts = "prompts.jsonl";
constexpr const char* kCandidates = "candidates.jsonl";
constexpr const char* kJudgments = "judgments.jsonl";
constexpr const char* kScorecards = "scorecards.jsonl";
constexpr const char* kPairs = "pairs.jsonl";
constexpr const char* kRejections = "rejections.jsonl";
constexpr const char* kDetections = "detections.jsonl";

json without_nulls(const json& j) {
  json out = json::object();
  for (const auto& [k, v] : j.items()) {
    if (!v.is_null() || k == "grid") out[k] = v;
  }
  return out;
}

}  // namespace

struct Pipeline::Impl {
  RunConfig config;
  std::string run_id;
  PipelineOptions options;
  fs::path run_dir;
  std::size_t parallelism = 1;

  std::shared_ptr<ArtifactStore> store;
  std::shared_ptr<CallLog> log;
  BackendContext ctx;

  fs::path path(const char* name) const { return run_dir / name; }
  fs::path dataset_dir() const { return config.output_root / "dataset" / run_id; }
  fs::path train_dir() const { return run_dir / "train"; }
  fs::path eval_dir() const { return run_dir / "eval"; }

  RunManifest load_manifest() const {
    const auto file = run_dir / "run.json";
    if (fs::exists(file)) return RunManifest::load(file);
    return RunManifest::create(run_id, config.digest());
  }

  std::string against_digest() const {
    if (options.against == "base") return "base";
    const fs::path p = options.against;
    return fs::is_regular_file(p) ? sha256_file(p) : "missing:" + options.against;
  }

  std::string input_digest(const RunManifest& m, Stage stage) const {
    const auto index = static_cast<std::size_t>(stage);
    std::string material = config.stage_json(stage);
    material += '\n';
    if (index > 0) material += m.stage(kStages[index - 1]).digests.artifacts;
    if (stage == Stage::eval) material += "\nagainst=" + against_digest();
    return sha256_hex(material);
  }

  std::string artifact_digest(Stage stage) const {
    switch (stage) {
      case Stage::promptgen: {
        const std::vector<std::string> files = {kPrompts};
        return digest_files(run_dir, files);
      }
      case Stage::generation: {
        const std::vector<std::string> files = {kCandidates};
        return digest_files(run_dir, files);
      }
      case Stage::judge: {
        const std::vector<std::string> files = {kJudgments, kScorecards};
        return digest_files(run_dir, files);
      }
      case Stage::filter: {
        const std::vector<std::string> files = {kPairs, kRejections};
        return digest_files(run_dir, files);
      }
      case Stage::export_pairs:
        return fs::exists(dataset_dir()) ? digest_tree(dataset_dir()) : std::string();
      case Stage::train: {
        const std::vector<std::string> files = {
            "train/train_config.txt", "train/adapter.json",
            "train/output/" + config.train.weights_file};
        return digest_files(run_dir, files);
      }
      case Stage::eval:
        return fs::exists(eval_dir()) ? digest_tree(eval_dir()) : std::string();
    }
    return {};
  }

  void write_snapshot() const {
    const auto j = without_nulls(json::parse(config.canonical_json()));
    write_atomic(run_dir / "config.json", j.dump(2) + "\n");
  }

  // ---- stages -------------------------------------------------------------

  void run_promptgen(RunManifest& m) {
    auto chat = make_chat(config.backend(BackendKind::chat), ctx);
    auto templates = TemplateRegistry::with_defaults();
    if (!config.template_dir.empty()) templates.load_directory(config.template_dir);
    PromptGenOptions opts;
    opts.template_id = config.template_id;
    opts.token_budget = config.token_budget;
    opts.parallelism = parallelism;
    const auto result =
        generate_prompts(config.classes, config.sampling, *chat, templates, opts);
    std::uint64_t shortfall = 0;
    for (const auto& [cls, missing] : result.shortfall) {
      spdlog::warn("class {}: {} prompt(s) short after the attempt budget", cls, missing);
      shortfall += static_cast<std::uint64_t>(missing);
    }
    if (result.records.empty()) throw StageError("prompt generation produced no prompts");
    write_prompts(path(kPrompts), result.records);
    m.counters["prompts"] = result.records.size();
    m.counters["prompt_shortfall"] = shortfall;
  }

  void run_generation(RunManifest& m) {
    const auto prompts = read_prompts(path(kPrompts));
    auto generator = make_image_generator(config.backend(BackendKind::text2image), ctx);
    const auto& d = config.backend(BackendKind::text2image);
    GenerationOptions opts;
    opts.run_salt = fmt::format("{}|{}|{}|{}|{}", config.run_salt, d.endpoint, d.model_id,
                                d.seed, d.script);
    opts.cache_dir = run_dir / "cache" / "generation";
    std::vector<CandidateSet> sets(prompts.size());
    parallel_for(prompts.size(), parallelism, [&](std::size_t i) {
      sets[i] = generate_candidates(prompts[i], config.n_candidates, config.resolution,
                                    *generator, *store, opts);
      if (config.grid && sets[i].complete) {
        compose_grid(sets[i], config.grid->rows, config.grid->cols, *store);
      }
    });
    std::uint64_t images = 0;
    std::uint64_t incomplete = 0;
    for (const auto& s : sets) {
      images += s.images.size();
      if (!s.complete) ++incomplete;
    }
    if (!sets.empty() && incomplete == sets.size()) {
      throw BackendError(fmt::format("generation failed for all {} prompts: {}", sets.size(),
                                     sets.front().failure),
                         false);
    }
    write_candidates(path(kCandidates), sets);
    m.counters["candidate_sets"] = sets.size();
    m.counters["images"] = images;
    m.counters["incomplete_sets"] = incomplete;
  }

  void run_judge(RunManifest& m) {
    const auto prompts = read_prompts(path(kPrompts));
    const auto sets = read_candidates(path(kCandidates));
    std::map<std::string, const PromptRecord*> by_id;
    for (const auto& p : prompts) by_id[p.prompt_id] = &p;
    auto batteries = BatteryRegistry::with_defaults();
    if (!config.battery_dir.empty()) batteries.load_directory(config.battery_dir);
    const auto& battery = batteries.get(config.battery_id);
    auto vqa = make_vqa(config.backend(BackendKind::vqa), ctx);

    std::vector<const CandidateSet*> complete;
    for (const auto& s : sets) {
      if (s.complete) complete.push_back(&s);
    }
    std::vector<JudgedSet> judged(complete.size());
    parallel_for(complete.size(), parallelism, [&](std::size_t i) {
      const auto it = by_id.find(complete[i]->prompt_id);
      if (it == by_id.end()) {
        throw IntegrityError(
            fmt::format("candidate set {} has no prompt record", complete[i]->prompt_id));
      }
      judged[i] = judge_candidate_set(*complete[i], *it->second, battery, *vqa,
                                      JudgeOptions{config.scoring_rule});
    });
    std::uint64_t cards = 0;
    std::uint64_t unjudged = 0;
    std::uint64_t unrecognized = 0;
    for (const auto& j : judged) {
      cards += j.cards.size();
      unjudged += j.unjudged.size();
      unrecognized += j.unrecognized_answers;
    }
    if (cards == 0 && unjudged > 0) {
      throw BackendError("the VQA backend failed on every candidate image", false);
    }
    write_judgments(path(kJudgments), judged);
    write_scorecards(path(kScorecards), judged);
    m.counters["judged_images"] = cards;
    m.counters["unjudged_images"] = unjudged;
    m.counters["unrecognized_answers"] = unrecognized;
  }

  void run_filter(RunManifest& m) {
    RunState state;
    state.prompts = read_prompts(path(kPrompts));
    for (auto& s : read_candidates(path(kCandidates))) {
      auto id = s.prompt_id;
      state.candidates.emplace(std::move(id), std::move(s));
    }
    for (auto& j : read_scorecards(path(kScorecards))) {
      auto id = j.prompt_id;
      state.judgments.emplace(std::move(id), std::move(j));
    }
    auto detector = make_detector(config.backend(BackendKind::detector), ctx);
    const auto extraction = extract_pairs(state, config.filter, *detector, parallelism);
    write_pairs(path(kPairs), extraction.pairs);
    write_rejections(path(kRejections), extraction.rejections);

    std::string log_text;
    for (const auto& [pid, list] : extraction.confidences) {
      for (const auto& c : list) {
        log_text += json{{"prompt_id", pid},
                         {"image_index", c.image_index},
                         {"score_total", c.score_total},
                         {"max_confidence",
                          c.max_confidence ? json(*c.max_confidence) : json(nullptr)}}
                        .dump();
        log_text += '\n';
      }
    }
    write_atomic(path(kDetections), log_text);
    m.counters["pairs"] = extraction.pairs.size();
    m.counters["rejections"] = extraction.rejections.size();
  }

  void run_export(RunManifest& m) {
    const auto pairs = read_pairs(path(kPairs), *store);
    const auto bundle = export_pairs(pairs, dataset_dir(), *store);
    m.counters["dataset_records"] = bundle.pair_count;
  }

  void run_train(RunManifest& m) {
    const auto bundle = open_bundle(dataset_dir());
    if (bundle.pair_count == 0) throw StageError("the dataset bundle has no pairs to train on");
    const auto cfg =
        build_train_config(bundle, config.train.overrides,
                           config.backend(BackendKind::text2image).model_id,
                           train_dir() / "output");
    TrainerInvocation inv{config.train.command, train_dir(), config.train.weights_file,
                          config.base_dir};
    const auto ref = launch_training(cfg, inv);
    verify_weights(ref, cfg);
    m.counters["train_pairs"] = bundle.pair_count;
  }

  std::vector<PromptRecord> validation_prompts() {
    auto chat = make_chat(config.backend(BackendKind::chat), ctx);
    auto templates = TemplateRegistry::with_defaults();
    if (!config.template_dir.empty()) templates.load_directory(config.template_dir);
    const auto total = static_cast<std::size_t>(config.eval.validation_prompts);
    const auto classes = config.classes.size();
    std::vector<ClassSeed> seeds;
    for (std::size_t i = 0; i < classes; ++i) {
      const auto share = total / classes + (i < total % classes ? 1 : 0);
      if (share == 0) continue;
      ClassSeed s = config.classes[i];
      s.prompt_count = static_cast<int>(share);
      seeds.push_back(std::move(s));
    }
    PromptGenOptions opts;
    opts.template_id = config.template_id;
    opts.token_budget = config.token_budget;
    opts.parallelism = parallelism;
    opts.id_prefix = "val-";
    opts.purpose = "validation";
    auto result = generate_prompts(seeds, config.sampling, *chat, templates, opts);
    if (result.records.empty()) throw StageError("no validation prompts were generated");
    return std::move(result.records);
  }

  void run_eval(RunManifest& m) {
    fs::remove_all(eval_dir());
    fs::create_directories(eval_dir());
    const auto weights = load_weights_ref(train_dir() / "adapter.json");
    verify_weights(weights, TrainConfig::parse(read_text(train_dir() / "train_config.txt")));

    const auto prompts = validation_prompts();
    write_prompts(eval_dir() / "validation_prompts.jsonl", prompts);
    const auto seeds = config.eval.seed_values();
    auto base = make_image_generator(config.backend(BackendKind::text2image), ctx);
    auto scorer = make_scorer(config.backend(BackendKind::scorer), ctx);

    ScoreOptions opts;
    opts.resolution = config.resolution;
    opts.parallelism = parallelism;
    opts.lora_scale = config.eval.lora_scale;
    auto tuned = scaled_backend(base, weights, config.eval.lora_scale);
    const auto samples_a = score_model(prompts, seeds, *tuned, *scorer, opts);
    write_samples(eval_dir() / "samples_finetuned.jsonl", samples_a);

    std::vector<ScoreSample> samples_b;
    if (options.against == "base") {
      ScoreOptions base_opts = opts;
      base_opts.lora_scale.reset();
      samples_b = score_model(prompts, seeds, *base, *scorer, base_opts);
      write_samples(eval_dir() / "samples_base.jsonl", samples_b);
    } else {
      samples_b = read_samples(options.against);
    }
    const auto report = compare(samples_a, samples_b, config.eval.tie_epsilon);

    std::vector<ScaleCurve> curves;
    const auto n_sweep =
        std::min(prompts.size(), static_cast<std::size_t>(config.eval.sweep_prompts));
    if (n_sweep > 0 && !config.eval.sweep_scales.empty()) {
      curves = sweep_scales(std::span(prompts).first(n_sweep), config.eval.sweep_scales,
                            seeds, base, weights, *scorer, opts);
    }
    render_report(report, curves, eval_dir());
    spdlog::info("win rate {:.3f}, win+tie rate {:.3f} over {} comparisons ({} dropped)",
                 report.win_rate, report.win_plus_tie_rate, report.total(), report.dropped);
    m.counters["eval_samples"] = samples_a.size();
    m.counters["eval_compared"] = report.total();
    m.counters["eval_dropped"] = report.dropped;
  }

  void run(Stage stage, RunManifest& m) {
    switch (stage) {
      case Stage::promptgen: return run_promptgen(m);
      case Stage::generation: return run_generation(m);
      case Stage::judge: return run_judge(m);
      case Stage::filter: return run_filter(m);
      case Stage::export_pairs: return run_export(m);
      case Stage::train: return run_train(m);
      case Stage::eval: return run_eval(m);
    }
  }
};

Pipeline::Pipeline(RunConfig config, std::string run_id, PipelineOptions options)
    : impl_(std::make_unique<Impl>()) {
  if (run_id.empty()) run_id = config.run_id;
  if (run_id.empty() || run_id.find('/') != std::string::npos) {
    throw ConfigError(fmt::format("invalid run id '{}'", run_id));
  }
  config.run_id = run_id;
  impl_->run_dir = config.output_root / "runs" / run_id;
  impl_->parallelism =
      resolve_parallelism(options.parallelism.value_or(config.parallelism));
  impl_->config = std::move(config);
  impl_->run_id = std::move(run_id);
  impl_->options = std::move(options);
  run_dir_ = impl_->run_dir;
}

Pipeline::~Pipeline() = default;

fs::path Pipeline::dataset_dir() const { return impl_->dataset_dir(); }

RunManifest Pipeline::manifest() const { return impl_->load_manifest(); }

void Pipeline::execute(Stage stage) {
  auto& im = *impl_;
  last_noop_ = false;
  RunManifest m = im.load_manifest();
  const auto index = static_cast<std::size_t>(stage);

  for (std::size_t i = 0; i < index; ++i) {
    const auto up = kStages[i];
    const auto& rec = m.stage(up);
    if (rec.status != StageStatus::complete) {
      throw DependencyError(fmt::format("cannot run {}: upstream stage {} is {}",
                                        to_string(stage), to_string(up),
                                        to_string(rec.status)));
    }
    if (rec.digests.input != im.input_digest(m, up)) {
      throw DependencyError(fmt::format(
          "cannot run {}: upstream stage {} is out of date with the configuration",
          to_string(stage), to_string(up)));
    }
  }

  const auto input = im.input_digest(m, stage);
  const auto& rec = m.stage(stage);
  if (rec.status == StageStatus::complete && rec.digests.input == input &&
      rec.digests.artifacts == im.artifact_digest(stage)) {
    spdlog::info("{}: up to date", to_string(stage));
    last_noop_ = true;
    return;
  }

  fs::create_directories(im.run_dir);
  if (!im.store) {
    im.store = std::make_shared<ArtifactStore>(im.run_dir);
    im.log = std::make_shared<CallLog>(im.run_dir / "transcript.jsonl");
    im.ctx = BackendContext{im.store, im.log, im.config.base_dir};
  }
  im.write_snapshot();
  m.config_digest = im.config.digest();

  spdlog::info("{}: running", to_string(stage));
  try {
    im.run(stage, m);
  } catch (...) {
    apply_transition(m, stage, StageStatus::failed, StageDigests{input, ""});
    m.save(manifest_path());
    throw;
  }
  apply_transition(m, stage, StageStatus::complete,
                   StageDigests{input, im.artifact_digest(stage)});
  m.save(manifest_path());
  spdlog::info("{}: complete", to_string(stage));
}

void Pipeline::execute_all() {
  for (const auto stage : kStages) execute(stage);
}

namespace {

ExitCode report_failure(std::string_view what, const std::exception& e) {
  std::cerr << "ccsr: " << what << " failed: " << e.what() << "\n";
  if (const auto* t = dynamic_cast<const TrainingError*>(&e); t && !t->log_excerpt().empty()) {
    std::cerr << "trainer log (tail):\n" << t->log_excerpt() << "\n";
  }
  if (const auto* mi = dynamic_cast<const MissingArtifactError*>(&e)) {
    for (const auto& cid : mi->content_ids()) std::cerr << "  missing " << cid << "\n";
  }
  return exit_code_for(e);
}

}  // namespace

ExitCode Pipeline::run_stage(Stage stage) {
  try {
    execute(stage);
    return ExitCode::ok;
  } catch (const std::exception& e) {
    return report_failure(to_string(stage), e);
  }
}

ExitCode Pipeline::loop() {
  for (const auto stage : kStages) {
    const auto code = run_stage(stage);
    if (code != ExitCode::ok) return code;
  }
  return ExitCode::ok;
}

}  // namespace ccsr
