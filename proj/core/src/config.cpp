// Copyright 2026 The CCSR Authors
// SPDX-License-Identifier: Apache-2.0

#include "ccsr/config.hpp"

#include <cstdlib>
#include <set>

#include <fmt/format.h>

#include "json.hpp"

#include "ccsr/digest.hpp"

namespace ccsr {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::array<BackendKind, 5> kKinds = {BackendKind::chat, BackendKind::text2image,
                                               BackendKind::vqa, BackendKind::detector,
                                               BackendKind::scorer};

std::string default_model_id(BackendKind kind) {
  switch (kind) {
    case BackendKind::chat: return "mistral-7b-instruct";
    case BackendKind::text2image: return "stable-diffusion-2-1";
    case BackendKind::vqa: return "llava-1.6";
    case BackendKind::detector: return "yolo-world";
    case BackendKind::scorer: return "clip-vit";
  }
  return "";
}

std::string env_name(BackendKind kind) {
  std::string name = "CCSR_";
  for (char c : to_string(kind)) name += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return name + "_ENDPOINT";
}

std::string_view to_string(ScoringRule r) {
  return r == ScoringRule::plus_one ? "plus-one" : "neutral";
}

// Reads typed fields out of a JSON object, collecting every problem instead of
// stopping at the first one.
class Reader {
 public:
  Reader(const json& object, std::string prefix, std::vector<std::string>& violations)
      : object_(object), prefix_(std::move(prefix)), violations_(violations) {}

  template <typename T>
  bool read(const char* key, T& out) {
    seen_.insert(key);
    if (!object_.contains(key)) return false;
    try {
      out = object_.at(key).get<T>();
      return true;
    } catch (const json::exception&) {
      fail(key, fmt::format("has the wrong type ({})", object_.at(key).type_name()));
      return false;
    }
  }

  bool read_path(const char* key, fs::path& out) {
    std::string s;
    if (!read(key, s)) return false;
    out = s;
    return true;
  }

  void fail(std::string_view key, std::string_view what) {
    violations_.push_back(fmt::format("{}{}: {}", prefix_, key, what));
  }

  void check(bool ok, std::string_view key, std::string_view what) {
    if (!ok) fail(key, what);
  }

  void reject_unknown() {
    for (const auto& [key, _] : object_.items()) {
      if (!seen_.count(key)) fail(key, "unknown key");
    }
  }

  void mark(const char* key) { seen_.insert(key); }

 private:
  const json& object_;
  std::string prefix_;
  std::vector<std::string>& violations_;
  std::set<std::string, std::less<>> seen_;
};

void read_classes(const json& j, RunConfig& c, std::vector<std::string>& v) {
  if (!j.is_array()) {
    v.push_back("classes: must be a list");
    return;
  }
  std::set<std::string> slugs;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& item = j[i];
    ClassSeed seed;
    seed.prompt_count = 100;
    seed.style_directives = {"photo-realistic", "highly detailed", "natural lighting"};
    const auto prefix = fmt::format("classes[{}].", i);
    if (item.is_string()) {
      seed.class_name = item.get<std::string>();
    } else if (item.is_object()) {
      Reader r(item, prefix, v);
      r.read("class_name", seed.class_name);
      r.read("prompt_count", seed.prompt_count);
      r.read("style_directives", seed.style_directives);
      r.check(seed.prompt_count >= 1, "prompt_count", "must be >= 1");
      r.reject_unknown();
    } else {
      v.push_back(fmt::format("classes[{}]: must be a name or an object", i));
      continue;
    }
    if (seed.class_name.empty() || class_slug(seed.class_name).empty()) {
      v.push_back(fmt::format("classes[{}]: class_name must be non-empty", i));
    } else if (!slugs.insert(class_slug(seed.class_name)).second) {
      v.push_back(fmt::format("classes[{}]: duplicate class '{}'", i, seed.class_name));
    }
    c.classes.push_back(std::move(seed));
  }
  if (c.classes.empty()) v.push_back("classes: at least one class is required");
}

void read_backends(const json& j, RunConfig& c, std::vector<std::string>& v) {
  if (!j.is_object()) {
    v.push_back("backends: must be an object keyed by kind");
    return;
  }
  for (const auto& [name, item] : j.items()) {
    BackendKind kind;
    try {
      kind = parse_backend_kind(name);
    } catch (const Error&) {
      v.push_back(fmt::format("backends.{}: unknown backend kind", name));
      continue;
    }
    auto& d = c.backend(kind);
    if (!item.is_object()) {
      v.push_back(fmt::format("backends.{}: must be an object", name));
      continue;
    }
    Reader r(item, fmt::format("backends.{}.", name), v);
    r.read("endpoint", d.endpoint);
    r.read("model_id", d.model_id);
    r.read("timeout_seconds", d.timeout_seconds);
    r.read("retry_limit", d.retry_limit);
    r.read("retry_backoff_ms", d.retry_backoff_ms);
    r.read("seed", d.seed);
    r.read("script", d.script);
    r.check(d.timeout_seconds > 0, "timeout_seconds", "must be > 0");
    r.check(d.retry_limit >= 0, "retry_limit", "must be >= 0");
    r.check(d.retry_backoff_ms >= 0, "retry_backoff_ms", "must be >= 0");
    r.reject_unknown();
  }
}

void check_backends(RunConfig& c, std::vector<std::string>& v) {
  for (const auto kind : kKinds) {
    auto& d = c.backend(kind);
    if (const char* env = std::getenv(env_name(kind).c_str()); env && *env) d.endpoint = env;
    const auto& e = d.endpoint;
    const bool ok = e == "mock" || (e.starts_with("replay:") && e.size() > 7) ||
                    e.starts_with("http://") || e.starts_with("https://");
    if (!ok) {
      v.push_back(fmt::format("backends.{}.endpoint: '{}' is not mock, replay:<path> or "
                              "an http(s) URL",
                              to_string(kind), e));
    }
    if (e.starts_with("replay:")) {
      fs::path p = e.substr(7);
      if (p.is_relative()) p = (c.base_dir / p).lexically_normal();
      d.endpoint = "replay:" + p.string();
      if (!fs::is_regular_file(p)) {
        v.push_back(fmt::format("backends.{}.endpoint: transcript {} does not exist",
                                to_string(kind), p.string()));
      }
    }
    if (!d.script.empty()) {
      fs::path p = d.script;
      if (p.is_relative()) p = (c.base_dir / p).lexically_normal();
      d.script = p.string();
      if (!fs::is_regular_file(p)) {
        v.push_back(fmt::format("backends.{}.script: {} does not exist", to_string(kind),
                                p.string()));
      }
    }
  }
}

fs::path resolve(const fs::path& base, const fs::path& p) {
  if (p.empty() || p.is_absolute()) return p;
  return (base / p).lexically_normal();
}

json descriptor_json(const BackendDescriptor& d) {
  return {{"endpoint", d.endpoint},   {"model_id", d.model_id},
          {"timeout_seconds", d.timeout_seconds}, {"retry_limit", d.retry_limit},
          {"retry_backoff_ms", d.retry_backoff_ms}, {"seed", d.seed},
          {"script", d.script}};
}

// Values that change what a stage computes; retry/timeout settings do not.
json descriptor_identity(const BackendDescriptor& d) {
  return {{"endpoint", d.endpoint}, {"model_id", d.model_id}, {"seed", d.seed},
          {"script", d.script.empty() ? std::string() : d.script}};
}

}  // namespace

std::vector<std::int64_t> EvalSettings::seed_values() const {
  std::vector<std::int64_t> out;
  for (int i = 0; i < seeds; ++i) out.push_back(seed_base + i);
  return out;
}

RunConfig default_config() {
  RunConfig c;
  for (const auto kind : kKinds) {
    auto& d = c.backend(kind);
    d.kind = kind;
    d.model_id = default_model_id(kind);
  }
  return c;
}

namespace {

json prompts_json(const RunConfig& c) {
  json classes = json::array();
  for (const auto& s : c.classes) {
    classes.push_back({{"class_name", s.class_name},
                       {"prompt_count", s.prompt_count},
                       {"style_directives", s.style_directives}});
  }
  return {{"classes", classes},
          {"template_id", c.template_id},
          {"template_dir", c.template_dir.string()},
          {"token_budget", c.token_budget},
          {"temperature", c.sampling.temperature},
          {"top_p", c.sampling.top_p},
          {"max_tokens", c.sampling.max_tokens}};
}

json train_json(const RunConfig& c) {
  const auto& o = c.train.overrides;
  json j = {{"train_command", c.train.command}, {"weights_file", c.train.weights_file}};
  const auto opt = [&](const char* key, const auto& v) {
    j[key] = v ? json(*v) : json(nullptr);
  };
  opt("train_resolution", o.resolution);
  opt("epochs", o.epochs);
  opt("batch_size", o.batch_size);
  opt("learning_rate", o.learning_rate);
  opt("horizontal_flip", o.horizontal_flip);
  j["precision"] = o.precision ? json(std::string(to_string(*o.precision))) : json(nullptr);
  opt("lora_rank", o.lora_rank);
  return j;
}

json eval_json(const RunConfig& c) {
  return {{"validation_prompts", c.eval.validation_prompts},
          {"eval_seeds", c.eval.seeds},
          {"seed_base", c.eval.seed_base},
          {"tie_epsilon", c.eval.tie_epsilon},
          {"eval_lora_scale", c.eval.lora_scale},
          {"sweep_scales", c.eval.sweep_scales},
          {"sweep_prompts", c.eval.sweep_prompts}};
}

}  // namespace

std::string RunConfig::canonical_json() const {
  json j = prompts_json(*this);
  j.update(train_json(*this));
  j.update(eval_json(*this));
  j["run_id"] = run_id;
  j["output_root"] = output_root.string();
  j["run_salt"] = run_salt;
  j["parallelism"] = parallelism;
  j["n_candidates"] = n_candidates;
  j["width"] = resolution.width;
  j["height"] = resolution.height;
  j["grid"] = grid ? json{{"rows", grid->rows}, {"cols", grid->cols}} : json(nullptr);
  j["battery_id"] = battery_id;
  j["battery_dir"] = battery_dir.string();
  j["scoring_rule"] = std::string(to_string(scoring_rule));
  j["confidence_threshold"] = filter.confidence_threshold;
  j["tie_break"] = std::string(to_string(filter.tie_break));
  json backends_json = json::object();
  for (const auto kind : kKinds) {
    backends_json[std::string(to_string(kind))] = descriptor_json(backend(kind));
  }
  j["backends"] = backends_json;
  return j.dump();
}

std::string RunConfig::stage_json(Stage stage) const {
  json j = json::object();
  switch (stage) {
    case Stage::promptgen:
      j = prompts_json(*this);
      j["chat"] = descriptor_identity(backend(BackendKind::chat));
      break;
    case Stage::generation:
      j = {{"n_candidates", n_candidates},
           {"width", resolution.width},
           {"height", resolution.height},
           {"grid", grid ? json{{"rows", grid->rows}, {"cols", grid->cols}} : json(nullptr)},
           {"run_salt", run_salt},
           {"text2image", descriptor_identity(backend(BackendKind::text2image))}};
      break;
    case Stage::judge:
      j = {{"battery_id", battery_id},
           {"battery_dir", battery_dir.string()},
           {"scoring_rule", std::string(to_string(scoring_rule))},
           {"vqa", descriptor_identity(backend(BackendKind::vqa))}};
      break;
    case Stage::filter:
      j = {{"confidence_threshold", filter.confidence_threshold},
           {"tie_break", std::string(to_string(filter.tie_break))},
           {"detector", descriptor_identity(backend(BackendKind::detector))}};
      break;
    case Stage::export_pairs:
      break;
    case Stage::train:
      j = train_json(*this);
      j["base_model_id"] = backend(BackendKind::text2image).model_id;
      break;
    case Stage::eval:
      j = eval_json(*this);
      j["prompts"] = prompts_json(*this);
      j["width"] = resolution.width;
      j["height"] = resolution.height;
      j["chat"] = descriptor_identity(backend(BackendKind::chat));
      j["text2image"] = descriptor_identity(backend(BackendKind::text2image));
      j["scorer"] = descriptor_identity(backend(BackendKind::scorer));
      break;
  }
  return j.dump();
}

std::string RunConfig::digest() const { return sha256_hex(canonical_json()); }

ConfigValidation validate_config(const fs::path& file) {
  if (!fs::is_regular_file(file)) {
    throw IoError(fmt::format("config file {} is not readable", file.string()));
  }
  auto base = file.parent_path();
  if (base.empty()) base = ".";
  return validate_config_text(read_text(file), fs::absolute(base));
}

ConfigValidation validate_config_text(const std::string& text, const fs::path& base_dir) {
  ConfigValidation result;
  auto& v = result.violations;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    v.push_back(fmt::format("not valid JSON: {}", e.what()));
    return result;
  }
  if (!j.is_object()) {
    v.push_back("top level must be a JSON object");
    return result;
  }

  RunConfig c = default_config();
  c.base_dir = base_dir;
  Reader r(j, "", v);

  r.read("run_id", c.run_id);
  r.check(!c.run_id.empty() && c.run_id.find('/') == std::string::npos && c.run_id != "." &&
              c.run_id != "..",
          "run_id", "must be a non-empty file name");
  r.read_path("output_root", c.output_root);
  r.read("run_salt", c.run_salt);
  r.read("parallelism", c.parallelism);

  r.mark("classes");
  if (j.contains("classes")) {
    read_classes(j.at("classes"), c, v);
  } else {
    v.push_back("classes: at least one class is required");
  }

  r.read("template_id", c.template_id);
  r.read_path("template_dir", c.template_dir);
  r.read("token_budget", c.token_budget);
  r.check(c.token_budget >= 1, "token_budget", "must be >= 1");
  r.read("temperature", c.sampling.temperature);
  r.read("top_p", c.sampling.top_p);
  r.read("max_tokens", c.sampling.max_tokens);
  r.check(c.sampling.temperature >= 0, "temperature", "must be >= 0");
  r.check(c.sampling.top_p > 0 && c.sampling.top_p <= 1, "top_p", "must be in (0, 1]");
  r.check(c.sampling.max_tokens >= 1, "max_tokens", "must be >= 1");

  r.read("n_candidates", c.n_candidates);
  r.check(c.n_candidates >= 1, "n_candidates", "must be >= 1");
  r.read("width", c.resolution.width);
  r.read("height", c.resolution.height);
  r.check(c.resolution.width > 0, "width", "must be > 0");
  r.check(c.resolution.height > 0, "height", "must be > 0");
  r.mark("grid");
  if (j.contains("grid") && !j.at("grid").is_null()) {
    GridSpec g;
    if (j.at("grid").is_object()) {
      Reader gr(j.at("grid"), "grid.", v);
      gr.read("rows", g.rows);
      gr.read("cols", g.cols);
      gr.check(g.rows >= 1 && g.cols >= 1, "rows", "rows and cols must be >= 1");
      gr.check(g.rows * g.cols == c.n_candidates, "cols",
               fmt::format("rows * cols must equal n_candidates ({})", c.n_candidates));
      gr.reject_unknown();
    } else {
      r.fail("grid", "must be an object {rows, cols} or null");
    }
    c.grid = g;
  }

  r.read("battery_id", c.battery_id);
  r.read_path("battery_dir", c.battery_dir);
  std::string rule = "plus-one";
  r.read("scoring_rule", rule);
  if (rule == "plus-one") {
    c.scoring_rule = ScoringRule::plus_one;
  } else if (rule == "neutral") {
    c.scoring_rule = ScoringRule::neutral;
  } else {
    r.fail("scoring_rule", "must be plus-one or neutral");
  }

  r.read("confidence_threshold", c.filter.confidence_threshold);
  r.check(c.filter.confidence_threshold >= 0 && c.filter.confidence_threshold <= 1,
          "confidence_threshold", "must be in [0, 1]");
  std::string tie_break = "lowest-index";
  r.read("tie_break", tie_break);
  try {
    c.filter.tie_break = parse_tie_break(tie_break);
  } catch (const Error&) {
    r.fail("tie_break", "must be lowest-index or highest-score");
  }

  r.mark("backends");
  if (j.contains("backends")) read_backends(j.at("backends"), c, v);

  auto& o = c.train.overrides;
  r.read("train_command", c.train.command);
  r.read("weights_file", c.train.weights_file);
  r.check(!c.train.weights_file.empty() &&
              c.train.weights_file.find('/') == std::string::npos,
          "weights_file", "must be a plain file name");
  int ival = 0;
  double dval = 0;
  bool bval = false;
  if (r.read("train_resolution", ival)) o.resolution = ival;
  if (r.read("epochs", ival)) o.epochs = ival;
  if (r.read("batch_size", ival)) o.batch_size = ival;
  if (r.read("learning_rate", dval)) o.learning_rate = dval;
  if (r.read("horizontal_flip", bval)) o.horizontal_flip = bval;
  if (r.read("lora_rank", ival)) o.lora_rank = ival;
  std::string precision;
  if (r.read("precision", precision)) {
    try {
      o.precision = parse_precision(precision);
    } catch (const Error&) {
      r.fail("precision", "must be mixed-16 or full-32");
    }
  }
  r.check(o.resolution.value_or(1) > 0, "train_resolution", "must be > 0");
  r.check(o.epochs.value_or(1) >= 1, "epochs", "must be >= 1");
  r.check(o.batch_size.value_or(1) >= 1, "batch_size", "must be >= 1");
  r.check(o.learning_rate.value_or(1) > 0, "learning_rate", "must be > 0");
  r.check(o.lora_rank.value_or(1) >= 1, "lora_rank", "must be >= 1");

  auto& e = c.eval;
  r.read("validation_prompts", e.validation_prompts);
  r.read("eval_seeds", e.seeds);
  r.read("seed_base", e.seed_base);
  r.read("tie_epsilon", e.tie_epsilon);
  r.read("eval_lora_scale", e.lora_scale);
  r.read("sweep_scales", e.sweep_scales);
  r.read("sweep_prompts", e.sweep_prompts);
  r.check(e.validation_prompts >= 1, "validation_prompts", "must be >= 1");
  r.check(e.seeds >= 1, "eval_seeds", "must be >= 1");
  r.check(e.tie_epsilon >= 0, "tie_epsilon", "must be >= 0");
  r.check(e.lora_scale >= 0 && e.lora_scale <= 1, "eval_lora_scale", "must be in [0, 1]");
  r.check(e.sweep_prompts >= 0, "sweep_prompts", "must be >= 0");
  for (std::size_t i = 0; i < e.sweep_scales.size(); ++i) {
    const double s = e.sweep_scales[i];
    if (!(s >= 0 && s <= 1) || (i > 0 && !(s > e.sweep_scales[i - 1]))) {
      r.fail("sweep_scales", "must be strictly ascending values in [0, 1]");
      break;
    }
  }

  r.reject_unknown();

  c.output_root = resolve(base_dir, c.output_root);
  c.template_dir = resolve(base_dir, c.template_dir);
  c.battery_dir = resolve(base_dir, c.battery_dir);
  check_backends(c, v);

  // Referenced templates and batteries must resolve.
  try {
    auto templates = TemplateRegistry::with_defaults();
    if (!c.template_dir.empty()) templates.load_directory(c.template_dir);
    if (!templates.contains(c.template_id)) {
      v.push_back(fmt::format("template_id: unknown template '{}'", c.template_id));
    }
  } catch (const Error& ex) {
    v.push_back(fmt::format("template_dir: {}", ex.what()));
  }
  try {
    auto batteries = BatteryRegistry::with_defaults();
    if (!c.battery_dir.empty()) batteries.load_directory(c.battery_dir);
    if (!batteries.contains(c.battery_id)) {
      v.push_back(fmt::format("battery_id: unknown battery '{}'", c.battery_id));
    }
  } catch (const Error& ex) {
    v.push_back(fmt::format("battery_dir: {}", ex.what()));
  }

  if (v.empty()) result.config = std::move(c);
  return result;
}

}  // namespace ccsr
