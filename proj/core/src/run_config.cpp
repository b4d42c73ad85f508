#include "consprompt/run_config.hpp"

#include <filesystem>
#include <set>

#include <json.hpp>

#include "consprompt/errors.hpp"

namespace consprompt {

using nlohmann::ordered_json;

std::string RunConfig::templates_path() const {
  return templates.empty() ? (std::filesystem::path(data_dir) / "templates.tsv").string()
                           : templates;
}

std::string RunConfig::verbalizer_path() const {
  return verbalizer.empty() ? (std::filesystem::path(data_dir) / "verbalizer.tsv").string()
                            : verbalizer;
}

void RunConfig::validate() const {
  task_kind_for(task);
  if (k == 0) throw ConfigError("k must be positive");
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  if (learning_rates.empty() || batch_sizes.empty())
    throw ConfigError("learning-rate and batch-size grids must be non-empty");
  if (objective != "joint" && objective != "prompt_only")
    throw ConfigError("objective must be joint or prompt_only");
  if (prompt_pairing != "symmetric" && prompt_pairing != "literal")
    throw ConfigError("prompt_pairing must be symmetric or literal");
  if (prompt_level_scope != "batch" && prompt_level_scope != "query_only")
    throw ConfigError("prompt_level_scope must be batch or query_only");
  if (hidden_size == 0 || encoder_dim == 0) throw ConfigError("dimensions must be positive");
  auto spec = to_spec();
  for (const auto& g : spec.grid) {
    TrainConfig c = spec.base;
    c.learning_rate = g.learning_rate;
    c.batch_size = g.batch_size;
    c.validate();
  }
}

ExperimentSpec RunConfig::to_spec() const {
  ExperimentSpec spec;
  spec.k = k;
  spec.seeds = seeds;
  spec.grid.clear();
  for (double lr : learning_rates)
    for (std::size_t bs : batch_sizes) spec.grid.push_back({lr, bs});

  TrainConfig& b = spec.base;
  b.max_steps = max_steps;
  b.eval_every = eval_every;
  b.max_grad_norm = max_grad_norm;
  b.loss.temperature = temperature;
  b.loss.batch_weight = t;
  b.loss.prompt_weight = a;
  b.loss.denominator = parse_denominator(denominator);
  b.loss.prompt_pairing =
      prompt_pairing == "literal" ? PromptPairing::kLiteral : PromptPairing::kSymmetric;
  b.objective = objective == "prompt_only" ? Objective::kPromptOnly : Objective::kJoint;
  b.sampling.strategy = parse_strategy(strategy);
  b.sampling.filtering_ratio = filtering_ratio;
  b.sampling.max_negatives = max_negatives;
  b.sampling.prompt_level_scope = prompt_level_scope == "query_only"
                                      ? PromptLevelScope::kQueryOnly
                                      : PromptLevelScope::kBatch;
  b.sampling.require_same_label_positive = require_same_label_positive;

  spec.backend.name = backend;
  spec.backend.seed = backend_seed;
  spec.backend.hidden_size = hidden_size;
  return spec;
}

std::string RunConfig::to_json() const {
  ordered_json j;
  j["task"] = task;
  j["data_dir"] = data_dir;
  j["templates"] = templates_path();
  j["verbalizer"] = verbalizer_path();
  j["k"] = k;
  j["seeds"] = seeds;
  j["learning_rates"] = learning_rates;
  j["batch_sizes"] = batch_sizes;
  j["max_steps"] = max_steps;
  j["eval_every"] = eval_every;
  j["max_grad_norm"] = max_grad_norm;
  j["temperature"] = temperature;
  j["t"] = t;
  j["a"] = a;
  j["denominator"] = denominator;
  j["prompt_pairing"] = prompt_pairing;
  j["objective"] = objective;
  j["strategy"] = strategy;
  j["filtering_ratio"] = filtering_ratio;
  j["max_negatives"] = max_negatives ? ordered_json(*max_negatives) : ordered_json(nullptr);
  j["prompt_level_scope"] = prompt_level_scope;
  j["require_same_label_positive"] = require_same_label_positive;
  j["backend"] = backend;
  j["backend_seed"] = backend_seed;
  j["hidden_size"] = hidden_size;
  j["encoder_seed"] = encoder_seed;
  j["encoder_dim"] = encoder_dim;
  return j.dump(2) + "\n";
}

RunConfig RunConfig::from_json(std::string_view json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed run config: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("run config must be a JSON object");

  static const std::set<std::string> known = {
      "task", "data_dir", "templates", "verbalizer", "k", "seeds", "learning_rates",
      "batch_sizes", "max_steps", "eval_every", "max_grad_norm", "temperature", "t", "a", "denominator",
      "prompt_pairing", "objective", "strategy", "filtering_ratio", "max_negatives",
      "prompt_level_scope", "require_same_label_positive", "backend", "backend_seed",
      "hidden_size", "encoder_seed", "encoder_dim"};
  for (const auto& [key, _] : j.items())
    if (!known.contains(key)) throw ConfigError("unknown run config key '" + key + "'");

  RunConfig c;
  try {
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("task", c.task);
    get("data_dir", c.data_dir);
    get("templates", c.templates);
    get("verbalizer", c.verbalizer);
    get("k", c.k);
    get("seeds", c.seeds);
    get("learning_rates", c.learning_rates);
    get("batch_sizes", c.batch_sizes);
    get("max_steps", c.max_steps);
    get("eval_every", c.eval_every);
    get("max_grad_norm", c.max_grad_norm);
    get("temperature", c.temperature);
    get("t", c.t);
    get("a", c.a);
    get("denominator", c.denominator);
    get("prompt_pairing", c.prompt_pairing);
    get("objective", c.objective);
    get("strategy", c.strategy);
    get("filtering_ratio", c.filtering_ratio);
    if (j.contains("max_negatives") && !j.at("max_negatives").is_null())
      c.max_negatives = j.at("max_negatives").get<std::size_t>();
    get("prompt_level_scope", c.prompt_level_scope);
    get("require_same_label_positive", c.require_same_label_positive);
    get("backend", c.backend);
    get("backend_seed", c.backend_seed);
    get("hidden_size", c.hidden_size);
    get("encoder_seed", c.encoder_seed);
    get("encoder_dim", c.encoder_dim);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid run config value: ") + e.what());
  }
  return c;
}

}  // namespace consprompt
