#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "consprompt/trainer.hpp"

namespace consprompt {

/// Everything needed to reproduce an experiment. Serialized as JSON into
/// every run directory.
struct RunConfig {
  std::string task = "toy";
  std::string data_dir = ".";
  /// Empty means <data_dir>/templates.tsv.
  std::string templates;
  /// Empty means <data_dir>/verbalizer.tsv.
  std::string verbalizer;

  std::size_t k = 16;
  std::vector<std::uint64_t> seeds{13, 21, 42, 87, 100};
  std::vector<double> learning_rates{0.5, 1.0};
  std::vector<std::size_t> batch_sizes{8};
  std::size_t max_steps = 1000;
  std::size_t eval_every = 100;
  double max_grad_norm = 2.0;

  double temperature = 0.07;
  double t = 0.5;
  double a = 0.5;
  std::string denominator = "with_positive";
  std::string prompt_pairing = "symmetric";
  std::string objective = "joint";

  std::string strategy = "sim";
  double filtering_ratio = 0.5;
  std::optional<std::size_t> max_negatives;
  std::string prompt_level_scope = "batch";
  bool require_same_label_positive = false;

  std::string backend = "reference";
  std::uint64_t backend_seed = 7;
  std::size_t hidden_size = 16;
  std::uint64_t encoder_seed = 0x5B3E7;
  std::size_t encoder_dim = 32;

  std::string templates_path() const;
  std::string verbalizer_path() const;

  /// Throws ConfigError on any invalid field.
  void validate() const;
  ExperimentSpec to_spec() const;

  std::string to_json() const;
  /// Unknown keys are rejected.
  static RunConfig from_json(std::string_view json_text);
};

}  // namespace consprompt
