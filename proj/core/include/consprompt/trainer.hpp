#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "consprompt/backend.hpp"
#include "consprompt/contrastive.hpp"
#include "consprompt/data.hpp"
#include "consprompt/sampling.hpp"
#include "consprompt/templates.hpp"
#include "consprompt/verbalizer.hpp"

namespace consprompt {

enum class Objective {
  /// Cross-entropy plus batch- and prompt-level contrastive terms.
  kJoint,
  /// Plain prompt-based fine-tuning: cross-entropy only, no support sets.
  kPromptOnly,
};

struct TrainConfig {
  double learning_rate = 0.1;
  std::size_t batch_size = 8;
  std::size_t max_steps = 1000;
  /// Dev evaluation period in steps; 0 evaluates only after the last step.
  std::size_t eval_every = 100;
  ContrastiveConfig loss;
  SamplingConfig sampling;
  /// Seeds the batch order.
  std::uint64_t seed = 42;
  Objective objective = Objective::kJoint;
  /// Global L2 gradient clipping threshold; 0 disables clipping.
  double max_grad_norm = 2.0;

  void validate() const;
};

/// Immutable per-task resources shared by every step.
struct TaskContext {
  /// templates[0] is the main template.
  std::span<const Template> templates;
  const Verbalizer* verbalizer = nullptr;
  const SentenceEncoder* encoder = nullptr;

  const Template& main_template() const { return templates.front(); }
};

struct StepLosses {
  std::size_t step = 0;
  double l_ce = 0.0;
  double l_bc = 0.0;
  double l_pc = 0.0;
  double total = 0.0;
  std::size_t anchors = 0;
  std::size_t skipped_bc = 0;
  std::size_t skipped_pc = 0;
  std::size_t fallback_bc = 0;
  std::size_t fallback_pc = 0;
  /// L2 norm of the gradient before clipping.
  double grad_norm = 0.0;
};

struct ObjectiveEvaluation {
  StepLosses losses;
  /// d total / d parameters, parameter_count() entries.
  Vector gradient;
};

/// Renders dataset rows under the main template with their label ids.
std::vector<PromptedExample> render_batch(const Dataset& dataset,
                                          std::span<const std::size_t> indices,
                                          const Template& main_template);

/// Joint loss of one batch and its gradient, without touching parameters.
/// Every batch member is an anchor once per level. Throws NumericError with
/// the batch texts when the loss is not finite.
ObjectiveEvaluation evaluate_objective(const MaskedLMBackend& backend,
                                       std::span<const PromptedExample> batch,
                                       const TaskContext& task,
                                       const TrainConfig& config);

/// evaluate_objective followed by one optimizer update.
StepLosses train_step(MaskedLMBackend& backend, std::span<const PromptedExample> batch,
                      const TaskContext& task, const TrainConfig& config);

/// Label id with the highest class probability (first on ties).
int predict(const MaskedLMBackend& backend, const PromptedExample& prompted,
            const Verbalizer& verbalizer);

/// Fraction of examples whose prediction under `main_template` matches the
/// gold label.
double evaluate(const MaskedLMBackend& backend, const Dataset& dataset,
                const Template& main_template, const Verbalizer& verbalizer);

struct EvalRecord {
  std::size_t step = 0;
  double dev_accuracy = 0.0;
};

class MetricsSink {
 public:
  virtual ~MetricsSink() = default;
  virtual void on_step(const StepLosses&) {}
  virtual void on_eval(const EvalRecord&) {}
};

struct RunMetrics {
  std::vector<StepLosses> steps;
  std::vector<EvalRecord> evals;
  double best_dev_accuracy = 0.0;
  std::size_t best_step = 0;
  double test_accuracy = 0.0;
  std::size_t skipped_bc = 0;
  std::size_t skipped_pc = 0;
};

struct RunResult {
  RunMetrics metrics;
  /// Parameters at the best dev evaluation.
  std::unique_ptr<MaskedLMBackend> best_model;
};

/// Trains for config.max_steps over split.train, keeps the checkpoint with
/// the best dev accuracy (earliest on ties) and scores it on split.test.
RunResult train_run(std::unique_ptr<MaskedLMBackend> backend, const KShotSplit& split,
                    const TaskContext& task, const TrainConfig& config,
                    MetricsSink* sink = nullptr);

/// Vocabulary covering every word of every example rendered under every
/// template, plus the label words.
Vocabulary build_vocabulary(std::span<const Dataset* const> datasets,
                            std::span<const Template> templates,
                            std::span<const VerbalizerEntry> label_words);

struct GridPoint {
  double learning_rate = 0.1;
  std::size_t batch_size = 8;
};

struct Summary {
  std::size_t count = 0;
  double mean = 0.0;
  /// Population standard deviation.
  double stddev = 0.0;
  double median = 0.0;
  double min = 0.0;
  double max = 0.0;
};

Summary summarize(std::span<const double> values);

struct SeedResult {
  std::uint64_t seed = 0;
  std::size_t best_grid_index = 0;
  double dev_accuracy = 0.0;
  double test_accuracy = 0.0;
  std::vector<double> grid_dev_accuracies;
  std::size_t skipped_bc = 0;
  std::size_t skipped_pc = 0;
};

struct ExperimentReport {
  std::vector<SeedResult> seeds;
  Summary summary;

  std::vector<double> test_accuracies() const;
};

struct ExperimentSpec {
  std::size_t k = 16;
  std::vector<std::uint64_t> seeds{13, 21, 42, 87, 100};
  /// lr and batch size come from the grid; the batch order seed is the
  /// split seed.
  TrainConfig base;
  std::vector<GridPoint> grid{{0.1, 8}};
  BackendSpec backend;
};

struct TaskResources {
  std::vector<Template> templates;
  std::vector<VerbalizerEntry> label_words;
  std::shared_ptr<const SentenceEncoder> encoder;
};

/// Observer for per-run events; `seed` and `grid_index` identify the run.
class ExperimentObserver {
 public:
  virtual ~ExperimentObserver() = default;
  virtual MetricsSink* sink_for(std::uint64_t /*seed*/, std::size_t /*grid_index*/) {
    return nullptr;
  }
  virtual void on_split(const KShotSplit&) {}
  virtual void on_seed_done(const SeedResult&, const MaskedLMBackend& /*best_model*/) {}
};

/// For every seed: split, train every grid point from the same
/// initialization, select by dev accuracy (first on ties), report test
/// accuracy. `test` may be null, in which case each split's held-out rows
/// are the test set.
ExperimentReport run_experiment(const Dataset& full, std::shared_ptr<const Dataset> test,
                                const ExperimentSpec& spec, const TaskResources& resources,
                                ExperimentObserver* observer = nullptr);

}  // namespace consprompt
