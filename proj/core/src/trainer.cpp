#include "consprompt/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_map>

#include "consprompt/errors.hpp"

namespace consprompt {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    throw ConfigError("learning_rate must be positive");
  if (!(max_grad_norm >= 0.0) || !std::isfinite(max_grad_norm))
    throw ConfigError("max_grad_norm must be non-negative");
  if (max_steps == 0) throw ConfigError("max_steps must be positive");
  if (batch_size < 2)
    throw ConfigError("batch size must be at least 2: batch-level contrastive "
                      "sampling needs another example in the batch");
  loss.validate();
  sampling.validate();
}

std::vector<PromptedExample> render_batch(const Dataset& dataset,
                                          std::span<const std::size_t> indices,
                                          const Template& main_template) {
  std::vector<PromptedExample> out;
  out.reserve(indices.size());
  for (std::size_t i : indices)
    out.push_back(main_template.apply(dataset[i].fields, dataset.label_id_of(i)));
  return out;
}

namespace {

/// Mask-position representations of every distinct prompted text touched by
/// a step, with their accumulated loss gradients.
class RepresentationTable {
 public:
  explicit RepresentationTable(const MaskedLMBackend& backend) : backend_(backend) {}

  std::size_t slot(const PromptedExample& prompted) {
    const auto it = index_.find(prompted.text);
    if (it != index_.end()) return it->second;
    Entry e;
    e.sequence = backend_.vocabulary().tokenize(prompted.text);
    e.mask = e.sequence.single_mask();
    e.hidden = backend_.encode_position(e.sequence, e.mask);
    e.grad.assign(e.hidden.size(), 0.0);
    entries_.push_back(std::move(e));
    index_.emplace(prompted.text, entries_.size() - 1);
    return entries_.size() - 1;
  }

  const Vector& hidden(std::size_t s) const { return entries_[s].hidden; }
  std::span<double> grad(std::size_t s) { return entries_[s].grad; }

  void backward(std::span<double> grad_params) const {
    for (const auto& e : entries_) {
      if (std::all_of(e.grad.begin(), e.grad.end(), [](double g) { return g == 0.0; }))
        continue;
      backend_.backward_hidden(e.sequence, e.mask, e.grad, grad_params);
    }
  }

 private:
  struct Entry {
    TokenSequence sequence;
    std::size_t mask = 0;
    Vector hidden;
    Vector grad;
  };

  const MaskedLMBackend& backend_;
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct GroupSlots {
  std::size_t anchor;
  std::size_t positive;
  std::vector<std::size_t> negatives;
};

AnchorGroup gather(const RepresentationTable& table, const GroupSlots& g) {
  AnchorGroup out;
  out.anchor = table.hidden(g.anchor);
  out.positive = table.hidden(g.positive);
  for (std::size_t n : g.negatives) out.negatives.push_back(table.hidden(n));
  return out;
}

void scatter(RepresentationTable& table, const GroupSlots& g, const GroupGradient& grad,
             double weight) {
  axpy(weight, grad.anchor, table.grad(g.anchor));
  axpy(weight, grad.positive, table.grad(g.positive));
  for (std::size_t k = 0; k < g.negatives.size(); ++k)
    axpy(weight, grad.negatives[k], table.grad(g.negatives[k]));
}

std::optional<GroupSlots> to_slots(RepresentationTable& table, std::size_t anchor_slot,
                                   const SupportSet& set) {
  if (!set.usable()) return std::nullopt;
  GroupSlots g{anchor_slot, table.slot(set.positive->prompted), {}};
  for (const auto& n : set.negatives) g.negatives.push_back(table.slot(n.prompted));
  return g;
}

/// Mean symmetric loss over `groups`; scatters weight * gradient.
double symmetric_term(RepresentationTable& table, const std::vector<GroupSlots>& groups,
                      const ContrastiveConfig& cfg, double weight) {
  std::vector<AnchorGroup> vecs;
  vecs.reserve(groups.size());
  for (const auto& g : groups) vecs.push_back(gather(table, g));
  const auto result = symmetric_loss(vecs, cfg.temperature, cfg.denominator);
  if (result.skipped) return 0.0;
  for (std::size_t i = 0; i < groups.size(); ++i)
    scatter(table, groups[i], result.grads[i], weight);
  return result.loss;
}

/// Prompt-level loss read as mean over anchors of S_BC(i,j) + S_PC(j,i).
double literal_prompt_term(RepresentationTable& table,
                           const std::vector<std::optional<GroupSlots>>& bc,
                           const std::vector<std::optional<GroupSlots>>& pc,
                           const ContrastiveConfig& cfg, double weight) {
  std::vector<std::size_t> anchors;
  for (std::size_t i = 0; i < bc.size(); ++i)
    if (bc[i] && pc[i]) anchors.push_back(i);
  if (anchors.empty()) return 0.0;
  const double inv_n = 1.0 / static_cast<double>(anchors.size());
  double loss = 0.0;
  for (std::size_t i : anchors) {
    const auto forward = info_nce(gather(table, *bc[i]), cfg.temperature, cfg.denominator);
    const auto inverted =
        info_nce(gather(table, *pc[i]).swapped(), cfg.temperature, cfg.denominator);
    loss += (forward.loss + inverted.loss) * inv_n;
    scatter(table, *bc[i], forward.grad, weight * inv_n);
    // Undo the swap when scattering the inverted term.
    GroupGradient unswapped{inverted.grad.positive, inverted.grad.anchor,
                            inverted.grad.negatives};
    scatter(table, *pc[i], unswapped, weight * inv_n);
  }
  return loss;
}

std::string describe_batch(std::span<const PromptedExample> batch) {
  std::string out;
  for (const auto& ex : batch) {
    out += "\n  [label ";
    out += ex.label ? std::to_string(*ex.label) : "?";
    out += "] ";
    out += ex.text;
  }
  return out;
}

}  // namespace

ObjectiveEvaluation evaluate_objective(const MaskedLMBackend& backend,
                                       std::span<const PromptedExample> batch,
                                       const TaskContext& task,
                                       const TrainConfig& config) {
  if (batch.empty()) throw ContractError("empty batch");
  if (task.templates.empty() || !task.verbalizer || !task.encoder)
    throw ContractError("task context is incomplete");
  const Verbalizer& verbalizer = *task.verbalizer;

  ObjectiveEvaluation out;
  out.gradient.assign(backend.parameter_count(), 0.0);
  out.losses.anchors = batch.size();
  RepresentationTable table(backend);

  // Cross-entropy over the verbalizer tokens at the mask position.
  std::vector<std::size_t> anchor_slots;
  std::vector<Vector> probs;
  std::vector<int> labels;
  for (const auto& ex : batch) {
    if (!ex.label) throw ContractError("training examples must be labelled");
    anchor_slots.push_back(table.slot(ex));
    const Vector logits = backend.vocab_logits(table.hidden(anchor_slots.back()));
    if (!all_finite(logits))
      throw NumericError("non-finite logits on batch:" + describe_batch(batch));
    probs.push_back(class_probs(gather_class_logits(logits, verbalizer)));
    labels.push_back(*ex.label);
  }
  out.losses.l_ce = ce_loss(probs, labels);

  const double inv_n = 1.0 / static_cast<double>(batch.size());
  Vector grad_logits(backend.vocab_size(), 0.0);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    std::fill(grad_logits.begin(), grad_logits.end(), 0.0);
    for (std::size_t c = 0; c < verbalizer.label_count(); ++c) {
      const double target = static_cast<int>(c) == labels[i] ? 1.0 : 0.0;
      grad_logits[verbalizer.token(c)] = (probs[i][c] - target) * inv_n;
    }
    const Vector dh = backend.backward_logits(table.hidden(anchor_slots[i]), grad_logits,
                                              out.gradient);
    axpy(1.0, dh, table.grad(anchor_slots[i]));
  }

  if (config.objective == Objective::kJoint) {
    const auto& cfg = config.loss;
    std::vector<std::optional<GroupSlots>> bc(batch.size());
    std::vector<std::optional<GroupSlots>> pc(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const auto bset = sample_support(batch[i], build_batch_support(batch, i),
                                       *task.encoder, config.sampling,
                                       SupportLevel::kBatchLevel);
      bc[i] = to_slots(table, anchor_slots[i], bset);
      if (!bc[i]) ++out.losses.skipped_bc;
      if (bset.used_fallback) ++out.losses.fallback_bc;

      const auto pset = sample_support(
          batch[i],
          build_prompt_support(batch, i, task.templates, config.sampling.prompt_level_scope),
          *task.encoder, config.sampling, SupportLevel::kPromptLevel);
      pc[i] = to_slots(table, anchor_slots[i], pset);
      if (!pc[i]) ++out.losses.skipped_pc;
      if (pset.used_fallback) ++out.losses.fallback_pc;
    }

    std::vector<GroupSlots> bc_groups;
    std::vector<GroupSlots> pc_groups;
    for (auto& g : bc)
      if (g) bc_groups.push_back(*g);
    for (auto& g : pc)
      if (g) pc_groups.push_back(*g);

    out.losses.l_bc = symmetric_term(table, bc_groups, cfg, cfg.batch_weight);
    out.losses.l_pc = cfg.prompt_pairing == PromptPairing::kSymmetric
                          ? symmetric_term(table, pc_groups, cfg, cfg.prompt_weight)
                          : literal_prompt_term(table, bc, pc, cfg, cfg.prompt_weight);
  }

  out.losses.total = joint_loss(out.losses.l_ce, out.losses.l_bc, out.losses.l_pc, config.loss);
  if (!std::isfinite(out.losses.total))
    throw NumericError("non-finite loss (l_ce=" + std::to_string(out.losses.l_ce) +
                       ", l_bc=" + std::to_string(out.losses.l_bc) +
                       ", l_pc=" + std::to_string(out.losses.l_pc) +
                       ") on batch:" + describe_batch(batch));

  table.backward(out.gradient);
  if (!all_finite(out.gradient))
    throw NumericError("non-finite gradient on batch:" + describe_batch(batch));
  return out;
}

StepLosses train_step(MaskedLMBackend& backend, std::span<const PromptedExample> batch,
                      const TaskContext& task, const TrainConfig& config) {
  auto eval = evaluate_objective(backend, batch, task, config);
  const double grad_norm = norm(eval.gradient);
  eval.losses.grad_norm = grad_norm;
  if (config.max_grad_norm > 0.0 && grad_norm > config.max_grad_norm) {
    const double scale = config.max_grad_norm / grad_norm;
    for (double& g : eval.gradient) g *= scale;
  }
  backend.apply_gradient(eval.gradient, config.learning_rate);
  return eval.losses;
}

int predict(const MaskedLMBackend& backend, const PromptedExample& prompted,
            const Verbalizer& verbalizer) {
  const auto seq = backend.vocabulary().tokenize(prompted.text);
  const Vector probs = class_probs(class_logits(backend, seq, verbalizer));
  return static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

double evaluate(const MaskedLMBackend& backend, const Dataset& dataset,
                const Template& main_template, const Verbalizer& verbalizer) {
  if (dataset.empty()) throw ContractError("cannot evaluate on an empty dataset");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto prompted = main_template.apply(dataset[i].fields);
    if (predict(backend, prompted, verbalizer) == dataset.label_id_of(i)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(dataset.size());
}

RunResult train_run(std::unique_ptr<MaskedLMBackend> backend, const KShotSplit& split,
                    const TaskContext& task, const TrainConfig& config,
                    MetricsSink* sink) {
  config.validate();
  if (!split.test) throw ContractError("split has no test set");
  RunResult result;
  RunMetrics& m = result.metrics;
  m.best_dev_accuracy = -1.0;

  const BatchSampler sampler(split.train.size(), config.batch_size, config.seed);
  auto run_eval = [&](std::size_t step) {
    EvalRecord rec{step, evaluate(*backend, split.dev, task.main_template(), *task.verbalizer)};
    m.evals.push_back(rec);
    if (sink) sink->on_eval(rec);
    if (rec.dev_accuracy > m.best_dev_accuracy) {
      m.best_dev_accuracy = rec.dev_accuracy;
      m.best_step = step;
      result.best_model = backend->clone();
    }
  };

  std::size_t step = 0;
  for (std::size_t epoch = 0; step < config.max_steps; ++epoch) {
    for (const auto& indices : sampler.epoch(epoch)) {
      if (step >= config.max_steps) break;
      const auto batch = render_batch(split.train, indices, task.main_template());
      StepLosses losses = train_step(*backend, batch, task, config);
      losses.step = ++step;
      m.skipped_bc += losses.skipped_bc;
      m.skipped_pc += losses.skipped_pc;
      m.steps.push_back(losses);
      if (sink) sink->on_step(losses);
      if (config.eval_every > 0 && step % config.eval_every == 0) run_eval(step);
    }
  }
  if (m.evals.empty() || m.evals.back().step != step) run_eval(step);

  m.test_accuracy =
      evaluate(*result.best_model, *split.test, task.main_template(), *task.verbalizer);
  return result;
}

Vocabulary build_vocabulary(std::span<const Dataset* const> datasets,
                            std::span<const Template> templates,
                            std::span<const VerbalizerEntry> label_words) {
  std::set<std::string> words;
  auto add = [&](std::string_view text) {
    for (auto& w : word_pieces(text)) words.insert(std::move(w));
  };
  for (const auto* ds : datasets) {
    if (!ds) continue;
    for (const auto& ex : ds->examples())
      for (const auto& t : templates) {
        if (t.input_count() != ex.fields.size())
          throw ConfigError("template '" + t.id() + "' expects " +
                            std::to_string(t.input_count()) +
                            " input(s) but the task provides " +
                            std::to_string(ex.fields.size()));
        add(t.apply(ex.fields).text);
      }
  }
  for (const auto& e : label_words) words.insert(e.word);
  return Vocabulary(std::vector<std::string>(words.begin(), words.end()));
}

Summary summarize(std::span<const double> values) {
  Summary s;
  s.count = values.size();
  if (values.empty()) return s;
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  double sum = 0.0;
  for (double v : sorted) sum += v;
  s.mean = sum / static_cast<double>(s.count);
  double sq = 0.0;
  for (double v : sorted) sq += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(sq / static_cast<double>(s.count));
  const std::size_t mid = s.count / 2;
  s.median = s.count % 2 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
  s.min = sorted.front();
  s.max = sorted.back();
  return s;
}

std::vector<double> ExperimentReport::test_accuracies() const {
  std::vector<double> out;
  for (const auto& s : seeds) out.push_back(s.test_accuracy);
  return out;
}

ExperimentReport run_experiment(const Dataset& full, std::shared_ptr<const Dataset> test,
                                const ExperimentSpec& spec, const TaskResources& resources,
                                ExperimentObserver* observer) {
  if (spec.seeds.empty()) throw ConfigError("at least one seed is required");
  if (spec.grid.empty()) throw ConfigError("the hyper-parameter grid is empty");
  if (resources.templates.empty()) throw ConfigError("no templates given");
  if (!resources.encoder) throw ConfigError("no sentence encoder given");

  const Dataset* sources[] = {&full, test.get()};
  const Vocabulary vocab = build_vocabulary(sources, resources.templates, resources.label_words);
  const Verbalizer verbalizer = Verbalizer::create(resources.label_words, full.label_set(), vocab);
  const auto initial = make_backend(spec.backend, vocab);
  const TaskContext task{resources.templates, &verbalizer, resources.encoder.get()};

  ExperimentReport report;
  for (const std::uint64_t seed : spec.seeds) {
    const KShotSplit split = make_kshot(full, spec.k, seed, test);
    if (observer) observer->on_split(split);

    SeedResult sr;
    sr.seed = seed;
    std::unique_ptr<MaskedLMBackend> best;
    for (std::size_t g = 0; g < spec.grid.size(); ++g) {
      TrainConfig cfg = spec.base;
      cfg.learning_rate = spec.grid[g].learning_rate;
      cfg.batch_size = spec.grid[g].batch_size;
      cfg.seed = seed;
      MetricsSink* sink = observer ? observer->sink_for(seed, g) : nullptr;
      auto run = train_run(initial->clone(), split, task, cfg, sink);
      sr.grid_dev_accuracies.push_back(run.metrics.best_dev_accuracy);
      if (g == 0 || run.metrics.best_dev_accuracy > sr.dev_accuracy) {
        sr.best_grid_index = g;
        sr.dev_accuracy = run.metrics.best_dev_accuracy;
        sr.test_accuracy = run.metrics.test_accuracy;
        sr.skipped_bc = run.metrics.skipped_bc;
        sr.skipped_pc = run.metrics.skipped_pc;
        best = std::move(run.best_model);
      }
    }
    if (observer) observer->on_seed_done(sr, *best);
    report.seeds.push_back(std::move(sr));
  }
  report.summary = summarize(report.test_accuracies());
  return report;
}

}  // namespace consprompt
