#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace consprompt {

enum class TaskKind { kSingleSentence, kSentencePair };

/// Schema of a named task: sst-2, sst-5, trec, mr, cr, subj, mpqa, toy and
/// single are single-sentence; snli, qnli, mnli, rte and pair are sentence
/// pairs. Unknown names raise ConfigError.
TaskKind task_kind_for(std::string_view task);
std::size_t field_count(TaskKind kind);

struct Example {
  std::vector<std::string> fields;
  std::string label;

  bool operator==(const Example&) const = default;
};

/// Labelled examples with a sorted label set. Label ids are positions in
/// the label set.
class Dataset {
 public:
  /// Label set is derived from the examples. Requires >= 2 distinct labels.
  Dataset(TaskKind kind, std::vector<Example> examples);

  /// Uses a given label set (sorted, unique); every example label must be
  /// in it.
  Dataset(TaskKind kind, std::vector<Example> examples,
          std::vector<std::string> label_set);

  TaskKind kind() const { return kind_; }
  std::size_t size() const { return examples_.size(); }
  bool empty() const { return examples_.empty(); }
  const std::vector<Example>& examples() const { return examples_; }
  const Example& operator[](std::size_t i) const { return examples_[i]; }
  const std::vector<std::string>& label_set() const { return label_set_; }

  /// Dense id of `label`; throws DataError for unknown labels.
  int label_id(std::string_view label) const;
  int label_id_of(std::size_t example) const { return label_ids_[example]; }

  /// Examples at `indices`, same label set.
  Dataset subset(std::span<const std::size_t> indices) const;

 private:
  void index_labels();

  TaskKind kind_;
  std::vector<Example> examples_;
  std::vector<std::string> label_set_;
  std::vector<int> label_ids_;
};

/// Rows of tab-separated fields, label last. Throws LoadError with the line
/// number on malformed rows. Blank lines are not allowed.
Dataset parse_tsv(std::string_view content, TaskKind kind, const std::string& source_name);
Dataset load_tsv(const std::filesystem::path& path, TaskKind kind);
std::string to_tsv(const Dataset& dataset);

struct KShotSplit {
  std::uint64_t seed = 0;
  std::size_t k = 0;
  /// Indices into the source dataset, ascending.
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> dev_indices;
  Dataset train;
  Dataset dev;
  std::shared_ptr<const Dataset> test;
};

/// Draws k train and k dev examples per label without replacement. Each
/// label bucket is shuffled with its own seed derived from (seed, label).
/// When `test` is null the test set is every example not drawn.
/// Throws CapacityError when a label has fewer than 2k examples.
KShotSplit make_kshot(const Dataset& dataset, std::size_t k, std::uint64_t seed,
                      std::shared_ptr<const Dataset> test = nullptr);

/// Deterministic JSON description of a split (indices plus provenance).
std::string split_manifest(const KShotSplit& split, const Dataset& source,
                           const std::string& source_name);

/// Rebuilds a split from a manifest written by split_manifest().
KShotSplit split_from_manifest(std::string_view manifest, const Dataset& source,
                               std::shared_ptr<const Dataset> test = nullptr);

/// Per-epoch shuffled mini-batches over `size` examples. The final short
/// batch is kept.
class BatchSampler {
 public:
  /// Throws ConfigError when batch_size < 2: batch-level sampling needs at
  /// least one other example per anchor.
  BatchSampler(std::size_t size, std::size_t batch_size, std::uint64_t seed);

  std::size_t batches_per_epoch() const;
  std::vector<std::vector<std::size_t>> epoch(std::size_t index) const;

 private:
  std::size_t size_;
  std::size_t batch_size_;
  std::uint64_t seed_;
};

/// One epoch of batches for split.train.
std::vector<std::vector<std::size_t>> batches(const KShotSplit& split,
                                              std::size_t batch_size,
                                              std::uint64_t seed,
                                              std::size_t epoch = 0);

}  // namespace consprompt
