#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "consprompt/backend.hpp"
#include "consprompt/templates.hpp"

namespace consprompt {

enum class SupportLevel { kPromptLevel, kBatchLevel };
enum class SamplingStrategy { kSimBased, kLabelBased };

/// Which batch members are re-rendered under the alternate templates.
enum class PromptLevelScope { kQueryOnly, kBatch };

std::string to_string(SupportLevel level);
std::string to_string(SamplingStrategy strategy);
SamplingStrategy parse_strategy(std::string_view name);

struct SamplingConfig {
  SamplingStrategy strategy = SamplingStrategy::kSimBased;
  double filtering_ratio = 0.5;
  /// Cap on negatives, taken from the low-similarity end. nullopt = all.
  std::optional<std::size_t> max_negatives;
  PromptLevelScope prompt_level_scope = PromptLevelScope::kBatch;
  /// Only consulted for sim-based sampling; label-based always requires it.
  bool require_same_label_positive = false;

  void validate() const;
  bool positive_shares_label() const {
    return strategy == SamplingStrategy::kLabelBased || require_same_label_positive;
  }
};

struct SupportCandidate {
  PromptedExample prompted;
  int label = 0;
  double similarity = 0.0;
  SupportLevel source = SupportLevel::kBatchLevel;
  /// Index of the batch member this candidate was rendered from.
  std::size_t member = 0;
};

struct SupportSet {
  PromptedExample query;
  SupportLevel level = SupportLevel::kBatchLevel;
  /// Ranked list the selection was made from.
  std::vector<SupportCandidate> candidates;
  std::optional<SupportCandidate> positive;
  std::vector<SupportCandidate> negatives;
  /// Selection had to fall back to the unfiltered list.
  bool used_fallback = false;

  bool usable() const { return positive.has_value() && !negatives.empty(); }
};

/// Total order used for ranking: similarity descending, then raw text,
/// template id and label ascending.
bool ranks_before(const SupportCandidate& a, const SupportCandidate& b);

/// Number of candidates kept by the filtering ratio: ceil(ratio * n), at
/// least one when n > 0.
std::size_t filtered_size(std::size_t n, double ratio);

/// Every batch member except the query, as rendered under the main template.
std::vector<SupportCandidate> build_batch_support(std::span<const PromptedExample> batch,
                                                  std::size_t query_index);

/// Batch members re-rendered under every alternate (non-main) template.
/// templates[0] is the main template and is skipped. With a single template
/// the result is empty.
std::vector<SupportCandidate> build_prompt_support(
    std::span<const PromptedExample> batch, std::size_t query_index,
    std::span<const Template> templates,
    PromptLevelScope scope = PromptLevelScope::kBatch);

/// Scores every candidate by cosine similarity of the sentence embeddings
/// of the raw texts, sorts with ranks_before, and keeps the top
/// filtered_size() entries.
std::vector<SupportCandidate> rank_and_filter(const PromptedExample& query,
                                              std::vector<SupportCandidate> candidates,
                                              const SentenceEncoder& encoder,
                                              const SamplingConfig& config);

/// Picks one positive and the different-label negatives from a ranked list.
/// The result may be unusable (no positive or no negatives).
SupportSet select_pos_neg(const PromptedExample& query,
                          std::span<const SupportCandidate> ranked,
                          const SamplingConfig& config,
                          SupportLevel level = SupportLevel::kBatchLevel);

/// rank_and_filter + select_pos_neg, retrying on the unfiltered ranking
/// when the filtered one is unusable.
SupportSet sample_support(const PromptedExample& query,
                          std::vector<SupportCandidate> candidates,
                          const SentenceEncoder& encoder,
                          const SamplingConfig& config, SupportLevel level);

}  // namespace consprompt
