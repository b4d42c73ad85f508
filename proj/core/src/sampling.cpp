#include "consprompt/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>
#include <unordered_map>

#include "consprompt/errors.hpp"

namespace consprompt {

std::string to_string(SupportLevel level) {
  return level == SupportLevel::kPromptLevel ? "prompt_level" : "batch_level";
}

std::string to_string(SamplingStrategy strategy) {
  return strategy == SamplingStrategy::kSimBased ? "sim" : "label";
}

SamplingStrategy parse_strategy(std::string_view name) {
  if (name == "sim" || name == "sim_based") return SamplingStrategy::kSimBased;
  if (name == "label" || name == "label_based") return SamplingStrategy::kLabelBased;
  throw ConfigError("unknown sampling strategy '" + std::string(name) +
                    "' (expected sim or label)");
}

void SamplingConfig::validate() const {
  if (!(filtering_ratio > 0.0 && filtering_ratio <= 1.0))
    throw ConfigError("filtering_ratio must lie in (0, 1]");
  if (max_negatives && *max_negatives == 0)
    throw ConfigError("max_negatives must be positive");
}

bool ranks_before(const SupportCandidate& a, const SupportCandidate& b) {
  if (a.similarity != b.similarity) return a.similarity > b.similarity;
  const auto ra = a.prompted.raw_text();
  const auto rb = b.prompted.raw_text();
  return std::tie(ra, a.prompted.template_id, a.label) <
         std::tie(rb, b.prompted.template_id, b.label);
}

std::size_t filtered_size(std::size_t n, double ratio) {
  if (n == 0) return 0;
  // The tolerance keeps products like 0.1 * 30 from rounding up to 4.
  const double raw = std::ceil(ratio * static_cast<double>(n) - 1e-9);
  return std::clamp<std::size_t>(static_cast<std::size_t>(raw), 1, n);
}

namespace {

int require_label(const PromptedExample& ex) {
  if (!ex.label) throw ContractError("support sampling requires labelled examples");
  return *ex.label;
}

}  // namespace

std::vector<SupportCandidate> build_batch_support(std::span<const PromptedExample> batch,
                                                  std::size_t query_index) {
  if (query_index >= batch.size()) throw ContractError("query index outside the batch");
  std::vector<SupportCandidate> out;
  out.reserve(batch.size() - 1);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (i == query_index) continue;
    out.push_back({batch[i], require_label(batch[i]), 0.0, SupportLevel::kBatchLevel, i});
  }
  return out;
}

std::vector<SupportCandidate> build_prompt_support(std::span<const PromptedExample> batch,
                                                   std::size_t query_index,
                                                   std::span<const Template> templates,
                                                   PromptLevelScope scope) {
  if (query_index >= batch.size()) throw ContractError("query index outside the batch");
  std::vector<SupportCandidate> out;
  if (templates.size() < 2) return out;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (scope == PromptLevelScope::kQueryOnly && i != query_index) continue;
    const int label = require_label(batch[i]);
    for (std::size_t t = 1; t < templates.size(); ++t) {
      out.push_back({templates[t].apply(batch[i].inputs, label), label, 0.0,
                     SupportLevel::kPromptLevel, i});
    }
  }
  return out;
}

std::vector<SupportCandidate> rank_and_filter(const PromptedExample& query,
                                              std::vector<SupportCandidate> candidates,
                                              const SentenceEncoder& encoder,
                                              const SamplingConfig& config) {
  config.validate();
  if (candidates.empty()) throw ContractError("rank_and_filter: no candidates");

  const Vector q = encoder.embed(query.raw_text());
  std::unordered_map<std::string, double> cache;
  for (auto& c : candidates) {
    const auto raw = c.prompted.raw_text();
    auto it = cache.find(raw);
    if (it == cache.end()) it = cache.emplace(raw, cosine(q, encoder.embed(raw))).first;
    c.similarity = it->second;
  }
  std::sort(candidates.begin(), candidates.end(), ranks_before);
  candidates.resize(filtered_size(candidates.size(), config.filtering_ratio));
  return candidates;
}

SupportSet select_pos_neg(const PromptedExample& query,
                          std::span<const SupportCandidate> ranked,
                          const SamplingConfig& config, SupportLevel level) {
  const int query_label = require_label(query);
  SupportSet set;
  set.query = query;
  set.level = level;
  set.candidates.assign(ranked.begin(), ranked.end());

  std::optional<std::size_t> pos;
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    if (!config.positive_shares_label() || ranked[i].label == query_label) {
      pos = i;
      break;
    }
  }
  if (!pos) return set;
  set.positive = ranked[*pos];

  std::vector<std::size_t> neg;
  for (std::size_t i = 0; i < ranked.size(); ++i)
    if (i != *pos && ranked[i].label != query_label) neg.push_back(i);
  std::size_t skip = 0;
  if (config.max_negatives && neg.size() > *config.max_negatives)
    skip = neg.size() - *config.max_negatives;
  for (std::size_t i = skip; i < neg.size(); ++i) set.negatives.push_back(ranked[neg[i]]);
  return set;
}

SupportSet sample_support(const PromptedExample& query,
                          std::vector<SupportCandidate> candidates,
                          const SentenceEncoder& encoder,
                          const SamplingConfig& config, SupportLevel level) {
  if (candidates.empty()) {
    SupportSet empty;
    empty.query = query;
    empty.level = level;
    return empty;
  }
  SamplingConfig full = config;
  full.filtering_ratio = 1.0;
  auto ranked = rank_and_filter(query, std::move(candidates), encoder, full);
  const std::size_t keep = filtered_size(ranked.size(), config.filtering_ratio);

  SupportSet set = select_pos_neg(
      query, std::span<const SupportCandidate>(ranked.data(), keep), config, level);
  if (set.usable() || keep == ranked.size()) return set;
  set = select_pos_neg(query, ranked, config, level);
  set.used_fallback = true;
  return set;
}

}  // namespace consprompt
