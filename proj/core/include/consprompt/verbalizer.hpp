#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "consprompt/backend.hpp"

namespace consprompt {

/// Clamp applied to probabilities before taking logs in ce_loss.
inline constexpr double kLogClampEpsilon = 1e-12;

struct VerbalizerEntry {
  std::string label;
  std::string word;
};

/// `<label><TAB><word>` per line; `#` comments and blank lines ignored.
/// Words containing whitespace are rejected: each label maps to one token.
std::vector<VerbalizerEntry> parse_verbalizer(std::string_view content,
                                              const std::string& source_name);
std::vector<VerbalizerEntry> load_verbalizer_file(const std::filesystem::path& path);

/// Injective map from dense label ids to vocabulary tokens.
class Verbalizer {
 public:
  /// `tokens[label_id]` is the token of that label. Requires >= 2 labels and
  /// distinct tokens.
  explicit Verbalizer(std::vector<TokenId> tokens);

  /// Resolves entries against a sorted label set and a vocabulary. Every
  /// label must be mapped exactly once, and every word must be a known
  /// vocabulary entry.
  static Verbalizer create(std::span<const VerbalizerEntry> entries,
                           std::span<const std::string> label_set,
                           const Vocabulary& vocabulary);

  std::size_t label_count() const { return tokens_.size(); }
  TokenId token(std::size_t label) const { return tokens_.at(label); }
  std::span<const TokenId> tokens() const { return tokens_; }

 private:
  std::vector<TokenId> tokens_;
};

/// Restricts full-vocabulary logits to the verbalizer tokens, in label order.
Vector gather_class_logits(std::span<const double> vocab_logits,
                           const Verbalizer& verbalizer);

/// Mask-position logits of the verbalizer tokens. `prompted` must contain
/// exactly one mask.
Vector class_logits(const MaskedLMBackend& backend, const TokenSequence& prompted,
                    const Verbalizer& verbalizer);

/// Softmax over the label logits. Throws ContractError on non-finite input.
Vector class_probs(std::span<const double> logits);

/// Mean of -log p[gold] over the batch, with p clamped at kLogClampEpsilon.
double ce_loss(std::span<const Vector> batch_probs, std::span<const int> labels);

}  // namespace consprompt
