#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "consprompt/linalg.hpp"

namespace consprompt {

using TokenId = std::uint32_t;

/// Literal mask marker written into rendered prompts. Backends map it to
/// their own mask id when tokenizing.
inline constexpr std::string_view kMaskToken = "[MASK]";
inline constexpr std::string_view kUnknownToken = "[UNK]";

/// Tokenized input with the indices of its mask tokens.
struct TokenSequence {
  std::vector<TokenId> tokens;
  std::vector<std::size_t> mask_positions;

  /// Throws ContractError unless tokens is non-empty and every mask
  /// position is in bounds.
  void validate() const;

  /// The single mask position. Throws ContractError if there are zero or
  /// several.
  std::size_t single_mask() const;
};

/// One hidden vector per input token, all of dimension `dim()`.
struct HiddenStates {
  std::vector<Vector> vectors;

  std::size_t size() const { return vectors.size(); }
  std::size_t dim() const { return vectors.empty() ? 0 : vectors.front().size(); }
};

/// Splits on ASCII whitespace. Empty pieces are dropped.
std::vector<std::string> split_whitespace(std::string_view text);

/// Word pieces seen by Vocabulary::tokenize: whitespace split, with the mask
/// marker cut out of any piece it is glued to ("[MASK]." -> "[MASK]" ".").
std::vector<std::string> word_pieces(std::string_view text);

/// Word-level vocabulary with two reserved entries: id 0 is [UNK] and id 1
/// is [MASK]. Remaining words are stored in sorted order, so the same word
/// list always yields the same ids.
class Vocabulary {
 public:
  static constexpr TokenId kUnknownId = 0;
  static constexpr TokenId kMaskId = 1;

  explicit Vocabulary(std::vector<std::string> words);

  std::size_t size() const { return words_.size(); }
  bool contains(std::string_view word) const;

  /// Id of `word`, or kUnknownId.
  TokenId id(std::string_view word) const;
  const std::string& word(TokenId id) const;
  const std::vector<std::string>& words() const { return words_; }

  /// Whitespace tokenization. "[MASK]" is recognized even when glued to
  /// neighbouring characters ("[MASK]." -> "[MASK]" "."), everything else
  /// is split on whitespace only.
  TokenSequence tokenize(std::string_view text) const;

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, TokenId> index_;
};

/// A masked language model: contextual encoder plus vocabulary projector.
///
/// Parameters are exposed as one flat vector so optimizers and
/// finite-difference checks can treat every backend uniformly. Gradients are
/// accumulated (+=) into caller-owned buffers of parameter_count() entries.
class MaskedLMBackend {
 public:
  virtual ~MaskedLMBackend() = default;

  virtual std::string name() const = 0;
  virtual std::size_t hidden_size() const = 0;
  virtual const Vocabulary& vocabulary() const = 0;
  std::size_t vocab_size() const { return vocabulary().size(); }

  /// Last-layer hidden states, one per token. Throws VocabularyError for
  /// out-of-range ids.
  virtual HiddenStates encode(const TokenSequence& input) const = 0;

  /// Hidden state of a single position. The default calls encode().
  virtual Vector encode_position(const TokenSequence& input,
                                 std::size_t position) const;

  /// Unnormalized scores over the full vocabulary.
  virtual Vector vocab_logits(std::span<const double> hidden) const = 0;

  virtual std::size_t parameter_count() const = 0;
  virtual std::span<const double> parameters() const = 0;
  virtual std::span<double> parameters() = 0;

  /// Backpropagates `grad_hidden` (d loss / d hidden at `position`).
  virtual void backward_hidden(const TokenSequence& input, std::size_t position,
                               std::span<const double> grad_hidden,
                               std::span<double> grad_params) const = 0;

  /// Backpropagates `grad_logits` through the projector and returns
  /// d loss / d hidden.
  virtual Vector backward_logits(std::span<const double> hidden,
                                 std::span<const double> grad_logits,
                                 std::span<double> grad_params) const = 0;

  /// Applies one optimizer update. The default is plain SGD.
  virtual void apply_gradient(std::span<const double> grad,
                              double learning_rate);

  virtual std::unique_ptr<MaskedLMBackend> clone() const = 0;
};

/// Frozen sentence encoder used only to rank support candidates.
class SentenceEncoder {
 public:
  virtual ~SentenceEncoder() = default;

  virtual std::size_t embed_dim() const = 0;

  /// Throws ContractError for empty text.
  virtual Vector embed(std::string_view text) const = 0;
};

/// Backend selection as it appears in run configs.
struct BackendSpec {
  std::string name = "reference";
  std::uint64_t seed = 7;
  std::size_t hidden_size = 16;
};

/// Instantiates the backend named by `spec`. Only "reference" is built in;
/// other names raise ConfigError.
std::unique_ptr<MaskedLMBackend> make_backend(const BackendSpec& spec,
                                              Vocabulary vocabulary);

}  // namespace consprompt
