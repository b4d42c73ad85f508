#pragma once

#include <cstdint>
#include <string>

#include "consprompt/backend.hpp"

namespace consprompt {

/// Smallest differentiable masked LM that satisfies the backend contract.
///
/// Forward rule for a sequence t_0..t_{n-1}:
///
///   x_i      = E[t_i]                          token embedding, E is |V| x d
///   m        = (1/n) sum_i x_i                 sequence context
///   h_i      = tanh(A x_i + B m + b)           A, B are d x d, b is d
///   logits   = P h + c                         P is |V| x d, c is |V|
///
/// Parameters are stored flat in the order E, A, B, b, P, c, every matrix
/// row-major. Initialization draws from Rng(seed) in that order:
/// E ~ U(-0.05, 0.05), A, B, P ~ U(-1, 1) / sqrt(d); b and c start at zero.
class ReferenceBackend final : public MaskedLMBackend {
 public:
  struct Layout {
    std::size_t vocab = 0;
    std::size_t dim = 0;
    std::size_t embeddings = 0;
    std::size_t mix_self = 0;
    std::size_t mix_context = 0;
    std::size_t bias = 0;
    std::size_t projector = 0;
    std::size_t projector_bias = 0;
    std::size_t total = 0;
  };

  static Layout layout_for(std::size_t vocab, std::size_t dim);

  ReferenceBackend(Vocabulary vocabulary, std::uint64_t seed,
                   std::size_t hidden_size = 16);

  std::string name() const override { return "reference"; }
  std::size_t hidden_size() const override { return layout_.dim; }
  const Vocabulary& vocabulary() const override { return vocabulary_; }
  const Layout& layout() const { return layout_; }
  std::uint64_t seed() const { return seed_; }

  HiddenStates encode(const TokenSequence& input) const override;
  Vector encode_position(const TokenSequence& input,
                         std::size_t position) const override;
  Vector vocab_logits(std::span<const double> hidden) const override;

  std::size_t parameter_count() const override { return params_.size(); }
  std::span<const double> parameters() const override { return params_; }
  std::span<double> parameters() override { return params_; }

  void backward_hidden(const TokenSequence& input, std::size_t position,
                       std::span<const double> grad_hidden,
                       std::span<double> grad_params) const override;
  Vector backward_logits(std::span<const double> hidden,
                         std::span<const double> grad_logits,
                         std::span<double> grad_params) const override;

  std::unique_ptr<MaskedLMBackend> clone() const override;

  /// JSON checkpoint holding the vocabulary, seed, and parameters.
  std::string to_checkpoint() const;
  static ReferenceBackend from_checkpoint(const std::string& json_text);

 private:
  void check_tokens(const TokenSequence& input) const;
  Vector context(const TokenSequence& input) const;
  Vector preactivation(TokenId token, std::span<const double> ctx) const;

  Vocabulary vocabulary_;
  std::uint64_t seed_;
  Layout layout_;
  Vector params_;
};

}  // namespace consprompt
