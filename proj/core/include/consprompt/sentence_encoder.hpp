#pragma once

#include <cstdint>

#include "consprompt/backend.hpp"

namespace consprompt {

/// Deterministic bag-of-words sentence encoder.
///
/// Each whitespace token w gets a frozen vector whose components are drawn
/// in order from Rng(derive_seed(seed, fnv1a(w))) as U(-1, 1). A sentence is
/// the mean of its token vectors. No training, no vocabulary, no state.
class HashSentenceEncoder final : public SentenceEncoder {
 public:
  explicit HashSentenceEncoder(std::uint64_t seed = 0x5B3E7, std::size_t dim = 32);

  std::size_t embed_dim() const override { return dim_; }
  Vector embed(std::string_view text) const override;

  Vector token_vector(std::string_view token) const;

 private:
  std::uint64_t seed_;
  std::size_t dim_;
};

}  // namespace consprompt
