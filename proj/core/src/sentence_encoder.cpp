#include "consprompt/sentence_encoder.hpp"

#include "consprompt/errors.hpp"
#include "consprompt/rng.hpp"

namespace consprompt {

HashSentenceEncoder::HashSentenceEncoder(std::uint64_t seed, std::size_t dim)
    : seed_(seed), dim_(dim) {
  if (dim == 0) throw ConfigError("sentence encoder dimension must be positive");
}

Vector HashSentenceEncoder::token_vector(std::string_view token) const {
  Rng rng(derive_seed(seed_, fnv1a(token)));
  Vector v(dim_);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

Vector HashSentenceEncoder::embed(std::string_view text) const {
  const auto tokens = split_whitespace(text);
  if (tokens.empty()) throw ContractError("cannot embed empty text");
  Vector sum(dim_, 0.0);
  for (const auto& t : tokens) axpy(1.0, token_vector(t), sum);
  const double inv = 1.0 / static_cast<double>(tokens.size());
  for (double& x : sum) x *= inv;
  return sum;
}

}  // namespace consprompt
