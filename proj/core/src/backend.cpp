#include "consprompt/backend.hpp"

#include <algorithm>
#include <cctype>

#include "consprompt/errors.hpp"
#include "consprompt/reference_backend.hpp"

namespace consprompt {

void TokenSequence::validate() const {
  if (tokens.empty()) throw ContractError("token sequence is empty");
  for (std::size_t p : mask_positions) {
    if (p >= tokens.size())
      throw ContractError("mask position " + std::to_string(p) +
                          " out of bounds for sequence of length " +
                          std::to_string(tokens.size()));
  }
}

std::size_t TokenSequence::single_mask() const {
  if (mask_positions.size() != 1)
    throw ContractError("expected exactly one mask position, found " +
                        std::to_string(mask_positions.size()));
  return mask_positions.front();
}

std::vector<std::string> split_whitespace(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    const std::size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) out.emplace_back(text.substr(start, i - start));
  }
  return out;
}

std::vector<std::string> word_pieces(std::string_view text) {
  std::vector<std::string> out;
  for (const auto& piece : split_whitespace(text)) {
    std::string_view rest = piece;
    while (!rest.empty()) {
      const auto at = rest.find(kMaskToken);
      if (at == std::string_view::npos) {
        out.emplace_back(rest);
        break;
      }
      if (at > 0) out.emplace_back(rest.substr(0, at));
      out.emplace_back(kMaskToken);
      rest.remove_prefix(at + kMaskToken.size());
    }
  }
  return out;
}

Vocabulary::Vocabulary(std::vector<std::string> words) {
  std::sort(words.begin(), words.end());
  words.erase(std::unique(words.begin(), words.end()), words.end());
  words_.reserve(words.size() + 2);
  words_.emplace_back(kUnknownToken);
  words_.emplace_back(kMaskToken);
  for (auto& w : words) {
    if (w == kUnknownToken || w == kMaskToken || w.empty()) continue;
    words_.push_back(std::move(w));
  }
  for (std::size_t i = 0; i < words_.size(); ++i)
    index_.emplace(words_[i], static_cast<TokenId>(i));
}

bool Vocabulary::contains(std::string_view word) const {
  return index_.contains(std::string(word));
}

TokenId Vocabulary::id(std::string_view word) const {
  const auto it = index_.find(std::string(word));
  return it == index_.end() ? kUnknownId : it->second;
}

const std::string& Vocabulary::word(TokenId id) const {
  if (id >= words_.size())
    throw VocabularyError("token id " + std::to_string(id) +
                          " outside vocabulary of size " +
                          std::to_string(words_.size()));
  return words_[id];
}

TokenSequence Vocabulary::tokenize(std::string_view text) const {
  TokenSequence seq;
  for (const auto& piece : word_pieces(text)) {
    if (piece == kMaskToken) {
      seq.mask_positions.push_back(seq.tokens.size());
      seq.tokens.push_back(kMaskId);
    } else {
      seq.tokens.push_back(id(piece));
    }
  }
  return seq;
}

Vector MaskedLMBackend::encode_position(const TokenSequence& input,
                                        std::size_t position) const {
  auto states = encode(input);
  if (position >= states.size())
    throw ContractError("position out of bounds");
  return std::move(states.vectors[position]);
}

void MaskedLMBackend::apply_gradient(std::span<const double> grad,
                                     double learning_rate) {
  auto params = parameters();
  if (grad.size() != params.size())
    throw ContractError("gradient size does not match parameter count");
  for (std::size_t i = 0; i < params.size(); ++i)
    params[i] -= learning_rate * grad[i];
}

std::unique_ptr<MaskedLMBackend> make_backend(const BackendSpec& spec,
                                              Vocabulary vocabulary) {
  if (spec.name == "reference")
    return std::make_unique<ReferenceBackend>(std::move(vocabulary), spec.seed,
                                              spec.hidden_size);
  throw ConfigError("unknown backend '" + spec.name +
                    "' (built-in backends: reference)");
}

}  // namespace consprompt
