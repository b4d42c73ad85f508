#include "consprompt/reference_backend.hpp"

#include <cmath>

#include <json.hpp>

#include "consprompt/errors.hpp"
#include "consprompt/rng.hpp"

namespace consprompt {

ReferenceBackend::Layout ReferenceBackend::layout_for(std::size_t vocab,
                                                      std::size_t dim) {
  Layout l;
  l.vocab = vocab;
  l.dim = dim;
  l.embeddings = 0;
  l.mix_self = l.embeddings + vocab * dim;
  l.mix_context = l.mix_self + dim * dim;
  l.bias = l.mix_context + dim * dim;
  l.projector = l.bias + dim;
  l.projector_bias = l.projector + vocab * dim;
  l.total = l.projector_bias + vocab;
  return l;
}

ReferenceBackend::ReferenceBackend(Vocabulary vocabulary, std::uint64_t seed,
                                   std::size_t hidden_size)
    : vocabulary_(std::move(vocabulary)), seed_(seed) {
  if (hidden_size == 0) throw ConfigError("hidden_size must be positive");
  layout_ = layout_for(vocabulary_.size(), hidden_size);
  params_.assign(layout_.total, 0.0);

  Rng rng(seed);
  const double scale = 1.0 / std::sqrt(static_cast<double>(hidden_size));
  auto fill = [&](std::size_t offset, std::size_t count, double half_width) {
    for (std::size_t i = 0; i < count; ++i)
      params_[offset + i] = rng.uniform(-half_width, half_width);
  };
  const std::size_t d = layout_.dim;
  fill(layout_.embeddings, layout_.vocab * d, 0.05);
  fill(layout_.mix_self, d * d, scale);
  fill(layout_.mix_context, d * d, scale);
  fill(layout_.projector, layout_.vocab * d, scale);
}

void ReferenceBackend::check_tokens(const TokenSequence& input) const {
  input.validate();
  for (TokenId t : input.tokens) {
    if (t >= layout_.vocab)
      throw VocabularyError("token id " + std::to_string(t) +
                            " outside vocabulary of size " +
                            std::to_string(layout_.vocab));
  }
}

Vector ReferenceBackend::context(const TokenSequence& input) const {
  const std::size_t d = layout_.dim;
  Vector m(d, 0.0);
  for (TokenId t : input.tokens) {
    const double* e = params_.data() + layout_.embeddings + t * d;
    for (std::size_t k = 0; k < d; ++k) m[k] += e[k];
  }
  const double inv = 1.0 / static_cast<double>(input.tokens.size());
  for (double& v : m) v *= inv;
  return m;
}

Vector ReferenceBackend::preactivation(TokenId token,
                                       std::span<const double> ctx) const {
  const std::size_t d = layout_.dim;
  const double* e = params_.data() + layout_.embeddings + token * d;
  const double* a = params_.data() + layout_.mix_self;
  const double* b = params_.data() + layout_.mix_context;
  const double* bias = params_.data() + layout_.bias;
  Vector u(d);
  for (std::size_t r = 0; r < d; ++r) {
    double s = bias[r];
    for (std::size_t c = 0; c < d; ++c) s += a[r * d + c] * e[c] + b[r * d + c] * ctx[c];
    u[r] = s;
  }
  return u;
}

HiddenStates ReferenceBackend::encode(const TokenSequence& input) const {
  check_tokens(input);
  const Vector ctx = context(input);
  HiddenStates out;
  out.vectors.reserve(input.tokens.size());
  for (TokenId t : input.tokens) {
    Vector h = preactivation(t, ctx);
    for (double& v : h) v = std::tanh(v);
    out.vectors.push_back(std::move(h));
  }
  return out;
}

Vector ReferenceBackend::encode_position(const TokenSequence& input,
                                         std::size_t position) const {
  check_tokens(input);
  if (position >= input.tokens.size())
    throw ContractError("position out of bounds");
  Vector h = preactivation(input.tokens[position], context(input));
  for (double& v : h) v = std::tanh(v);
  return h;
}

Vector ReferenceBackend::vocab_logits(std::span<const double> hidden) const {
  const std::size_t d = layout_.dim;
  if (hidden.size() != d)
    throw ContractError("hidden vector has dimension " +
                        std::to_string(hidden.size()) + ", backend expects " +
                        std::to_string(d));
  Vector logits(layout_.vocab);
  const double* p = params_.data() + layout_.projector;
  const double* c = params_.data() + layout_.projector_bias;
  for (std::size_t v = 0; v < layout_.vocab; ++v) {
    double s = c[v];
    for (std::size_t k = 0; k < d; ++k) s += p[v * d + k] * hidden[k];
    logits[v] = s;
  }
  return logits;
}

void ReferenceBackend::backward_hidden(const TokenSequence& input,
                                       std::size_t position,
                                       std::span<const double> grad_hidden,
                                       std::span<double> grad_params) const {
  check_tokens(input);
  const std::size_t d = layout_.dim;
  if (position >= input.tokens.size())
    throw ContractError("position out of bounds");
  if (grad_hidden.size() != d || grad_params.size() != layout_.total)
    throw ContractError("gradient buffer has the wrong size");

  const Vector ctx = context(input);
  const TokenId tok = input.tokens[position];
  const Vector u = preactivation(tok, ctx);
  const double* e = params_.data() + layout_.embeddings + tok * d;
  const double* a = params_.data() + layout_.mix_self;
  const double* b = params_.data() + layout_.mix_context;

  Vector du(d);
  for (std::size_t r = 0; r < d; ++r) {
    const double h = std::tanh(u[r]);
    du[r] = grad_hidden[r] * (1.0 - h * h);
  }

  double* ga = grad_params.data() + layout_.mix_self;
  double* gb = grad_params.data() + layout_.mix_context;
  double* gbias = grad_params.data() + layout_.bias;
  Vector dx(d, 0.0);
  Vector dm(d, 0.0);
  for (std::size_t r = 0; r < d; ++r) {
    gbias[r] += du[r];
    for (std::size_t c = 0; c < d; ++c) {
      ga[r * d + c] += du[r] * e[c];
      gb[r * d + c] += du[r] * ctx[c];
      dx[c] += a[r * d + c] * du[r];
      dm[c] += b[r * d + c] * du[r];
    }
  }

  double* ge = grad_params.data() + layout_.embeddings;
  for (std::size_t c = 0; c < d; ++c) ge[tok * d + c] += dx[c];
  const double inv = 1.0 / static_cast<double>(input.tokens.size());
  for (TokenId t : input.tokens)
    for (std::size_t c = 0; c < d; ++c) ge[t * d + c] += dm[c] * inv;
}

Vector ReferenceBackend::backward_logits(std::span<const double> hidden,
                                         std::span<const double> grad_logits,
                                         std::span<double> grad_params) const {
  const std::size_t d = layout_.dim;
  if (hidden.size() != d || grad_logits.size() != layout_.vocab ||
      grad_params.size() != layout_.total)
    throw ContractError("backward_logits: buffer size mismatch");
  const double* p = params_.data() + layout_.projector;
  double* gp = grad_params.data() + layout_.projector;
  double* gc = grad_params.data() + layout_.projector_bias;
  Vector dh(d, 0.0);
  for (std::size_t v = 0; v < layout_.vocab; ++v) {
    const double g = grad_logits[v];
    if (g == 0.0) continue;
    gc[v] += g;
    for (std::size_t k = 0; k < d; ++k) {
      gp[v * d + k] += g * hidden[k];
      dh[k] += g * p[v * d + k];
    }
  }
  return dh;
}

std::unique_ptr<MaskedLMBackend> ReferenceBackend::clone() const {
  return std::make_unique<ReferenceBackend>(*this);
}

std::string ReferenceBackend::to_checkpoint() const {
  nlohmann::json j;
  j["backend"] = "reference";
  j["seed"] = seed_;
  j["hidden_size"] = layout_.dim;
  j["vocabulary"] = vocabulary_.words();
  j["parameters"] = params_;
  return j.dump();
}

ReferenceBackend ReferenceBackend::from_checkpoint(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  }
  if (j.value("backend", "") != "reference")
    throw DataError("checkpoint is not a reference backend checkpoint");
  ReferenceBackend backend(
      Vocabulary(j.at("vocabulary").get<std::vector<std::string>>()),
      j.at("seed").get<std::uint64_t>(), j.at("hidden_size").get<std::size_t>());
  auto params = j.at("parameters").get<Vector>();
  if (params.size() != backend.params_.size())
    throw DataError("checkpoint parameter count does not match its vocabulary");
  backend.params_ = std::move(params);
  return backend;
}

}  // namespace consprompt
