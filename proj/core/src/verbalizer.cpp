#include "consprompt/verbalizer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "consprompt/errors.hpp"

namespace consprompt {

std::vector<VerbalizerEntry> parse_verbalizer(std::string_view content,
                                              const std::string& source_name) {
  std::vector<VerbalizerEntry> out;
  std::set<std::string> labels;
  std::istringstream in{std::string(content)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 == line.size())
      throw LoadError(source_name, line_no, "expected <label><TAB><word>");
    VerbalizerEntry e{line.substr(0, tab), line.substr(tab + 1)};
    if (split_whitespace(e.word).size() != 1 || e.word != split_whitespace(e.word)[0])
      throw LoadError(source_name, line_no,
                      "label word '" + e.word + "' is not a single token");
    if (e.word == kMaskToken || e.word == kUnknownToken)
      throw LoadError(source_name, line_no, "label word may not be a reserved token");
    if (!labels.insert(e.label).second)
      throw LoadError(source_name, line_no, "duplicate label '" + e.label + "'");
    out.push_back(std::move(e));
  }
  if (out.empty())
    throw LoadError(source_name, std::max<std::size_t>(line_no, 1), "no label words defined");
  return out;
}

std::vector<VerbalizerEntry> load_verbalizer_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open verbalizer file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_verbalizer(buf.str(), path.string());
}

Verbalizer::Verbalizer(std::vector<TokenId> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.size() < 2)
    throw ContractError("a verbalizer needs at least two labels");
  std::set<TokenId> seen(tokens_.begin(), tokens_.end());
  if (seen.size() != tokens_.size())
    throw ContractError("verbalizer maps two labels to the same token");
}

Verbalizer Verbalizer::create(std::span<const VerbalizerEntry> entries,
                              std::span<const std::string> label_set,
                              const Vocabulary& vocabulary) {
  std::unordered_map<std::string, const VerbalizerEntry*> by_label;
  for (const auto& e : entries) by_label.emplace(e.label, &e);

  std::vector<TokenId> tokens;
  tokens.reserve(label_set.size());
  for (const auto& label : label_set) {
    const auto it = by_label.find(label);
    if (it == by_label.end())
      throw ConfigError("verbalizer has no word for label '" + label + "'");
    if (!vocabulary.contains(it->second->word))
      throw VocabularyError("label word '" + it->second->word +
                            "' is not in the backend vocabulary");
    tokens.push_back(vocabulary.id(it->second->word));
  }
  if (entries.size() != label_set.size())
    throw ConfigError("verbalizer maps labels that are not in the dataset");
  return Verbalizer(std::move(tokens));
}

Vector gather_class_logits(std::span<const double> vocab_logits,
                           const Verbalizer& verbalizer) {
  Vector out;
  out.reserve(verbalizer.label_count());
  for (TokenId t : verbalizer.tokens()) {
    if (t >= vocab_logits.size())
      throw VocabularyError("verbalizer token outside the logit vector");
    out.push_back(vocab_logits[t]);
  }
  return out;
}

Vector class_logits(const MaskedLMBackend& backend, const TokenSequence& prompted,
                    const Verbalizer& verbalizer) {
  const std::size_t mask = prompted.single_mask();
  const Vector hidden = backend.encode_position(prompted, mask);
  return gather_class_logits(backend.vocab_logits(hidden), verbalizer);
}

Vector class_probs(std::span<const double> logits) {
  if (logits.empty()) throw ContractError("class_probs of an empty vector");
  if (!all_finite(logits)) throw ContractError("class_probs: non-finite logits");
  const double peak = *std::max_element(logits.begin(), logits.end());
  Vector p(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - peak);
    z += p[i];
  }
  for (double& v : p) v /= z;
  return p;
}

double ce_loss(std::span<const Vector> batch_probs, std::span<const int> labels) {
  if (batch_probs.size() != labels.size())
    throw ContractError("ce_loss: probability and label counts differ");
  if (batch_probs.empty()) throw ContractError("ce_loss of an empty batch");
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto& p = batch_probs[i];
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= p.size())
      throw ContractError("ce_loss: label out of range");
    total -= std::log(std::max(p[static_cast<std::size_t>(labels[i])], kLogClampEpsilon));
  }
  return total / static_cast<double>(labels.size());
}

}  // namespace consprompt
