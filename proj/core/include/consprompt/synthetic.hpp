#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "consprompt/data.hpp"

namespace consprompt {

/// Bag-of-words toy classification task.
///
/// Every example holds `signal_per_example` cue words drawn from its class's
/// private pool plus filler words from a shared pool, in shuffled order.
/// Labels are balanced round-robin. Cue word i of class c is "c<c>w<i>",
/// filler word i is "f<i>".
struct ToyTaskOptions {
  std::size_t size = 1000;
  std::uint64_t seed = 1;
  std::vector<std::string> labels{"negative", "positive"};
  std::size_t cue_words_per_class = 4;
  std::size_t filler_words = 6;
  std::size_t signal_per_example = 1;
  std::size_t min_filler = 3;
  std::size_t max_filler = 6;
};

/// Few cue words per class: linearly separable and learnable from any K.
ToyTaskOptions separable_task(std::size_t size, std::uint64_t seed);

/// Many cue words per class: a K-shot sample covers more of them as K
/// grows, so held-out accuracy rises with K.
ToyTaskOptions coverage_task(std::size_t size, std::uint64_t seed);

Dataset make_toy_corpus(const ToyTaskOptions& options);

/// Template file body for the toy task (main + one alternate).
std::string toy_templates();

/// Verbalizer file body mapping the toy labels to "terrible" / "great".
std::string toy_verbalizer(const ToyTaskOptions& options);

}  // namespace consprompt
