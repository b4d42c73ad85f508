#include "consprompt/synthetic.hpp"

#include "consprompt/errors.hpp"
#include "consprompt/rng.hpp"

namespace consprompt {

ToyTaskOptions separable_task(std::size_t size, std::uint64_t seed) {
  ToyTaskOptions o;
  o.size = size;
  o.seed = seed;
  return o;
}

ToyTaskOptions coverage_task(std::size_t size, std::uint64_t seed) {
  ToyTaskOptions o;
  o.size = size;
  o.seed = seed;
  o.cue_words_per_class = 48;
  o.filler_words = 6;
  o.signal_per_example = 3;
  return o;
}

Dataset make_toy_corpus(const ToyTaskOptions& o) {
  if (o.labels.size() < 2) throw ConfigError("toy task needs at least two labels");
  if (o.cue_words_per_class == 0 || o.filler_words == 0 || o.signal_per_example == 0 ||
      o.min_filler > o.max_filler)
    throw ConfigError("invalid toy task options");

  Rng rng(o.seed);
  std::vector<Example> rows;
  rows.reserve(o.size);
  for (std::size_t i = 0; i < o.size; ++i) {
    const std::size_t c = i % o.labels.size();
    std::vector<std::string> words;
    for (std::size_t s = 0; s < o.signal_per_example; ++s)
      words.push_back("c" + std::to_string(c) + "w" +
                      std::to_string(rng.below(o.cue_words_per_class)));
    const std::size_t fill = o.min_filler + rng.below(o.max_filler - o.min_filler + 1);
    for (std::size_t f = 0; f < fill; ++f)
      words.push_back("f" + std::to_string(rng.below(o.filler_words)));
    rng.shuffle(std::span<std::string>(words));

    std::string text;
    for (const auto& w : words) {
      if (!text.empty()) text += ' ';
      text += w;
    }
    rows.push_back({{std::move(text)}, o.labels[c]});
  }
  return Dataset(TaskKind::kSingleSentence, std::move(rows));
}

std::string toy_templates() {
  return "# id\tpattern (first line is the main template)\n"
         "t0\t{input} It is {mask}\n"
         "t1\t{input} All in all it was {mask}\n";
}

std::string toy_verbalizer(const ToyTaskOptions& options) {
  std::string out;
  for (std::size_t c = 0; c < options.labels.size(); ++c) {
    out += options.labels[c];
    out += '\t';
    out += options.labels.size() == 2 ? (c == 0 ? "terrible" : "great")
                                      : "word" + std::to_string(c);
    out += '\n';
  }
  return out;
}

}  // namespace consprompt
