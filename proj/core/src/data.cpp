#include "consprompt/data.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "consprompt/errors.hpp"
#include "consprompt/rng.hpp"

namespace consprompt {

TaskKind task_kind_for(std::string_view task) {
  static const std::set<std::string_view> single = {
      "sst-2", "sst-5", "trec", "mr", "cr", "subj", "mpqa", "toy", "single"};
  static const std::set<std::string_view> pair = {"snli", "qnli", "mnli", "rte",
                                                  "pair"};
  if (single.contains(task)) return TaskKind::kSingleSentence;
  if (pair.contains(task)) return TaskKind::kSentencePair;
  throw ConfigError("unknown task '" + std::string(task) + "'");
}

std::size_t field_count(TaskKind kind) {
  return kind == TaskKind::kSingleSentence ? 1 : 2;
}

Dataset::Dataset(TaskKind kind, std::vector<Example> examples)
    : kind_(kind), examples_(std::move(examples)) {
  std::set<std::string> labels;
  for (const auto& e : examples_) labels.insert(e.label);
  label_set_.assign(labels.begin(), labels.end());
  index_labels();
}

Dataset::Dataset(TaskKind kind, std::vector<Example> examples,
                 std::vector<std::string> label_set)
    : kind_(kind), examples_(std::move(examples)), label_set_(std::move(label_set)) {
  if (!std::is_sorted(label_set_.begin(), label_set_.end()) ||
      std::adjacent_find(label_set_.begin(), label_set_.end()) != label_set_.end())
    throw ContractError("label set must be sorted and unique");
  index_labels();
}

void Dataset::index_labels() {
  if (label_set_.size() < 2)
    throw DataError("a dataset needs at least two labels, found " +
                    std::to_string(label_set_.size()));
  label_ids_.reserve(examples_.size());
  for (const auto& e : examples_) {
    if (e.fields.size() != field_count(kind_))
      throw DataError("example has " + std::to_string(e.fields.size()) +
                      " text fields, task expects " + std::to_string(field_count(kind_)));
    label_ids_.push_back(label_id(e.label));
  }
}

int Dataset::label_id(std::string_view label) const {
  const auto it = std::lower_bound(label_set_.begin(), label_set_.end(), label);
  if (it == label_set_.end() || *it != label)
    throw DataError("unknown label '" + std::string(label) + "'");
  return static_cast<int>(it - label_set_.begin());
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  std::vector<Example> picked;
  picked.reserve(indices.size());
  for (std::size_t i : indices) picked.push_back(examples_.at(i));
  return Dataset(kind_, std::move(picked), label_set_);
}

Dataset parse_tsv(std::string_view content, TaskKind kind, const std::string& source_name) {
  const std::size_t want = field_count(kind) + 1;
  std::vector<Example> rows;
  std::istringstream in{std::string(content)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> cols;
    std::size_t start = 0;
    while (true) {
      const auto tab = line.find('\t', start);
      cols.push_back(line.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (cols.size() != want)
      throw LoadError(source_name, line_no,
                      "expected " + std::to_string(want) + " tab-separated fields, found " +
                          std::to_string(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c)
      if (cols[c].empty())
        throw LoadError(source_name, line_no,
                        c + 1 == cols.size() ? "missing label" : "empty text field");
    Example e;
    e.label = std::move(cols.back());
    cols.pop_back();
    e.fields = std::move(cols);
    rows.push_back(std::move(e));
  }
  if (rows.empty()) throw LoadError(source_name, 1, "dataset is empty");
  try {
    return Dataset(kind, std::move(rows));
  } catch (const DataError& e) {
    throw DataError(source_name + ": " + e.what());
  }
}

Dataset load_tsv(const std::filesystem::path& path, TaskKind kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_tsv(buf.str(), kind, path.string());
}

std::string to_tsv(const Dataset& dataset) {
  std::string out;
  for (const auto& e : dataset.examples()) {
    for (const auto& f : e.fields) {
      out += f;
      out += '\t';
    }
    out += e.label;
    out += '\n';
  }
  return out;
}

namespace {

KShotSplit assemble(const Dataset& dataset, std::size_t k, std::uint64_t seed,
                    std::vector<std::size_t> train, std::vector<std::size_t> dev,
                    std::shared_ptr<const Dataset> test) {
  std::sort(train.begin(), train.end());
  std::sort(dev.begin(), dev.end());
  if (!test) {
    std::vector<bool> used(dataset.size(), false);
    for (auto i : train) used[i] = true;
    for (auto i : dev) used[i] = true;
    std::vector<std::size_t> rest;
    for (std::size_t i = 0; i < dataset.size(); ++i)
      if (!used[i]) rest.push_back(i);
    test = std::make_shared<const Dataset>(dataset.subset(rest));
  }
  Dataset train_set = dataset.subset(train);
  Dataset dev_set = dataset.subset(dev);
  return KShotSplit{seed, k, std::move(train), std::move(dev),
                    std::move(train_set), std::move(dev_set), std::move(test)};
}

}  // namespace

KShotSplit make_kshot(const Dataset& dataset, std::size_t k, std::uint64_t seed,
                      std::shared_ptr<const Dataset> test) {
  if (k == 0) throw ConfigError("k must be positive");
  std::vector<std::vector<std::size_t>> buckets(dataset.label_set().size());
  for (std::size_t i = 0; i < dataset.size(); ++i)
    buckets[static_cast<std::size_t>(dataset.label_id_of(i))].push_back(i);

  std::vector<std::size_t> train;
  std::vector<std::size_t> dev;
  for (std::size_t l = 0; l < buckets.size(); ++l) {
    auto& bucket = buckets[l];
    const auto& label = dataset.label_set()[l];
    if (bucket.size() < 2 * k)
      throw CapacityError(label, "label '" + label + "' has " +
                                     std::to_string(bucket.size()) +
                                     " examples, k=" + std::to_string(k) + " needs " +
                                     std::to_string(2 * k));
    Rng rng(derive_seed(seed, fnv1a(label)));
    rng.shuffle(std::span<std::size_t>(bucket));
    train.insert(train.end(), bucket.begin(), bucket.begin() + static_cast<std::ptrdiff_t>(k));
    dev.insert(dev.end(), bucket.begin() + static_cast<std::ptrdiff_t>(k),
               bucket.begin() + static_cast<std::ptrdiff_t>(2 * k));
  }
  return assemble(dataset, k, seed, std::move(train), std::move(dev), std::move(test));
}

std::string split_manifest(const KShotSplit& split, const Dataset& source,
                           const std::string& source_name) {
  nlohmann::ordered_json j;
  j["format"] = "consprompt-split/1";
  j["source"] = source_name;
  j["dataset_size"] = source.size();
  j["label_set"] = source.label_set();
  j["k"] = split.k;
  j["seed"] = split.seed;
  j["train"] = split.train_indices;
  j["dev"] = split.dev_indices;
  return j.dump(1) + "\n";
}

KShotSplit split_from_manifest(std::string_view manifest, const Dataset& source,
                               std::shared_ptr<const Dataset> test) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(manifest);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed split manifest: ") + e.what());
  }
  if (j.value("format", "") != "consprompt-split/1")
    throw DataError("not a split manifest");
  if (j.at("dataset_size").get<std::size_t>() != source.size() ||
      j.at("label_set").get<std::vector<std::string>>() != source.label_set())
    throw DataError("split manifest does not match the dataset");
  auto train = j.at("train").get<std::vector<std::size_t>>();
  auto dev = j.at("dev").get<std::vector<std::size_t>>();
  for (auto i : train)
    if (i >= source.size()) throw DataError("split manifest index out of range");
  for (auto i : dev)
    if (i >= source.size()) throw DataError("split manifest index out of range");
  return assemble(source, j.at("k").get<std::size_t>(), j.at("seed").get<std::uint64_t>(),
                  std::move(train), std::move(dev), std::move(test));
}

BatchSampler::BatchSampler(std::size_t size, std::size_t batch_size, std::uint64_t seed)
    : size_(size), batch_size_(batch_size), seed_(seed) {
  if (batch_size < 2)
    throw ConfigError("batch size must be at least 2: batch-level contrastive "
                      "sampling needs another example in the batch");
  if (size == 0) throw ConfigError("cannot batch an empty dataset");
}

std::size_t BatchSampler::batches_per_epoch() const {
  return (size_ + batch_size_ - 1) / batch_size_;
}

std::vector<std::vector<std::size_t>> BatchSampler::epoch(std::size_t index) const {
  std::vector<std::size_t> order(size_);
  for (std::size_t i = 0; i < size_; ++i) order[i] = i;
  Rng rng(derive_seed(seed_, index));
  rng.shuffle(std::span<std::size_t>(order));
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < size_; start += batch_size_) {
    const std::size_t end = std::min(size_, start + batch_size_);
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                     order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

std::vector<std::vector<std::size_t>> batches(const KShotSplit& split,
                                              std::size_t batch_size,
                                              std::uint64_t seed, std::size_t epoch) {
  return BatchSampler(split.train.size(), batch_size, seed).epoch(epoch);
}

}  // namespace consprompt
