// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "cli.hpp"
#include "consprompt/contrastive.hpp"
#include "consprompt/report.hpp"
#include "consprompt/sampling.hpp"
#include "consprompt/verbalizer.hpp"
#include "test_support.hpp"

namespace {

using namespace consprompt;
namespace fs = std::filesystem;
using testing::read_text;
using testing::scratch_dir;

struct Outcome {
  bool pass = true;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v, int precision = 3) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

int run_cli(std::vector<std::string> args, std::string* out_text = nullptr) {
  args.insert(args.begin(), "consprompt");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  if (out_text) *out_text = out.str();
  if (code != cli::kOk) std::cerr << err.str();
  return code;
}

std::vector<std::size_t> iota(std::size_t n, std::size_t from = 0) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), from);
  return v;
}

double cosine(const Vector& a, const Vector& b) {
  double d = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    d += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return d / std::sqrt(na * nb);
}

Outcome infonce_oracle() {
  const auto start = Clock::now();
  Rng rng(2024);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t dim = 1 + rng.below(16);
    AnchorGroup g{testing::random_vector(rng, dim), testing::random_vector(rng, dim), {}};
    const std::size_t m = 1 + rng.below(8);
    for (std::size_t k = 0; k < m; ++k) g.negatives.push_back(testing::random_vector(rng, dim));
    const double tau = i % 2 ? 0.07 : 1.0;
    const double pos = std::exp(cosine(g.anchor, g.positive) / tau);
    double denom = pos;
    for (const auto& n : g.negatives) denom += std::exp(cosine(g.anchor, n) / tau);
    worst = std::max(worst, std::abs(info_nce(g, tau).loss + std::log(pos / denom)));
  }
  const double secs = seconds_since(start);
  return {worst < 1e-6 && secs < 10.0, "max abs error " + fmt(worst) + ", " + fmt(secs) + " s"};
}

Outcome gradient_check() {
  const auto start = Clock::now();
  testing::ToyTask task;
  auto params = task.backend->parameters();
  if (params.size() > 2000) return {false, std::to_string(params.size()) + " parameters"};
  const auto batch = task.batch(iota(8, 40));
  TrainConfig cfg;
  cfg.loss.batch_weight = cfg.loss.prompt_weight = 0.5;
  cfg.loss.temperature = 0.07;
  const auto grad = evaluate_objective(*task.backend, batch, task.context(), cfg).gradient;
  std::size_t good = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + 1e-4;
    const double up = evaluate_objective(*task.backend, batch, task.context(), cfg).losses.total;
    params[i] = saved - 1e-4;
    const double down = evaluate_objective(*task.backend, batch, task.context(), cfg).losses.total;
    params[i] = saved;
    if (testing::relative_error(grad[i], (up - down) / 2e-4) < 1e-4) ++good;
  }
  const double frac = static_cast<double>(good) / params.size();
  const double secs = seconds_since(start);
  return {frac >= 0.99 && secs < 60.0, fmt(100.0 * frac, 5) + "% of " +
                                           std::to_string(params.size()) +
                                           " coordinates within 1e-4, " + fmt(secs) + " s"};
}

Outcome ce_reduction() {
  const testing::ToyTask task(400);
  const auto split = make_kshot(task.dataset, 16, 13);
  TrainConfig joint;
  joint.learning_rate = 0.5;
  joint.max_steps = 100;
  joint.eval_every = 0;
  joint.seed = 13;
  joint.loss.batch_weight = joint.loss.prompt_weight = 0.0;
  TrainConfig prompt_only = joint;
  prompt_only.objective = Objective::kPromptOnly;
  const auto a = train_run(task.backend->clone(), split, task.context(), joint);
  const auto b = train_run(task.backend->clone(), split, task.context(), prompt_only);
  if (a.metrics.steps.size() != 100 || b.metrics.steps.size() != 100)
    return {false, "expected 100 steps per run"};
  double worst = 0.0;
  for (std::size_t i = 0; i < 100; ++i)
    worst = std::max(worst, std::abs(a.metrics.steps[i].total - b.metrics.steps[i].total));
  return {worst <= 1e-7, "max per-step loss difference " + fmt(worst)};
}

Outcome sampler_invariants() {
  static const std::vector<std::string> words{"good", "bad", "film", "plot", "actor",
                                              "slow", "fun", "dull", "great", "awful"};
  const Template main = parse_template("{input} It is {mask}", "t0");
  HashSentenceEncoder enc;
  Rng rng(500);
  std::size_t failures = 0, usable = 0;
  for (int trial = 0; trial < 500; ++trial) {
    SamplingConfig cfg;
    cfg.strategy = trial % 2 ? SamplingStrategy::kLabelBased : SamplingStrategy::kSimBased;
    const std::size_t n = 2 + rng.below(14);
    const int labels = 2 + static_cast<int>(rng.below(3));
    std::vector<PromptedExample> batch;
    for (std::size_t i = 0; i < n; ++i) {
      std::string text;
      const std::size_t len = 1 + rng.below(4);
      for (std::size_t w = 0; w < len; ++w) text += (w ? " " : "") + words[rng.below(words.size())];
      batch.push_back(main.apply(text, static_cast<int>(rng.below(labels))));
    }
    const std::size_t qi = rng.below(n);
    const int ql = *batch[qi].label;
    const auto cs = build_batch_support(batch, qi);
    const auto set = sample_support(batch[qi], cs, enc, cfg, SupportLevel::kBatchLevel);

    bool ok = true;
    for (const auto& neg : set.negatives) ok &= neg.label != ql;
    if (set.usable()) {
      ++usable;
      ok &= set.positive.has_value();
      for (const auto& neg : set.negatives)
        ok &= !(neg.member == set.positive->member && neg.prompted.text == set.positive->prompted.text);
      if (cfg.strategy == SamplingStrategy::kLabelBased) ok &= set.positive->label == ql;
    }
    const auto filtered = rank_and_filter(batch[qi], cs, enc, cfg);
    ok &= filtered.size() == static_cast<std::size_t>(std::ceil(cs.size() / 2.0));

    auto shuffled = cs;
    rng.shuffle(std::span<SupportCandidate>(shuffled));
    const auto again = sample_support(batch[qi], shuffled, enc, cfg, SupportLevel::kBatchLevel);
    ok &= again.usable() == set.usable();
    ok &= again.positive.has_value() == set.positive.has_value();
    if (set.positive && again.positive)
      ok &= again.positive->prompted.text == set.positive->prompted.text &&
            again.positive->label == set.positive->label;
    ok &= again.negatives.size() == set.negatives.size();
    for (std::size_t i = 0; ok && i < set.negatives.size(); ++i)
      ok &= again.negatives[i].prompted.text == set.negatives[i].prompted.text;
    if (!ok) ++failures;
  }
  return {failures == 0, std::to_string(failures) + " of 500 batches violate an invariant (" +
                             std::to_string(usable) + " usable)"};
}

Outcome kshot_protocol() {
  const auto dir = scratch_dir("acceptance-split");
  testing::write_toy_task_dir(dir, separable_task(10000, 1), 100);
  const std::vector<std::string> args{"split", "--task", "toy", "--data-dir", dir.string(),
                                      "--k", "16", "--seeds", "13,21,42,87,100", "--out-dir",
                                      (dir / "out").string()};
  if (run_cli(args) != cli::kOk) return {false, "split failed"};
  const Dataset full = load_tsv(dir / "train.tsv", TaskKind::kSingleSentence);
  std::vector<std::string> first;
  std::set<std::vector<std::size_t>> distinct;
  bool exact = true;
  for (const auto seed : {13, 21, 42, 87, 100}) {
    const auto text = read_text(dir / "out" / "manifests" / ("k16-seed" + std::to_string(seed) + ".json"));
    first.push_back(text);
    const auto split = split_from_manifest(text, full);
    distinct.insert(split.train_indices);
    for (const Dataset* part : {&split.train, &split.dev}) {
      std::map<std::string, std::size_t> counts;
      for (const auto& e : part->examples()) ++counts[e.label];
      exact &= counts.size() == full.label_set().size();
      for (const auto& [label, n] : counts) exact &= n == 16;
    }
  }
  if (run_cli(args) != cli::kOk) return {false, "rerun failed"};
  bool identical = true;
  std::size_t i = 0;
  for (const auto seed : {13, 21, 42, 87, 100})
    identical &= read_text(dir / "out" / "manifests" / ("k16-seed" + std::to_string(seed) + ".json")) ==
                 first[i++];
  return {distinct.size() == 5 && exact && identical,
          std::to_string(distinct.size()) + " distinct splits, 16+16 per label " +
              (exact ? "yes" : "no") + ", rerun byte-identical " + (identical ? "yes" : "no")};
}

Outcome toy_learning() {
  const auto dir = scratch_dir("acceptance-toy");
  testing::write_toy_task_dir(dir, separable_task(2000, 1), 1000);
  const auto start = Clock::now();
  if (run_cli({"train", "--task", "toy", "--data-dir", dir.string(), "--out-dir",
               (dir / "run").string(), "--k", "16", "--strategy", "sim", "--max-steps", "200",
               "--eval-every", "50", "--jobs", "1"}) != cli::kOk)
    return {false, "train failed"};
  const double secs = seconds_since(start);
  const auto report = report_from_json(read_text(dir / "run" / "report.json"));

  std::istringstream metrics(read_text(dir / "run" / "metrics.jsonl"));
  std::string line;
  bool logged = true;
  std::size_t steps = 0, skipped = 0;
  while (std::getline(metrics, line)) {
    const auto j = nlohmann::json::parse(line);
    if (j["type"] != "step") continue;
    ++steps;
    logged &= j.contains("skipped_bc") && j.contains("skipped_pc");
    skipped += j.value("skipped_bc", 0u) + j.value("skipped_pc", 0u);
  }
  logged &= steps > 0;
  return {report.summary.mean >= 0.90 && secs < 60.0 && logged,
          "test accuracy " + format_mean_std(report.summary) + " (min " +
              format_percent(report.summary.min) + "), " + fmt(secs) + " s, " +
              std::to_string(skipped) + " skipped anchors logged over " + std::to_string(steps) +
              " steps"};
}

Outcome ratio_sweep() {
  const auto dir = scratch_dir("acceptance-ratio");
  testing::write_toy_task_dir(dir, separable_task(2000, 1), 1000);
  std::string table;
  if (run_cli({"sweep-ratio", "--values", "0.1,0.5,1,20", "--task", "toy", "--data-dir",
               dir.string(), "--out-dir", (dir / "sweep").string(), "--max-steps", "200",
               "--eval-every", "50"},
              &table) != cli::kOk)
    return {false, "sweep-ratio failed"};
  const auto j = nlohmann::json::parse(read_text(dir / "sweep" / "table.json"));
  const auto header = table.substr(0, table.find('\n'));
  bool ok = j["rows"].size() == 4;
  for (const char* col : {"Average", "Variance", "Median"})
    ok &= header.find(col) != std::string::npos;
  for (const auto& row : j["rows"]) {
    const std::string name = "ta-" + [&] {
      std::ostringstream s;
      s << row["t,a"].get<double>();
      return s.str();
    }();
    const auto report = report_from_json(read_text(dir / "sweep" / "runs" / name / "report.json"));
    const auto accs = report.test_accuracies();
    const auto [lo, hi] = std::minmax_element(accs.begin(), accs.end());
    const double median = row["Median"].get<double>();
    ok &= !accs.empty() && median >= *lo && median <= *hi;
  }
  return {ok, std::to_string(j["rows"].size()) + " rows, medians within per-seed range " +
                  (ok ? "yes" : "no")};
}

Outcome kshot_sweep() {
  const auto dir = scratch_dir("acceptance-kshot");
  const auto train = coverage_task(2000, 1);
  auto test = coverage_task(1000, 2);
  fs::create_directories(dir);
  testing::write_text(dir / "train.tsv", to_tsv(make_toy_corpus(train)));
  testing::write_text(dir / "test.tsv", to_tsv(make_toy_corpus(test)));
  testing::write_text(dir / "templates.tsv", toy_templates());
  testing::write_text(dir / "verbalizer.tsv", toy_verbalizer(train));
  std::string table;
  if (run_cli({"sweep-kshot", "--k-values", "8,16,32", "--task", "toy", "--data-dir",
               dir.string(), "--out-dir", (dir / "sweep").string(), "--max-steps", "200",
               "--eval-every", "50"},
              &table) != cli::kOk)
    return {false, "sweep-kshot failed"};
  const auto j = nlohmann::json::parse(read_text(dir / "sweep" / "table.json"));
  if (j["rows"].size() != 3) return {false, "expected 3 rows"};
  bool monotone = true;
  std::string detail;
  for (const char* strategy : {"sim", "label"}) {
    detail += std::string(detail.empty() ? "" : "; ") + strategy + ":";
    double prev = -1.0;
    for (const auto& row : j["rows"]) {
      const double mean = row[strategy]["mean"].get<double>();
      monotone &= mean >= prev;
      prev = mean;
      detail += " " + format_percent(mean);
    }
  }
  return {monotone, "mean accuracy by K=8,16,32 " + detail};
}

Outcome softmax_checks() {
  Rng rng(10000);
  std::size_t sum_fail = 0, argmax_fail = 0;
  for (int i = 0; i < 10000; ++i) {
    const std::size_t n = 2 + rng.below(9);
    const auto logits = testing::random_vector(rng, n, -30.0, 30.0);
    const auto p = class_probs(logits);
    if (std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0) > 1e-6) ++sum_fail;
    const double shift = rng.uniform(-100.0, 100.0);
    auto shifted = logits;
    for (double& x : shifted) x += shift;
    const auto q = class_probs(shifted);
    if (std::max_element(p.begin(), p.end()) - p.begin() !=
        std::max_element(q.begin(), q.end()) - q.begin())
      ++argmax_fail;
  }
  return {sum_fail == 0 && argmax_fail == 0,
          std::to_string(sum_fail) + " sum failures, " + std::to_string(argmax_fail) +
              " argmax failures over 10000 vectors"};
}

Outcome template_fixture() {
  const auto p = parse_template("{input} It is {mask}", "t0").apply("great movie");
  const bool ok = p.text == "great movie It is [MASK]" && p.mask_span == CharSpan{18, 24} &&
                  p.text.substr(p.mask_span.begin, p.mask_span.end - p.mask_span.begin) == "[MASK]";
  return {ok, "\"" + p.text + "\" mask [" + std::to_string(p.mask_span.begin) + ", " +
                  std::to_string(p.mask_span.end) + ")"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"InfoNCE oracle equivalence", infonce_oracle},
      {"joint-loss gradient vs finite differences", gradient_check},
      {"t=a=0 reduces to prompt-based fine-tuning", ce_reduction},
      {"sampler invariants", sampler_invariants},
      {"K-shot split protocol", kshot_protocol},
      {"end-to-end toy learning", toy_learning},
      {"ratio sweep table", ratio_sweep},
      {"K-shot sweep table", kshot_sweep},
      {"softmax and verbalizer checks", softmax_checks},
      {"template byte-exactness", template_fixture},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << i + 1 << "] " << criteria[i].first
              << ": " << o.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
