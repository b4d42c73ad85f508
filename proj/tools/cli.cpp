#include "cli.hpp"

#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "consprompt/errors.hpp"
#include "consprompt/reference_backend.hpp"
#include "consprompt/report.hpp"
#include "consprompt/run_config.hpp"
#include "consprompt/sentence_encoder.hpp"
#include "consprompt/trainer.hpp"

namespace consprompt::cli {
namespace {

namespace fs = std::filesystem;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

/// Writes through a temporary file and renames it into place.
void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out << content;
    if (!out) throw DataError("failed writing " + tmp.string());
  }
  fs::rename(tmp, path);
}

fs::path default_out_dir(const std::string& command, const std::string& task) {
  const char* root = std::getenv(kOutputRootEnv);
  return fs::path(root && *root ? root : "runs") / (command + "-" + task);
}

std::string manifest_name(std::size_t k, std::uint64_t seed) {
  return "k" + std::to_string(k) + "-seed" + std::to_string(seed) + ".json";
}

struct LoadedTask {
  std::shared_ptr<const Dataset> train;
  std::shared_ptr<const Dataset> test;
  TaskResources resources;
};

std::shared_ptr<const Dataset> load_train(const RunConfig& cfg) {
  const auto kind = task_kind_for(cfg.task);
  return std::make_shared<const Dataset>(
      load_tsv(fs::path(cfg.data_dir) / "train.tsv", kind));
}

std::shared_ptr<const Dataset> load_test(const RunConfig& cfg, const Dataset& train) {
  const fs::path path = fs::path(cfg.data_dir) / "test.tsv";
  if (!fs::exists(path)) return nullptr;
  const Dataset raw = load_tsv(path, train.kind());
  return std::make_shared<const Dataset>(
      Dataset(train.kind(), raw.examples(), train.label_set()));
}

LoadedTask load_task(const RunConfig& cfg) {
  LoadedTask t;
  t.train = load_train(cfg);
  t.test = load_test(cfg, *t.train);
  t.resources.templates = load_template_set(cfg.templates_path());
  t.resources.label_words = load_verbalizer_file(cfg.verbalizer_path());
  t.resources.encoder =
      std::make_shared<HashSentenceEncoder>(cfg.encoder_seed, cfg.encoder_dim);
  return t;
}

/// Persists manifests, metrics, and checkpoints of one run directory.
class RunDirectoryWriter final : public ExperimentObserver {
 public:
  RunDirectoryWriter(fs::path dir, const Dataset& source, std::string source_name)
      : dir_(std::move(dir)), source_(source), source_name_(std::move(source_name)) {
    metrics_.open(dir_ / "metrics.jsonl", std::ios::binary | std::ios::trunc);
    if (!metrics_) throw DataError("cannot write " + (dir_ / "metrics.jsonl").string());
    sink_.out = &metrics_;
  }

  MetricsSink* sink_for(std::uint64_t seed, std::size_t grid) override {
    sink_.seed = seed;
    sink_.grid = grid;
    return &sink_;
  }

  void on_split(const KShotSplit& split) override {
    write_file(dir_ / "manifests" / manifest_name(split.k, split.seed),
               split_manifest(split, source_, source_name_));
  }

  void on_seed_done(const SeedResult& result, const MaskedLMBackend& best) override {
    metrics_ << seed_record(result) << '\n';
    metrics_.flush();
    if (const auto* ref = dynamic_cast<const ReferenceBackend*>(&best))
      write_file(dir_ / "checkpoints" / ("seed-" + std::to_string(result.seed) + ".json"),
                 ref->to_checkpoint());
  }

 private:
  struct Sink final : MetricsSink {
    std::ofstream* out = nullptr;
    std::uint64_t seed = 0;
    std::size_t grid = 0;
    void on_step(const StepLosses& l) override { *out << step_record(l, seed, grid) << '\n'; }
    void on_eval(const EvalRecord& e) override {
      *out << eval_record(e, seed, grid) << '\n';
      out->flush();
    }
  };

  fs::path dir_;
  const Dataset& source_;
  std::string source_name_;
  std::ofstream metrics_;
  Sink sink_;
};

/// Runs one experiment into `dir`: config.json, manifests/, metrics.jsonl,
/// checkpoints/, report.json, report.txt.
ExperimentReport execute_run(const RunConfig& cfg, const fs::path& dir) {
  cfg.validate();
  fs::create_directories(dir);
  write_file(dir / "config.json", cfg.to_json());
  const LoadedTask task = load_task(cfg);
  ExperimentReport report;
  {
    RunDirectoryWriter writer(dir, *task.train,
                              (fs::path(cfg.data_dir) / "train.tsv").string());
    report = run_experiment(*task.train, task.test, cfg.to_spec(), task.resources, &writer);
  }
  write_file(dir / "report.json", report_to_json(report));
  write_file(dir / "report.txt", render_run_report(report));
  return report;
}

/// Runs `jobs` (each returning nothing) on up to `workers` threads. The
/// first failure, in job order, is rethrown after all threads finish.
void run_parallel(std::vector<std::function<void()>>& jobs, std::size_t workers) {
  std::vector<std::exception_ptr> errors(jobs.size());
  std::mutex m;
  std::size_t next = 0;
  auto worker = [&] {
    while (true) {
      std::size_t i;
      {
        std::lock_guard lock(m);
        if (next >= jobs.size()) return;
        i = next++;
      }
      try {
        jobs[i]();
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  workers = std::max<std::size_t>(1, std::min(workers, jobs.size()));
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::string weight_name(double w) {
  std::ostringstream s;
  s << w;
  return s.str();
}

// ---------------------------------------------------------------------------
// Flag plumbing

struct RunFlags {
  RunConfig cfg;
  std::string config_file;
  std::string out_dir;
  std::size_t jobs = 1;
  std::size_t max_negatives = 0;
  CLI::Option* max_negatives_opt = nullptr;
  std::vector<std::pair<CLI::Option*, std::function<void(RunConfig&, const RunConfig&)>>>
      bindings;

  template <typename T>
  CLI::Option* bind(CLI::App* app, const std::string& flag, T RunConfig::*field,
                    const std::string& help) {
    auto* opt = app->add_option(flag, cfg.*field, help);
    bindings.emplace_back(opt, [field](RunConfig& dst, const RunConfig& src) {
      dst.*field = src.*field;
    });
    return opt;
  }

  /// --config base (if any) overridden by every flag given explicitly.
  RunConfig resolve() const {
    RunConfig out = config_file.empty() ? RunConfig{} : RunConfig::from_json(read_file(config_file));
    for (const auto& [opt, apply] : bindings)
      if (opt->count() > 0) apply(out, cfg);
    if (max_negatives_opt && max_negatives_opt->count() > 0)
      out.max_negatives = max_negatives == 0 ? std::nullopt
                                             : std::optional<std::size_t>(max_negatives);
    return out;
  }
};

void add_data_flags(CLI::App* app, RunFlags& f) {
  f.bind(app, "--task", &RunConfig::task, "Task name (sst-2, sst-5, trec, snli, qnli, toy, ...)");
  f.bind(app, "--data-dir", &RunConfig::data_dir,
         "Directory holding train.tsv (and optionally test.tsv)");
  f.bind(app, "--k", &RunConfig::k, "Examples per label in each split");
  f.bind(app, "--seeds", &RunConfig::seeds, "Split seeds")->delimiter(',');
  app->add_option("--out-dir", f.out_dir,
                  std::string("Output directory (default: $") + kOutputRootEnv +
                      "/<command>-<task>)");
}

void add_run_flags(CLI::App* app, RunFlags& f) {
  add_data_flags(app, f);
  app->add_option("--config", f.config_file, "Base run config (JSON); flags override it")
      ->check(CLI::ExistingFile);
  f.bind(app, "--templates", &RunConfig::templates, "Template file");
  f.bind(app, "--verbalizer", &RunConfig::verbalizer, "Verbalizer file");
  f.bind(app, "--strategy", &RunConfig::strategy, "Sampling strategy: sim or label")
      ->check(CLI::IsMember({"sim", "label"}));
  f.bind(app, "--filtering-ratio", &RunConfig::filtering_ratio,
         "Fraction of the ranked support set kept");
  f.max_negatives_opt = app->add_option("--max-negatives", f.max_negatives,
                                        "Cap on negatives per anchor (0 = unbounded)");
  f.bind(app, "--temperature", &RunConfig::temperature, "InfoNCE temperature");
  f.bind(app, "--t", &RunConfig::t, "Weight of the batch-level contrastive loss");
  f.bind(app, "--a", &RunConfig::a, "Weight of the prompt-level contrastive loss");
  f.bind(app, "--denominator", &RunConfig::denominator, "with_positive or negatives_only")
      ->check(CLI::IsMember({"with_positive", "negatives_only"}));
  f.bind(app, "--objective", &RunConfig::objective, "joint or prompt_only")
      ->check(CLI::IsMember({"joint", "prompt_only"}));
  f.bind(app, "--lr", &RunConfig::learning_rates, "Learning-rate grid")->delimiter(',');
  f.bind(app, "--bs", &RunConfig::batch_sizes, "Batch-size grid")->delimiter(',');
  f.bind(app, "--max-steps", &RunConfig::max_steps, "Training steps per run");
  f.bind(app, "--eval-every", &RunConfig::eval_every, "Dev evaluation period");
  f.bind(app, "--max-grad-norm", &RunConfig::max_grad_norm, "Gradient clipping norm (0 disables)");
  f.bind(app, "--backend", &RunConfig::backend, "Masked LM backend");
  f.bind(app, "--backend-seed", &RunConfig::backend_seed, "Backend initialization seed");
  app->add_option("--jobs", f.jobs, "Parallel runs for sweeps")->check(CLI::PositiveNumber);
}

fs::path out_dir_for(const RunFlags& f, const RunConfig& cfg, const std::string& command) {
  return f.out_dir.empty() ? default_out_dir(command, cfg.task) : fs::path(f.out_dir);
}

// ---------------------------------------------------------------------------
// Commands

int cmd_split(const RunFlags& f, std::ostream& out) {
  const RunConfig cfg = f.resolve();
  if (cfg.k == 0) throw ConfigError("k must be positive");
  if (cfg.seeds.empty()) throw ConfigError("at least one seed is required");
  const auto train = load_train(cfg);
  const fs::path dir = out_dir_for(f, cfg, "split");
  const std::string source = (fs::path(cfg.data_dir) / "train.tsv").string();
  for (const auto seed : cfg.seeds) {
    const KShotSplit split = make_kshot(*train, cfg.k, seed);
    const fs::path path = dir / "manifests" / manifest_name(cfg.k, seed);
    write_file(path, split_manifest(split, *train, source));
    out << path.string() << "\n";
  }
  return kOk;
}

int cmd_train(const RunFlags& f, std::ostream& out) {
  const RunConfig cfg = f.resolve();
  const fs::path dir = out_dir_for(f, cfg, "train");
  const auto report = execute_run(cfg, dir);
  out << render_run_report(report);
  out << "run directory: " << dir.string() << "\n";
  return kOk;
}

int cmd_eval(const std::string& run_dir, const std::string& data_file, std::ostream& out) {
  const fs::path dir(run_dir);
  const RunConfig cfg = RunConfig::from_json(read_file(dir / "config.json"));
  const LoadedTask task = load_task(cfg);

  std::shared_ptr<const Dataset> eval_set = task.test;
  if (!data_file.empty()) {
    const Dataset raw = load_tsv(data_file, task.train->kind());
    eval_set = std::make_shared<const Dataset>(
        Dataset(raw.kind(), raw.examples(), task.train->label_set()));
  }

  std::vector<double> accs;
  for (const auto seed : cfg.seeds) {
    const auto backend = ReferenceBackend::from_checkpoint(
        read_file(dir / "checkpoints" / ("seed-" + std::to_string(seed) + ".json")));
    const Verbalizer verbalizer = Verbalizer::create(
        task.resources.label_words, task.train->label_set(), backend.vocabulary());
    std::shared_ptr<const Dataset> target = eval_set;
    if (!target) {
      const auto split = split_from_manifest(
          read_file(dir / "manifests" / manifest_name(cfg.k, seed)), *task.train);
      target = split.test;
    }
    const double acc =
        evaluate(backend, *target, task.resources.templates.front(), verbalizer);
    accs.push_back(acc);
    out << "seed " << seed << ": " << format_percent(acc) << "\n";
  }
  const Summary s = summarize(accs);
  out << "accuracy: " << format_mean_std(s) << "  median " << format_percent(s.median)
      << "\n";
  return kOk;
}

int cmd_sweep_ratio(const RunFlags& f, const std::vector<double>& values, std::ostream& out) {
  const RunConfig base = f.resolve();
  base.validate();
  if (values.empty()) throw ConfigError("--values must list at least one ratio");
  const fs::path dir = out_dir_for(f, base, "sweep-ratio");
  fs::create_directories(dir);
  write_file(dir / "config.json", base.to_json());

  std::vector<RatioRow> rows(values.size());
  std::vector<std::function<void()>> jobs;
  nlohmann::ordered_json index;
  index["kind"] = "ratio";
  index["rows"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::string name = "ta-" + weight_name(values[i]);
    index["rows"].push_back({{"weight", values[i]}, {"run", "runs/" + name}});
    jobs.emplace_back([&, i, name] {
      RunConfig cfg = base;
      cfg.t = cfg.a = values[i];
      const auto report = execute_run(cfg, dir / "runs" / name);
      rows[i] = {values[i], report.summary};
    });
  }
  write_file(dir / "sweep.json", index.dump(2) + "\n");
  run_parallel(jobs, f.jobs);

  write_file(dir / "table.txt", render_ratio_table(rows));
  write_file(dir / "table.json", ratio_table_json(rows));
  out << render_ratio_table(rows);
  return kOk;
}

int cmd_sweep_kshot(const RunFlags& f, const std::vector<std::size_t>& ks, std::ostream& out) {
  const RunConfig base = f.resolve();
  base.validate();
  if (ks.empty()) throw ConfigError("--k-values must list at least one K");
  const fs::path dir = out_dir_for(f, base, "sweep-kshot");

  // Fail fast, naming the K that exceeds the corpus.
  const auto train = load_train(base);
  for (const auto k : ks) {
    try {
      make_kshot(*train, k, base.seeds.front());
    } catch (const CapacityError& e) {
      throw CapacityError(e.label(), "K=" + std::to_string(k) + ": " + e.what());
    }
  }

  fs::create_directories(dir);
  write_file(dir / "config.json", base.to_json());
  std::vector<KShotRow> rows(ks.size());
  std::vector<std::function<void()>> jobs;
  nlohmann::ordered_json index;
  index["kind"] = "kshot";
  index["rows"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < ks.size(); ++i) {
    rows[i].k = ks[i];
    const std::string stem = "k" + std::to_string(ks[i]);
    index["rows"].push_back(
        {{"k", ks[i]}, {"sim", "runs/" + stem + "-sim"}, {"label", "runs/" + stem + "-label"}});
    for (const std::string strategy : {"sim", "label"}) {
      jobs.emplace_back([&, i, stem, strategy] {
        RunConfig cfg = base;
        cfg.k = ks[i];
        cfg.strategy = strategy;
        const auto report = execute_run(cfg, dir / "runs" / (stem + "-" + strategy));
        (strategy == "sim" ? rows[i].sim : rows[i].label) = report.summary;
      });
    }
  }
  write_file(dir / "sweep.json", index.dump(2) + "\n");
  run_parallel(jobs, f.jobs);

  write_file(dir / "table.txt", render_kshot_table(rows));
  write_file(dir / "table.json", kshot_table_json(rows));
  out << render_kshot_table(rows);
  return kOk;
}

Summary summary_of(const fs::path& run_dir) {
  return report_from_json(read_file(run_dir / "report.json")).summary;
}

int cmd_report(const std::string& run_dir, std::ostream& out) {
  const fs::path dir(run_dir);
  if (!fs::exists(dir / "sweep.json")) {
    out << render_run_report(report_from_json(read_file(dir / "report.json")));
    return kOk;
  }
  nlohmann::json index;
  try {
    index = nlohmann::json::parse(read_file(dir / "sweep.json"));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed sweep.json: ") + e.what());
  }
  const std::string kind = index.value("kind", "");
  if (kind == "ratio") {
    std::vector<RatioRow> rows;
    for (const auto& r : index.at("rows"))
      rows.push_back({r.at("weight").get<double>(),
                      summary_of(dir / r.at("run").get<std::string>())});
    out << render_ratio_table(rows);
  } else if (kind == "kshot") {
    std::vector<KShotRow> rows;
    for (const auto& r : index.at("rows"))
      rows.push_back({r.at("k").get<std::size_t>(),
                      summary_of(dir / r.at("sim").get<std::string>()),
                      summary_of(dir / r.at("label").get<std::string>())});
    out << render_kshot_table(rows);
  } else {
    throw DataError("unknown sweep kind '" + kind + "'");
  }
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Contrastive prompt-based fine-tuning for K-shot text classification"};
  app.require_subcommand(1);

  RunFlags split_flags, train_flags, ratio_flags, kshot_flags;
  auto* split = app.add_subcommand("split", "Write K-shot split manifests");
  add_data_flags(split, split_flags);

  auto* train = app.add_subcommand("train", "Train and evaluate over all seeds");
  add_run_flags(train, train_flags);

  std::string eval_dir, eval_data;
  auto* eval = app.add_subcommand("eval", "Re-evaluate the checkpoints of a run");
  eval->add_option("--run-dir", eval_dir, "Run directory written by train")->required();
  eval->add_option("--data-file", eval_data, "TSV to evaluate (default: the run's test set)");

  std::vector<double> ratio_values{0.1, 0.5, 1.0, 20.0};
  auto* ratio = app.add_subcommand("sweep-ratio", "Sweep t = a over a list of values");
  add_run_flags(ratio, ratio_flags);
  ratio->add_option("--values", ratio_values, "Values for t = a")->delimiter(',');

  std::vector<std::size_t> k_values{8, 16, 32, 64, 128, 160};
  auto* kshot = app.add_subcommand("sweep-kshot", "Sweep K for both sampling strategies");
  add_run_flags(kshot, kshot_flags);
  kshot->add_option("--k-values", k_values, "Values of K")->delimiter(',');

  std::string report_dir;
  auto* report = app.add_subcommand("report", "Rebuild tables from a run or sweep directory");
  report->add_option("--run-dir", report_dir, "Run or sweep directory")->required();

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  }

  try {
    if (split->parsed()) return cmd_split(split_flags, out);
    if (train->parsed()) return cmd_train(train_flags, out);
    if (eval->parsed()) return cmd_eval(eval_dir, eval_data, out);
    if (ratio->parsed()) return cmd_sweep_ratio(ratio_flags, ratio_values, out);
    if (kshot->parsed()) return cmd_sweep_kshot(kshot_flags, k_values, out);
    if (report->parsed()) return cmd_report(report_dir, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const TemplateSyntaxError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const VocabularyError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kNumericError;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kInternalError;
  }
  return kInternalError;
}

}  // namespace consprompt::cli
