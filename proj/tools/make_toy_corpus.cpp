// Writes a synthetic task directory (train.tsv, test.tsv, templates.tsv,
// verbalizer.tsv) usable with every consprompt command.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "consprompt/synthetic.hpp"

namespace fs = std::filesystem;

namespace {

void write(const fs::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << body;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generate a synthetic K-shot toy task"};
  std::string out_dir;
  std::string kind = "separable";
  std::size_t train_size = 2000;
  std::size_t test_size = 1000;
  std::uint64_t seed = 1;
  app.add_option("--out-dir", out_dir, "Destination directory")->required();
  app.add_option("--kind", kind, "separable or coverage")
      ->check(CLI::IsMember({"separable", "coverage"}));
  app.add_option("--train-size", train_size, "Rows in train.tsv");
  app.add_option("--test-size", test_size, "Rows in test.tsv");
  app.add_option("--seed", seed, "Generator seed");
  CLI11_PARSE(app, argc, argv);

  try {
    auto make = kind == "separable" ? consprompt::separable_task : consprompt::coverage_task;
    const auto train_opts = make(train_size, seed);
    const auto test_opts = make(test_size, seed + 1);
    fs::create_directories(out_dir);
    write(fs::path(out_dir) / "train.tsv", consprompt::to_tsv(consprompt::make_toy_corpus(train_opts)));
    write(fs::path(out_dir) / "test.tsv", consprompt::to_tsv(consprompt::make_toy_corpus(test_opts)));
    write(fs::path(out_dir) / "templates.tsv", consprompt::toy_templates());
    write(fs::path(out_dir) / "verbalizer.tsv", consprompt::toy_verbalizer(train_opts));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
