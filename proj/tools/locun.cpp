// SPDX-License-Identifier: Apache-2.0
// locun: train, unlearn, evaluate, sweep and compare from one config file.
#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "locun/error.hpp"
#include "locun/harness/config.hpp"
#include "locun/harness/runner.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct CommonFlags {
  std::string config;
  std::vector<std::uint64_t> seeds;
  std::size_t workers = 1;
  bool dry_run = false;
  bool resume = false;
  std::string out;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool with_resume) {
  cmd->add_option("--config", f.config, "Experiment config (JSON)")->required();
  cmd->add_option("--seed-override", f.seeds, "Replace the config's seed list");
  cmd->add_option("--workers", f.workers, "Parallel runs")->check(CLI::PositiveNumber);
  cmd->add_flag("--dry-run", f.dry_run, "Print the run matrix and exit");
  if (with_resume) cmd->add_flag("--resume", f.resume, "Skip runs whose manifest already exists");
  cmd->add_option("--out", f.out, "Output root (default: config output_dir, $LOCUN_OUTPUT_ROOT, ./outputs)");
}

locun::harness::Experiment open(const CommonFlags& f) {
  locun::harness::ExperimentConfig cfg = locun::harness::load_config(f.config);
  if (!f.seeds.empty()) {
    cfg.seeds = f.seeds;
    cfg.validate();
  }
  locun::harness::RunOptions opts;
  opts.output_root = locun::harness::resolve_output_root(f.out.empty() ? std::nullopt : std::optional(f.out), cfg);
  opts.workers = f.workers;
  opts.dry_run = f.dry_run;
  opts.resume = f.resume;
  opts.log = &std::cout;
  return locun::harness::Experiment(std::move(cfg), opts);
}

void report_stats(const locun::harness::Experiment& e) {
  const auto s = e.last_stats();
  std::cout << "output " << e.layout().base().string() << ": " << s.executed << " run(s) executed, " << s.skipped
            << " skipped\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Localized unlearning experiments"};
  app.require_subcommand(1);

  CommonFlags train_f, unlearn_f, eval_f, sweep_f;
  auto* train = app.add_subcommand("train", "Train original and oracle models for every seed");
  add_common(train, train_f, true);
  auto* unlearn = app.add_subcommand("unlearn", "Build masks and run every strategy x alpha x algorithm x seed");
  add_common(unlearn, unlearn_f, true);
  auto* evaluate = app.add_subcommand("evaluate", "Score unlearned models against the oracle and write summaries");
  add_common(evaluate, eval_f, false);
  auto* sweep = app.add_subcommand("sweep", "Select learning rates on the validation seed, then run the full grid");
  add_common(sweep, sweep_f, true);

  std::string csv_a, csv_b;
  auto* compare = app.add_subcommand("compare", "Diff the means of two summary CSVs");
  compare->add_option("a", csv_a, "First summary.csv")->required()->check(CLI::ExistingFile);
  compare->add_option("b", csv_b, "Second summary.csv")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*train) {
      auto e = open(train_f);
      e.train();
      report_stats(e);
    } else if (*unlearn) {
      auto e = open(unlearn_f);
      e.unlearn();
      report_stats(e);
    } else if (*evaluate) {
      auto e = open(eval_f);
      e.evaluate();
      report_stats(e);
    } else if (*sweep) {
      auto e = open(sweep_f);
      e.sweep();
      report_stats(e);
    } else if (*compare) {
      std::cout << locun::harness::format_comparison(locun::harness::compare_summaries(
          locun::harness::read_file(csv_a), locun::harness::read_file(csv_b)));
    }
  } catch (const locun::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
