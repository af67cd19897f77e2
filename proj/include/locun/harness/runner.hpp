// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "locun/data/dataset.hpp"
#include "locun/data/split.hpp"
#include "locun/evaluation/report.hpp"
#include "locun/harness/config.hpp"
#include "locun/nn/mask.hpp"
#include "locun/nn/model.hpp"

namespace locun::harness {

inline constexpr const char* kOutputRootEnv = "LOCUN_OUTPUT_ROOT";

/// --out, then the config's output_dir, then $LOCUN_OUTPUT_ROOT, then "outputs".
std::filesystem::path resolve_output_root(const std::optional<std::string>& cli_out, const ExperimentConfig& cfg);

/// Writes to "<path>.tmp" and renames over `path`, so readers never see a partial file.
void atomic_write(const std::filesystem::path& path, const std::string& contents);
std::string read_file(const std::filesystem::path& path);

/// SHA-256 of "blob <size>\0<bytes>", hex.
std::string content_hash(const std::string& bytes);
std::string file_content_hash(const std::filesystem::path& path);

/// Fixed directory layout under <root>/<config-hash>/.
class Layout {
 public:
  Layout(std::filesystem::path root, std::string hash) : base_(std::move(root) / std::move(hash)) {}

  const std::filesystem::path& base() const noexcept { return base_; }
  std::filesystem::path original(std::uint64_t seed) const;
  std::filesystem::path oracle(std::uint64_t seed) const;
  std::filesystem::path cell(const std::string& strategy, const std::string& algorithm, double alpha,
                             std::uint64_t seed) const;
  std::filesystem::path sweep_dir() const { return base_ / "sweep"; }
  std::filesystem::path sweep_trial(const std::string& strategy, const std::string& algorithm, double alpha, double lr,
                                    std::uint64_t seed) const;
  std::filesystem::path sweep_cell(const std::string& strategy, const std::string& algorithm, double alpha,
                                   std::uint64_t seed) const;

 private:
  std::filesystem::path base_;
};

// File names inside every run directory.
inline constexpr const char* kModelFile = "model.ckpt";
inline constexpr const char* kMaskFile = "mask.bin";
inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kMetricsFile = "metrics.json";
inline constexpr const char* kDeltaFile = "delta.json";
inline constexpr const char* kSummaryCsv = "summary.csv";
inline constexpr const char* kSummaryJson = "summary.json";
inline constexpr const char* kRunsCsv = "runs.csv";
inline constexpr const char* kSweepCsv = "sweep.csv";
inline constexpr const char* kSelectionCsv = "selection.csv";

struct RunOptions {
  std::filesystem::path output_root = "outputs";
  std::size_t workers = 1;
  bool dry_run = false;
  bool resume = false;
  std::ostream* log = nullptr;
};

/// One unlearning run of the grid.
struct Cell {
  std::string strategy;
  unlearn::Algorithm algorithm;
  double alpha = 0.0;
  std::uint64_t seed = 0;
};

/// Train and test sets plus every per-seed derived view.
struct SeedData {
  data::DatasetPtr train;
  data::DatasetPtr test;
  data::SplitSet split;
  data::DataView forget;
  data::DataView retain;
  data::DataView test_view;
  data::DataView calib_seen;
  std::vector<std::string> warnings;
};

data::TrainTest load_dataset(const DatasetConfig& cfg);
SeedData seed_data(const data::TrainTest& tt, const ForgetConfig& forget, std::uint64_t seed);

/// Mask for one strategy at one budget on the original model of `seed`.
Mask strategy_mask(const ExperimentConfig& cfg, const StrategyConfig& s, double alpha, const nn::Model& original,
                   const data::DataView& forget, std::uint64_t seed);

/// Forget, retain and test accuracy plus both MIA variants.
eval::MetricsReport measure(const nn::Model& model, const SeedData& d, const std::string& run_id, std::uint64_t seed);

/// |delta_forget| + |delta_test|, the learning-rate selection objective.
double selection_objective(const eval::MetricsReport& oracle, const eval::MetricsReport& unlearned);

struct SweepSelection {
  std::string strategy;
  std::string algorithm;
  double alpha = 0.0;
  double lr = 0.0;
  double objective = 0.0;
  bool chosen = false;
};

class Experiment {
 public:
  Experiment(ExperimentConfig cfg, RunOptions opts);

  const ExperimentConfig& config() const noexcept { return cfg_; }
  const std::string& hash() const noexcept { return hash_; }
  const Layout& layout() const noexcept { return layout_; }

  /// Strategy x alpha x algorithm x seed, in config order.
  std::vector<Cell> run_matrix() const;

  /// Original and oracle checkpoints for every seed.
  void train();
  void train_seeds(const std::vector<std::uint64_t>& seeds);
  /// Masks and unlearned checkpoints for every cell. Needs original checkpoints.
  void unlearn();
  /// Metrics, per-seed deltas and the summary tables. Needs oracle and unlearned checkpoints.
  std::vector<eval::SummaryRow> evaluate();
  /// Learning-rate selection on the validation seed, then the full grid with the
  /// chosen rates. Trains whatever checkpoints are missing. Rows sorted by alpha.
  std::vector<eval::SummaryRow> sweep();

  /// Builds the per-seed views on first use.
  const SeedData& data_for(std::uint64_t seed);

  /// Runs executed and skipped (resume) by the last command.
  struct Stats {
    std::size_t executed = 0;
    std::size_t skipped = 0;
  };
  Stats last_stats() const noexcept { return stats_; }

 private:
  void say(const std::string& line);
  void parallel(std::size_t n, const std::function<void(std::size_t)>& task);
  bool done(const std::filesystem::path& dir) const;

  void train_one(std::uint64_t seed, bool oracle);
  void unlearn_one(const Cell& c, double lr, const std::filesystem::path& dir);
  eval::MetricsReport metrics_for(const std::filesystem::path& dir, std::uint64_t seed, const std::string& run_id,
                                  const std::string& missing_hint);
  std::vector<eval::SummaryRow> evaluate_cells(const std::vector<Cell>& cells,
                                               const std::function<std::filesystem::path(const Cell&)>& dir_of,
                                               const std::filesystem::path& out_dir);
  void require_checkpoint(const std::filesystem::path& dir, const std::string& what, std::uint64_t seed) const;

  ExperimentConfig cfg_;
  RunOptions opts_;
  std::string hash_;
  Layout layout_;
  std::optional<data::TrainTest> dataset_;
  std::map<std::uint64_t, std::unique_ptr<SeedData>> seeds_;
  std::mutex log_mu_;
  std::mutex data_mu_;
  Stats stats_;
};

/// Row-by-row comparison of two summary CSVs keyed by (strategy, algorithm, alpha, metric).
struct CompareRow {
  std::string key;
  std::optional<double> a;
  std::optional<double> b;
};
std::vector<CompareRow> compare_summaries(const std::string& csv_a, const std::string& csv_b);
std::string format_comparison(const std::vector<CompareRow>& rows);

}  // namespace locun::harness
