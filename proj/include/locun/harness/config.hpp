// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "locun/data/io.hpp"
#include "locun/data/split.hpp"
#include "locun/localization/criticality.hpp"
#include "locun/localization/critmem.hpp"
#include "locun/nn/model.hpp"
#include "locun/unlearning/unlearn.hpp"

namespace locun::harness {

inline constexpr int kSchemaVersion = 1;

enum class DatasetKind { synthetic, idx, csv };

struct DatasetConfig {
  DatasetKind kind = DatasetKind::synthetic;
  data::SyntheticSpec synthetic;
  // idx
  std::string train_images, train_labels, test_images, test_labels;
  // csv: one file, split into train and test
  std::string csv_path;
  double test_fraction = 0.2;
  std::uint64_t split_seed = 0;
  // idx and csv
  std::size_t classes = 0;
  std::optional<nn::Shape> shape;

  friend bool operator==(const DatasetConfig&, const DatasetConfig&) = default;
};

struct TrainConfig {
  std::size_t epochs = 20;
  double lr = 0.1;
  std::size_t batch_size = 128;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  double eta_min_frac = 0.01;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Unset fields fall back to unlearn::oracle_config of the training recipe.
struct OracleConfig {
  std::optional<std::size_t> epochs;
  std::optional<double> lr;

  friend bool operator==(const OracleConfig&, const OracleConfig&) = default;
};

struct ForgetConfig {
  data::ForgetKind kind = data::ForgetKind::iid;
  double fraction = 0.1;
  std::vector<int> classes;

  friend bool operator==(const ForgetConfig&, const ForgetConfig&) = default;
};

enum class StrategyKind { del, salloc, deepest, shallowest, critmem, criterion, random, full };

const char* to_string(StrategyKind k) noexcept;
StrategyKind strategy_kind_from_string(const std::string& name);

struct StrategyConfig {
  std::string id;  // output directory name; unique within a config
  StrategyKind kind = StrategyKind::del;
  std::vector<double> alphas;
  std::size_t h = 10;
  // criterion
  loc::Criterion criterion = loc::Criterion::weighted_grad_forget;
  loc::Granularity granularity = loc::Granularity::channel;
  // random: id of a non-random strategy whose per-layer counts are matched
  std::string reference;
  loc::RandomGranularity random_granularity = loc::RandomGranularity::channel;
  // critmem: per-example reset bound; default_critmem_bound when unset
  std::optional<std::size_t> critmem_bound;

  friend bool operator==(const StrategyConfig&, const StrategyConfig&) = default;
};

struct AlgorithmConfig {
  unlearn::Algorithm algorithm = unlearn::Algorithm::rft;
  std::size_t epochs = 5;
  double lr = 0.01;
  /// Learning rates tried by the sweep on the validation seed; empty means {lr}.
  std::vector<double> lr_candidates;
  std::size_t batch_size = 128;
  double momentum = 0.9;
  double weight_decay = 0.0;
  double l1_lambda = 0.0;
  double beta = 0.95;

  friend bool operator==(const AlgorithmConfig&, const AlgorithmConfig&) = default;
};

struct ExperimentConfig {
  int schema_version = kSchemaVersion;
  std::string name;
  DatasetConfig dataset;
  nn::ArchSpec arch;
  TrainConfig train;
  OracleConfig oracle;
  ForgetConfig forget;
  std::vector<StrategyConfig> strategies;
  std::vector<AlgorithmConfig> algorithms;
  std::vector<std::uint64_t> seeds;
  std::uint64_t validation_seed = 1000;
  /// Adds an oracle-versus-itself row to the summary.
  bool include_oracle_row = false;
  std::string output_dir;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;

  /// Throws ConfigError on any inconsistency; runs before any compute.
  void validate() const;

  const StrategyConfig& strategy(const std::string& id) const;
  unlearn::UnlearnConfig train_recipe(std::uint64_t seed) const;
  unlearn::UnlearnConfig oracle_recipe(std::uint64_t seed) const;
  /// Recipe for one grid cell; the mask is filled in by the caller.
  unlearn::UnlearnConfig unlearn_recipe(const AlgorithmConfig& a, double lr, std::uint64_t seed) const;
};

/// Strict parse: unknown keys, wrong types and a missing or unsupported
/// schema_version are ConfigErrors. Calls validate().
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Canonical form with every default written out.
nlohmann::json to_json(const ExperimentConfig& c);

/// SHA-256 of the canonical form without seeds and output_dir, first 16 hex digits.
std::string config_hash(const ExperimentConfig& c);

/// Shortest decimal text that round-trips (used in directory names).
std::string alpha_label(double alpha);

}  // namespace locun::harness
