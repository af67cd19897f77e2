// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "locun/evaluation/mia.hpp"

namespace locun::eval {

struct MetricsReport {
  std::string run_id;
  std::uint64_t seed = 0;
  double forget_acc = 0.0;
  double retain_acc = 0.0;
  double test_acc = 0.0;
  MIAResult mia_correctness;
  MIAResult mia_confidence;
};

/// Metric names in report order. "mia" is the correctness-based score.
inline constexpr std::array<const char*, 5> kMetrics = {"forget", "retain", "test", "mia", "mia_confidence"};

double metric_value(const MetricsReport& r, const std::string& metric);

nlohmann::json to_json(const MetricsReport& r);
MetricsReport metrics_from_json(const nlohmann::json& j);

struct Interval {
  double mean = 0.0;
  std::optional<double> half_width;  // absent when n = 1
  std::size_t n = 0;
};

/// Mean and 95% half-width of the mean: Student-t with n - 1 degrees of
/// freedom below 30 samples, normal quantile from 30 on.
Interval mean_ci95(std::span<const double> values);

struct DeltaReport {
  std::vector<std::uint64_t> seeds;                         // ascending
  std::map<std::string, std::vector<double>> per_seed;      // metric -> delta per seed
  std::map<std::string, Interval> summary;                  // metric -> mean and CI
};

/// delta = 100 * (oracle - unlearned) per metric, paired by seed.
DeltaReport delta_report(const std::vector<MetricsReport>& oracle, const std::vector<MetricsReport>& unlearned);

/// Per-seed deltas of one (strategy, algorithm, alpha) cell.
struct RunRecord {
  std::string strategy;
  std::string algorithm;
  double alpha = 0.0;
  std::uint64_t seed = 0;
  std::map<std::string, double> deltas;
};

struct SummaryRow {
  std::string strategy;
  std::string algorithm;
  double alpha = 0.0;
  std::string metric;
  Interval stats;
};

/// Groups by (strategy, algorithm, alpha) and summarizes each metric over
/// seeds. Output order is (strategy, algorithm, alpha, metric order) and
/// does not depend on input order.
std::vector<SummaryRow> aggregate_runs(std::vector<RunRecord> records);

/// Columns: strategy,algorithm,alpha,metric,mean,ci95,n
std::string summary_csv(std::span<const SummaryRow> rows);
nlohmann::json summary_json(std::span<const SummaryRow> rows);

/// Fixed formatting shared by every metric file.
std::string format_number(double v);

}  // namespace locun::eval
