// SPDX-License-Identifier: Apache-2.0
#include "locun/evaluation/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>
#include <tuple>

#include <boost/math/distributions/students_t.hpp>

#include "locun/error.hpp"

namespace locun::eval {

using nlohmann::json;

double metric_value(const MetricsReport& r, const std::string& metric) {
  if (metric == "forget") return r.forget_acc;
  if (metric == "retain") return r.retain_acc;
  if (metric == "test") return r.test_acc;
  if (metric == "mia") return r.mia_correctness.score;
  if (metric == "mia_confidence") return r.mia_confidence.score;
  throw ConfigError("unknown metric '" + metric + "'");
}

namespace {

json mia_json(const MIAResult& m) {
  return {{"feature", to_string(m.feature_kind)},
          {"tn", m.tn},
          {"forget_size", m.forget_size},
          {"score", m.score},
          {"attacker_train_acc", m.attacker_train_acc},
          {"warnings", m.warnings}};
}

MIAResult mia_from_json(const json& j) {
  MIAResult m;
  m.feature_kind = j.at("feature").get<std::string>() == "confidence" ? MiaFeature::confidence : MiaFeature::correctness;
  m.tn = j.at("tn").get<std::size_t>();
  m.forget_size = j.at("forget_size").get<std::size_t>();
  m.score = j.at("score").get<double>();
  m.attacker_train_acc = j.at("attacker_train_acc").get<double>();
  m.warnings = j.at("warnings").get<std::vector<std::string>>();
  return m;
}

}  // namespace

json to_json(const MetricsReport& r) {
  return {{"run_id", r.run_id},
          {"seed", r.seed},
          {"forget_acc", r.forget_acc},
          {"retain_acc", r.retain_acc},
          {"test_acc", r.test_acc},
          {"mia", mia_json(r.mia_correctness)},
          {"mia_confidence", mia_json(r.mia_confidence)}};
}

MetricsReport metrics_from_json(const json& j) {
  try {
    MetricsReport r;
    r.run_id = j.at("run_id").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.forget_acc = j.at("forget_acc").get<double>();
    r.retain_acc = j.at("retain_acc").get<double>();
    r.test_acc = j.at("test_acc").get<double>();
    r.mia_correctness = mia_from_json(j.at("mia"));
    r.mia_confidence = mia_from_json(j.at("mia_confidence"));
    return r;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("metrics report: ") + e.what());
  }
}

Interval mean_ci95(std::span<const double> v) {
  if (v.empty()) throw ValidationError("mean_ci95 of no values");
  Interval out;
  out.n = v.size();
  const double n = static_cast<double>(v.size());
  // Shifted by the first value so identical inputs give an exact mean and zero spread.
  double shift = 0.0;
  for (double x : v) shift += x - v[0];
  out.mean = v[0] + shift / n;
  if (v.size() == 1) return out;
  double ss = 0.0;
  for (double x : v) ss += (x - out.mean) * (x - out.mean);
  const double se = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  const double q = v.size() >= 30 ? 1.959963984540054
                                  : boost::math::quantile(boost::math::students_t(n - 1.0), 0.975);
  out.half_width = q * se;
  return out;
}

DeltaReport delta_report(const std::vector<MetricsReport>& oracle, const std::vector<MetricsReport>& unlearned) {
  std::map<std::uint64_t, const MetricsReport*> by_seed;
  for (const MetricsReport& r : oracle) {
    if (!by_seed.emplace(r.seed, &r).second) throw ValidationError("duplicate oracle seed " + std::to_string(r.seed));
  }
  if (unlearned.size() != oracle.size()) throw ValidationError("oracle and unlearned report counts differ");
  std::vector<const MetricsReport*> runs;
  for (const MetricsReport& r : unlearned) runs.push_back(&r);
  std::sort(runs.begin(), runs.end(), [](auto* a, auto* b) { return a->seed < b->seed; });

  DeltaReport d;
  for (const MetricsReport* u : runs) {
    auto it = by_seed.find(u->seed);
    if (it == by_seed.end()) throw ValidationError("no oracle report for seed " + std::to_string(u->seed));
    if (!d.seeds.empty() && d.seeds.back() == u->seed) {
      throw ValidationError("duplicate unlearned seed " + std::to_string(u->seed));
    }
    d.seeds.push_back(u->seed);
    for (const char* m : kMetrics) d.per_seed[m].push_back(100.0 * (metric_value(*it->second, m) - metric_value(*u, m)));
  }
  for (const auto& [m, values] : d.per_seed) d.summary[m] = mean_ci95(values);
  return d;
}

std::vector<SummaryRow> aggregate_runs(std::vector<RunRecord> records) {
  auto key = [](const RunRecord& r) { return std::tie(r.strategy, r.algorithm, r.alpha, r.seed); };
  std::sort(records.begin(), records.end(), [&](const RunRecord& a, const RunRecord& b) { return key(a) < key(b); });
  for (std::size_t i = 1; i < records.size(); ++i) {
    if (key(records[i]) == key(records[i - 1])) {
      throw ValidationError("duplicate run record for " + records[i].strategy + "/" + records[i].algorithm + " seed " +
                            std::to_string(records[i].seed));
    }
  }

  std::vector<SummaryRow> rows;
  std::size_t begin = 0;
  while (begin < records.size()) {
    std::size_t end = begin;
    const RunRecord& head = records[begin];
    while (end < records.size() && records[end].strategy == head.strategy && records[end].algorithm == head.algorithm &&
           records[end].alpha == head.alpha) {
      ++end;
    }
    std::vector<std::string> metrics;
    for (const char* m : kMetrics) metrics.emplace_back(m);
    std::set<std::string> extra;
    for (std::size_t i = begin; i < end; ++i)
      for (const auto& [m, _] : records[i].deltas)
        if (std::find(metrics.begin(), metrics.end(), m) == metrics.end()) extra.insert(m);
    metrics.insert(metrics.end(), extra.begin(), extra.end());

    for (const std::string& m : metrics) {
      std::vector<double> values;
      for (std::size_t i = begin; i < end; ++i) {
        auto it = records[i].deltas.find(m);
        if (it != records[i].deltas.end()) values.push_back(it->second);
      }
      if (values.empty()) continue;
      rows.push_back({head.strategy, head.algorithm, head.alpha, m, mean_ci95(values)});
    }
    begin = end;
  }
  return rows;
}

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  std::string s = buf;
  if (s == "-0.000000") s = "0.000000";
  return s;
}

namespace {

std::string format_alpha(double a) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", a);
  return buf;
}

}  // namespace

std::string summary_csv(std::span<const SummaryRow> rows) {
  std::ostringstream out;
  out << "strategy,algorithm,alpha,metric,mean,ci95,n\n";
  for (const SummaryRow& r : rows) {
    out << r.strategy << ',' << r.algorithm << ',' << format_alpha(r.alpha) << ',' << r.metric << ','
        << format_number(r.stats.mean) << ',' << (r.stats.half_width ? format_number(*r.stats.half_width) : "n/a") << ','
        << r.stats.n << '\n';
  }
  return out.str();
}

json summary_json(std::span<const SummaryRow> rows) {
  json arr = json::array();
  for (const SummaryRow& r : rows) {
    arr.push_back({{"strategy", r.strategy},
                   {"algorithm", r.algorithm},
                   {"alpha", r.alpha},
                   {"metric", r.metric},
                   {"mean", r.stats.mean},
                   {"ci95", r.stats.half_width ? json(*r.stats.half_width) : json(nullptr)},
                   {"n", r.stats.n}});
  }
  return arr;
}

}  // namespace locun::eval
