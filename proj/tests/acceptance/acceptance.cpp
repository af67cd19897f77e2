// SPDX-License-Identifier: Apache-2.0
// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "locun/evaluation/mia.hpp"
#include "locun/evaluation/report.hpp"
#include "locun/harness/config.hpp"
#include "locun/harness/runner.hpp"
#include "locun/localization/criticality.hpp"
#include "locun/localization/critmem.hpp"
#include "locun/nn/checkpoint.hpp"
#include "locun/unlearning/unlearn.hpp"
#include "support/oracles.hpp"
#include "support/test_models.hpp"

namespace {

namespace fs = std::filesystem;
using namespace locun;
using Clock = std::chrono::steady_clock;
using testing::dense;
using testing::make_view;
using testing::relu;

struct Verdict {
  bool pass = true;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

bool same_bits(float a, float b) { return std::bit_cast<std::uint32_t>(a) == std::bit_cast<std::uint32_t>(b); }

bool bytes_equal(const nn::Model& a, const nn::Model& b) {
  if (a.num_params() != b.num_params()) return false;
  for (std::size_t j = 0; j < a.num_params(); ++j)
    if (!same_bits(a.params()[j], b.params()[j])) return false;
  return true;
}

data::DataView view_of(const nn::Model& m, const nn::LabeledBatch& b) {
  return make_view(m.input_shape(), m.num_classes(), b.features, b.labels);
}

Verdict gradient_oracle() {
  const auto t0 = Clock::now();
  Rng rng(20240601);
  std::size_t models = 0, coords = 0, skipped_kinks = 0;
  double worst = 0.0;
  while (models < 25) {
    const nn::Model m = testing::random_small_model(rng);
    if (m.num_params() > 500 || m.parameterized_layers().size() > 3) continue;
    const nn::LabeledBatch b = testing::random_batch(m, rng, 4);
    // A central difference straddling a ReLU kink is not a derivative estimate.
    if (nn::min_relu_margin(m, b.features, b.size) < 1e-2) {
      ++skipped_kinks;
      continue;
    }
    const nn::LossOptions opts{models % 2 ? nn::LossKind::squared : nn::LossKind::cross_entropy, 0.0, false};
    const nn::LossAndGrads r = nn::loss_and_grads(m, b, opts);
    for (std::size_t j = 0; j < m.num_params(); ++j) {
      worst = std::max(worst, testing::grad_relative_error(r.grads[j], nn::finite_diff_grad(m, b, j, 1e-4, opts)));
      ++coords;
    }
    ++models;
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-4 && secs < 60.0,
          std::to_string(models) + " models, " + std::to_string(coords) + " coordinates, max rel err " +
              fmt("%.2e", worst) + ", " + std::to_string(skipped_kinks) + " draws near a kink redrawn, " +
              fmt("%.2f", secs) + " s"};
}

Verdict algorithm_fidelity() {
  const auto t0 = Clock::now();
  // 2 -> 2 -> 1 linear net, groups [w00 w01 b0] [w10 w11 b1] [v0 v1 c], squared loss, two single-example batches.
  nn::Model m = nn::Model::build({nn::Shape{{2}}, {dense(2), dense(1)}});
  const float p[] = {1, 0, 0, 0, 2, 1, 1, 0.5f, 0};
  std::copy(std::begin(p), std::end(p), m.params().begin());
  const auto data = make_view(nn::Shape{{2}}, 1, {1, 1, 1, -4}, {0, 0});
  loc::ScoreOptions opts{2, 1, nn::LossKind::squared};
  const auto s = loc::criticality_scores(m, data, loc::Criterion::weighted_grad_forget, opts);
  // Hand trace: residuals 2.5 and -2.5; theta*g for w11 is +12.5 then +12.5, for v1 likewise.
  const bool scores_ok = s.param_scores == std::vector<double>{0, 0, 0, 0, 25, 0, 0, 25, 0} &&
                         s.neuron_scores.size() == 3 && s.neuron_scores[0].score == 0.0 &&
                         s.neuron_scores[1].score == 12.5 && s.neuron_scores[2].score == 12.5;
  const bool topk_ok = loc::neuron_topk_avg(std::vector<double>{25, 0, 0}, 2) == 12.5;
  const bool mask_ok = loc::build_mask(s, 0.4, 9).bits == std::vector<std::uint8_t>{0, 0, 0, 1, 1, 1, 0, 0, 0} &&
                       loc::build_mask(s, 0.7, 9).bits == std::vector<std::uint8_t>{0, 0, 0, 1, 1, 1, 1, 1, 1};

  // theta=1, x=1, targets 0 and 2: per-batch gradients +2 and -2 sum to zero before the absolute value.
  const nn::Model scalar = testing::scalar_model(1.0f);
  const auto cancel = make_view(nn::Shape{{1}}, 1, {1.0f, 1.0f}, {0, 2});
  const double s_cancel =
      loc::criticality_scores(scalar, cancel, loc::Criterion::weighted_grad_forget, {1, 1, nn::LossKind::squared})
          .param_scores[0];
  const double secs = seconds_since(t0);
  return {scores_ok && topk_ok && mask_ok && s_cancel == 0.0 && secs < 1.0,
          std::string("scores ") + (scores_ok ? "match" : "differ") + ", mask " + (mask_ok ? "matches" : "differs") +
              ", cancellation s=" + fmt("%g", s_cancel) + ", " + fmt("%.3f", secs) + " s"};
}

Verdict mask_oracles() {
  Rng rng(99);
  std::size_t build_mismatch = 0, top_mismatch = 0, salloc_mismatch = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.index(20);
    loc::CriticalityScores s;
    std::vector<double> score(n);
    std::vector<std::size_t> count(n);
    std::size_t at = 0;
    for (std::size_t i = 0; i < n; ++i) {
      score[i] = static_cast<double>(rng.index(6));  // coarse values force ties
      count[i] = 1 + rng.index(8);
      s.neuron_scores.push_back({nn::NeuronId{0, i}, nn::ParamRange{at, at + count[i]}, score[i], count[i]});
      at += count[i];
    }
    s.param_scores.assign(at, 0.0);
    const double alpha = rng.uniform();
    const Mask mask = loc::build_mask(s, alpha, at);
    const auto chosen = testing::greedy_subset_oracle(score, count, budget_for(alpha, at));
    for (std::size_t i = 0; i < n; ++i) {
      const auto& r = s.neuron_scores[i].range;
      build_mismatch += mask.popcount(r) != (chosen[i] ? count[i] : 0);
    }
  }
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t p = 1 + rng.index(1000);
    std::vector<double> g(p);
    for (double& v : g) v = std::abs(std::round(rng.normal() * 20.0) / 4.0);
    const double alpha = rng.uniform();
    const Mask mask = loc::top_params_mask(g, alpha);
    top_mismatch += mask.set_indices() != testing::exact_topk(g, budget_for(alpha, p));
  }
  // salloc_mask end to end: |summed forget gradient| ranked by a full sort.
  for (int trial = 0; trial < 200; ++trial) {
    const nn::Model m = testing::random_small_model(rng);
    if (m.num_params() > 1000) continue;
    const nn::LabeledBatch b = testing::random_batch(m, rng, 1 + rng.index(6));
    const loc::ScoreOptions opts{10, 2, nn::LossKind::cross_entropy};
    std::vector<double> sum(m.num_params(), 0.0);
    for (std::size_t lo = 0; lo < b.size; lo += opts.batch_size) {
      const std::size_t hi = std::min(b.size, lo + opts.batch_size);
      nn::LabeledBatch part;
      part.size = hi - lo;
      part.features.assign(b.features.begin() + static_cast<std::ptrdiff_t>(lo * m.input_numel()),
                           b.features.begin() + static_cast<std::ptrdiff_t>(hi * m.input_numel()));
      part.labels.assign(b.labels.begin() + static_cast<std::ptrdiff_t>(lo), b.labels.begin() + static_cast<std::ptrdiff_t>(hi));
      const auto r = nn::loss_and_grads(m, part, {nn::LossKind::cross_entropy, 0.0, false});
      for (std::size_t j = 0; j < sum.size(); ++j) sum[j] += r.grads[j];
    }
    for (double& v : sum) v = std::abs(v);
    const double alpha = rng.uniform();
    salloc_mismatch += loc::salloc_mask(m, view_of(m, b), alpha, opts).set_indices() !=
                       testing::exact_topk(sum, budget_for(alpha, m.num_params()));
  }
  return {build_mismatch == 0 && top_mismatch == 0 && salloc_mismatch == 0,
          "build_mask vs subset oracle: " + std::to_string(build_mismatch) + " mismatched groups / 200 tables; " +
              "top-k vs full sort: " + std::to_string(top_mismatch) + " / 200; salloc vs sorted gradients: " +
              std::to_string(salloc_mismatch) + " / 200"};
}

Verdict budget_invariant() {
  const nlohmann::json strategies = nlohmann::json::parse(R"([
    {"kind": "del", "alphas": [0.1]}, {"kind": "salloc", "alphas": [0.1]}, {"kind": "deepest", "alphas": [0.1]},
    {"kind": "shallowest", "alphas": [0.1]}, {"kind": "critmem", "alphas": [0.1]},
    {"kind": "criterion", "criterion": "weights_only", "granularity": "channel", "alphas": [0.1]},
    {"kind": "criterion", "criterion": "weights_only", "granularity": "parameter", "alphas": [0.1]},
    {"kind": "criterion", "criterion": "grad_forget", "granularity": "channel", "alphas": [0.1]},
    {"kind": "criterion", "criterion": "grad_forget", "granularity": "parameter", "alphas": [0.1]},
    {"kind": "criterion", "criterion": "weighted_grad_train", "granularity": "channel", "alphas": [0.1]},
    {"kind": "random", "reference": "del"},
    {"kind": "random", "reference": "grad_forget-parameter", "granularity": "parameter"}])");
  Rng rng(31);
  std::size_t checks = 0, violations = 0, not_maximal = 0;
  for (int trial = 0; trial < 20; ++trial) {
    nn::Model m = testing::random_small_model(rng);
    nlohmann::json j{{"schema_version", 1},
                     {"dataset",
                      {{"kind", "synthetic"},
                       {"classes", m.num_classes()},
                       {"shape", m.input_shape().dims},
                       {"n_train", 40},
                       {"n_test", 10}}},
                     {"architecture", nn::arch_to_json(m.arch())},
                     {"train", {{"epochs", 0}, {"lr", 0.1}}},
                     {"forget", {{"kind", "iid"}, {"fraction", 0.25}}},
                     {"strategies", strategies},
                     {"algorithms", nlohmann::json::array()},
                     {"seeds", nlohmann::json::array({1})}};
    const harness::ExperimentConfig cfg = harness::config_from_json(j);
    const nn::LabeledBatch b = testing::random_batch(m, rng, 10);
    const data::DataView forget = view_of(m, b);
    const std::size_t p = m.num_params();
    for (const auto& s : cfg.strategies) {
      for (double alpha : {0.0, 0.1, 0.2, 0.3, 1.0}) {
        const Mask mask = harness::strategy_mask(cfg, s, alpha, m, forget, 7);
        violations += mask.popcount() > budget_for(alpha, p);
        ++checks;
      }
    }
    // Greedy maximality: the selected groups are a prefix of the ranking and the next group overflows.
    const auto scores = loc::criticality_scores(m, forget, loc::Criterion::weighted_grad_forget, {});
    std::vector<loc::NeuronScore> ranked = scores.neuron_scores;
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& c) {
      return a.score != c.score ? a.score > c.score : a.id < c.id;
    });
    for (double alpha : {0.0, 0.1, 0.2, 0.3, 1.0}) {
      const Mask mask = loc::build_mask(scores, alpha, p);
      std::size_t k = 0;
      while (k < ranked.size() && mask.popcount(ranked[k].range) == ranked[k].param_count) ++k;
      bool ok = true;
      for (std::size_t i = k; i < ranked.size(); ++i) ok = ok && mask.popcount(ranked[i].range) == 0;
      if (k < ranked.size()) ok = ok && mask.popcount() + ranked[k].param_count > budget_for(alpha, p);
      not_maximal += !ok;
    }
  }
  return {violations == 0 && not_maximal == 0,
          std::to_string(checks) + " (strategy, alpha, model) masks, " + std::to_string(violations) +
              " over budget; build_mask not greedy-maximal in " + std::to_string(not_maximal) + " of 100"};
}

Verdict freezing_contract() {
  using unlearn::Algorithm;
  data::SyntheticSpec spec;
  spec.classes = 3;
  spec.shape = nn::Shape{{4}};
  spec.n_train = 60;
  spec.n_test = 30;
  spec.mean_scale = 2.0;
  spec.seed = 5;
  const data::TrainTest tt = data::make_synthetic(spec);
  const data::SplitSet split = data::make_split(*tt.train, {data::ForgetKind::iid, 0.2, {}, 5});
  nn::Model model = nn::Model::build({nn::Shape{{4}}, {dense(6), relu(), dense(5), relu(), dense(3)}});
  nn::init_params(model, 5);
  Rng rng(8);
  std::size_t moved = 0, runs = 0;
  bool exempt_ok = true;
  for (Algorithm a : {Algorithm::rft, Algorithm::finetune, Algorithm::neggrad, Algorithm::neggrad_plus,
                      Algorithm::random_label, Algorithm::l1_sparse}) {
    for (int rep = 0; rep < 3; ++rep) {
      Mask mask = Mask::zeros(model.num_params(), "random");
      for (auto& bit : mask.bits) bit = rng.index(3) == 0;
      unlearn::UnlearnConfig cfg;
      cfg.algorithm = a;
      cfg.epochs = 2;
      cfg.batch_size = 16;
      cfg.schedule = unlearn::default_schedule(a, 0.05);
      cfg.seed = static_cast<std::uint64_t>(rep);
      if (a == Algorithm::l1_sparse) cfg.l1_lambda = 1e-3;
      cfg.mask = mask;
      const auto out = unlearn::run(model, split.retain(tt.train), split.forget(tt.train), cfg);
      const Mask exempt = unlearn::exempt_set(a, model);
      for (std::size_t j = 0; j < model.num_params(); ++j) {
        if (!mask.test(j) && !exempt.test(j)) moved += !same_bits(out.model.params()[j], model.params()[j]);
      }
      ++runs;
    }
    const Mask exempt = unlearn::exempt_set(a, model);
    const nn::ParamRange cls = model.layer_range(model.classifier_layer());
    for (std::size_t j = 0; j < model.num_params(); ++j) {
      exempt_ok = exempt_ok && exempt.test(j) == (a == Algorithm::rft && cls.contains(j));
    }
  }
  return {moved == 0 && exempt_ok, std::to_string(runs) + " masked runs, " + std::to_string(moved) +
                                       " frozen parameters changed; rft exempt set " +
                                       (exempt_ok ? "is exactly the classifier layer" : "is wrong")};
}

nlohmann::json small_grid_config() {
  return nlohmann::json::parse(R"({
    "schema_version": 1,
    "dataset": {"kind": "synthetic", "classes": 4, "shape": [6], "n_train": 160, "n_test": 60, "mean_scale": 1.5, "seed": 2},
    "architecture": {"input_shape": [6], "layers": [
      {"kind": "dense", "out_features": 10}, {"kind": "relu"}, {"kind": "dense", "out_features": 4}]},
    "train": {"epochs": 4, "lr": 0.1, "batch_size": 16},
    "forget": {"kind": "iid", "fraction": 0.1},
    "strategies": [{"kind": "del", "alphas": [0.2]}],
    "algorithms": [{"name": "finetune", "epochs": 1, "lr": 0.01, "batch_size": 16}],
    "seeds": [1, 2, 3],
    "include_oracle_row": true
  })");
}

Verdict oracle_self_consistency(const fs::path& root) {
  const harness::ExperimentConfig cfg = harness::config_from_json(small_grid_config());
  harness::RunOptions opts;
  opts.output_root = root;
  harness::Experiment e(cfg, opts);
  e.train();
  e.unlearn();
  const auto rows = e.evaluate();
  std::size_t zero = 0, checked = 0;
  for (const auto& r : rows) {
    if (r.strategy != "oracle" || (r.metric != "forget" && r.metric != "test" && r.metric != "mia")) continue;
    ++checked;
    zero += r.stats.mean == 0.0 && r.stats.half_width && *r.stats.half_width == 0.0;
  }
  // Also straight from the same checkpoint through measure().
  bool direct = true;
  for (std::uint64_t s : cfg.seeds) {
    const nn::Checkpoint ckpt = nn::load_checkpoint(e.layout().oracle(s) / harness::kModelFile);
    const auto m1 = harness::measure(ckpt.model, e.data_for(s), "a", s);
    const auto m2 = harness::measure(ckpt.model, e.data_for(s), "b", s);
    const auto d = eval::delta_report(std::vector{m1}, std::vector{m2});
    for (const char* k : {"forget", "test", "mia"}) direct = direct && d.per_seed.at(k)[0] == 0.0;
  }
  return {checked == 3 && zero == 3 && direct,
          "oracle row: " + std::to_string(zero) + "/3 of forget, test, mia exactly 0 over 3 seeds; direct re-evaluation " +
              (direct ? "exactly 0" : "non-zero")};
}

struct SeedDeltas {
  std::map<std::string, std::map<std::uint64_t, double>> forget;  // strategy -> seed -> delta_forget
};

SeedDeltas read_forget_deltas(const fs::path& runs_csv) {
  SeedDeltas out;
  std::istringstream in(harness::read_file(runs_csv));
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::stringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) f.push_back(cell);
    if (f.size() == 6 && f[4] == "forget") out.forget[f[0]][std::stoull(f[3])] = std::stod(f[5]);
  }
  return out;
}

struct DeskRun {
  fs::path sweep_dir;
  double seconds = 0.0;
  std::string error;
};

DeskRun run_desk_sweep(const fs::path& root) {
  DeskRun r;
  const auto t0 = Clock::now();
  try {
    const harness::ExperimentConfig cfg =
        harness::load_config(fs::path(LOCUN_SOURCE_DIR) / "configs" / "desk_noniid.json");
    harness::RunOptions opts;
    opts.output_root = root;
    harness::Experiment e(cfg, opts);
    e.sweep();
    r.sweep_dir = e.layout().sweep_dir();
  } catch (const std::exception& ex) {
    r.error = ex.what();
  }
  r.seconds = seconds_since(t0);
  return r;
}

Verdict random_vs_standard(const DeskRun& run) {
  if (!run.error.empty()) return {false, "sweep failed: " + run.error};
  const SeedDeltas d = read_forget_deltas(run.sweep_dir / harness::kRunsCsv);
  const auto& del = d.forget.at("del");
  const auto& rnd = d.forget.at("random-del");
  std::vector<double> gap;
  std::ostringstream per_seed;
  for (const auto& [seed, v] : del) {
    gap.push_back(std::abs(rnd.at(seed)) - std::abs(v));
    per_seed << " seed " << seed << ": |df| del " << fmt("%.2f", std::abs(v)) << " random " << fmt("%.2f", std::abs(rnd.at(seed))) << ";";
  }
  const eval::Interval ci = eval::mean_ci95(gap);
  const double lower = ci.mean - ci.half_width.value_or(INFINITY);
  return {lower > 0.0 && run.seconds < 600.0,
          "gap |df(random)|-|df(del)| mean " + fmt("%.2f", ci.mean) + " pp, 95% CI lower bound " + fmt("%.2f", lower) +
              ";" + per_seed.str() + " sweep " + fmt("%.1f", run.seconds) + " s"};
}

Verdict criterion_ablation(const DeskRun& run) {
  if (!run.error.empty()) return {false, "sweep failed: " + run.error};
  const SeedDeltas d = read_forget_deltas(run.sweep_dir / harness::kRunsCsv);
  auto mean_abs = [](const std::map<std::uint64_t, double>& m) {
    double s = 0.0;
    for (const auto& [_, v] : m) s += std::abs(v);
    return s / static_cast<double>(m.size());
  };
  const double channel = mean_abs(d.forget.at("del"));
  const double parameter = mean_abs(d.forget.at("grad_forget-parameter"));
  return {channel <= parameter, "mean |df| channel weighted_grad_forget " + fmt("%.2f", channel) +
                                    " pp vs parameter grad_forget " + fmt("%.2f", parameter) + " pp (" +
                                    (run.sweep_dir / harness::kSweepCsv).string() + ")"};
}

Verdict mia_correctness() {
  auto column = [](std::vector<double> v) {
    eval::FeatureMatrix f;
    f.rows = v.size();
    f.cols = 1;
    f.values = std::move(v);
    return f;
  };
  const auto seen = column({0.9, 0.95, 0.85}), unseen = column({0.1, 0.2, 0.15});
  eval::LinearSvm a, b;
  const double all_seen = eval::mia_from_features(seen, unseen, column({0.9, 0.95, 0.88}), eval::MiaFeature::confidence, a).score;
  const double all_unseen = eval::mia_from_features(seen, unseen, column({0.1, 0.2, 0.12}), eval::MiaFeature::confidence, b).score;

  Rng rng(4242);
  std::size_t agree = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const double lo = rng.uniform(0.0, 0.3), hi = lo + rng.uniform(0.1, 0.4);
    const bool seen_high = rng.index(2) == 0;
    std::vector<double> s, u, f;
    auto high = [&] { return rng.uniform(hi, 1.0); };
    auto low = [&] { return rng.uniform(0.0, lo); };
    for (std::size_t i = 0, n = 2 + rng.index(40); i < n; ++i) s.push_back(seen_high ? high() : low());
    for (std::size_t i = 0, n = 2 + rng.index(40); i < n; ++i) u.push_back(seen_high ? low() : high());
    for (std::size_t i = 0, n = 1 + rng.index(30); i < n; ++i) f.push_back(rng.index(2) ? high() : low());
    eval::LinearSvm svm;
    agree += eval::mia_from_features(column(s), column(u), column(f), eval::MiaFeature::confidence, svm).tn ==
             testing::threshold_oracle_tn(s, u, f);
  }
  return {all_seen == 0.0 && all_unseen == 1.0 && agree == 100,
          "all-seen " + fmt("%g", all_seen) + ", all-unseen " + fmt("%g", all_unseen) + ", TN matches threshold oracle on " +
              std::to_string(agree) + "/100 fixtures"};
}

Verdict critmem_termination() {
  Rng rng(500);
  std::size_t bad_end = 0, touched = 0, flipped = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const nn::Model m = testing::random_small_model(rng);
    const nn::Model before = m;
    const nn::LabeledBatch b = testing::random_batch(m, rng, 1);
    const std::size_t bound = 1 + rng.index(std::min<std::size_t>(6, m.num_neurons()));
    const auto r = loc::critmem(m, view_of(m, b), bound);
    const auto& t = r.traces.at(0);
    bad_end += !(t.flipped || t.reset.size() == bound) || t.reset.size() > bound;
    flipped += t.flipped;
    touched += !bytes_equal(m, before);
  }
  return {bad_end == 0 && touched == 0, "500 pairs: " + std::to_string(flipped) + " flipped, " +
                                            std::to_string(500 - flipped) + " at the bound, " + std::to_string(bad_end) +
                                            " ended otherwise; input model changed in " + std::to_string(touched)};
}

Verdict reproducibility(const DeskRun& first, const DeskRun& second) {
  if (!first.error.empty() || !second.error.empty()) return {false, "sweep failed: " + first.error + second.error};
  bool same = true;
  for (const char* f : {harness::kSummaryCsv, harness::kSweepCsv, harness::kRunsCsv, harness::kSelectionCsv}) {
    same = same && harness::read_file(first.sweep_dir / f) == harness::read_file(second.sweep_dir / f);
  }
  return {same, std::string("summary.csv, sweep.csv, runs.csv and selection.csv ") +
                    (same ? "byte-identical" : "differ") + " across two sweep invocations"};
}

}  // namespace

int main() {
  const fs::path root = fs::current_path() / "acceptance_outputs";
  fs::remove_all(root);

  int failures = 0;
  auto report = [&](int id, const char* name, const std::function<Verdict()>& check) {
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failures += !v.pass;
    std::printf("%s [%d] %s: %s\n", v.pass ? "PASS" : "FAIL", id, name, v.detail.c_str());
    std::fflush(stdout);
  };

  report(1, "gradient oracle", gradient_oracle);
  report(2, "localization pseudocode fidelity", algorithm_fidelity);
  report(3, "mask oracles", mask_oracles);
  report(4, "budget invariant", budget_invariant);
  report(5, "freezing contract", freezing_contract);
  report(6, "oracle self-consistency", [&] { return oracle_self_consistency(root / "self"); });

  const DeskRun first = run_desk_sweep(root / "desk_a");
  report(7, "random-vs-standard control", [&] { return random_vs_standard(first); });
  report(8, "criterion ablation direction", [&] { return criterion_ablation(first); });
  report(9, "MIA correctness", mia_correctness);
  report(10, "CritMem termination", critmem_termination);
  const DeskRun second = run_desk_sweep(root / "desk_b");
  report(11, "reproducibility", [&] { return reproducibility(first, second); });

  std::printf("%d of 11 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
