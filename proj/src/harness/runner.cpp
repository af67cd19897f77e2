// SPDX-License-Identifier: Apache-2.0
#include "locun/harness/runner.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "locun/data/io.hpp"
#include "locun/error.hpp"
#include "locun/evaluation/mia.hpp"
#include "locun/localization/mask_io.hpp"
#include "locun/nn/checkpoint.hpp"
#include "locun/unlearning/unlearn.hpp"

namespace locun::harness {

namespace fs = std::filesystem;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string hex(const unsigned char* md, unsigned int len) {
  static const char* digits = "0123456789abcdef";
  std::string s;
  for (unsigned int i = 0; i < len; ++i) {
    s += digits[md[i] >> 4];
    s += digits[md[i] & 0xf];
  }
  return s;
}

std::string lr_label(double lr) { return "lr=" + alpha_label(lr); }

std::string cell_name(const Cell& c) {
  return c.strategy + "/" + unlearn::to_string(c.algorithm) + "/" + alpha_label(c.alpha) + "/" +
         std::to_string(c.seed);
}

const AlgorithmConfig& algorithm_config(const ExperimentConfig& cfg, unlearn::Algorithm a) {
  for (const auto& ac : cfg.algorithms)
    if (ac.algorithm == a) return ac;
  throw ConfigError(std::string("algorithm not configured: ") + unlearn::to_string(a));
}

std::vector<double> candidates(const AlgorithmConfig& a) {
  return a.lr_candidates.empty() ? std::vector<double>{a.lr} : a.lr_candidates;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

eval::RunRecord record_for(const Cell& c, const eval::MetricsReport& oracle, const eval::MetricsReport& run) {
  const eval::DeltaReport d = eval::delta_report({oracle}, {run});
  eval::RunRecord r{c.strategy, unlearn::to_string(c.algorithm), c.alpha, c.seed, {}};
  for (const auto& [m, v] : d.per_seed) r.deltas[m] = v.front();
  return r;
}

std::string runs_csv(std::vector<eval::RunRecord> records) {
  std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) {
    return std::tie(a.strategy, a.algorithm, a.alpha, a.seed) < std::tie(b.strategy, b.algorithm, b.alpha, b.seed);
  });
  std::ostringstream out;
  out << "strategy,algorithm,alpha,seed,metric,delta\n";
  for (const auto& r : records) {
    for (const char* m : eval::kMetrics) {
      auto it = r.deltas.find(m);
      if (it == r.deltas.end()) continue;
      out << r.strategy << ',' << r.algorithm << ',' << alpha_label(r.alpha) << ',' << r.seed << ',' << m << ','
          << eval::format_number(it->second) << '\n';
    }
  }
  return out.str();
}

}  // namespace

fs::path resolve_output_root(const std::optional<std::string>& cli_out, const ExperimentConfig& cfg) {
  if (cli_out && !cli_out->empty()) return *cli_out;
  if (!cfg.output_dir.empty()) return cfg.output_dir;
  if (const char* env = std::getenv(kOutputRootEnv); env && *env) return env;
  return "outputs";
}

void atomic_write(const fs::path& path, const std::string& contents) {
  fs::create_directories(path.parent_path().empty() ? fs::path(".") : path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + tmp.string() + " for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string content_hash(const std::string& bytes) {
  std::string blob = "blob " + std::to_string(bytes.size());
  blob.push_back('\0');
  blob += bytes;
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(blob.data(), blob.size(), md, &len, EVP_sha256(), nullptr) != 1) throw Error("sha256 failed");
  return hex(md, len);
}

std::string file_content_hash(const fs::path& path) { return content_hash(read_file(path)); }

fs::path Layout::original(std::uint64_t seed) const { return base_ / "original" / std::to_string(seed); }
fs::path Layout::oracle(std::uint64_t seed) const { return base_ / "oracle" / std::to_string(seed); }

fs::path Layout::cell(const std::string& strategy, const std::string& algorithm, double alpha,
                      std::uint64_t seed) const {
  return base_ / strategy / algorithm / alpha_label(alpha) / std::to_string(seed);
}

fs::path Layout::sweep_trial(const std::string& strategy, const std::string& algorithm, double alpha, double lr,
                             std::uint64_t seed) const {
  return sweep_dir() / "trials" / strategy / algorithm / alpha_label(alpha) / lr_label(lr) / std::to_string(seed);
}

fs::path Layout::sweep_cell(const std::string& strategy, const std::string& algorithm, double alpha,
                            std::uint64_t seed) const {
  return sweep_dir() / "runs" / strategy / algorithm / alpha_label(alpha) / std::to_string(seed);
}

data::TrainTest load_dataset(const DatasetConfig& cfg) {
  switch (cfg.kind) {
    case DatasetKind::synthetic:
      return data::make_synthetic(cfg.synthetic);
    case DatasetKind::idx: {
      auto train = std::make_shared<data::Dataset>(data::load_idx(cfg.train_images, cfg.train_labels, cfg.classes, "train"));
      auto test = std::make_shared<data::Dataset>(data::load_idx(cfg.test_images, cfg.test_labels, cfg.classes, "test"));
      return {train, test};
    }
    case DatasetKind::csv:
      return data::split_train_test(data::load_csv(cfg.csv_path, cfg.classes, cfg.shape), cfg.test_fraction,
                                    cfg.split_seed);
  }
  throw ConfigError("unknown dataset kind");
}

SeedData seed_data(const data::TrainTest& tt, const ForgetConfig& forget, std::uint64_t seed) {
  SeedData d;
  d.train = tt.train;
  d.test = tt.test;
  d.split = data::make_split(*tt.train, {forget.kind, forget.fraction, forget.classes, seed});
  d.forget = d.split.forget(tt.train);
  d.retain = d.split.retain(tt.train);
  d.test_view = data::DataView::all(tt.test);
  data::CalibrationSubset calib = data::mia_calibration_subset(d.retain, *tt.test, seed);
  d.calib_seen = data::DataView(tt.train, std::move(calib.indices));
  d.warnings = std::move(calib.warnings);
  return d;
}

Mask strategy_mask(const ExperimentConfig& cfg, const StrategyConfig& s, double alpha, const nn::Model& original,
                   const data::DataView& forget, std::uint64_t seed) {
  const std::size_t p = original.num_params();
  loc::ScoreOptions opts;
  opts.h = s.h;
  switch (s.kind) {
    case StrategyKind::del:
      return loc::build_mask(loc::criticality_scores(original, forget, loc::Criterion::weighted_grad_forget, opts),
                             alpha, p);
    case StrategyKind::criterion: {
      const loc::CriticalityScores scores = loc::criticality_scores(original, forget, s.criterion, opts);
      if (s.granularity == loc::Granularity::channel) return loc::build_mask(scores, alpha, p);
      return loc::top_params_mask(scores.param_scores, alpha, std::string("parameter:") + loc::to_string(s.criterion));
    }
    case StrategyKind::salloc:
      return loc::salloc_mask(original, forget, alpha, opts);
    case StrategyKind::deepest:
      return loc::layer_budget_mask(original, alpha, loc::LayerEnd::deepest);
    case StrategyKind::shallowest:
      return loc::layer_budget_mask(original, alpha, loc::LayerEnd::shallowest);
    case StrategyKind::critmem: {
      const std::size_t bound = s.critmem_bound.value_or(loc::default_critmem_bound(original));
      return loc::trim_critmem(original, loc::critmem(original, forget, bound), alpha);
    }
    case StrategyKind::random: {
      const Mask ref = strategy_mask(cfg, cfg.strategy(s.reference), alpha, original, forget, seed);
      return loc::random_matched_mask(ref, original, s.random_granularity, seed);
    }
    case StrategyKind::full: {
      Mask m = Mask::ones(p, "full");
      m.alpha = alpha;
      return m;
    }
  }
  throw ConfigError("unknown strategy kind");
}

eval::MetricsReport measure(const nn::Model& model, const SeedData& d, const std::string& run_id, std::uint64_t seed) {
  eval::MetricsReport r;
  r.run_id = run_id;
  r.seed = seed;
  r.forget_acc = eval::accuracy(model, d.forget);
  r.retain_acc = eval::accuracy(model, d.retain);
  r.test_acc = eval::accuracy(model, d.test_view);
  r.mia_correctness = eval::mia_score(model, d.calib_seen, d.test_view, d.forget, eval::MiaFeature::correctness);
  r.mia_confidence = eval::mia_score(model, d.calib_seen, d.test_view, d.forget, eval::MiaFeature::confidence);
  return r;
}

double selection_objective(const eval::MetricsReport& oracle, const eval::MetricsReport& unlearned) {
  return std::abs(100.0 * (oracle.forget_acc - unlearned.forget_acc)) +
         std::abs(100.0 * (oracle.test_acc - unlearned.test_acc));
}

Experiment::Experiment(ExperimentConfig cfg, RunOptions opts)
    : cfg_(std::move(cfg)), opts_(std::move(opts)), hash_(config_hash(cfg_)), layout_(opts_.output_root, hash_) {
  cfg_.validate();
  if (opts_.workers == 0) throw ConfigError("workers must be at least 1");
}

void Experiment::say(const std::string& line) {
  if (!opts_.log) return;
  std::lock_guard lock(log_mu_);
  *opts_.log << line << '\n';
}

void Experiment::parallel(std::size_t n, const std::function<void(std::size_t)>& task) {
  if (n == 0) return;
  std::vector<std::exception_ptr> errors(n);
  const std::size_t workers = std::min(opts_.workers, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n && !failed; i = next++) {
          try {
            task(i);
          } catch (...) {
            errors[i] = std::current_exception();
            failed = true;
          }
        }
      });
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

bool Experiment::done(const fs::path& dir) const { return fs::exists(dir / kManifestFile); }

const SeedData& Experiment::data_for(std::uint64_t seed) {
  std::lock_guard lock(data_mu_);
  if (!dataset_) dataset_ = load_dataset(cfg_.dataset);
  auto it = seeds_.find(seed);
  if (it == seeds_.end()) {
    it = seeds_.emplace(seed, std::make_unique<SeedData>(seed_data(*dataset_, cfg_.forget, seed))).first;
    for (const auto& w : it->second->warnings) say("warning: seed " + std::to_string(seed) + ": " + w);
  }
  return *it->second;
}

std::vector<Cell> Experiment::run_matrix() const {
  std::vector<Cell> cells;
  for (const auto& s : cfg_.strategies)
    for (double alpha : s.alphas)
      for (const auto& a : cfg_.algorithms)
        for (std::uint64_t seed : cfg_.seeds) cells.push_back({s.id, a.algorithm, alpha, seed});
  return cells;
}

void Experiment::require_checkpoint(const fs::path& dir, const std::string& what, std::uint64_t seed) const {
  if (!fs::exists(dir / kModelFile)) {
    throw ValidationError("missing " + what + " checkpoint for seed " + std::to_string(seed) + " (expected " +
                          (dir / kModelFile).string() + "); run `locun train` first");
  }
}

void Experiment::train_one(std::uint64_t seed, bool oracle) {
  const fs::path dir = oracle ? layout_.oracle(seed) : layout_.original(seed);
  const SeedData& d = data_for(seed);
  const auto t0 = Clock::now();
  const unlearn::UnlearnConfig recipe = oracle ? cfg_.oracle_recipe(seed) : cfg_.train_recipe(seed);
  const data::DataView on = oracle ? d.retain : data::DataView::all(d.train);
  unlearn::UnlearnOutcome out = unlearn::train_from_scratch(cfg_.arch, on, recipe);
  const double train_time = seconds_since(t0);
  const std::string stage = oracle ? "oracle" : "original";
  nn::save_checkpoint(dir / kModelFile, {out.model, seed, {{"stage", stage}, {"config_hash", hash_}}});
  const json manifest{{"config_hash", hash_},
                      {"stage", stage},
                      {"seed", seed},
                      {"epochs", recipe.epochs},
                      {"lr", recipe.schedule.lr_init},
                      {"steps", out.steps_taken},
                      {"final_loss", out.loss_trace.empty() ? json(nullptr) : json(out.loss_trace.back())},
                      {"train_acc", eval::accuracy(out.model, on)},
                      {"wall_time_s", {{"train", train_time}}},
                      {"artifacts", {{"model", kModelFile}, {"model_hash", file_content_hash(dir / kModelFile)}}}};
  atomic_write(dir / kManifestFile, dump(manifest));
  say("trained " + stage + " seed=" + std::to_string(seed) + " in " + std::to_string(train_time) + "s");
}

void Experiment::train() { train_seeds(cfg_.seeds); }

void Experiment::train_seeds(const std::vector<std::uint64_t>& seeds) {
  std::vector<std::pair<std::uint64_t, bool>> todo;
  stats_ = {};
  for (std::uint64_t s : seeds) {
    for (bool oracle : {false, true}) {
      const fs::path dir = oracle ? layout_.oracle(s) : layout_.original(s);
      const bool skip = opts_.resume && done(dir);
      if (opts_.dry_run) {
        say(std::string("train ") + (oracle ? "oracle" : "original") + " seed=" + std::to_string(s) + " -> " +
            dir.string() + (skip ? " (done, skipped)" : ""));
      }
      if (skip) {
        ++stats_.skipped;
      } else {
        todo.emplace_back(s, oracle);
      }
    }
  }
  if (opts_.dry_run) return;
  atomic_write(layout_.base() / "config.json", dump(to_json(cfg_)));
  for (const auto& [s, _] : todo) data_for(s);
  parallel(todo.size(), [&](std::size_t i) { train_one(todo[i].first, todo[i].second); });
  stats_.executed = todo.size();
}

void Experiment::unlearn_one(const Cell& c, double lr, const fs::path& dir) {
  const fs::path original_ckpt = layout_.original(c.seed) / kModelFile;
  const nn::Checkpoint original = nn::load_checkpoint(original_ckpt);
  const SeedData& d = data_for(c.seed);
  const StrategyConfig& s = cfg_.strategy(c.strategy);

  auto t0 = Clock::now();
  const Mask mask = strategy_mask(cfg_, s, c.alpha, original.model, d.forget, c.seed);
  const double mask_time = seconds_since(t0);

  unlearn::UnlearnConfig u = cfg_.unlearn_recipe(algorithm_config(cfg_, c.algorithm), lr, c.seed);
  u.mask = mask;
  t0 = Clock::now();
  const unlearn::UnlearnOutcome out = unlearn::run(original.model, d.retain, d.forget, u);
  const double unlearn_time = seconds_since(t0);

  loc::save_mask(dir / kMaskFile, mask);
  nn::save_checkpoint(dir / kModelFile, {out.model,
                                         c.seed,
                                         {{"stage", "unlearn"},
                                          {"config_hash", hash_},
                                          {"strategy", c.strategy},
                                          {"algorithm", unlearn::to_string(c.algorithm)},
                                          {"alpha", alpha_label(c.alpha)},
                                          {"lr", alpha_label(lr)}}});
  const json manifest{
      {"config_hash", hash_},
      {"stage", "unlearn"},
      {"strategy", c.strategy},
      {"algorithm", unlearn::to_string(c.algorithm)},
      {"alpha", c.alpha},
      {"seed", c.seed},
      {"lr", lr},
      {"inputs", {{"original", file_content_hash(original_ckpt)}}},
      {"mask",
       {{"p", mask.size()},
        {"popcount", mask.popcount()},
        {"budget", budget_for(c.alpha, mask.size())},
        {"strategy_tag", mask.strategy_tag}}},
      {"steps", out.steps_taken},
      {"final_loss", out.loss_trace.empty() ? json(nullptr) : json(out.loss_trace.back())},
      {"wall_time_s", {{"mask", mask_time}, {"unlearn", unlearn_time}}},
      {"artifacts",
       {{"model", kModelFile},
        {"model_hash", file_content_hash(dir / kModelFile)},
        {"mask", kMaskFile},
        {"mask_hash", file_content_hash(dir / kMaskFile)}}}};
  atomic_write(dir / kManifestFile, dump(manifest));
  say("unlearned " + cell_name(c) + " lr=" + alpha_label(lr) + " popcount=" + std::to_string(mask.popcount()));
}

void Experiment::unlearn() {
  stats_ = {};
  const std::vector<Cell> cells = run_matrix();
  std::vector<std::pair<Cell, fs::path>> todo;
  for (const Cell& c : cells) {
    const fs::path dir = layout_.cell(c.strategy, unlearn::to_string(c.algorithm), c.alpha, c.seed);
    const bool skip = opts_.resume && done(dir);
    if (opts_.dry_run) {
      say("unlearn strategy=" + c.strategy + " algorithm=" + unlearn::to_string(c.algorithm) +
          " alpha=" + alpha_label(c.alpha) + " seed=" + std::to_string(c.seed) +
          " lr=" + alpha_label(algorithm_config(cfg_, c.algorithm).lr) + " -> " + dir.string() +
          (skip ? " (done, skipped)" : ""));
    }
    if (skip) {
      ++stats_.skipped;
    } else {
      todo.emplace_back(c, dir);
    }
  }
  if (opts_.dry_run) {
    say(std::to_string(cells.size()) + " runs");
    return;
  }
  for (std::uint64_t s : cfg_.seeds) require_checkpoint(layout_.original(s), "original", s);
  atomic_write(layout_.base() / "config.json", dump(to_json(cfg_)));
  for (std::uint64_t s : cfg_.seeds) data_for(s);
  parallel(todo.size(), [&](std::size_t i) {
    const Cell& c = todo[i].first;
    unlearn_one(c, algorithm_config(cfg_, c.algorithm).lr, todo[i].second);
  });
  stats_.executed = todo.size();
}

eval::MetricsReport Experiment::metrics_for(const fs::path& dir, std::uint64_t seed, const std::string& run_id,
                                            const std::string& missing_hint) {
  if (!fs::exists(dir / kModelFile)) throw ValidationError(missing_hint + " (expected " + (dir / kModelFile).string() + ")");
  const nn::Checkpoint ckpt = nn::load_checkpoint(dir / kModelFile);
  eval::MetricsReport r = measure(ckpt.model, data_for(seed), run_id, seed);
  atomic_write(dir / kMetricsFile, dump(eval::to_json(r)));
  return r;
}

std::vector<eval::SummaryRow> Experiment::evaluate_cells(const std::vector<Cell>& cells,
                                                         const std::function<fs::path(const Cell&)>& dir_of,
                                                         const fs::path& out_dir) {
  std::set<std::uint64_t> seed_set(cfg_.seeds.begin(), cfg_.seeds.end());
  for (const Cell& c : cells) seed_set.insert(c.seed);
  const std::vector<std::uint64_t> seeds(seed_set.begin(), seed_set.end());
  for (std::uint64_t s : seeds) require_checkpoint(layout_.oracle(s), "oracle", s);
  for (const Cell& c : cells) {
    if (!fs::exists(dir_of(c) / kModelFile)) {
      throw ValidationError("missing unlearned checkpoint for " + cell_name(c) + " (expected " +
                            (dir_of(c) / kModelFile).string() + "); run `locun unlearn` first");
    }
  }
  for (std::uint64_t s : seeds) data_for(s);

  std::vector<eval::MetricsReport> oracle(seeds.size());
  parallel(seeds.size(), [&](std::size_t i) {
    oracle[i] = metrics_for(layout_.oracle(seeds[i]), seeds[i], "oracle/" + std::to_string(seeds[i]), "missing oracle");
  });
  auto oracle_of = [&](std::uint64_t s) -> const eval::MetricsReport& {
    return oracle[static_cast<std::size_t>(std::lower_bound(seeds.begin(), seeds.end(), s) - seeds.begin())];
  };

  std::vector<eval::RunRecord> records(cells.size());
  parallel(cells.size(), [&](std::size_t i) {
    const Cell& c = cells[i];
    const eval::MetricsReport m = metrics_for(dir_of(c), c.seed, cell_name(c), "missing unlearned checkpoint");
    records[i] = record_for(c, oracle_of(c.seed), m);
    json delta = json::object();
    for (const auto& [k, v] : records[i].deltas) delta[k] = v;
    atomic_write(dir_of(c) / kDeltaFile, dump(delta));
  });
  if (cfg_.include_oracle_row) {
    for (std::uint64_t s : cfg_.seeds) {
      records.push_back(record_for({"oracle", unlearn::Algorithm::retrain_oracle, 1.0, s}, oracle_of(s), oracle_of(s)));
    }
  }

  const std::vector<eval::SummaryRow> rows = eval::aggregate_runs(records);
  atomic_write(out_dir / kRunsCsv, runs_csv(records));
  atomic_write(out_dir / kSummaryCsv, eval::summary_csv(rows));
  atomic_write(out_dir / kSummaryJson, dump(eval::summary_json(rows)));
  say("wrote " + (out_dir / kSummaryCsv).string() + " (" + std::to_string(rows.size()) + " rows)");
  return rows;
}

std::vector<eval::SummaryRow> Experiment::evaluate() {
  stats_ = {};
  const std::vector<Cell> cells = run_matrix();
  auto dir_of = [&](const Cell& c) {
    return layout_.cell(c.strategy, unlearn::to_string(c.algorithm), c.alpha, c.seed);
  };
  if (opts_.dry_run) {
    for (std::uint64_t s : cfg_.seeds) say("evaluate oracle seed=" + std::to_string(s) + " -> " + layout_.oracle(s).string());
    for (const Cell& c : cells) say("evaluate " + cell_name(c) + " -> " + dir_of(c).string());
    return {};
  }
  auto rows = evaluate_cells(cells, dir_of, layout_.base());
  stats_.executed = cells.size();
  return rows;
}

std::vector<eval::SummaryRow> Experiment::sweep() {
  // Learning-rate selection cells: one per (strategy, alpha, algorithm).
  struct Trial {
    Cell cell;
    double lr;
  };
  std::vector<Cell> groups;
  for (const auto& s : cfg_.strategies)
    for (double alpha : s.alphas)
      for (const auto& a : cfg_.algorithms) groups.push_back({s.id, a.algorithm, alpha, cfg_.validation_seed});
  std::vector<Trial> trials;
  for (const Cell& g : groups) {
    const auto lrs = candidates(algorithm_config(cfg_, g.algorithm));
    if (lrs.size() > 1)
      for (double lr : lrs) trials.push_back({g, lr});
  }

  std::vector<std::uint64_t> seeds = cfg_.seeds;
  if (!trials.empty()) seeds.push_back(cfg_.validation_seed);

  if (opts_.dry_run) {
    train_seeds(seeds);
    for (const Trial& t : trials) {
      say("select " + cell_name(t.cell) + " lr=" + alpha_label(t.lr) + " -> " +
          layout_.sweep_trial(t.cell.strategy, unlearn::to_string(t.cell.algorithm), t.cell.alpha, t.lr, t.cell.seed)
              .string());
    }
    for (const Cell& c : run_matrix()) {
      say("sweep " + cell_name(c) + " -> " +
          layout_.sweep_cell(c.strategy, unlearn::to_string(c.algorithm), c.alpha, c.seed).string());
    }
    return {};
  }

  train_seeds(seeds);
  Stats total = stats_;

  auto trial_dir = [&](const Trial& t) {
    return layout_.sweep_trial(t.cell.strategy, unlearn::to_string(t.cell.algorithm), t.cell.alpha, t.lr, t.cell.seed);
  };
  std::vector<double> objective(trials.size(), 0.0);
  if (!trials.empty()) {
    const eval::MetricsReport oracle = metrics_for(layout_.oracle(cfg_.validation_seed), cfg_.validation_seed,
                                                   "oracle/" + std::to_string(cfg_.validation_seed), "missing oracle");
    parallel(trials.size(), [&](std::size_t i) {
      const fs::path dir = trial_dir(trials[i]);
      if (!(opts_.resume && done(dir))) unlearn_one(trials[i].cell, trials[i].lr, dir);
      const eval::MetricsReport m = metrics_for(dir, trials[i].cell.seed, cell_name(trials[i].cell), "missing trial");
      objective[i] = selection_objective(oracle, m);
    });
  }

  std::vector<SweepSelection> selections;
  std::map<std::tuple<std::string, unlearn::Algorithm, double>, double> chosen;
  for (const Cell& g : groups) {
    const auto lrs = candidates(algorithm_config(cfg_, g.algorithm));
    const auto key = std::make_tuple(g.strategy, g.algorithm, g.alpha);
    if (lrs.size() == 1) {
      chosen[key] = lrs.front();
      selections.push_back({g.strategy, unlearn::to_string(g.algorithm), g.alpha, lrs.front(), NAN, true});
      continue;
    }
    std::size_t best = selections.size();
    for (std::size_t i = 0; i < trials.size(); ++i) {
      const Trial& t = trials[i];
      if (t.cell.strategy != g.strategy || t.cell.algorithm != g.algorithm || t.cell.alpha != g.alpha) continue;
      selections.push_back({g.strategy, unlearn::to_string(g.algorithm), g.alpha, t.lr, objective[i], false});
      // Strict improvement only: ties keep the earlier candidate.
      if (best == selections.size() - 1 || selections.back().objective < selections[best].objective) {
        best = selections.size() - 1;
      }
    }
    selections[best].chosen = true;
    chosen[key] = selections[best].lr;
  }
  {
    std::ostringstream out;
    out << "strategy,algorithm,alpha,lr,objective,chosen\n";
    for (const auto& s : selections) {
      out << s.strategy << ',' << s.algorithm << ',' << alpha_label(s.alpha) << ',' << alpha_label(s.lr) << ','
          << (std::isnan(s.objective) ? std::string("n/a") : eval::format_number(s.objective)) << ','
          << (s.chosen ? "yes" : "no") << '\n';
    }
    atomic_write(layout_.sweep_dir() / kSelectionCsv, out.str());
  }

  const std::vector<Cell> cells = run_matrix();
  auto dir_of = [&](const Cell& c) {
    return layout_.sweep_cell(c.strategy, unlearn::to_string(c.algorithm), c.alpha, c.seed);
  };
  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (opts_.resume && done(dir_of(cells[i]))) {
      ++total.skipped;
    } else {
      todo.push_back(i);
    }
  }
  parallel(todo.size(), [&](std::size_t k) {
    const Cell& c = cells[todo[k]];
    unlearn_one(c, chosen.at({c.strategy, c.algorithm, c.alpha}), dir_of(c));
  });
  total.executed += todo.size() + trials.size();

  std::vector<eval::SummaryRow> rows = evaluate_cells(cells, dir_of, layout_.sweep_dir());
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.alpha < b.alpha; });
  std::ostringstream out;
  out << "strategy,algorithm,alpha,lr,metric,mean,ci95,n\n";
  for (const auto& r : rows) {
    std::string lr = "n/a";
    for (const auto& [key, v] : chosen) {
      if (std::get<0>(key) == r.strategy && unlearn::to_string(std::get<1>(key)) == r.algorithm &&
          std::get<2>(key) == r.alpha) {
        lr = alpha_label(v);
      }
    }
    out << r.strategy << ',' << r.algorithm << ',' << alpha_label(r.alpha) << ',' << lr << ',' << r.metric << ','
        << eval::format_number(r.stats.mean) << ','
        << (r.stats.half_width ? eval::format_number(*r.stats.half_width) : "n/a") << ',' << r.stats.n << '\n';
  }
  atomic_write(layout_.sweep_dir() / kSweepCsv, out.str());
  stats_ = total;
  return rows;
}

std::vector<CompareRow> compare_summaries(const std::string& csv_a, const std::string& csv_b) {
  auto parse = [](const std::string& csv, const char* which) {
    std::map<std::string, double> out;
    std::istringstream in(csv);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
      if (n++ == 0 || line.empty()) continue;
      std::vector<std::string> f;
      std::stringstream ls(line);
      for (std::string cell; std::getline(ls, cell, ',');) f.push_back(cell);
      if (f.size() != 7) {
        throw ValidationError(std::string("summary ") + which + ": line " + std::to_string(n) + " has " +
                              std::to_string(f.size()) + " columns, expected 7");
      }
      out[f[0] + "," + f[1] + "," + f[2] + "," + f[3]] = std::stod(f[4]);
    }
    return out;
  };
  const auto a = parse(csv_a, "A");
  const auto b = parse(csv_b, "B");
  std::set<std::string> keys;
  for (const auto& [k, _] : a) keys.insert(k);
  for (const auto& [k, _] : b) keys.insert(k);
  std::vector<CompareRow> rows;
  for (const auto& k : keys) {
    CompareRow r{k, std::nullopt, std::nullopt};
    if (auto it = a.find(k); it != a.end()) r.a = it->second;
    if (auto it = b.find(k); it != b.end()) r.b = it->second;
    rows.push_back(r);
  }
  return rows;
}

std::string format_comparison(const std::vector<CompareRow>& rows) {
  std::ostringstream out;
  out << "strategy,algorithm,alpha,metric,mean_a,mean_b,diff\n";
  for (const auto& r : rows) {
    out << r.key << ',' << (r.a ? eval::format_number(*r.a) : "missing") << ','
        << (r.b ? eval::format_number(*r.b) : "missing") << ','
        << (r.a && r.b ? eval::format_number(*r.b - *r.a) : "n/a") << '\n';
  }
  return out.str();
}

}  // namespace locun::harness
