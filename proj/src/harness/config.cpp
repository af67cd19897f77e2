// SPDX-License-Identifier: Apache-2.0
#include "locun/harness/config.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <type_traits>

#include "locun/error.hpp"
#include "locun/nn/checkpoint.hpp"

namespace locun::harness {

using nlohmann::json;

namespace {

template <class T>
T convert(const json& v, const std::string& where) {
  if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) throw ConfigError(where + ": expected a boolean");
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (!v.is_string()) throw ConfigError(where + ": expected a string");
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!v.is_number()) throw ConfigError(where + ": expected a number");
  } else if constexpr (std::is_unsigned_v<T>) {
    if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0)) throw ConfigError(where + ": expected a non-negative integer");
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) throw ConfigError(where + ": expected an integer");
  }
  return v.get<T>();
}

template <class T>
std::vector<T> convert_list(const json& v, const std::string& where) {
  if (!v.is_array()) throw ConfigError(where + ": expected a list");
  std::vector<T> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(convert<T>(v[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

/// Reads fields from one object and rejects keys nobody asked for.
class Fields {
 public:
  Fields(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
  }

  bool has(const char* key) const { return j_.contains(key) && !j_.at(key).is_null(); }

  const json& raw(const char* key) {
    seen_.insert(key);
    if (!j_.contains(key)) throw ConfigError(where_ + ": missing required key '" + key + "'");
    return j_.at(key);
  }

  template <class T>
  T req(const char* key) {
    return convert<T>(raw(key), path(key));
  }

  template <class T>
  T opt(const char* key, T fallback) {
    seen_.insert(key);
    return has(key) ? convert<T>(j_.at(key), path(key)) : fallback;
  }

  template <class T>
  std::optional<T> maybe(const char* key) {
    seen_.insert(key);
    if (!has(key)) return std::nullopt;
    return convert<T>(j_.at(key), path(key));
  }

  template <class T>
  std::vector<T> list(const char* key, bool required) {
    seen_.insert(key);
    if (!has(key)) {
      if (required) throw ConfigError(where_ + ": missing required key '" + key + "'");
      return {};
    }
    return convert_list<T>(j_.at(key), path(key));
  }

  /// Accepts the key when present without reading it.
  void allow(const char* key) { seen_.insert(key); }

  std::string path(const char* key) const { return where_ + "." + key; }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(where_ + ": unknown key '" + it.key() + "'");
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

const char* to_string(DatasetKind k) {
  switch (k) {
    case DatasetKind::synthetic: return "synthetic";
    case DatasetKind::idx: return "idx";
    case DatasetKind::csv: return "csv";
  }
  return "?";
}

const char* to_string(loc::RandomGranularity g) {
  return g == loc::RandomGranularity::channel ? "channel" : "parameter";
}

template <class F>
auto as_config_error(const std::string& where, F&& f) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

DatasetConfig dataset_from_json(const json& j) {
  Fields f(j, "dataset");
  DatasetConfig d;
  const std::string kind = f.req<std::string>("kind");
  if (kind == "synthetic") {
    d.kind = DatasetKind::synthetic;
    d.synthetic.classes = f.req<std::size_t>("classes");
    d.synthetic.shape.dims = f.list<std::size_t>("shape", true);
    d.synthetic.n_train = f.req<std::size_t>("n_train");
    d.synthetic.n_test = f.req<std::size_t>("n_test");
    d.synthetic.mean_scale = f.opt<double>("mean_scale", 1.0);
    d.synthetic.noise_scale = f.opt<double>("noise_scale", 1.0);
    d.synthetic.label_noise = f.opt<double>("label_noise", 0.0);
    d.synthetic.seed = f.opt<std::uint64_t>("seed", 0);
  } else if (kind == "idx") {
    d.kind = DatasetKind::idx;
    d.train_images = f.req<std::string>("train_images");
    d.train_labels = f.req<std::string>("train_labels");
    d.test_images = f.req<std::string>("test_images");
    d.test_labels = f.req<std::string>("test_labels");
    d.classes = f.req<std::size_t>("classes");
  } else if (kind == "csv") {
    d.kind = DatasetKind::csv;
    d.csv_path = f.req<std::string>("path");
    d.classes = f.req<std::size_t>("classes");
    d.test_fraction = f.opt<double>("test_fraction", 0.2);
    d.split_seed = f.opt<std::uint64_t>("split_seed", 0);
    if (f.has("shape")) d.shape = nn::Shape{f.list<std::size_t>("shape", true)};
  } else {
    throw ConfigError("dataset.kind: unknown dataset kind '" + kind + "'");
  }
  f.finish();
  return d;
}

json to_json(const DatasetConfig& d) {
  json j{{"kind", to_string(d.kind)}};
  switch (d.kind) {
    case DatasetKind::synthetic:
      j["classes"] = d.synthetic.classes;
      j["shape"] = d.synthetic.shape.dims;
      j["n_train"] = d.synthetic.n_train;
      j["n_test"] = d.synthetic.n_test;
      j["mean_scale"] = d.synthetic.mean_scale;
      j["noise_scale"] = d.synthetic.noise_scale;
      j["label_noise"] = d.synthetic.label_noise;
      j["seed"] = d.synthetic.seed;
      break;
    case DatasetKind::idx:
      j["train_images"] = d.train_images;
      j["train_labels"] = d.train_labels;
      j["test_images"] = d.test_images;
      j["test_labels"] = d.test_labels;
      j["classes"] = d.classes;
      break;
    case DatasetKind::csv:
      j["path"] = d.csv_path;
      j["classes"] = d.classes;
      j["test_fraction"] = d.test_fraction;
      j["split_seed"] = d.split_seed;
      if (d.shape) j["shape"] = d.shape->dims;
      break;
  }
  return j;
}

StrategyConfig strategy_from_json(const json& j, std::size_t index) {
  Fields f(j, "strategies[" + std::to_string(index) + "]");
  StrategyConfig s;
  s.kind = as_config_error(f.path("kind"), [&] { return strategy_kind_from_string(f.req<std::string>("kind")); });
  s.alphas = f.list<double>("alphas", s.kind != StrategyKind::random);
  switch (s.kind) {
    case StrategyKind::del:
      s.h = f.opt<std::size_t>("h", 10);
      break;
    case StrategyKind::criterion:
      s.h = f.opt<std::size_t>("h", 10);
      s.criterion = as_config_error(f.path("criterion"),
                                    [&] { return loc::criterion_from_string(f.req<std::string>("criterion")); });
      s.granularity = as_config_error(f.path("granularity"),
                                      [&] { return loc::granularity_from_string(f.req<std::string>("granularity")); });
      break;
    case StrategyKind::critmem:
      s.critmem_bound = f.maybe<std::size_t>("bound");
      break;
    case StrategyKind::random: {
      s.reference = f.req<std::string>("reference");
      const std::string g = f.opt<std::string>("granularity", "channel");
      if (g == "channel") {
        s.random_granularity = loc::RandomGranularity::channel;
      } else if (g == "parameter") {
        s.random_granularity = loc::RandomGranularity::parameter;
      } else {
        throw ConfigError(f.path("granularity") + ": expected 'channel' or 'parameter'");
      }
      break;
    }
    default:
      break;
  }
  if (f.has("id")) {
    s.id = f.req<std::string>("id");
  } else {
    f.allow("id");
    switch (s.kind) {
      case StrategyKind::criterion:
        s.id = std::string(loc::to_string(s.criterion)) + "-" + loc::to_string(s.granularity);
        break;
      case StrategyKind::random:
        s.id = "random-" + s.reference +
               (s.random_granularity == loc::RandomGranularity::parameter ? "-parameter" : "");
        break;
      default:
        s.id = to_string(s.kind);
        break;
    }
  }
  f.finish();
  return s;
}

json to_json(const StrategyConfig& s) {
  json j{{"id", s.id}, {"kind", to_string(s.kind)}, {"alphas", s.alphas}};
  switch (s.kind) {
    case StrategyKind::del:
      j["h"] = s.h;
      break;
    case StrategyKind::criterion:
      j["h"] = s.h;
      j["criterion"] = loc::to_string(s.criterion);
      j["granularity"] = loc::to_string(s.granularity);
      break;
    case StrategyKind::critmem:
      if (s.critmem_bound) j["bound"] = *s.critmem_bound;
      break;
    case StrategyKind::random:
      j["reference"] = s.reference;
      j["granularity"] = to_string(s.random_granularity);
      break;
    default:
      break;
  }
  return j;
}

AlgorithmConfig algorithm_from_json(const json& j, std::size_t index) {
  Fields f(j, "algorithms[" + std::to_string(index) + "]");
  AlgorithmConfig a;
  a.algorithm = as_config_error(f.path("name"),
                                [&] { return unlearn::algorithm_from_string(f.req<std::string>("name")); });
  a.epochs = f.req<std::size_t>("epochs");
  a.lr = f.req<double>("lr");
  a.lr_candidates = f.list<double>("lr_candidates", false);
  a.batch_size = f.opt<std::size_t>("batch_size", 128);
  a.momentum = f.opt<double>("momentum", 0.9);
  a.weight_decay = f.opt<double>("weight_decay", 0.0);
  a.l1_lambda = f.opt<double>("l1_lambda", 0.0);
  a.beta = f.opt<double>("beta", 0.95);
  f.finish();
  return a;
}

json to_json(const AlgorithmConfig& a) {
  return {{"name", unlearn::to_string(a.algorithm)},
          {"epochs", a.epochs},
          {"lr", a.lr},
          {"lr_candidates", a.lr_candidates},
          {"batch_size", a.batch_size},
          {"momentum", a.momentum},
          {"weight_decay", a.weight_decay},
          {"l1_lambda", a.l1_lambda},
          {"beta", a.beta}};
}

bool valid_id(const std::string& id) {
  if (id.empty() || id == "original" || id == "oracle" || id == "sweep") return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' || c == '-' || c == '.';
  });
}

}  // namespace

const char* to_string(StrategyKind k) noexcept {
  switch (k) {
    case StrategyKind::del: return "del";
    case StrategyKind::salloc: return "salloc";
    case StrategyKind::deepest: return "deepest";
    case StrategyKind::shallowest: return "shallowest";
    case StrategyKind::critmem: return "critmem";
    case StrategyKind::criterion: return "criterion";
    case StrategyKind::random: return "random";
    case StrategyKind::full: return "full";
  }
  return "?";
}

StrategyKind strategy_kind_from_string(const std::string& name) {
  for (StrategyKind k : {StrategyKind::del, StrategyKind::salloc, StrategyKind::deepest, StrategyKind::shallowest,
                         StrategyKind::critmem, StrategyKind::criterion, StrategyKind::random, StrategyKind::full}) {
    if (name == to_string(k)) return k;
  }
  throw ConfigError("unknown strategy '" + name + "'");
}

ExperimentConfig config_from_json(const json& j) {
  Fields f(j, "config");
  if (!f.has("schema_version")) throw ConfigError("config: missing schema_version");
  const int version = f.req<int>("schema_version");
  if (version != kSchemaVersion) {
    throw ConfigError("config: unsupported schema_version " + std::to_string(version) + " (expected " +
                      std::to_string(kSchemaVersion) + ")");
  }
  ExperimentConfig c;
  c.name = f.opt<std::string>("name", "");
  c.dataset = dataset_from_json(f.raw("dataset"));
  c.arch = nn::arch_from_json(f.raw("architecture"));

  {
    Fields t(f.raw("train"), "train");
    c.train.epochs = t.req<std::size_t>("epochs");
    c.train.lr = t.req<double>("lr");
    c.train.batch_size = t.opt<std::size_t>("batch_size", 128);
    c.train.momentum = t.opt<double>("momentum", 0.9);
    c.train.weight_decay = t.opt<double>("weight_decay", 5e-4);
    c.train.eta_min_frac = t.opt<double>("eta_min_frac", 0.01);
    t.finish();
  }
  if (f.has("oracle")) {
    Fields o(f.raw("oracle"), "oracle");
    c.oracle.epochs = o.maybe<std::size_t>("epochs");
    c.oracle.lr = o.maybe<double>("lr");
    o.finish();
  } else {
    f.allow("oracle");
  }
  {
    Fields g(f.raw("forget"), "forget");
    c.forget.kind = as_config_error("forget.kind", [&] { return data::forget_kind_from_string(g.req<std::string>("kind")); });
    c.forget.fraction = g.req<double>("fraction");
    c.forget.classes = g.list<int>("classes", false);
    g.finish();
  }

  const json& strategies = f.raw("strategies");
  if (!strategies.is_array()) throw ConfigError("config.strategies: expected a list");
  for (std::size_t i = 0; i < strategies.size(); ++i) c.strategies.push_back(strategy_from_json(strategies[i], i));
  // A random control without its own alphas takes its reference's.
  for (StrategyConfig& s : c.strategies) {
    if (s.kind != StrategyKind::random || !s.alphas.empty()) continue;
    for (const StrategyConfig& r : c.strategies)
      if (r.id == s.reference) s.alphas = r.alphas;
  }
  const json& algorithms = f.raw("algorithms");
  if (!algorithms.is_array()) throw ConfigError("config.algorithms: expected a list");
  for (std::size_t i = 0; i < algorithms.size(); ++i) c.algorithms.push_back(algorithm_from_json(algorithms[i], i));

  c.seeds = f.list<std::uint64_t>("seeds", true);
  c.validation_seed = f.opt<std::uint64_t>("validation_seed", 1000);
  c.include_oracle_row = f.opt<bool>("include_oracle_row", false);
  c.output_dir = f.opt<std::string>("output_dir", "");
  f.finish();
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

json to_json(const ExperimentConfig& c) {
  json strategies = json::array();
  for (const auto& s : c.strategies) strategies.push_back(to_json(s));
  json algorithms = json::array();
  for (const auto& a : c.algorithms) algorithms.push_back(to_json(a));
  json oracle = json::object();
  if (c.oracle.epochs) oracle["epochs"] = *c.oracle.epochs;
  if (c.oracle.lr) oracle["lr"] = *c.oracle.lr;
  json forget{{"kind", data::to_string(c.forget.kind)}, {"fraction", c.forget.fraction}};
  if (!c.forget.classes.empty()) forget["classes"] = c.forget.classes;
  return {{"schema_version", c.schema_version},
          {"name", c.name},
          {"dataset", to_json(c.dataset)},
          {"architecture", nn::arch_to_json(c.arch)},
          {"train",
           {{"epochs", c.train.epochs},
            {"lr", c.train.lr},
            {"batch_size", c.train.batch_size},
            {"momentum", c.train.momentum},
            {"weight_decay", c.train.weight_decay},
            {"eta_min_frac", c.train.eta_min_frac}}},
          {"oracle", oracle},
          {"forget", forget},
          {"strategies", strategies},
          {"algorithms", algorithms},
          {"seeds", c.seeds},
          {"validation_seed", c.validation_seed},
          {"include_oracle_row", c.include_oracle_row},
          {"output_dir", c.output_dir}};
}

void ExperimentConfig::validate() const {
  if (schema_version != kSchemaVersion) throw ConfigError("unsupported schema_version");

  std::size_t classes = 0;
  std::optional<nn::Shape> shape;
  switch (dataset.kind) {
    case DatasetKind::synthetic: {
      const auto& s = dataset.synthetic;
      classes = s.classes;
      shape = s.shape;
      if (s.n_train == 0 || s.n_test == 0) throw ConfigError("dataset: n_train and n_test must be positive");
      if (s.shape.dims.empty() || s.shape.numel() == 0) throw ConfigError("dataset.shape: must be non-empty");
      if (!(s.label_noise >= 0.0 && s.label_noise < 1.0)) throw ConfigError("dataset.label_noise: must lie in [0, 1)");
      if (!(s.noise_scale >= 0.0) || !(s.mean_scale >= 0.0)) throw ConfigError("dataset: scales must be >= 0");
      break;
    }
    case DatasetKind::idx:
      classes = dataset.classes;
      if (dataset.train_images.empty() || dataset.train_labels.empty() || dataset.test_images.empty() ||
          dataset.test_labels.empty()) {
        throw ConfigError("dataset: idx needs train_images, train_labels, test_images and test_labels");
      }
      break;
    case DatasetKind::csv:
      classes = dataset.classes;
      shape = dataset.shape;
      if (dataset.csv_path.empty()) throw ConfigError("dataset.path: must be set");
      if (!(dataset.test_fraction > 0.0 && dataset.test_fraction < 1.0)) {
        throw ConfigError("dataset.test_fraction: must lie in (0, 1)");
      }
      break;
  }
  if (classes < 2) throw ConfigError("dataset.classes: need at least 2 classes");

  const nn::Model model = as_config_error("architecture", [&] { return nn::Model::build(arch); });
  if (shape && !(*shape == arch.input)) {
    throw ConfigError("architecture.input_shape " + arch.input.str() + " does not match dataset shape " + shape->str());
  }
  if (model.num_classes() != classes) {
    throw ConfigError("architecture: classifier has " + std::to_string(model.num_classes()) + " outputs but dataset has " +
                      std::to_string(classes) + " classes");
  }

  as_config_error("train", [&] {
    train_recipe(0).validate();
    return 0;
  });
  as_config_error("oracle", [&] {
    oracle_recipe(0).validate();
    return 0;
  });

  if (!(forget.fraction > 0.0 && forget.fraction < 1.0)) throw ConfigError("forget.fraction: must lie in (0, 1)");
  if (forget.kind == data::ForgetKind::non_iid) {
    if (forget.classes.empty()) throw ConfigError("forget.classes: non_iid needs at least one class");
    std::set<int> seen;
    for (int k : forget.classes) {
      if (k < 0 || static_cast<std::size_t>(k) >= classes) {
        throw ConfigError("forget.classes: class " + std::to_string(k) + " out of range");
      }
      if (!seen.insert(k).second) throw ConfigError("forget.classes: duplicate class " + std::to_string(k));
    }
  } else if (!forget.classes.empty()) {
    throw ConfigError("forget.classes: only non_iid forget sets take classes");
  }

  std::set<std::string> ids;
  for (const StrategyConfig& s : strategies) {
    if (!valid_id(s.id)) throw ConfigError("strategy id '" + s.id + "' is not a valid directory name");
    if (!ids.insert(s.id).second) throw ConfigError("duplicate strategy id '" + s.id + "'");
    if (s.alphas.empty()) throw ConfigError("strategy '" + s.id + "': alphas must be non-empty");
    std::set<double> seen;
    for (double a : s.alphas) {
      if (!(a >= 0.0 && a <= 1.0)) throw ConfigError("strategy '" + s.id + "': alpha must lie in [0, 1]");
      if (!seen.insert(a).second) throw ConfigError("strategy '" + s.id + "': duplicate alpha " + alpha_label(a));
    }
    if (s.h == 0) throw ConfigError("strategy '" + s.id + "': h must be positive");
    if (s.critmem_bound && *s.critmem_bound == 0) throw ConfigError("strategy '" + s.id + "': bound must be positive");
    if (s.kind == StrategyKind::full && s.alphas != std::vector<double>{1.0}) {
      throw ConfigError("strategy '" + s.id + "': the full mask only fits alpha 1");
    }
  }
  for (const StrategyConfig& s : strategies) {
    if (s.kind != StrategyKind::random) continue;
    auto it = std::find_if(strategies.begin(), strategies.end(), [&](const auto& r) { return r.id == s.reference; });
    if (it == strategies.end()) throw ConfigError("strategy '" + s.id + "': unknown reference '" + s.reference + "'");
    if (it->kind == StrategyKind::random) {
      throw ConfigError("strategy '" + s.id + "': reference '" + s.reference + "' is itself random");
    }
  }

  std::set<unlearn::Algorithm> algs;
  for (const AlgorithmConfig& a : algorithms) {
    const std::string name = unlearn::to_string(a.algorithm);
    if (a.algorithm == unlearn::Algorithm::retrain_oracle) {
      throw ConfigError("algorithms: retrain_oracle is the reference, not a grid entry");
    }
    if (!algs.insert(a.algorithm).second) throw ConfigError("duplicate algorithm '" + name + "'");
    unlearn::UnlearnConfig u = unlearn_recipe(a, a.lr, 0);
    u.mask = Mask::zeros(1);
    as_config_error("algorithm '" + name + "'", [&] {
      u.validate();
      return 0;
    });
    for (double lr : a.lr_candidates) {
      if (!(lr > 0.0)) throw ConfigError("algorithm '" + name + "': lr candidates must be positive");
    }
  }

  if (seeds.empty()) throw ConfigError("seeds: must be non-empty");
  std::set<std::uint64_t> seed_set(seeds.begin(), seeds.end());
  if (seed_set.size() != seeds.size()) throw ConfigError("seeds: duplicates");
  if (seed_set.count(validation_seed)) {
    throw ConfigError("validation_seed " + std::to_string(validation_seed) + " must not be one of the seeds");
  }
}

const StrategyConfig& ExperimentConfig::strategy(const std::string& id) const {
  for (const auto& s : strategies)
    if (s.id == id) return s;
  throw ConfigError("unknown strategy id '" + id + "'");
}

unlearn::UnlearnConfig ExperimentConfig::train_recipe(std::uint64_t seed) const {
  unlearn::UnlearnConfig u;
  u.algorithm = unlearn::Algorithm::retrain_oracle;
  u.epochs = train.epochs;
  u.schedule = {nn::ScheduleKind::cosine, train.lr, train.eta_min_frac, 1};
  u.batch_size = train.batch_size;
  u.momentum = train.momentum;
  u.weight_decay = train.weight_decay;
  u.seed = seed;
  return u;
}

unlearn::UnlearnConfig ExperimentConfig::oracle_recipe(std::uint64_t seed) const {
  unlearn::UnlearnConfig u = unlearn::oracle_config(train_recipe(seed));
  if (oracle.epochs) u.epochs = *oracle.epochs;
  if (oracle.lr) u.schedule.lr_init = *oracle.lr;
  return u;
}

unlearn::UnlearnConfig ExperimentConfig::unlearn_recipe(const AlgorithmConfig& a, double lr, std::uint64_t seed) const {
  unlearn::UnlearnConfig u;
  u.algorithm = a.algorithm;
  u.epochs = a.epochs;
  u.schedule = unlearn::default_schedule(a.algorithm, lr);
  u.batch_size = a.batch_size;
  u.momentum = a.momentum;
  u.weight_decay = a.weight_decay;
  u.l1_lambda = a.l1_lambda;
  u.beta = a.beta;
  u.seed = seed;
  return u;
}

std::string config_hash(const ExperimentConfig& c) {
  json j = to_json(c);
  j.erase("seeds");
  j.erase("output_dir");
  const std::string text = j.dump();
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(text.data(), text.size(), md, &len, EVP_sha256(), nullptr) != 1) throw Error("sha256 failed");
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < 8; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", md[i]);
    hex += buf;
  }
  return hex;
}

std::string alpha_label(double alpha) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, alpha);
  return std::string(buf, r.ptr);
}

}  // namespace locun::harness
