// SPDX-License-Identifier: Apache-2.0
#include "locun/data/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>

#include "locun/error.hpp"
#include "locun/rng.hpp"

namespace locun::data {

TrainTest make_synthetic(const SyntheticSpec& spec) {
  if (spec.classes < 1) throw ConfigError("synthetic: classes must be positive");
  if (spec.n_train == 0 || spec.n_test == 0) throw ConfigError("synthetic: n_train and n_test must be positive");
  if (!(spec.label_noise >= 0.0 && spec.label_noise < 1.0)) throw ConfigError("synthetic: label_noise must be in [0, 1)");
  if (spec.label_noise > 0.0 && spec.classes < 2) throw ConfigError("synthetic: label noise needs at least 2 classes");
  const std::size_t d = spec.shape.numel();
  if (d == 0) throw ConfigError("synthetic: empty feature shape");

  std::vector<std::vector<double>> means(spec.classes, std::vector<double>(d));
  for (std::size_t c = 0; c < spec.classes; ++c) {
    Rng rng(spec.seed, Stream::synthetic, {0, c});
    for (double& m : means[c]) m = spec.mean_scale * rng.normal();
  }

  auto draw = [&](std::size_t n, std::uint64_t part, const std::string& name) {
    auto ds = std::make_shared<Dataset>();
    ds->name = name;
    ds->shape = spec.shape;
    ds->num_classes = spec.classes;
    ds->features.resize(n * d);
    ds->labels.resize(n);
    Rng rng(spec.seed, Stream::synthetic, {part});
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = i % spec.classes;
      ds->labels[i] = static_cast<int>(c);
      for (std::size_t k = 0; k < d; ++k) {
        ds->features[i * d + k] = static_cast<float>(means[c][k] + spec.noise_scale * rng.normal());
      }
    }
    return ds;
  };

  auto train = draw(spec.n_train, 1, "synthetic-train");
  auto test = draw(spec.n_test, 2, "synthetic-test");
  if (spec.label_noise > 0.0) {
    Rng rng(spec.seed, Stream::synthetic, {3});
    const auto flips = static_cast<std::size_t>(std::llround(spec.label_noise * static_cast<double>(spec.n_train)));
    for (std::size_t i : rng.sample(spec.n_train, flips)) {
      const auto y = static_cast<std::size_t>(train->labels[i]);
      const std::size_t shift = 1 + rng.index(spec.classes - 1);
      train->labels[i] = static_cast<int>((y + shift) % spec.classes);
    }
  }
  return {std::move(train), std::move(test)};
}

std::size_t IdxArray::element_count() const {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return dims.empty() ? 0 : n;
}

std::vector<double> IdxArray::values() const {
  const std::size_t n = element_count();
  std::vector<double> out(n);
  if (type == 0x08) {
    for (std::size_t i = 0; i < n; ++i) out[i] = payload[i];
  } else if (type == 0x0D) {
    for (std::size_t i = 0; i < n; ++i) {
      std::uint32_t u = 0;
      for (int b = 0; b < 4; ++b) u = (u << 8) | payload[i * 4 + static_cast<std::size_t>(b)];
      out[i] = std::bit_cast<float>(u);
    }
  } else {
    throw ParseError("idx: unsupported element type", 2);
  }
  return out;
}

namespace {

std::size_t element_width(std::uint8_t type, std::size_t offset) {
  switch (type) {
    case 0x08:
      return 1;
    case 0x0D:
      return 4;
    default:
      throw ParseError("idx: unsupported element type 0x" + std::to_string(type), offset);
  }
}

std::vector<std::uint8_t> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

IdxArray read_idx(const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = slurp(path);
  if (bytes.size() < 4) throw ParseError("idx: file shorter than the magic number", bytes.size());
  if (bytes[0] != 0 || bytes[1] != 0) throw ParseError("idx: magic must start with two zero bytes", 0);
  IdxArray a;
  a.type = bytes[2];
  const std::size_t width = element_width(a.type, 2);
  const std::size_t rank = bytes[3];
  if (rank == 0) throw ParseError("idx: rank must be positive", 3);
  std::size_t off = 4;
  for (std::size_t r = 0; r < rank; ++r) {
    if (off + 4 > bytes.size()) throw ParseError("idx: truncated dimension table", off);
    std::uint32_t d = 0;
    for (int b = 0; b < 4; ++b) d = (d << 8) | bytes[off++];
    a.dims.push_back(d);
  }
  const std::size_t want = a.element_count() * width;
  if (bytes.size() - off < want) throw ParseError("idx: payload truncated", bytes.size());
  if (bytes.size() - off > want) throw ParseError("idx: trailing bytes after payload", off + want);
  a.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(off), bytes.end());
  return a;
}

void write_idx(const std::filesystem::path& path, const IdxArray& a) {
  const std::size_t width = element_width(a.type, 2);
  if (a.payload.size() != a.element_count() * width) throw DimensionError("idx: payload does not match dims");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  const char magic[4] = {0, 0, static_cast<char>(a.type), static_cast<char>(a.dims.size())};
  out.write(magic, 4);
  for (std::uint32_t d : a.dims) {
    const char be[4] = {static_cast<char>(d >> 24), static_cast<char>(d >> 16), static_cast<char>(d >> 8),
                        static_cast<char>(d)};
    out.write(be, 4);
  }
  out.write(reinterpret_cast<const char*>(a.payload.data()), static_cast<std::streamsize>(a.payload.size()));
  if (!out) throw Error("failed writing " + path.string());
}

void minmax_normalize(Dataset& ds) {
  if (ds.features.empty()) return;
  const auto [lo, hi] = std::minmax_element(ds.features.begin(), ds.features.end());
  const double mn = *lo;
  const double range = static_cast<double>(*hi) - mn;
  for (float& f : ds.features) f = range > 0.0 ? static_cast<float>((f - mn) / range) : 0.0f;
}

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels, std::size_t classes,
                 std::string name) {
  const IdxArray img = read_idx(images);
  const IdxArray lab = read_idx(labels);
  if (lab.dims.size() != 1 || lab.type != 0x08) throw ParseError("idx labels: expected a rank-1 ubyte array", 2);
  if (img.dims.empty() || img.dims[0] != lab.dims[0]) {
    throw ValidationError("idx: image count does not match label count");
  }
  Dataset ds;
  ds.name = std::move(name);
  ds.num_classes = classes;
  std::vector<std::size_t> per(img.dims.begin() + 1, img.dims.end());
  if (per.empty()) per = {1};
  if (per.size() == 2) per.insert(per.begin(), 1);
  ds.shape = nn::Shape{per};
  const std::vector<double> v = img.values();
  ds.features.assign(v.begin(), v.end());
  for (std::uint8_t y : lab.payload) ds.labels.push_back(y);
  ds.validate();
  minmax_normalize(ds);
  return ds;
}

Dataset load_csv(const std::filesystem::path& path, std::size_t classes, std::optional<nn::Shape> shape,
                 std::string name) {
  const std::vector<std::uint8_t> raw = slurp(path);
  const std::string text(raw.begin(), raw.end());
  Dataset ds;
  ds.name = std::move(name);
  ds.num_classes = classes;
  std::size_t columns = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    std::size_t end = eol;
    if (end > pos && text[end - 1] == '\r') --end;
    if (end > pos) {
      std::size_t col = 0;
      std::size_t field = pos;
      while (field <= end) {
        std::size_t comma = text.find(',', field);
        if (comma == std::string::npos || comma > end) comma = end;
        std::size_t a = field, b = comma;
        while (a < b && (text[a] == ' ' || text[a] == '\t')) ++a;
        while (b > a && (text[b - 1] == ' ' || text[b - 1] == '\t')) --b;
        if (a == b) throw ParseError("csv: empty field", field);
        if (col == 0) {
          long long y = 0;
          auto [p, ec] = std::from_chars(text.data() + a, text.data() + b, y);
          if (ec != std::errc() || p != text.data() + b) throw ParseError("csv: label is not an integer", a);
          if (y < 0 || static_cast<std::size_t>(y) >= classes) {
            throw ValidationError("csv: label " + std::to_string(y) + " outside [0, " + std::to_string(classes) +
                                  ") at byte " + std::to_string(a));
          }
          ds.labels.push_back(static_cast<int>(y));
        } else {
          // from_chars for floating point is missing from older libstdc++, strtod on a bounded copy.
          const std::string tok = text.substr(a, b - a);
          char* stop = nullptr;
          const double v = std::strtod(tok.c_str(), &stop);
          if (stop != tok.c_str() + tok.size()) throw ParseError("csv: feature is not a number", a);
          ds.features.push_back(static_cast<float>(v));
        }
        ++col;
        field = comma + 1;
      }
      if (columns == 0) columns = col;
      if (col != columns) {
        throw ParseError("csv: row has " + std::to_string(col) + " columns, expected " + std::to_string(columns), pos);
      }
      if (col < 2) throw ParseError("csv: row has no feature columns", pos);
    }
    pos = eol + 1;
  }
  if (ds.labels.empty()) throw ParseError("csv: no rows", 0);
  ds.shape = shape.value_or(nn::Shape{{columns - 1}});
  if (ds.shape.numel() != columns - 1) throw ValidationError("csv: shape " + ds.shape.str() + " does not match columns");
  ds.validate();
  minmax_normalize(ds);
  return ds;
}

TrainTest split_train_test(const Dataset& ds, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ConfigError("test_fraction must be in (0, 1)");
  std::vector<std::vector<std::size_t>> by_class(ds.num_classes);
  for (std::size_t i = 0; i < ds.size(); ++i) by_class[static_cast<std::size_t>(ds.labels[i])].push_back(i);
  std::vector<std::uint8_t> is_test(ds.size(), 0);
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    Rng rng(seed, Stream::split, {0, c});
    const auto k = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(by_class[c].size())));
    for (std::size_t pick : rng.sample(by_class[c].size(), k)) is_test[by_class[c][pick]] = 1;
  }
  auto part = [&](bool test) {
    auto out = std::make_shared<Dataset>();
    out->name = ds.name + (test ? "-test" : "-train");
    out->shape = ds.shape;
    out->num_classes = ds.num_classes;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      if (static_cast<bool>(is_test[i]) != test) continue;
      auto r = ds.row(i);
      out->features.insert(out->features.end(), r.begin(), r.end());
      out->labels.push_back(ds.labels[i]);
    }
    return out;
  };
  return {part(false), part(true)};
}

}  // namespace locun::data
