// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "locun/data/dataset.hpp"
#include "locun/data/io.hpp"
#include "locun/data/split.hpp"
#include "locun/error.hpp"
#include "locun/rng.hpp"

namespace locun::data {
namespace {

namespace fs = std::filesystem;

DatasetPtr labeled(std::vector<int> labels, std::size_t classes) {
  auto ds = std::make_shared<Dataset>();
  ds->name = "fixture";
  ds->shape = nn::Shape{{1}};
  ds->num_classes = classes;
  ds->labels = std::move(labels);
  for (std::size_t i = 0; i < ds->labels.size(); ++i) ds->features.push_back(static_cast<float>(i));
  return ds;
}

DatasetPtr balanced(std::size_t per_class, std::size_t classes) {
  std::vector<int> labels;
  for (std::size_t i = 0; i < per_class * classes; ++i) labels.push_back(static_cast<int>(i % classes));
  return labeled(std::move(labels), classes);
}

class TempDir {
 public:
  TempDir() : path_(fs::temp_directory_path() / ("locun-data-" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "-" +
                                                 ::testing::UnitTest::GetInstance()->current_test_info()->name())) {
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  fs::path operator/(const std::string& f) const { return path_ / f; }

 private:
  fs::path path_;
};

void write_text(const fs::path& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

TEST(SyntheticTest, SameSpecGivesIdenticalData) {
  SyntheticSpec spec;
  spec.classes = 2;
  spec.shape = nn::Shape{{2}};
  spec.n_train = 8;
  spec.n_test = 4;
  spec.seed = 7;
  const TrainTest a = make_synthetic(spec);
  const TrainTest b = make_synthetic(spec);
  EXPECT_EQ(a.train->features, b.train->features);
  EXPECT_EQ(a.train->labels, b.train->labels);
  EXPECT_EQ(a.train->checksum(), b.train->checksum());
  EXPECT_EQ(a.test->checksum(), b.test->checksum());

  spec.seed = 8;
  EXPECT_NE(make_synthetic(spec).train->checksum(), a.train->checksum());
}

TEST(SyntheticTest, BalancedClassesAndLabelNoiseFlipsExactCount) {
  SyntheticSpec spec;
  spec.classes = 4;
  spec.n_train = 400;
  spec.n_test = 80;
  const TrainTest clean = make_synthetic(spec);
  EXPECT_EQ(clean.train->class_counts(), (std::vector<std::size_t>{100, 100, 100, 100}));
  clean.train->validate();

  spec.label_noise = 0.1;
  const TrainTest noisy = make_synthetic(spec);
  std::size_t flipped = 0;
  for (std::size_t i = 0; i < 400; ++i) flipped += noisy.train->labels[i] != clean.train->labels[i];
  EXPECT_EQ(flipped, 40u);
  EXPECT_EQ(noisy.train->features, clean.train->features);
  EXPECT_EQ(noisy.test->labels, clean.test->labels);
}

TEST(CsvTest, LoadsAndNormalizes) {
  TempDir dir;
  write_text(dir / "a.csv", "0, 2.0, 4\n1,6,8\r\n\n2,10,12\n");
  const Dataset ds = load_csv(dir / "a.csv", 3);
  EXPECT_EQ(ds.size(), 3u);
  EXPECT_EQ(ds.shape, (nn::Shape{{2}}));
  EXPECT_EQ(ds.labels, (std::vector<int>{0, 1, 2}));
  EXPECT_FLOAT_EQ(ds.features.front(), 0.0f);
  EXPECT_FLOAT_EQ(ds.features.back(), 1.0f);
  EXPECT_FLOAT_EQ(ds.features[1], 0.2f);
}

TEST(CsvTest, LabelEqualToClassCountIsValidationError) {
  TempDir dir;
  write_text(dir / "bad.csv", "0,1,2\n3,4,5\n");
  EXPECT_THROW(load_csv(dir / "bad.csv", 3), ValidationError);
}

TEST(CsvTest, MalformedFieldReportsByteOffset) {
  TempDir dir;
  write_text(dir / "bad.csv", "0,1,2\n1,x,5\n");
  try {
    load_csv(dir / "bad.csv", 3);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.byte_offset(), 8u);
  }
  write_text(dir / "ragged.csv", "0,1,2\n1,5\n");
  EXPECT_THROW(load_csv(dir / "ragged.csv", 3), ParseError);
}

TEST(IdxTest, WriteThenReadPreservesBytes) {
  TempDir dir;
  Rng rng(3);
  IdxArray img;
  img.type = 0x08;
  img.dims = {5, 3, 4};
  for (std::size_t i = 0; i < 60; ++i) img.payload.push_back(static_cast<std::uint8_t>(rng.index(256)));
  write_idx(dir / "img.idx", img);
  const IdxArray back = read_idx(dir / "img.idx");
  EXPECT_EQ(back.type, img.type);
  EXPECT_EQ(back.dims, img.dims);
  EXPECT_EQ(back.payload, img.payload);

  IdxArray lab{0x08, {5}, {0, 1, 2, 1, 0}};
  write_idx(dir / "lab.idx", lab);
  const Dataset ds = load_idx(dir / "img.idx", dir / "lab.idx", 3);
  EXPECT_EQ(ds.shape, (nn::Shape{{1, 3, 4}}));
  const auto [lo, hi] = std::minmax_element(img.payload.begin(), img.payload.end());
  for (std::size_t i = 0; i < 60; ++i) {
    EXPECT_FLOAT_EQ(ds.features[i], static_cast<float>((img.payload[i] - *lo) / static_cast<double>(*hi - *lo)));
  }
}

TEST(IdxTest, FloatArraysRoundTrip) {
  TempDir dir;
  IdxArray a{0x0D, {2}, {0x3f, 0x80, 0x00, 0x00, 0xc0, 0x00, 0x00, 0x00}};
  write_idx(dir / "f.idx", a);
  EXPECT_EQ(read_idx(dir / "f.idx").values(), (std::vector<double>{1.0, -2.0}));
}

TEST(IdxTest, TruncatedFileIsParseError) {
  TempDir dir;
  write_text(dir / "t.idx", std::string("\x00\x00\x08\x01\x00\x00\x00\x05\x01\x02", 10));
  EXPECT_THROW(read_idx(dir / "t.idx"), ParseError);
  write_text(dir / "m.idx", std::string("\x01\x00\x08\x01", 4));
  EXPECT_THROW(read_idx(dir / "m.idx"), ParseError);
}

TEST(SplitTest, IidTenPercentOfFiftyThousand) {
  const DatasetPtr ds = balanced(5000, 10);
  const SplitSet s = make_split(*ds, {ForgetKind::iid, 0.10, {}, 1});
  EXPECT_EQ(s.forget_indices.size(), 5000u);
  EXPECT_EQ(s.retain_indices.size(), 45000u);
}

TEST(SplitTest, NonIidTakesHalfOfEachListedClass) {
  const DatasetPtr ds = balanced(5000, 10);
  const SplitSet s = make_split(*ds, {ForgetKind::non_iid, 0.10, {2, 5}, 1});
  ASSERT_EQ(s.forget_indices.size(), 5000u);
  std::size_t two = 0, five = 0;
  for (std::size_t i : s.forget_indices) {
    two += ds->labels[i] == 2;
    five += ds->labels[i] == 5;
  }
  EXPECT_EQ(two, 2500u);
  EXPECT_EQ(five, 2500u);
}

TEST(SplitTest, SingletonForgetSetIsValid) {
  const DatasetPtr ds = balanced(10, 2);
  const SplitSet s = make_split(*ds, {ForgetKind::iid, 0.05, {}, 3});
  EXPECT_EQ(s.forget_indices.size(), 1u);
}

TEST(SplitTest, NonIidShortfallIsReported) {
  const DatasetPtr ds = balanced(10, 10);
  try {
    make_split(*ds, {ForgetKind::non_iid, 0.5, {1}, 0});
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("shortfall 40"), std::string::npos) << e.what();
  }
  EXPECT_THROW(make_split(*ds, {ForgetKind::non_iid, 0.1, {}, 0}), ConfigError);
}

TEST(SplitTest, NonIidRedistributesAroundASmallClass) {
  std::vector<int> labels;
  for (int i = 0; i < 3; ++i) labels.push_back(0);
  for (int i = 0; i < 40; ++i) labels.push_back(1);
  for (int i = 0; i < 57; ++i) labels.push_back(2);
  const DatasetPtr ds = labeled(labels, 3);
  const SplitSet s = make_split(*ds, {ForgetKind::non_iid, 0.2, {0, 1}, 5});
  ASSERT_EQ(s.forget_indices.size(), 20u);
  std::size_t zero = 0;
  for (std::size_t i : s.forget_indices) zero += ds->labels[i] == 0;
  EXPECT_EQ(zero, 3u);
}

TEST(SplitTest, PartitionPurityAndSizeProperties) {
  Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t classes = 2 + rng.index(8);
    std::vector<int> labels(50 + rng.index(400));
    for (int& y : labels) y = static_cast<int>(rng.index(classes));
    const DatasetPtr ds = labeled(labels, classes);
    ForgetSpec spec;
    spec.fraction = 0.02 + 0.2 * rng.uniform();
    spec.seed = rng.next_u64();
    if (rng.index(2)) {
      spec.kind = ForgetKind::non_iid;
      const std::size_t k = 1 + rng.index(std::min<std::size_t>(3, classes));
      for (std::size_t c : rng.sample(classes, k)) spec.classes.push_back(static_cast<int>(c));
    }
    SplitSet s;
    try {
      s = make_split(*ds, spec);
    } catch (const ValidationError&) {
      continue;  // listed classes too small for this fraction
    }
    std::vector<std::size_t> all = s.forget_indices;
    all.insert(all.end(), s.retain_indices.begin(), s.retain_indices.end());
    std::sort(all.begin(), all.end());
    ASSERT_EQ(all.size(), labels.size());
    for (std::size_t i = 0; i < all.size(); ++i) ASSERT_EQ(all[i], i);

    const double target = std::round(spec.fraction * static_cast<double>(labels.size()));
    const double slack = spec.kind == ForgetKind::iid ? 1.0 : static_cast<double>(spec.classes.size());
    EXPECT_LE(std::abs(static_cast<double>(s.forget_indices.size()) - target), slack);
    if (spec.kind == ForgetKind::non_iid) {
      const std::set<int> allowed(spec.classes.begin(), spec.classes.end());
      for (std::size_t i : s.forget_indices) EXPECT_TRUE(allowed.count(ds->labels[i]));
    }
  }
}

TEST(CalibrationTest, MatchesBalancedTestHistogram) {
  const DatasetPtr train = balanced(300, 4);
  const DatasetPtr test = balanced(100, 4);
  const SplitSet s = make_split(*train, {ForgetKind::iid, 0.1, {}, 2});
  const DataView retain = s.retain(train);
  const CalibrationSubset c = mia_calibration_subset(retain, *test, 9);
  EXPECT_TRUE(c.warnings.empty());
  ASSERT_EQ(c.indices.size(), 400u);
  std::vector<std::size_t> hist(4, 0);
  const std::set<std::size_t> retained(s.retain_indices.begin(), s.retain_indices.end());
  for (std::size_t i : c.indices) {
    EXPECT_TRUE(retained.count(i));
    ++hist[static_cast<std::size_t>(train->labels[i])];
  }
  EXPECT_EQ(hist, (std::vector<std::size_t>{100, 100, 100, 100}));
  EXPECT_EQ(mia_calibration_subset(retain, *test, 9).indices, c.indices);
  EXPECT_NE(mia_calibration_subset(retain, *test, 10).indices, c.indices);
}

TEST(CalibrationTest, MissingClassIsFilledFromOthersWithWarning) {
  const DatasetPtr train = balanced(50, 4);
  const DatasetPtr test = balanced(10, 4);
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < train->size(); ++i)
    if (train->labels[i] != 3) keep.push_back(i);
  const CalibrationSubset c = mia_calibration_subset(DataView(train, keep), *test, 1);
  ASSERT_EQ(c.indices.size(), 40u);
  ASSERT_EQ(c.warnings.size(), 1u);
  EXPECT_NE(c.warnings[0].find("class 3"), std::string::npos);
  std::vector<std::size_t> hist(4, 0);
  for (std::size_t i : c.indices) ++hist[static_cast<std::size_t>(train->labels[i])];
  EXPECT_EQ(hist[3], 0u);
  EXPECT_EQ(hist[0] + hist[1] + hist[2], 40u);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_GE(hist[k], 10u);
  EXPECT_EQ(std::set<std::size_t>(c.indices.begin(), c.indices.end()).size(), 40u);
}

TEST(CalibrationTest, RetainSmallerThanTestIsError) {
  const DatasetPtr train = balanced(2, 2);
  const DatasetPtr test = balanced(5, 2);
  EXPECT_THROW(mia_calibration_subset(DataView::all(train), *test, 0), ValidationError);
}

TEST(ViewTest, AccessLogCountsGatheredRows) {
  const DatasetPtr ds = balanced(5, 2);
  auto log = std::make_shared<AccessLog>(ds->size());
  const DataView v = DataView(ds, {1, 3, 5}).with_log(log);
  const nn::LabeledBatch b = v.slice(0, 3);
  EXPECT_EQ(b.size, 3u);
  EXPECT_EQ(b.features, (std::vector<float>{1, 3, 5}));
  EXPECT_EQ(log->count(3), 1u);
  EXPECT_EQ(log->count(0), 0u);
  const std::vector<std::size_t> touched{1, 3, 5};
  EXPECT_EQ(log->total(touched), 3u);
}

TEST(ViewTest, LabelOverridesSurviveConcat) {
  const DatasetPtr ds = balanced(3, 2);
  const DataView a(ds, {0, 1});
  const DataView b = DataView(ds, {2}).with_labels({1});
  const DataView c = DataView::concat(a, b);
  EXPECT_EQ(c.size(), 3u);
  EXPECT_EQ(c.label(0), 0);
  EXPECT_EQ(c.label(2), 1);
  EXPECT_EQ(ds->labels[2], 0);
}

TEST(ViewTest, EpochOrderIsDeterministicPermutation) {
  const auto a = epoch_order(100, 5, 3);
  EXPECT_EQ(a, epoch_order(100, 5, 3));
  EXPECT_NE(a, epoch_order(100, 5, 4));
  auto sorted = a;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < 100; ++i) EXPECT_EQ(sorted[i], i);
}

}  // namespace
}  // namespace locun::data
