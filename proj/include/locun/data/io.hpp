// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "locun/data/dataset.hpp"

namespace locun::data {

/// Class-conditional isotropic Gaussians. Class means are drawn once from
/// N(0, mean_scale^2 I) and depend only on `seed`; train and test examples
/// are independent draws around them.
struct SyntheticSpec {
  std::size_t classes = 8;
  nn::Shape shape{{16}};
  std::size_t n_train = 1000;
  std::size_t n_test = 500;
  double mean_scale = 1.0;
  double noise_scale = 1.0;
  /// Fraction of training labels replaced by a different class.
  double label_noise = 0.0;
  std::uint64_t seed = 0;

  friend bool operator==(const SyntheticSpec&, const SyntheticSpec&) = default;
};

struct TrainTest {
  DatasetPtr train;
  DatasetPtr test;
};

/// Balanced classes (example i has class i mod C before label noise).
TrainTest make_synthetic(const SyntheticSpec& spec);

/// Raw IDX array: big-endian magic (0, 0, type, rank), big-endian uint32
/// dims, then the payload in the stored element type.
struct IdxArray {
  std::uint8_t type = 0x08;  // 0x08 ubyte, 0x0D float32 (big-endian)
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> payload;

  std::size_t element_count() const;
  std::vector<double> values() const;
};

IdxArray read_idx(const std::filesystem::path& path);
void write_idx(const std::filesystem::path& path, const IdxArray& array);

/// Images IDX (rank >= 1, first dim = n) plus labels IDX (rank 1, ubyte).
/// Features are min-max scaled to [0, 1] over the whole file. Rank-3 image
/// files ({n, h, w}) load with shape {1, h, w}.
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels, std::size_t classes,
                 std::string name = "idx");

/// Headerless CSV, label in the first column. Features are min-max scaled to
/// [0, 1]. `shape`, when given, must match the column count.
Dataset load_csv(const std::filesystem::path& path, std::size_t classes, std::optional<nn::Shape> shape = std::nullopt,
                 std::string name = "csv");

/// Rescales every feature value to [(v - min) / (max - min)]; constant data maps to 0.
void minmax_normalize(Dataset& ds);

/// Stratified split into train and test by test_fraction (rounded per class).
TrainTest split_train_test(const Dataset& ds, double test_fraction, std::uint64_t seed);

}  // namespace locun::data
