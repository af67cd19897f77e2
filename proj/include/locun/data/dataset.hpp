// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "locun/nn/engine.hpp"
#include "locun/nn/model.hpp"

namespace locun::data {

/// Immutable labeled example set. Features are row-major, one row per example.
struct Dataset {
  std::string name;
  nn::Shape shape;
  std::size_t num_classes = 0;
  std::vector<float> features;
  std::vector<int> labels;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t dim() const noexcept { return shape.numel(); }
  std::span<const float> row(std::size_t i) const { return {features.data() + i * dim(), dim()}; }
  std::vector<std::size_t> class_counts() const;

  /// FNV-1a over label values and feature bits.
  std::uint64_t checksum() const;

  /// Throws ValidationError unless n > 0, labels lie in [0, C) and features are finite.
  void validate() const;
};

using DatasetPtr = std::shared_ptr<const Dataset>;

/// Per-example read counter, attached to views in tests and audits to prove
/// which examples an algorithm touched.
class AccessLog {
 public:
  explicit AccessLog(std::size_t n) : counts_(n, 0) {}

  void record(std::size_t index) { ++counts_.at(index); }
  std::uint64_t count(std::size_t index) const { return counts_.at(index); }
  std::uint64_t total(std::span<const std::size_t> indices) const;

 private:
  std::vector<std::uint64_t> counts_;
};

/// Ordered subset of a dataset, optionally with replacement labels.
class DataView {
 public:
  DataView() = default;
  DataView(DatasetPtr ds, std::vector<std::size_t> indices);
  static DataView all(DatasetPtr ds);

  std::size_t size() const noexcept { return indices_.size(); }
  bool empty() const noexcept { return indices_.empty(); }
  const Dataset& dataset() const { return *ds_; }
  const DatasetPtr& dataset_ptr() const noexcept { return ds_; }
  std::span<const std::size_t> indices() const noexcept { return indices_; }
  std::size_t index(std::size_t pos) const { return indices_.at(pos); }
  int label(std::size_t pos) const;

  DataView with_labels(std::vector<int> labels) const;
  DataView with_log(std::shared_ptr<AccessLog> log) const;
  /// Concatenation of two views over the same dataset; label overrides are kept.
  static DataView concat(const DataView& a, const DataView& b);

  /// Copies the selected rows into a batch and records the reads.
  nn::LabeledBatch gather(std::span<const std::size_t> positions) const;
  /// Rows [begin, end) in view order.
  nn::LabeledBatch slice(std::size_t begin, std::size_t end) const;

  std::vector<std::size_t> class_counts() const;

 private:
  DatasetPtr ds_;
  std::vector<std::size_t> indices_;
  std::vector<int> labels_;  // empty: use dataset labels
  std::shared_ptr<AccessLog> log_;
};

/// Permutation of [0, n) for (seed, epoch); every training loop derives its
/// batch order from this so algorithms see identical shuffles.
std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::uint64_t epoch);

}  // namespace locun::data
