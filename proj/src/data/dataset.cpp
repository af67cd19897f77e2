// SPDX-License-Identifier: Apache-2.0
#include "locun/data/dataset.hpp"

#include <bit>
#include <cmath>

#include "locun/error.hpp"
#include "locun/rng.hpp"

namespace locun::data {

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> counts(num_classes, 0);
  for (int y : labels) ++counts.at(static_cast<std::size_t>(y));
  return counts;
}

std::uint64_t Dataset::checksum() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](std::uint32_t u) {
    for (int b = 0; b < 4; ++b) {
      h ^= (u >> (8 * b)) & 0xffu;
      h *= 0x100000001b3ULL;
    }
  };
  for (int y : labels) feed(static_cast<std::uint32_t>(y));
  for (float f : features) feed(std::bit_cast<std::uint32_t>(f));
  return h;
}

void Dataset::validate() const {
  if (labels.empty()) throw ValidationError("dataset '" + name + "' is empty");
  if (num_classes == 0) throw ValidationError("dataset '" + name + "' declares zero classes");
  if (features.size() != labels.size() * dim()) {
    throw ValidationError("dataset '" + name + "': feature count does not match " + std::to_string(labels.size()) +
                          " x " + shape.str());
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes) {
      throw ValidationError("dataset '" + name + "': example " + std::to_string(i) + " has label " +
                            std::to_string(labels[i]) + " outside [0, " + std::to_string(num_classes) + ")");
    }
  }
  for (std::size_t k = 0; k < features.size(); ++k) {
    if (!std::isfinite(features[k])) {
      throw ValidationError("dataset '" + name + "': non-finite feature in example " + std::to_string(k / dim()));
    }
  }
}

std::uint64_t AccessLog::total(std::span<const std::size_t> indices) const {
  std::uint64_t t = 0;
  for (std::size_t i : indices) t += counts_.at(i);
  return t;
}

DataView::DataView(DatasetPtr ds, std::vector<std::size_t> indices) : ds_(std::move(ds)), indices_(std::move(indices)) {
  for (std::size_t i : indices_) {
    if (i >= ds_->size()) throw DimensionError("view index " + std::to_string(i) + " out of range");
  }
}

DataView DataView::all(DatasetPtr ds) {
  std::vector<std::size_t> idx(ds->size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return DataView(std::move(ds), std::move(idx));
}

int DataView::label(std::size_t pos) const { return labels_.empty() ? ds_->labels[indices_.at(pos)] : labels_.at(pos); }

DataView DataView::with_labels(std::vector<int> labels) const {
  if (labels.size() != indices_.size()) throw DimensionError("label override length does not match view");
  DataView v = *this;
  v.labels_ = std::move(labels);
  return v;
}

DataView DataView::with_log(std::shared_ptr<AccessLog> log) const {
  DataView v = *this;
  v.log_ = std::move(log);
  return v;
}

DataView DataView::concat(const DataView& a, const DataView& b) {
  if (a.ds_ != b.ds_) throw DimensionError("cannot concatenate views over different datasets");
  DataView v = a;
  v.indices_.insert(v.indices_.end(), b.indices_.begin(), b.indices_.end());
  if (!a.labels_.empty() || !b.labels_.empty()) {
    v.labels_.clear();
    for (std::size_t i = 0; i < a.size(); ++i) v.labels_.push_back(a.label(i));
    for (std::size_t i = 0; i < b.size(); ++i) v.labels_.push_back(b.label(i));
  }
  if (!v.log_) v.log_ = b.log_;
  return v;
}

nn::LabeledBatch DataView::gather(std::span<const std::size_t> positions) const {
  nn::LabeledBatch b;
  b.size = positions.size();
  const std::size_t d = ds_->dim();
  b.features.resize(b.size * d);
  b.labels.resize(b.size);
  for (std::size_t k = 0; k < positions.size(); ++k) {
    const std::size_t idx = indices_.at(positions[k]);
    auto r = ds_->row(idx);
    std::copy(r.begin(), r.end(), b.features.begin() + static_cast<std::ptrdiff_t>(k * d));
    b.labels[k] = label(positions[k]);
    if (log_) log_->record(idx);
  }
  return b;
}

nn::LabeledBatch DataView::slice(std::size_t begin, std::size_t end) const {
  std::vector<std::size_t> pos;
  for (std::size_t i = begin; i < end && i < size(); ++i) pos.push_back(i);
  return gather(pos);
}

std::vector<std::size_t> DataView::class_counts() const {
  std::vector<std::size_t> counts(ds_->num_classes, 0);
  for (std::size_t i = 0; i < size(); ++i) ++counts.at(static_cast<std::size_t>(label(i)));
  return counts;
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::uint64_t epoch) {
  Rng rng(seed, Stream::shuffle, {epoch});
  return rng.permutation(n);
}

}  // namespace locun::data
