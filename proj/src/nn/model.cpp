// SPDX-License-Identifier: Apache-2.0
#include "locun/nn/model.hpp"

#include <algorithm>
#include <numeric>

#include "locun/error.hpp"

namespace locun::nn {

std::size_t Shape::numel() const noexcept {
  if (dims.empty()) return 0;
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
}

std::string Shape::str() const {
  std::string s = "[";
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(dims[i]);
  }
  return s + "]";
}

const char* to_string(LayerKind kind) noexcept {
  switch (kind) {
    case LayerKind::dense:
      return "dense";
    case LayerKind::conv2d:
      return "conv2d";
    case LayerKind::relu:
      return "relu";
    case LayerKind::flatten:
      return "flatten";
  }
  return "?";
}

LayerKind layer_kind_from_string(const std::string& name) {
  if (name == "dense") return LayerKind::dense;
  if (name == "conv2d") return LayerKind::conv2d;
  if (name == "relu") return LayerKind::relu;
  if (name == "flatten") return LayerKind::flatten;
  throw ConfigError("unknown layer kind '" + name + "'");
}

std::size_t LayerSpec::fan_in() const noexcept {
  switch (kind) {
    case LayerKind::dense:
      return in_shape.numel();
    case LayerKind::conv2d:
      return in_shape.dims.empty() ? 0 : in_shape.dims[0] * kernel * kernel;
    default:
      return 0;
  }
}

std::size_t LayerSpec::group_size() const noexcept {
  if (!parameterized()) return 0;
  return fan_in() + (has_bias ? 1 : 0);
}

std::size_t LayerSpec::num_groups() const noexcept {
  switch (kind) {
    case LayerKind::dense:
      return out_features;
    case LayerKind::conv2d:
      return out_channels;
    default:
      return 0;
  }
}

Model Model::build(ArchSpec arch) {
  if (arch.input.numel() == 0) throw DimensionError("model input shape is empty");
  if (arch.input.dims.size() != 1 && arch.input.dims.size() != 3) {
    throw DimensionError("input shape must be flat {n} or {c,h,w}, got " + arch.input.str());
  }
  if (arch.layers.empty()) throw DimensionError("model has no layers");

  Model m;
  Shape shape = arch.input;
  std::size_t offset = 0;
  for (std::size_t i = 0; i < arch.layers.size(); ++i) {
    LayerSpec& l = arch.layers[i];
    l.in_shape = shape;
    const std::string where = "layer " + std::to_string(i) + " (" + to_string(l.kind) + "): ";
    switch (l.kind) {
      case LayerKind::dense:
        if (!shape.flat()) throw DimensionError(where + "dense needs flat input, got " + shape.str());
        if (l.out_features == 0) throw DimensionError(where + "out_features must be positive");
        l.out_shape = Shape{{l.out_features}};
        break;
      case LayerKind::conv2d: {
        if (shape.dims.size() != 3) throw DimensionError(where + "conv2d needs {c,h,w} input, got " + shape.str());
        if (l.out_channels == 0 || l.kernel == 0) throw DimensionError(where + "out_channels and kernel must be positive");
        const std::size_t h = shape.dims[1] + 2 * l.padding;
        const std::size_t w = shape.dims[2] + 2 * l.padding;
        if (h < l.kernel || w < l.kernel) throw DimensionError(where + "kernel larger than padded input " + shape.str());
        l.out_shape = Shape{{l.out_channels, h - l.kernel + 1, w - l.kernel + 1}};
        break;
      }
      case LayerKind::relu:
        l.out_shape = shape;
        break;
      case LayerKind::flatten:
        l.out_shape = Shape{{shape.numel()}};
        break;
    }
    shape = l.out_shape;

    std::vector<ParamRange> groups;
    const std::size_t begin = offset;
    if (l.parameterized()) {
      m.param_layers_.push_back(i);
      const std::size_t g = l.group_size();
      for (std::size_t k = 0; k < l.num_groups(); ++k) {
        groups.push_back({offset, offset + g});
        offset += g;
      }
    }
    m.layer_ranges_.push_back({begin, offset});
    m.neuron_table_.push_back(std::move(groups));
  }

  if (m.param_layers_.empty()) throw DimensionError("model has no parameterized layer");
  if (m.param_layers_.back() != arch.layers.size() - 1 || arch.layers.back().kind != LayerKind::dense) {
    throw DimensionError("the last layer must be the dense classifier");
  }

  m.arch_ = std::move(arch);
  m.params_.assign(offset, 0.0f);
  return m;
}

std::size_t Model::num_classes() const noexcept { return arch_.layers.back().out_features; }

std::size_t Model::num_neurons() const noexcept {
  std::size_t n = 0;
  for (const auto& g : neuron_table_) n += g.size();
  return n;
}

NeuronId Model::owner(std::size_t j) const {
  for (std::size_t li : param_layers_) {
    const ParamRange r = layer_ranges_[li];
    if (r.contains(j)) {
      const std::size_t g = arch_.layers[li].group_size();
      return {li, (j - r.begin) / g};
    }
  }
  throw DimensionError("parameter index " + std::to_string(j) + " out of range");
}

}  // namespace locun::nn
