// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace locun::nn {

/// Per-example tensor shape: either flat {n} or {channels, height, width}.
struct Shape {
  std::vector<std::size_t> dims;

  std::size_t numel() const noexcept;
  bool flat() const noexcept { return dims.size() == 1; }
  std::string str() const;

  friend bool operator==(const Shape&, const Shape&) = default;
};

enum class LayerKind { dense, conv2d, relu, flatten };

const char* to_string(LayerKind kind) noexcept;
LayerKind layer_kind_from_string(const std::string& name);

/// One layer of a sequential stack. The user fills the kind and the output
/// hyperparameters; in/out shapes are inferred when the model is built.
struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  std::size_t out_features = 0;  // dense
  std::size_t out_channels = 0;  // conv2d
  std::size_t kernel = 0;        // conv2d, square, stride 1
  std::size_t padding = 0;       // conv2d, zero padding
  bool has_bias = true;

  Shape in_shape;
  Shape out_shape;

  bool parameterized() const noexcept { return kind == LayerKind::dense || kind == LayerKind::conv2d; }
  /// Parameters owned by one output neuron/channel (incoming weights plus bias).
  std::size_t group_size() const noexcept;
  std::size_t num_groups() const noexcept;
  std::size_t num_params() const noexcept { return group_size() * num_groups(); }
  /// Number of inputs feeding one output unit; drives the init bound.
  std::size_t fan_in() const noexcept;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct ArchSpec {
  Shape input;
  std::vector<LayerSpec> layers;

  friend bool operator==(const ArchSpec&, const ArchSpec&) = default;
};

/// Half-open index range into the flat parameter vector.
struct ParamRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const noexcept { return end - begin; }
  bool empty() const noexcept { return begin == end; }
  bool contains(std::size_t j) const noexcept { return j >= begin && j < end; }

  friend bool operator==(const ParamRange&, const ParamRange&) = default;
};

struct NeuronId {
  std::size_t layer = 0;
  std::size_t index = 0;

  friend auto operator<=>(const NeuronId&, const NeuronId&) = default;
};

/// Sequential classifier with a flat, addressable parameter store.
///
/// Parameters are laid out layer by layer; inside a parameterized layer each
/// output neuron (dense) or output channel (conv2d) owns one contiguous block
/// holding its incoming weights followed by its bias. Those blocks are the
/// neuron groups used by channel-granular localization.
class Model {
 public:
  Model() = default;

  /// Infers shapes, lays out parameters (all zero) and validates the stack.
  /// Throws DimensionError for inconsistent stacks.
  static Model build(ArchSpec arch);

  const ArchSpec& arch() const noexcept { return arch_; }
  std::span<const LayerSpec> layers() const noexcept { return arch_.layers; }
  const LayerSpec& layer(std::size_t i) const { return arch_.layers.at(i); }
  std::size_t num_layers() const noexcept { return arch_.layers.size(); }

  std::span<float> params() noexcept { return params_; }
  std::span<const float> params() const noexcept { return params_; }
  std::size_t num_params() const noexcept { return params_.size(); }

  const Shape& input_shape() const noexcept { return arch_.input; }
  std::size_t input_numel() const noexcept { return arch_.input.numel(); }
  std::size_t num_classes() const noexcept;

  /// Parameter range of layer `i`; empty for relu and flatten.
  ParamRange layer_range(std::size_t i) const { return layer_ranges_.at(i); }
  std::span<const ParamRange> neuron_groups(std::size_t i) const { return neuron_table_.at(i); }
  ParamRange group_range(NeuronId id) const { return neuron_table_.at(id.layer).at(id.index); }

  /// Indices of layers that own parameters, input to output.
  std::span<const std::size_t> parameterized_layers() const noexcept { return param_layers_; }
  std::size_t classifier_layer() const noexcept { return param_layers_.back(); }
  std::size_t num_neurons() const noexcept;

  /// Layer and group owning parameter j.
  NeuronId owner(std::size_t j) const;

  friend bool operator==(const Model&, const Model&) = default;

 private:
  ArchSpec arch_;
  std::vector<float> params_;
  std::vector<ParamRange> layer_ranges_;
  std::vector<std::vector<ParamRange>> neuron_table_;
  std::vector<std::size_t> param_layers_;
};

}  // namespace locun::nn
