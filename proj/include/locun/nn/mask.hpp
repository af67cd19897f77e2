// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "locun/nn/model.hpp"

namespace locun {

/// Binary selection over all p parameters; 1 means the parameter may be
/// modified by the unlearning algorithm.
struct Mask {
  std::vector<std::uint8_t> bits;
  double alpha = 1.0;
  std::string strategy_tag;

  static Mask zeros(std::size_t p, std::string tag = "zeros");
  static Mask ones(std::size_t p, std::string tag = "ones");

  std::size_t size() const noexcept { return bits.size(); }
  bool test(std::size_t j) const { return bits[j] != 0; }
  std::size_t popcount() const noexcept;
  std::size_t popcount(nn::ParamRange r) const noexcept;

  void set(nn::ParamRange r) noexcept;
  /// Union in place; sizes must match.
  Mask& operator|=(const Mask& other);

  std::vector<std::size_t> set_indices() const;

  friend bool operator==(const Mask&, const Mask&) = default;
};

/// floor(alpha * p), the parameter budget for a fraction alpha.
std::size_t budget_for(double alpha, std::size_t p);

}  // namespace locun
