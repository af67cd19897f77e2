// SPDX-License-Identifier: Apache-2.0
#include "locun/nn/mask.hpp"

#include <algorithm>
#include <cmath>

#include "locun/error.hpp"

namespace locun {

Mask Mask::zeros(std::size_t p, std::string tag) { return Mask{std::vector<std::uint8_t>(p, 0), 0.0, std::move(tag)}; }

Mask Mask::ones(std::size_t p, std::string tag) { return Mask{std::vector<std::uint8_t>(p, 1), 1.0, std::move(tag)}; }

std::size_t Mask::popcount() const noexcept {
  return static_cast<std::size_t>(std::count_if(bits.begin(), bits.end(), [](std::uint8_t b) { return b != 0; }));
}

std::size_t Mask::popcount(nn::ParamRange r) const noexcept {
  std::size_t n = 0;
  for (std::size_t j = r.begin; j < r.end; ++j) n += bits[j] != 0;
  return n;
}

void Mask::set(nn::ParamRange r) noexcept { std::fill(bits.begin() + r.begin, bits.begin() + r.end, 1); }

Mask& Mask::operator|=(const Mask& other) {
  if (other.size() != size()) throw DimensionError("mask size mismatch in union");
  for (std::size_t j = 0; j < bits.size(); ++j) bits[j] = (bits[j] | other.bits[j]) ? 1 : 0;
  return *this;
}

std::vector<std::size_t> Mask::set_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < bits.size(); ++j)
    if (bits[j]) out.push_back(j);
  return out;
}

std::size_t budget_for(double alpha, std::size_t p) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1], got " + std::to_string(alpha));
  // alpha*p can land a hair under an integer (0.3*10 = 2.9999...), nudge before flooring.
  const long double exact = static_cast<long double>(alpha) * static_cast<long double>(p);
  const auto b = static_cast<std::size_t>(std::floor(exact + 1e-9L));
  return std::min(b, p);
}

}  // namespace locun
