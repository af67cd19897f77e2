// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "locun/nn/mask.hpp"

namespace locun::loc {

/// "LOCUN-MASK 1\n", a JSON header line (p, alpha, strategy_tag, popcount),
/// then ceil(p / 8) bytes, bit j at byte j / 8, position j % 8 (LSB first).
void write_mask(std::ostream& out, const Mask& mask);
Mask read_mask(std::istream& in);

void save_mask(const std::filesystem::path& path, const Mask& mask);
Mask load_mask(const std::filesystem::path& path);

/// One set index per line, ascending.
std::string mask_indices_text(const Mask& mask);

}  // namespace locun::loc
