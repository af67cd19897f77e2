// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

#include <json.hpp>

#include "locun/nn/model.hpp"

namespace locun::nn {

nlohmann::json arch_to_json(const ArchSpec& arch);
/// Accepts the user-facing layer fields only; shapes are re-inferred by Model::build.
ArchSpec arch_from_json(const nlohmann::json& j);

struct Checkpoint {
  Model model;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> meta;
};

inline constexpr int kCheckpointVersion = 1;

/// Layout: magic line "LOCUN-CKPT <version>\n", one line of JSON header
/// (format_version, architecture, seed, p, init, payload checksum, meta),
/// then p little-endian IEEE-754 float32 values in flat index order.
void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// FNV-1a over the raw float bytes, used as a cheap payload integrity check.
std::uint64_t params_fingerprint(const Model& model);

}  // namespace locun::nn
