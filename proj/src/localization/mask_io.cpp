// SPDX-License-Identifier: Apache-2.0
#include "locun/localization/mask_io.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "locun/error.hpp"

namespace locun::loc {

namespace {
constexpr const char* kMagic = "LOCUN-MASK 1";
}

void write_mask(std::ostream& out, const Mask& mask) {
  nlohmann::json header = {{"p", mask.size()},
                           {"alpha", mask.alpha},
                           {"strategy_tag", mask.strategy_tag},
                           {"popcount", mask.popcount()}};
  out << kMagic << '\n' << header.dump() << '\n';
  std::string bytes((mask.size() + 7) / 8, '\0');
  for (std::size_t j = 0; j < mask.size(); ++j)
    if (mask.bits[j]) bytes[j / 8] = static_cast<char>(bytes[j / 8] | (1 << (j % 8)));
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Mask read_mask(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kMagic) throw ParseError("mask: bad magic line", 0);
  const std::size_t header_at = line.size() + 1;
  if (!std::getline(in, line)) throw ParseError("mask: missing header", header_at);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("mask: header is not JSON: ") + e.what(), header_at);
  }
  const std::size_t payload_at = header_at + line.size() + 1;
  Mask mask;
  std::size_t popcount = 0;
  try {
    mask.bits.assign(header.at("p").get<std::size_t>(), 0);
    mask.alpha = header.at("alpha").get<double>();
    mask.strategy_tag = header.at("strategy_tag").get<std::string>();
    popcount = header.at("popcount").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("mask: bad header: ") + e.what(), header_at);
  }
  std::string bytes((mask.size() + 7) / 8, '\0');
  in.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (static_cast<std::size_t>(in.gcount()) != bytes.size()) {
    throw ParseError("mask: payload truncated", payload_at + static_cast<std::size_t>(in.gcount()));
  }
  for (std::size_t j = 0; j < mask.size(); ++j) mask.bits[j] = (static_cast<unsigned char>(bytes[j / 8]) >> (j % 8)) & 1u;
  if (mask.popcount() != popcount) throw ParseError("mask: popcount does not match payload", payload_at);
  return mask;
}

void save_mask(const std::filesystem::path& path, const Mask& mask) {
  std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + tmp.string() + " for writing");
    write_mask(out, mask);
  }
  std::filesystem::rename(tmp, path);
}

Mask load_mask(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open mask " + path.string());
  return read_mask(in);
}

std::string mask_indices_text(const Mask& mask) {
  std::ostringstream out;
  for (std::size_t j : mask.set_indices()) out << j << '\n';
  return out.str();
}

}  // namespace locun::loc
