// SPDX-License-Identifier: Apache-2.0
#include "locun/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

#include "locun/error.hpp"
#include "locun/nn/optim.hpp"

namespace locun::nn {

using nlohmann::json;

json arch_to_json(const ArchSpec& arch) {
  json layers = json::array();
  for (const LayerSpec& l : arch.layers) {
    json e{{"kind", to_string(l.kind)}};
    switch (l.kind) {
      case LayerKind::dense:
        e["out_features"] = l.out_features;
        e["bias"] = l.has_bias;
        break;
      case LayerKind::conv2d:
        e["out_channels"] = l.out_channels;
        e["kernel"] = l.kernel;
        e["padding"] = l.padding;
        e["bias"] = l.has_bias;
        break;
      default:
        break;
    }
    layers.push_back(std::move(e));
  }
  return json{{"input_shape", arch.input.dims}, {"layers", std::move(layers)}};
}

namespace {

void require_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw ConfigError(where + ": unknown key '" + it.key() + "'");
  }
}

}  // namespace

ArchSpec arch_from_json(const json& j) {
  require_keys(j, {"input_shape", "layers"}, "architecture");
  ArchSpec arch;
  try {
    arch.input.dims = j.at("input_shape").get<std::vector<std::size_t>>();
    for (const json& e : j.at("layers")) {
      LayerSpec l;
      l.kind = layer_kind_from_string(e.at("kind").get<std::string>());
      switch (l.kind) {
        case LayerKind::dense:
          require_keys(e, {"kind", "out_features", "bias"}, "dense layer");
          l.out_features = e.at("out_features").get<std::size_t>();
          l.has_bias = e.value("bias", true);
          break;
        case LayerKind::conv2d:
          require_keys(e, {"kind", "out_channels", "kernel", "padding", "bias"}, "conv2d layer");
          l.out_channels = e.at("out_channels").get<std::size_t>();
          l.kernel = e.at("kernel").get<std::size_t>();
          l.padding = e.value("padding", std::size_t{0});
          l.has_bias = e.value("bias", true);
          break;
        default:
          require_keys(e, {"kind"}, std::string(to_string(l.kind)) + " layer");
          break;
      }
      arch.layers.push_back(l);
    }
  } catch (const json::exception& ex) {
    throw ConfigError(std::string("architecture: ") + ex.what());
  }
  return arch;
}

std::uint64_t params_fingerprint(const Model& model) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (float f : model.params()) {
    const auto u = std::bit_cast<std::uint32_t>(f);
    for (int b = 0; b < 4; ++b) {
      h ^= (u >> (8 * b)) & 0xffu;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

namespace {

constexpr const char* kMagic = "LOCUN-CKPT";

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  const Model& m = ckpt.model;
  json header{{"format_version", kCheckpointVersion},
              {"architecture", arch_to_json(m.arch())},
              {"seed", ckpt.seed},
              {"p", m.num_params()},
              {"init", kInitDescription},
              {"dtype", "float32le"},
              {"payload_fnv1a64", hex64(params_fingerprint(m))},
              {"meta", ckpt.meta}};
  out << kMagic << ' ' << kCheckpointVersion << '\n' << header.dump() << '\n';
  std::vector<char> payload(m.num_params() * 4);
  std::size_t o = 0;
  for (float f : m.params()) {
    const auto u = std::bit_cast<std::uint32_t>(f);
    for (int b = 0; b < 4; ++b) payload[o++] = static_cast<char>((u >> (8 * b)) & 0xffu);
  }
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw Error("failed writing checkpoint payload");
}

Checkpoint read_checkpoint(std::istream& in) {
  std::string magic_line;
  if (!std::getline(in, magic_line)) throw ParseError("checkpoint: missing magic line", 0);
  std::istringstream ms(magic_line);
  std::string magic;
  int version = 0;
  ms >> magic >> version;
  if (magic != kMagic) throw ParseError("checkpoint: bad magic '" + magic + "'", 0);
  if (version != kCheckpointVersion) {
    throw ParseError("checkpoint: unsupported format version " + std::to_string(version), magic.size() + 1);
  }
  const std::size_t header_offset = magic_line.size() + 1;
  std::string header_line;
  if (!std::getline(in, header_line)) throw ParseError("checkpoint: missing header", header_offset);
  json header;
  try {
    header = json::parse(header_line);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("checkpoint header: ") + e.what(), header_offset + e.byte);
  }

  Checkpoint ckpt;
  ckpt.model = Model::build(arch_from_json(header.at("architecture")));
  ckpt.seed = header.at("seed").get<std::uint64_t>();
  if (header.contains("meta")) ckpt.meta = header["meta"].get<std::map<std::string, std::string>>();
  const std::size_t p = header.at("p").get<std::size_t>();
  if (p != ckpt.model.num_params()) {
    throw ParseError("checkpoint: header p=" + std::to_string(p) + " but architecture has " +
                         std::to_string(ckpt.model.num_params()),
                     header_offset);
  }
  const std::size_t payload_offset = header_offset + header_line.size() + 1;
  std::vector<char> payload(p * 4);
  in.read(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (static_cast<std::size_t>(in.gcount()) != payload.size()) {
    throw ParseError("checkpoint: truncated payload", payload_offset + static_cast<std::size_t>(in.gcount()));
  }
  auto theta = ckpt.model.params();
  for (std::size_t j = 0; j < p; ++j) {
    std::uint32_t u = 0;
    for (int b = 0; b < 4; ++b) u |= static_cast<std::uint32_t>(static_cast<unsigned char>(payload[j * 4 + b])) << (8 * b);
    theta[j] = std::bit_cast<float>(u);
  }
  if (header.at("payload_fnv1a64").get<std::string>() != hex64(params_fingerprint(ckpt.model))) {
    throw ParseError("checkpoint: payload checksum mismatch", payload_offset);
  }
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + tmp.string() + " for writing");
    write_checkpoint(out, ckpt);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path.string());
  return read_checkpoint(in);
}

}  // namespace locun::nn
