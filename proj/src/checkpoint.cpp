// Copyright 2026 The CosCov Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "coscov/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "coscov/errors.hpp"
#include "json.hpp"

namespace coscov {
namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'C', 'O', 'S', 'C', 'O', 'V', 'C', 'K'};

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

int64_t AlignUp(int64_t v, int64_t a) { return (v + a - 1) / a * a; }

void WriteU64Le(std::ostream& os, uint64_t v) {
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(buf, 8);
}

uint64_t ReadU64Le(const char* buf) {
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v |= static_cast<uint64_t>(static_cast<unsigned char>(buf[i])) << (8 * i);
  }
  return v;
}

}  // namespace

void SaveCheckpoint(const Model& model, const std::string& path) {
  json tensors = json::object();
  int64_t offset = 0;
  for (const auto& p : model.params()) {
    tensors[p.name] = {{"shape", p.value.shape},
                       {"offset", offset},
                       {"dtype", "f32"}};
    offset = AlignUp(offset + p.value.numel() * 4, 8);
  }
  json manifest;
  manifest["format_version"] = kCheckpointFormatVersion;
  manifest["config"] = json::parse(ToJson(model.config()));
  manifest["tensors"] = std::move(tensors);
  const std::string text = manifest.dump();

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw ConfigError("cannot write checkpoint '" + path + "'");
  os.write(kMagic, 8);
  WriteU64Le(os, text.size());
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  const int64_t header = 16 + static_cast<int64_t>(text.size());
  for (int64_t i = header; i < AlignUp(header, 8); ++i) os.put('\0');
  int64_t written = 0;
  for (const auto& p : model.params()) {
    const int64_t bytes = p.value.numel() * 4;
    os.write(reinterpret_cast<const char*>(p.value.ptr()), bytes);
    written += bytes;
    for (; written % 8 != 0; ++written) os.put('\0');
  }
  os.flush();
  if (!os) throw ConfigError("short write while saving checkpoint '" + path + "'");
}

Model LoadCheckpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open checkpoint '" + path + "'");
  std::vector<char> bytes((std::istreambuf_iterator<char>(is)),
                          std::istreambuf_iterator<char>());
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 8) != 0) {
    throw ConfigError("'" + path + "' is not a checkpoint (bad magic)");
  }
  const uint64_t manifest_size = ReadU64Le(bytes.data() + 8);
  if (16 + manifest_size > bytes.size()) {
    throw ConfigError("checkpoint '" + path + "' is truncated (manifest)");
  }
  json manifest = json::parse(
      std::string(bytes.data() + 16, manifest_size), nullptr, false);
  if (manifest.is_discarded() || !manifest.is_object()) {
    throw ConfigError("checkpoint '" + path + "' has a corrupt manifest");
  }
  const int version = manifest.value("format_version", -1);
  if (version != kCheckpointFormatVersion) {
    throw ConfigError("checkpoint format version " + std::to_string(version) +
                      " is not supported (expected " +
                      std::to_string(kCheckpointFormatVersion) + ")");
  }
  if (!manifest.contains("config") || !manifest.contains("tensors")) {
    throw ConfigError("checkpoint '" + path + "' manifest is missing sections");
  }

  Model model(ParseModelConfigJson(manifest["config"].dump(),
                                   ModelConfig::Defaults(Architecture::kCosCov)));
  const json& tensors = manifest["tensors"];
  if (tensors.size() != model.params().size()) {
    throw ConfigError("checkpoint tensor directory has " +
                      std::to_string(tensors.size()) + " entries, config needs " +
                      std::to_string(model.params().size()));
  }
  const int64_t blob_start =
      AlignUp(16 + static_cast<int64_t>(manifest_size), 8);
  for (auto& p : model.params()) {
    if (!tensors.contains(p.name)) {
      throw ConfigError("checkpoint is missing tensor '" + p.name + "'");
    }
    const json& entry = tensors[p.name];
    const auto shape = entry.at("shape").get<std::vector<int64_t>>();
    if (shape != p.value.shape) {
      throw ConfigError("checkpoint tensor '" + p.name + "' has shape " +
                        Tensor<float>(shape).ShapeStr() + ", config needs " +
                        p.value.ShapeStr());
    }
    if (entry.at("dtype").get<std::string>() != "f32") {
      throw ConfigError("checkpoint tensor '" + p.name + "' has unsupported dtype");
    }
    const int64_t offset = entry.at("offset").get<int64_t>();
    const int64_t nbytes = p.value.numel() * 4;
    if (offset < 0 || blob_start + offset + nbytes >
                          static_cast<int64_t>(bytes.size())) {
      throw ConfigError("checkpoint '" + path + "' is truncated (tensor '" +
                        p.name + "')");
    }
    std::memcpy(p.value.ptr(), bytes.data() + blob_start + offset, nbytes);
  }
  return model;
}

}  // namespace coscov
