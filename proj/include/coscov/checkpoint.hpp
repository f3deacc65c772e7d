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

#ifndef COSCOV_CHECKPOINT_H_
#define COSCOV_CHECKPOINT_H_

#include <string>

#include "coscov/model.hpp"

// Checkpoint container, layout:
//   bytes 0..7   magic "COSCOVCK"
//   bytes 8..15  manifest size, unsigned 64-bit little-endian
//   manifest     UTF-8 JSON: {"format_version", "config",
//                "tensors": {name: {"shape", "offset", "dtype"}}}
//   padding      zeros to the next 8-byte boundary
//   blob         raw little-endian 32-bit floats; offsets are relative
//                to the blob start and 8-byte aligned
// The manifest JSON is emitted with sorted keys and no timestamps, so
// identical models serialize to identical bytes.

namespace coscov {

inline constexpr int kCheckpointFormatVersion = 1;

void SaveCheckpoint(const Model& model, const std::string& path);

// ConfigError on bad magic, version mismatch (naming both versions),
// truncation, or a tensor directory that does not match the config.
Model LoadCheckpoint(const std::string& path);

}  // namespace coscov

#endif  // COSCOV_CHECKPOINT_H_
