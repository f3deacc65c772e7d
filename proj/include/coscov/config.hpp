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

#ifndef COSCOV_CONFIG_H_
#define COSCOV_CONFIG_H_

#include <cstdint>
#include <string>
#include <vector>

#include "coscov/memory.hpp"

// Typed configuration for models, training, and data. JSON documents map
// onto these structs with every key optional; unknown keys are rejected
// with the offending key named. The architecture name only chooses
// defaults for the vq/memory switches, the switches themselves decide
// the wiring, which is what the ablation variants toggle.

namespace coscov {

enum class Architecture { kCosCov, kVqccm, kPlainCnn };

std::string ArchitectureName(Architecture arch);
Architecture ParseArchitecture(const std::string& name);  // ConfigError

struct VqSettings {
  bool enabled = false;
  int64_t codebook_size = 512;  // k
  float beta = 0.25f;
};

struct MemorySettings {
  bool enabled = false;
  int64_t size = 100;      // M
  int64_t filter_len = 3;  // reader/writer CCL length
  WriterGapAxis gap_axis = WriterGapAxis::kChannels;
};

struct ModelConfig {
  Architecture architecture = Architecture::kCosCov;
  std::vector<int64_t> channels{32, 64, 128, 256};  // hidden out-channels
  int64_t num_classes = 10;
  std::vector<int64_t> filter_lens{100, 50, 12, 6, 3};  // incl. head
  std::vector<int64_t> pools{10, 8, 4, 4};              // per hidden layer
  double dropout = 0.5;
  int64_t input_len = 16000;  // adapter target
  VqSettings vq;
  MemorySettings memory;
  uint64_t seed = 1;

  // Found architecture with the arch-appropriate switch defaults.
  static ModelConfig Defaults(Architecture arch);

  void Validate() const;  // ConfigError with the failing field named

  // Hidden layers plus classification head.
  int64_t NumLayers() const {
    return static_cast<int64_t>(channels.size()) + 1;
  }
  int64_t PoolProduct() const;
  // seq[k] = length entering layer k+1 (seq[0] = input_len).
  std::vector<int64_t> SequenceLengths() const;
  // Row length of the codebook: sequence length after layer 1.
  int64_t VqDim() const;
};

struct TrainConfig {
  std::string optimizer = "adam";  // adam | sgd
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double momentum = 0.9;  // sgd only
  int epochs = 30;
  int batch_size = 32;
  uint64_t seed = 1;
  int eval_every = 1;                // epochs between val evaluations
  int early_stop_patience = 0;       // 0 = off
  double target_val_accuracy = 0.0;  // stop once reached; 0 = off
  double clip_norm = 0.0;            // global-norm gradient clip; 0 = off

  void Validate() const;
};

struct DataConfig {
  std::string source = "synthetic";  // synthetic | dir | manifest
  std::string dir;
  std::string manifest;
  int synthetic_classes = 4;
  int synthetic_per_class = 125;
  uint64_t seed = 7;
  double train_fraction = 0.8;
  double val_fraction = 0.1;  // test = remainder
  int64_t pad_to = 16000;

  void Validate() const;
};

struct FullConfig {
  ModelConfig model;
  TrainConfig train;
  DataConfig data;
};

// Deterministic compact JSON (sorted keys), used for echoing, reports,
// and checkpoint manifests.
std::string ToJson(const ModelConfig& cfg);
std::string ToJson(const TrainConfig& cfg);
std::string ToJson(const DataConfig& cfg);
std::string ToJson(const FullConfig& cfg);

// Parse {"model":{...},"train":{...},"data":{...}} (each section
// optional) on top of the given base. Unknown or ill-typed keys throw
// ConfigError naming the key path.
FullConfig ParseConfigJson(const std::string& text, FullConfig base = {});
FullConfig LoadConfigFile(const std::string& path, FullConfig base = {});
ModelConfig ParseModelConfigJson(const std::string& text, ModelConfig base);

}  // namespace coscov

#endif  // COSCOV_CONFIG_H_
