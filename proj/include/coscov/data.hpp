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

#ifndef COSCOV_DATA_H_
#define COSCOV_DATA_H_

#include <cstdint>
#include <string>
#include <vector>

#include "coscov/config.hpp"
#include "coscov/tensor.hpp"

// Audio ingestion and batching. WAV loading covers RIFF PCM-16 (mono, or
// first channel of multi-channel); samples normalise by division by
// 32768 so the integer domain maps into [-1, 1). Splits are stratified
// per class with a global largest-remainder carry, which keeps every
// class within one clip of the requested fractions and the split totals
// exact. All randomness is seed-driven and reproducible.

namespace coscov {

struct AudioClip {
  std::vector<float> samples;  // mono, [-1,1]
  int sample_rate = 16000;
  int label = -1;
  std::string path;  // empty for generated clips
};

enum class Split { kTrain = 0, kVal = 1, kTest = 2 };

const char* SplitName(Split split);
Split ParseSplit(const std::string& name);  // ConfigError

struct Dataset {
  std::vector<AudioClip> clips;
  std::vector<std::string> class_names;
  std::vector<Split> splits;  // parallel to clips
  std::string source;         // descriptor for the manifest
  uint64_t split_seed = 0;

  std::vector<int64_t> ClipIndices(Split split) const;
  int64_t CountIn(Split split) const;
};

// DataError: unsupported encodings name the format, truncated files the
// missing chunk.
AudioClip LoadWav(const std::string& path);
void SaveWav(const std::string& path, const AudioClip& clip);

AudioClip ResampleLinear(const AudioClip& clip, int target_hz);

// Class z = one second of 16 kHz sine at 200*(z+1) Hz, random phase,
// amplitude U(0.5,1.0), Gaussian noise sigma 0.05, clamped to [-1,1].
Dataset MakeSynthetic(int classes, int per_class, uint64_t seed);

// Directory tree: one subdirectory per class (sorted for index
// stability), WAV files inside. DataError when nothing is found.
Dataset LoadDirectoryTree(const std::string& dir);

// Stratified assignment; fills dataset.splits and split_seed.
void StratifiedSplit(Dataset& dataset, double train_fraction,
                     double val_fraction, uint64_t seed);

struct Batch {
  Tensor<float> audio;  // [B,1,pad_to]
  std::vector<int64_t> labels;
};

// Deterministic batch sequence: seeded shuffle when requested, clips
// zero-padded or trimmed to pad_to. DataError on an empty split.
std::vector<Batch> MakeBatches(const Dataset& dataset, Split split,
                               int batch_size, uint64_t seed, int64_t pad_to,
                               bool shuffle);

// Manifest JSON: classes, source descriptor, per-clip path/label/split.
// Loading regenerates a synthetic source or reloads WAV paths, then
// re-applies the recorded split assignments.
std::string DatasetManifestJson(const Dataset& dataset);
void WriteDatasetManifest(const Dataset& dataset, const std::string& path);
Dataset LoadDatasetManifest(const std::string& path);

Dataset BuildDataset(const DataConfig& config);  // dispatch on source

}  // namespace coscov

#endif  // COSCOV_DATA_H_
