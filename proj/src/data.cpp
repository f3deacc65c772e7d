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

#include "coscov/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "coscov/errors.hpp"
#include "coscov/rng.hpp"
#include "json.hpp"

namespace coscov {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

uint16_t ReadU16Le(const unsigned char* p) {
  return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

uint32_t ReadU32Le(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) |
         (static_cast<uint32_t>(p[3]) << 24);
}

void WriteU16Le(std::ostream& os, uint16_t v) {
  const char buf[2] = {static_cast<char>(v & 0xff),
                       static_cast<char>((v >> 8) & 0xff)};
  os.write(buf, 2);
}

void WriteU32Le(std::ostream& os, uint32_t v) {
  const char buf[4] = {
      static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
      static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  os.write(buf, 4);
}

std::string SyntheticSource(int classes, int per_class, uint64_t seed) {
  std::ostringstream ss;
  ss << "synthetic:classes=" << classes << ",per_class=" << per_class
     << ",seed=" << seed;
  return ss.str();
}

// Parses "synthetic:classes=C,per_class=P,seed=S"; false when the source
// descriptor is not synthetic.
bool ParseSyntheticSource(const std::string& source, int& classes,
                          int& per_class, uint64_t& seed) {
  long long c = 0, p = 0;
  unsigned long long s = 0;
  if (std::sscanf(source.c_str(), "synthetic:classes=%lld,per_class=%lld,seed=%llu",
                  &c, &p, &s) != 3) {
    return false;
  }
  classes = static_cast<int>(c);
  per_class = static_cast<int>(p);
  seed = static_cast<uint64_t>(s);
  return true;
}

}  // namespace

const char* SplitName(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "train";
}

Split ParseSplit(const std::string& name) {
  if (name == "train") return Split::kTrain;
  if (name == "val") return Split::kVal;
  if (name == "test") return Split::kTest;
  throw ConfigError("unknown split '" + name + "' (expected train, val, or test)");
}

std::vector<int64_t> Dataset::ClipIndices(Split split) const {
  std::vector<int64_t> out;
  for (size_t i = 0; i < clips.size(); ++i) {
    if (i < splits.size() && splits[i] == split) {
      out.push_back(static_cast<int64_t>(i));
    }
  }
  return out;
}

int64_t Dataset::CountIn(Split split) const {
  return static_cast<int64_t>(ClipIndices(split).size());
}

AudioClip LoadWav(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open WAV file '" + path + "'");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw DataError("'" + path + "' is not a RIFF/WAVE file");
  }

  bool have_fmt = false;
  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t sample_rate = 0;
  size_t data_pos = 0, data_size = 0;
  bool have_data = false;

  size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* hdr = bytes.data() + pos;
    const uint32_t csize = ReadU32Le(hdr + 4);
    const size_t body = pos + 8;
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      if (csize < 16 || body + 16 > bytes.size()) {
        throw DataError("'" + path + "' has a truncated fmt chunk");
      }
      format = ReadU16Le(bytes.data() + body);
      channels = ReadU16Le(bytes.data() + body + 2);
      sample_rate = ReadU32Le(bytes.data() + body + 4);
      bits = ReadU16Le(bytes.data() + body + 14);
      have_fmt = true;
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      data_pos = body;
      data_size = csize;
      have_data = true;
    }
    pos = body + csize + (csize & 1);
  }
  if (!have_fmt) throw DataError("'" + path + "' is missing its fmt chunk");
  if (!have_data) throw DataError("'" + path + "' is missing its data chunk");
  if (format != 1) {
    throw DataError("'" + path + "' uses unsupported WAV encoding (format code " +
                    std::to_string(format) + "); only PCM is supported");
  }
  if (bits != 16) {
    throw DataError("'" + path + "' uses unsupported sample width (" +
                    std::to_string(bits) + "-bit); only 16-bit PCM is supported");
  }
  if (channels < 1) throw DataError("'" + path + "' declares zero channels");
  if (data_pos + data_size > bytes.size()) {
    throw DataError("'" + path + "' has a truncated data chunk");
  }

  const size_t block = static_cast<size_t>(channels) * 2;
  const size_t frames = data_size / block;
  AudioClip clip;
  clip.sample_rate = static_cast<int>(sample_rate);
  clip.path = path;
  clip.samples.resize(frames);
  for (size_t i = 0; i < frames; ++i) {
    const unsigned char* p = bytes.data() + data_pos + i * block;
    const int16_t s = static_cast<int16_t>(ReadU16Le(p));
    clip.samples[i] = static_cast<float>(s) / 32768.0f;
  }
  return clip;
}

void SaveWav(const std::string& path, const AudioClip& clip) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot write WAV file '" + path + "'");
  const uint32_t n = static_cast<uint32_t>(clip.samples.size());
  const uint32_t data_size = n * 2;
  os.write("RIFF", 4);
  WriteU32Le(os, 36 + data_size);
  os.write("WAVE", 4);
  os.write("fmt ", 4);
  WriteU32Le(os, 16);
  WriteU16Le(os, 1);  // PCM
  WriteU16Le(os, 1);  // mono
  WriteU32Le(os, static_cast<uint32_t>(clip.sample_rate));
  WriteU32Le(os, static_cast<uint32_t>(clip.sample_rate) * 2);
  WriteU16Le(os, 2);
  WriteU16Le(os, 16);
  os.write("data", 4);
  WriteU32Le(os, data_size);
  for (float v : clip.samples) {
    const long q = std::lround(static_cast<double>(v) * 32768.0);
    const int16_t s = static_cast<int16_t>(std::clamp<long>(q, -32768, 32767));
    WriteU16Le(os, static_cast<uint16_t>(s));
  }
  if (!os) throw DataError("short write while saving '" + path + "'");
}

AudioClip ResampleLinear(const AudioClip& clip, int target_hz) {
  if (target_hz < 1) throw ConfigError("resample target rate must be >= 1");
  if (clip.sample_rate == target_hz || clip.samples.empty()) {
    AudioClip out = clip;
    out.sample_rate = target_hz;
    return out;
  }
  const int64_t n = static_cast<int64_t>(clip.samples.size());
  const double ratio = static_cast<double>(clip.sample_rate) / target_hz;
  const int64_t out_n = std::max<int64_t>(
      1, static_cast<int64_t>(std::llround(static_cast<double>(n) / ratio)));
  AudioClip out;
  out.sample_rate = target_hz;
  out.label = clip.label;
  out.path = clip.path;
  out.samples.resize(static_cast<size_t>(out_n));
  for (int64_t i = 0; i < out_n; ++i) {
    const double src = static_cast<double>(i) * ratio;
    const int64_t lo = std::min<int64_t>(static_cast<int64_t>(src), n - 1);
    const int64_t hi = std::min<int64_t>(lo + 1, n - 1);
    const double frac = src - static_cast<double>(lo);
    out.samples[static_cast<size_t>(i)] = static_cast<float>(
        (1.0 - frac) * clip.samples[static_cast<size_t>(lo)] +
        frac * clip.samples[static_cast<size_t>(hi)]);
  }
  return out;
}

Dataset MakeSynthetic(int classes, int per_class, uint64_t seed) {
  if (classes < 2) throw ConfigError("synthetic data needs at least 2 classes");
  if (per_class < 1) throw ConfigError("synthetic data needs at least 1 clip per class");
  constexpr int kRate = 16000;
  constexpr double kTwoPi = 2.0 * 3.14159265358979323846;
  Dataset ds;
  ds.source = SyntheticSource(classes, per_class, seed);
  Rng rng(seed);
  for (int z = 0; z < classes; ++z) {
    const int freq = 200 * (z + 1);
    std::ostringstream name;
    name << "tone_" << freq << "hz";
    ds.class_names.push_back(name.str());
    for (int c = 0; c < per_class; ++c) {
      AudioClip clip;
      clip.sample_rate = kRate;
      clip.label = z;
      clip.samples.resize(kRate);
      const double phase = rng.Uniform(0.0, kTwoPi);
      const double amp = rng.Uniform(0.5, 1.0);
      for (int i = 0; i < kRate; ++i) {
        const double t = static_cast<double>(i) / kRate;
        const double v =
            amp * std::sin(kTwoPi * freq * t + phase) + 0.05 * rng.Normal();
        clip.samples[static_cast<size_t>(i)] =
            static_cast<float>(std::clamp(v, -1.0, 1.0));
      }
      ds.clips.push_back(std::move(clip));
    }
  }
  return ds;
}

Dataset LoadDirectoryTree(const std::string& dir) {
  if (!fs::is_directory(dir)) {
    throw DataError("data directory '" + dir + "' does not exist");
  }
  std::vector<std::string> class_dirs;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_directory()) class_dirs.push_back(entry.path().filename().string());
  }
  std::sort(class_dirs.begin(), class_dirs.end());
  if (class_dirs.empty()) {
    throw DataError("data directory '" + dir + "' contains no class subdirectories");
  }
  Dataset ds;
  ds.source = "dir:" + dir;
  for (size_t z = 0; z < class_dirs.size(); ++z) {
    ds.class_names.push_back(class_dirs[z]);
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(fs::path(dir) / class_dirs[z])) {
      if (entry.is_regular_file() && entry.path().extension() == ".wav") {
        files.push_back(entry.path().string());
      }
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      AudioClip clip = LoadWav(f);
      clip.label = static_cast<int>(z);
      ds.clips.push_back(std::move(clip));
    }
  }
  if (ds.clips.empty()) {
    throw DataError("data directory '" + dir + "' contains no WAV files");
  }
  return ds;
}

void StratifiedSplit(Dataset& dataset, double train_fraction,
                     double val_fraction, uint64_t seed) {
  if (train_fraction <= 0.0 || val_fraction < 0.0 ||
      train_fraction + val_fraction >= 1.0) {
    throw ConfigError("data split fractions must satisfy 0 < train, 0 <= val, train+val < 1");
  }
  const size_t num_classes = dataset.class_names.size();
  std::vector<std::vector<int64_t>> by_class(num_classes);
  for (size_t i = 0; i < dataset.clips.size(); ++i) {
    const int label = dataset.clips[i].label;
    if (label < 0 || static_cast<size_t>(label) >= num_classes) {
      throw DataError("clip " + std::to_string(i) + " has out-of-range label " +
                      std::to_string(label));
    }
    by_class[static_cast<size_t>(label)].push_back(static_cast<int64_t>(i));
  }

  dataset.splits.assign(dataset.clips.size(), Split::kTrain);
  dataset.split_seed = seed;
  Rng rng(seed);
  const double fractions[3] = {train_fraction, val_fraction,
                               1.0 - train_fraction - val_fraction};
  double carry[3] = {0.0, 0.0, 0.0};
  for (auto& members : by_class) {
    rng.Shuffle(members);
    const int64_t n = static_cast<int64_t>(members.size());
    double want[3];
    int64_t take[3];
    int64_t assigned = 0;
    for (int b = 0; b < 3; ++b) {
      want[b] = static_cast<double>(n) * fractions[b] + carry[b];
      take[b] = std::max<int64_t>(0, static_cast<int64_t>(std::floor(want[b])));
      assigned += take[b];
    }
    // Largest-remainder correction keeps per-class totals exact; carries
    // keep global totals exact across classes.
    while (assigned < n) {
      int best = 0;
      for (int b = 1; b < 3; ++b) {
        if (want[b] - static_cast<double>(take[b]) >
            want[best] - static_cast<double>(take[best])) {
          best = b;
        }
      }
      ++take[best];
      ++assigned;
    }
    while (assigned > n) {
      int best = -1;
      for (int b = 2; b >= 0; --b) {
        if (take[b] == 0) continue;
        if (best < 0 || want[b] - static_cast<double>(take[b]) <
                            want[best] - static_cast<double>(take[best])) {
          best = b;
        }
      }
      --take[best];
      --assigned;
    }
    for (int b = 0; b < 3; ++b) carry[b] = want[b] - static_cast<double>(take[b]);

    int64_t cursor = 0;
    for (int b = 0; b < 3; ++b) {
      for (int64_t i = 0; i < take[b]; ++i, ++cursor) {
        dataset.splits[static_cast<size_t>(members[static_cast<size_t>(cursor)])] =
            static_cast<Split>(b);
      }
    }
  }
}

std::vector<Batch> MakeBatches(const Dataset& dataset, Split split,
                               int batch_size, uint64_t seed, int64_t pad_to,
                               bool shuffle) {
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (pad_to < 1) throw ConfigError("batch pad length must be >= 1");
  std::vector<int64_t> indices = dataset.ClipIndices(split);
  if (indices.empty()) {
    throw DataError(std::string("split '") + SplitName(split) + "' is empty");
  }
  if (shuffle) {
    Rng rng(seed);
    rng.Shuffle(indices);
  }
  std::vector<Batch> batches;
  for (size_t start = 0; start < indices.size();
       start += static_cast<size_t>(batch_size)) {
    const size_t end =
        std::min(indices.size(), start + static_cast<size_t>(batch_size));
    const int64_t b = static_cast<int64_t>(end - start);
    Batch batch;
    batch.audio = Tensor<float>({b, 1, pad_to});
    for (size_t i = start; i < end; ++i) {
      const AudioClip& clip = dataset.clips[static_cast<size_t>(indices[i])];
      float* row = batch.audio.ptr() + static_cast<int64_t>(i - start) * pad_to;
      const int64_t copy = std::min<int64_t>(
          pad_to, static_cast<int64_t>(clip.samples.size()));
      for (int64_t t = 0; t < copy; ++t) row[t] = clip.samples[static_cast<size_t>(t)];
      batch.labels.push_back(clip.label);
    }
    batches.push_back(std::move(batch));
  }
  return batches;
}

std::string DatasetManifestJson(const Dataset& dataset) {
  json clips = json::array();
  for (size_t i = 0; i < dataset.clips.size(); ++i) {
    clips.push_back({{"path", dataset.clips[i].path},
                     {"label", dataset.clips[i].label},
                     {"split", SplitName(dataset.splits[i])}});
  }
  json j;
  j["classes"] = dataset.class_names;
  j["source"] = dataset.source;
  j["split_seed"] = dataset.split_seed;
  j["clips"] = std::move(clips);
  return j.dump();
}

void WriteDatasetManifest(const Dataset& dataset, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot write dataset manifest '" + path + "'");
  os << DatasetManifestJson(dataset) << '\n';
}

Dataset LoadDatasetManifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open dataset manifest '" + path + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  json j = json::parse(ss.str(), nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw DataError("dataset manifest '" + path + "' is not valid JSON");
  }
  if (!j.contains("classes") || !j.contains("source") || !j.contains("clips")) {
    throw DataError("dataset manifest '" + path + "' is missing sections");
  }
  const std::string source = j["source"].get<std::string>();
  const json& clip_entries = j["clips"];

  Dataset ds;
  int classes = 0, per_class = 0;
  uint64_t seed = 0;
  if (ParseSyntheticSource(source, classes, per_class, seed)) {
    ds = MakeSynthetic(classes, per_class, seed);
  } else {
    ds.source = source;
    ds.class_names = j["classes"].get<std::vector<std::string>>();
    for (const auto& entry : clip_entries) {
      AudioClip clip = LoadWav(entry.at("path").get<std::string>());
      clip.label = entry.at("label").get<int>();
      ds.clips.push_back(std::move(clip));
    }
  }
  if (clip_entries.size() != ds.clips.size()) {
    throw DataError("dataset manifest '" + path + "' lists " +
                    std::to_string(clip_entries.size()) + " clips, source has " +
                    std::to_string(ds.clips.size()));
  }
  ds.split_seed = j.value("split_seed", uint64_t{0});
  ds.splits.resize(ds.clips.size());
  for (size_t i = 0; i < ds.clips.size(); ++i) {
    const json& entry = clip_entries[i];
    if (entry.at("label").get<int>() != ds.clips[i].label) {
      throw DataError("dataset manifest clip " + std::to_string(i) +
                      " label does not match its source");
    }
    ds.splits[i] = ParseSplit(entry.at("split").get<std::string>());
  }
  return ds;
}

Dataset BuildDataset(const DataConfig& config) {
  config.Validate();
  if (config.source == "manifest") return LoadDatasetManifest(config.manifest);
  Dataset ds = config.source == "synthetic"
                   ? MakeSynthetic(config.synthetic_classes,
                                   config.synthetic_per_class, config.seed)
                   : LoadDirectoryTree(config.dir);
  StratifiedSplit(ds, config.train_fraction, config.val_fraction, config.seed);
  return ds;
}

}  // namespace coscov
