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

#include "coscov/config.hpp"

#include <fstream>
#include <sstream>

#include "coscov/errors.hpp"
#include "json.hpp"

namespace coscov {
namespace {

using nlohmann::json;

[[noreturn]] void BadType(const std::string& path, const char* want) {
  throw ConfigError("config key '" + path + "' must be " + want);
}

int64_t AsInt(const json& v, const std::string& path) {
  if (!v.is_number_integer() && !v.is_number_unsigned()) BadType(path, "an integer");
  return v.get<int64_t>();
}

uint64_t AsU64(const json& v, const std::string& path) {
  if (v.is_number_unsigned()) return v.get<uint64_t>();
  if (v.is_number_integer() && v.get<int64_t>() >= 0) {
    return static_cast<uint64_t>(v.get<int64_t>());
  }
  BadType(path, "a non-negative integer");
}

double AsNum(const json& v, const std::string& path) {
  if (!v.is_number()) BadType(path, "a number");
  return v.get<double>();
}

bool AsBool(const json& v, const std::string& path) {
  if (!v.is_boolean()) BadType(path, "a boolean");
  return v.get<bool>();
}

std::string AsStr(const json& v, const std::string& path) {
  if (!v.is_string()) BadType(path, "a string");
  return v.get<std::string>();
}

std::vector<int64_t> AsIntList(const json& v, const std::string& path) {
  if (!v.is_array()) BadType(path, "an integer list");
  std::vector<int64_t> out;
  for (const auto& e : v) out.push_back(AsInt(e, path));
  return out;
}

// Rejects keys outside `known`, naming the full path.
void CheckKeys(const json& obj, const std::string& prefix,
               std::initializer_list<const char*> known) {
  if (!obj.is_object()) {
    throw ConfigError("config section '" + prefix + "' must be an object");
  }
  for (const auto& item : obj.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || item.key() == k;
    if (!ok) {
      throw ConfigError("unknown config key: " + prefix + "." + item.key());
    }
  }
}

VqSettings ParseVq(const json& obj, VqSettings base) {
  CheckKeys(obj, "model.vq", {"enabled", "codebook_size", "beta"});
  if (obj.contains("enabled")) base.enabled = AsBool(obj["enabled"], "model.vq.enabled");
  if (obj.contains("codebook_size")) {
    base.codebook_size = AsInt(obj["codebook_size"], "model.vq.codebook_size");
  }
  if (obj.contains("beta")) {
    base.beta = static_cast<float>(AsNum(obj["beta"], "model.vq.beta"));
  }
  return base;
}

MemorySettings ParseMemory(const json& obj, MemorySettings base) {
  CheckKeys(obj, "model.memory", {"enabled", "size", "filter_len", "gap_axis"});
  if (obj.contains("enabled")) base.enabled = AsBool(obj["enabled"], "model.memory.enabled");
  if (obj.contains("size")) base.size = AsInt(obj["size"], "model.memory.size");
  if (obj.contains("filter_len")) {
    base.filter_len = AsInt(obj["filter_len"], "model.memory.filter_len");
  }
  if (obj.contains("gap_axis")) {
    const std::string axis = AsStr(obj["gap_axis"], "model.memory.gap_axis");
    if (axis == "channels") {
      base.gap_axis = WriterGapAxis::kChannels;
    } else if (axis == "time") {
      base.gap_axis = WriterGapAxis::kTime;
    } else {
      throw ConfigError("config key 'model.memory.gap_axis' must be \"channels\" or \"time\", got \"" +
                        axis + "\"");
    }
  }
  return base;
}

ModelConfig ParseModel(const json& obj, ModelConfig base) {
  CheckKeys(obj, "model",
            {"architecture", "channels", "num_classes", "filter_lens", "pools",
             "dropout", "input_len", "vq", "memory", "seed"});
  if (obj.contains("architecture")) {
    const Architecture arch =
        ParseArchitecture(AsStr(obj["architecture"], "model.architecture"));
    base.architecture = arch;
    base.vq.enabled = (arch == Architecture::kVqccm);
    base.memory.enabled = (arch == Architecture::kVqccm);
  }
  if (obj.contains("channels")) base.channels = AsIntList(obj["channels"], "model.channels");
  if (obj.contains("num_classes")) base.num_classes = AsInt(obj["num_classes"], "model.num_classes");
  if (obj.contains("filter_lens")) base.filter_lens = AsIntList(obj["filter_lens"], "model.filter_lens");
  if (obj.contains("pools")) base.pools = AsIntList(obj["pools"], "model.pools");
  if (obj.contains("dropout")) base.dropout = AsNum(obj["dropout"], "model.dropout");
  if (obj.contains("input_len")) base.input_len = AsInt(obj["input_len"], "model.input_len");
  if (obj.contains("vq")) base.vq = ParseVq(obj["vq"], base.vq);
  if (obj.contains("memory")) base.memory = ParseMemory(obj["memory"], base.memory);
  if (obj.contains("seed")) base.seed = AsU64(obj["seed"], "model.seed");
  return base;
}

TrainConfig ParseTrain(const json& obj, TrainConfig base) {
  CheckKeys(obj, "train",
            {"optimizer", "learning_rate", "beta1", "beta2", "epsilon",
             "momentum", "epochs", "batch_size", "seed", "eval_every",
             "early_stop_patience", "target_val_accuracy", "clip_norm"});
  if (obj.contains("optimizer")) base.optimizer = AsStr(obj["optimizer"], "train.optimizer");
  if (obj.contains("learning_rate")) base.learning_rate = AsNum(obj["learning_rate"], "train.learning_rate");
  if (obj.contains("beta1")) base.beta1 = AsNum(obj["beta1"], "train.beta1");
  if (obj.contains("beta2")) base.beta2 = AsNum(obj["beta2"], "train.beta2");
  if (obj.contains("epsilon")) base.epsilon = AsNum(obj["epsilon"], "train.epsilon");
  if (obj.contains("momentum")) base.momentum = AsNum(obj["momentum"], "train.momentum");
  if (obj.contains("epochs")) base.epochs = static_cast<int>(AsInt(obj["epochs"], "train.epochs"));
  if (obj.contains("batch_size")) base.batch_size = static_cast<int>(AsInt(obj["batch_size"], "train.batch_size"));
  if (obj.contains("seed")) base.seed = AsU64(obj["seed"], "train.seed");
  if (obj.contains("eval_every")) base.eval_every = static_cast<int>(AsInt(obj["eval_every"], "train.eval_every"));
  if (obj.contains("early_stop_patience")) {
    base.early_stop_patience = static_cast<int>(AsInt(obj["early_stop_patience"], "train.early_stop_patience"));
  }
  if (obj.contains("target_val_accuracy")) {
    base.target_val_accuracy = AsNum(obj["target_val_accuracy"], "train.target_val_accuracy");
  }
  if (obj.contains("clip_norm")) base.clip_norm = AsNum(obj["clip_norm"], "train.clip_norm");
  return base;
}

DataConfig ParseData(const json& obj, DataConfig base) {
  CheckKeys(obj, "data",
            {"source", "dir", "manifest", "synthetic_classes",
             "synthetic_per_class", "seed", "train_fraction", "val_fraction",
             "pad_to"});
  if (obj.contains("source")) base.source = AsStr(obj["source"], "data.source");
  if (obj.contains("dir")) base.dir = AsStr(obj["dir"], "data.dir");
  if (obj.contains("manifest")) base.manifest = AsStr(obj["manifest"], "data.manifest");
  if (obj.contains("synthetic_classes")) {
    base.synthetic_classes = static_cast<int>(AsInt(obj["synthetic_classes"], "data.synthetic_classes"));
  }
  if (obj.contains("synthetic_per_class")) {
    base.synthetic_per_class = static_cast<int>(AsInt(obj["synthetic_per_class"], "data.synthetic_per_class"));
  }
  if (obj.contains("seed")) base.seed = AsU64(obj["seed"], "data.seed");
  if (obj.contains("train_fraction")) base.train_fraction = AsNum(obj["train_fraction"], "data.train_fraction");
  if (obj.contains("val_fraction")) base.val_fraction = AsNum(obj["val_fraction"], "data.val_fraction");
  if (obj.contains("pad_to")) base.pad_to = AsInt(obj["pad_to"], "data.pad_to");
  return base;
}

json ModelToJson(const ModelConfig& c) {
  json j;
  j["architecture"] = ArchitectureName(c.architecture);
  j["channels"] = c.channels;
  j["num_classes"] = c.num_classes;
  j["filter_lens"] = c.filter_lens;
  j["pools"] = c.pools;
  j["dropout"] = c.dropout;
  j["input_len"] = c.input_len;
  j["vq"] = {{"enabled", c.vq.enabled},
             {"codebook_size", c.vq.codebook_size},
             {"beta", c.vq.beta}};
  j["memory"] = {
      {"enabled", c.memory.enabled},
      {"size", c.memory.size},
      {"filter_len", c.memory.filter_len},
      {"gap_axis",
       c.memory.gap_axis == WriterGapAxis::kChannels ? "channels" : "time"}};
  j["seed"] = c.seed;
  return j;
}

json TrainToJson(const TrainConfig& c) {
  json j;
  j["optimizer"] = c.optimizer;
  j["learning_rate"] = c.learning_rate;
  j["beta1"] = c.beta1;
  j["beta2"] = c.beta2;
  j["epsilon"] = c.epsilon;
  j["momentum"] = c.momentum;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["seed"] = c.seed;
  j["eval_every"] = c.eval_every;
  j["early_stop_patience"] = c.early_stop_patience;
  j["target_val_accuracy"] = c.target_val_accuracy;
  j["clip_norm"] = c.clip_norm;
  return j;
}

json DataToJson(const DataConfig& c) {
  json j;
  j["source"] = c.source;
  j["dir"] = c.dir;
  j["manifest"] = c.manifest;
  j["synthetic_classes"] = c.synthetic_classes;
  j["synthetic_per_class"] = c.synthetic_per_class;
  j["seed"] = c.seed;
  j["train_fraction"] = c.train_fraction;
  j["val_fraction"] = c.val_fraction;
  j["pad_to"] = c.pad_to;
  return j;
}

json ParseJsonText(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config is not valid JSON");
  return j;
}

}  // namespace

std::string ArchitectureName(Architecture arch) {
  switch (arch) {
    case Architecture::kCosCov: return "coscov";
    case Architecture::kVqccm: return "vqccm";
    case Architecture::kPlainCnn: return "plain-cnn";
  }
  return "coscov";
}

Architecture ParseArchitecture(const std::string& name) {
  if (name == "coscov") return Architecture::kCosCov;
  if (name == "vqccm") return Architecture::kVqccm;
  if (name == "plain-cnn") return Architecture::kPlainCnn;
  throw ConfigError("unknown architecture '" + name +
                    "' (expected coscov, vqccm, or plain-cnn)");
}

ModelConfig ModelConfig::Defaults(Architecture arch) {
  ModelConfig cfg;
  cfg.architecture = arch;
  cfg.vq.enabled = (arch == Architecture::kVqccm);
  cfg.memory.enabled = (arch == Architecture::kVqccm);
  return cfg;
}

int64_t ModelConfig::PoolProduct() const {
  int64_t p = 1;
  for (int64_t w : pools) p *= w;
  return p;
}

std::vector<int64_t> ModelConfig::SequenceLengths() const {
  std::vector<int64_t> seq{input_len};
  for (int64_t w : pools) seq.push_back(seq.back() / w);
  return seq;
}

int64_t ModelConfig::VqDim() const {
  return pools.empty() ? input_len : input_len / pools[0];
}

void ModelConfig::Validate() const {
  if (channels.empty()) {
    throw ConfigError("model.channels must contain at least one hidden layer");
  }
  for (size_t i = 0; i < channels.size(); ++i) {
    if (channels[i] < 1) {
      throw ConfigError("model.channels[" + std::to_string(i) + "] must be >= 1");
    }
  }
  if (num_classes < 2) throw ConfigError("model.num_classes must be >= 2");
  if (filter_lens.size() != channels.size() + 1) {
    throw ConfigError("model.filter_lens needs one entry per layer including the head: expected " +
                      std::to_string(channels.size() + 1) + ", got " +
                      std::to_string(filter_lens.size()));
  }
  for (size_t i = 0; i < filter_lens.size(); ++i) {
    if (filter_lens[i] < 1) {
      throw ConfigError("model.filter_lens[" + std::to_string(i) + "] must be >= 1");
    }
  }
  if (pools.size() != channels.size()) {
    throw ConfigError("model.pools needs one entry per hidden layer: expected " +
                      std::to_string(channels.size()) + ", got " +
                      std::to_string(pools.size()));
  }
  for (size_t i = 0; i < pools.size(); ++i) {
    if (pools[i] < 1) {
      throw ConfigError("model.pools[" + std::to_string(i) + "] must be >= 1");
    }
  }
  if (dropout < 0.0 || dropout >= 1.0) {
    throw ConfigError("model.dropout must be in [0,1)");
  }
  if (input_len < PoolProduct()) {
    throw ConfigError("model.input_len " + std::to_string(input_len) +
                      " is below the minimum " + std::to_string(PoolProduct()) +
                      " required by the pool schedule");
  }
  if (vq.codebook_size < 1) throw ConfigError("model.vq.codebook_size must be >= 1");
  if (vq.beta < 0.0f) throw ConfigError("model.vq.beta must be >= 0");
  if (memory.size < 1) throw ConfigError("model.memory.size must be >= 1");
  if (memory.filter_len < 1) throw ConfigError("model.memory.filter_len must be >= 1");
  if (architecture == Architecture::kPlainCnn && (vq.enabled || memory.enabled)) {
    throw ConfigError("model.architecture plain-cnn does not support vq or memory");
  }
}

void TrainConfig::Validate() const {
  if (optimizer != "adam" && optimizer != "sgd") {
    throw ConfigError("train.optimizer must be adam or sgd, got '" + optimizer + "'");
  }
  if (learning_rate <= 0.0) throw ConfigError("train.learning_rate must be > 0");
  if (beta1 < 0.0 || beta1 >= 1.0) throw ConfigError("train.beta1 must be in [0,1)");
  if (beta2 < 0.0 || beta2 >= 1.0) throw ConfigError("train.beta2 must be in [0,1)");
  if (epsilon <= 0.0) throw ConfigError("train.epsilon must be > 0");
  if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (eval_every < 1) throw ConfigError("train.eval_every must be >= 1");
  if (early_stop_patience < 0) throw ConfigError("train.early_stop_patience must be >= 0");
  if (target_val_accuracy < 0.0 || target_val_accuracy > 1.0) {
    throw ConfigError("train.target_val_accuracy must be in [0,1]");
  }
  if (clip_norm < 0.0) throw ConfigError("train.clip_norm must be >= 0");
}

void DataConfig::Validate() const {
  if (source != "synthetic" && source != "dir" && source != "manifest") {
    throw ConfigError("data.source must be synthetic, dir, or manifest, got '" +
                      source + "'");
  }
  if (source == "dir" && dir.empty()) throw ConfigError("data.dir is required for data.source dir");
  if (source == "manifest" && manifest.empty()) {
    throw ConfigError("data.manifest is required for data.source manifest");
  }
  if (synthetic_classes < 2) throw ConfigError("data.synthetic_classes must be >= 2");
  if (synthetic_per_class < 1) throw ConfigError("data.synthetic_per_class must be >= 1");
  if (train_fraction <= 0.0 || val_fraction < 0.0 ||
      train_fraction + val_fraction >= 1.0) {
    throw ConfigError("data split fractions must satisfy 0 < train, 0 <= val, train+val < 1");
  }
  if (pad_to < 1) throw ConfigError("data.pad_to must be >= 1");
}

std::string ToJson(const ModelConfig& cfg) { return ModelToJson(cfg).dump(); }
std::string ToJson(const TrainConfig& cfg) { return TrainToJson(cfg).dump(); }
std::string ToJson(const DataConfig& cfg) { return DataToJson(cfg).dump(); }

std::string ToJson(const FullConfig& cfg) {
  json j;
  j["model"] = ModelToJson(cfg.model);
  j["train"] = TrainToJson(cfg.train);
  j["data"] = DataToJson(cfg.data);
  return j.dump();
}

FullConfig ParseConfigJson(const std::string& text, FullConfig base) {
  const json j = ParseJsonText(text);
  CheckKeys(j, "config", {"model", "train", "data"});
  if (j.contains("model")) base.model = ParseModel(j["model"], base.model);
  if (j.contains("train")) base.train = ParseTrain(j["train"], base.train);
  if (j.contains("data")) base.data = ParseData(j["data"], base.data);
  return base;
}

FullConfig LoadConfigFile(const std::string& path, FullConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ParseConfigJson(ss.str(), std::move(base));
}

ModelConfig ParseModelConfigJson(const std::string& text, ModelConfig base) {
  return ParseModel(ParseJsonText(text), std::move(base));
}

}  // namespace coscov
