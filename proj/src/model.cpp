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

#include "coscov/model.hpp"

#include <cmath>
#include <unordered_map>

#include "coscov/cos_layers.hpp"
#include "coscov/errors.hpp"
#include "coscov/kernels.hpp"
#include "coscov/memory.hpp"
#include "coscov/vq.hpp"

namespace coscov {
namespace {

// Layer index k runs 1..N (N = head). cin/cout of the conv at layer k.
int64_t CinOf(const ModelConfig& c, int k) {
  return k == 1 ? 1 : c.channels[static_cast<size_t>(k - 2)];
}

int64_t CoutOf(const ModelConfig& c, int k) {
  const int n = static_cast<int>(c.channels.size()) + 1;
  return k == n ? c.num_classes : c.channels[static_cast<size_t>(k - 1)];
}

std::string LayerPrefix(int k) { return "layer" + std::to_string(k); }

void FillUniform(Tensor<float>& t, Rng& rng, double lo, double hi) {
  for (int64_t i = 0; i < t.numel(); ++i) {
    t.data[i] = static_cast<float>(rng.Uniform(lo, hi));
  }
}

// Plain convolution weights: U(+-1/sqrt(Cin*L)).
void FillConvInit(Tensor<float>& t, Rng& rng, int64_t cin, int64_t flen) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(cin * flen));
  FillUniform(t, rng, -bound, bound);
}

void FillDenseInit(Tensor<float>& t, Rng& rng, int64_t fan_in) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  FillUniform(t, rng, -bound, bound);
}

void MinMax(const Tensor<float>& t, float& lo, float& hi) {
  lo = t.numel() > 0 ? t.data[0] : 0.0f;
  hi = lo;
  for (int64_t i = 1; i < t.numel(); ++i) {
    lo = std::min(lo, t.data[i]);
    hi = std::max(hi, t.data[i]);
  }
}

int64_t WriterFanIn(const ModelConfig& c, int k,
                    const std::vector<int64_t>& seq) {
  return c.memory.gap_axis == WriterGapAxis::kChannels
             ? seq[static_cast<size_t>(k)]
             : CoutOf(c, k);
}

}  // namespace

Model::Model(ModelConfig config) : config_(std::move(config)) {
  config_.Validate();
  InitParams();
}

void Model::InitParams() {
  Rng rng(config_.seed);
  const int n = static_cast<int>(config_.channels.size()) + 1;
  const std::vector<int64_t> seq = config_.SequenceLengths();

  for (int k = 1; k <= n; ++k) {
    const int64_t cin = CinOf(config_, k), cout = CoutOf(config_, k);
    const int64_t flen = config_.filter_lens[static_cast<size_t>(k - 1)];
    if (config_.architecture == Architecture::kPlainCnn) {
      Tensor<float> w({cin, cout, flen});
      FillConvInit(w, rng, cin, flen);
      params_.push_back({LayerPrefix(k) + ".weights", std::move(w)});
    } else {
      Tensor<float> t1({cin, cout}), t2({cin, cout});
      InitCosBankParams(t1, t2, rng);
      params_.push_back({LayerPrefix(k) + ".theta1", std::move(t1)});
      params_.push_back({LayerPrefix(k) + ".theta2", std::move(t2)});
    }
  }

  if (config_.vq.enabled) {
    Tensor<float> codebook({config_.vq.codebook_size, config_.VqDim()});
    InitCodebook(codebook, rng);
    params_.push_back({"vq.codebook", std::move(codebook)});
  }

  if (config_.memory.enabled) {
    // Reader/writer theta shapes do not depend on memory.filter_len; the
    // length only enters at filter generation time.
    const int64_t m = config_.memory.size;
    Tensor<float> initial({1, m});
    FillUniform(initial, rng, -0.01, 0.01);
    params_.push_back({"memory.initial", std::move(initial)});
    for (int k = 1; k <= n; ++k) {
      const std::string rp = "memory.reader" + std::to_string(k);
      const std::string wp = "memory.writer" + std::to_string(k);
      if (k >= 2) {  // readers gate layer inputs; layer 1 reads nothing
        const int64_t s = seq[static_cast<size_t>(k - 1)];
        const int64_t c = CinOf(config_, k);
        Tensor<float> fr_w({m, s});
        FillDenseInit(fr_w, rng, m);
        Tensor<float> t1({1, c}), t2({1, c});
        InitCosBankParams(t1, t2, rng);
        params_.push_back({rp + ".fr_w", std::move(fr_w)});
        params_.push_back({rp + ".fr_b", Tensor<float>({s})});
        params_.push_back({rp + ".theta1", std::move(t1)});
        params_.push_back({rp + ".theta2", std::move(t2)});
      }
      if (k <= n - 1) {  // the head only reads
        const int64_t c = CoutOf(config_, k);
        const int64_t fan = WriterFanIn(config_, k, seq);
        Tensor<float> t1({c, c}), t2({c, c});
        InitCosBankParams(t1, t2, rng);
        Tensor<float> fw_w({fan, m});
        FillDenseInit(fw_w, rng, fan);
        params_.push_back({wp + ".theta1", std::move(t1)});
        params_.push_back({wp + ".theta2", std::move(t2)});
        params_.push_back({wp + ".fw_w", std::move(fw_w)});
        params_.push_back({wp + ".fw_b", Tensor<float>({m})});
      }
    }
  }
}

Tensor<float>* Model::FindParam(std::string_view name) {
  for (auto& p : params_) {
    if (p.name == name) return &p.value;
  }
  return nullptr;
}

const Tensor<float>* Model::FindParam(std::string_view name) const {
  for (const auto& p : params_) {
    if (p.name == name) return &p.value;
  }
  return nullptr;
}

int64_t Model::TotalParams() const {
  int64_t total = 0;
  for (const auto& p : params_) total += p.value.numel();
  return total;
}

Tensor<float> Model::AdaptInput(const Tensor<float>& audio,
                                int64_t target_len) {
  if (audio.rank() != 3 || audio.dim(1) != 1) {
    throw ConfigError("adapter: audio must be [B,1,S], got " +
                      audio.ShapeStr());
  }
  if (target_len < 1) throw ConfigError("adapter: target length must be >= 1");
  const int64_t b = audio.dim(0), s = audio.dim(2);
  if (s == target_len) return audio;
  if (s < target_len) {
    Tensor<float> out({b, 1, target_len});
    for (int64_t r = 0; r < b; ++r) {
      const float* src = audio.ptr() + r * s;
      float* dst = out.ptr() + r * target_len;
      for (int64_t i = 0; i < s; ++i) dst[i] = src[i];
    }
    return out;
  }
  const int64_t window = (s + target_len - 1) / target_len;
  const int64_t padded_len = window * target_len;
  const Tensor<float>* src = &audio;
  Tensor<float> padded;
  if (padded_len != s) {
    padded = Tensor<float>({b, 1, padded_len});
    for (int64_t r = 0; r < b; ++r) {
      const float* in_row = audio.ptr() + r * s;
      float* dst = padded.ptr() + r * padded_len;
      for (int64_t i = 0; i < s; ++i) dst[i] = in_row[i];
    }
    src = &padded;
  }
  Tensor<float> out({b, 1, target_len});
  std::vector<int64_t> argmax(static_cast<size_t>(b * target_len));
  kernels::MaxPool1dForward(src->ptr(), out.ptr(), argmax.data(), b,
                            padded_len, window);
  return out;
}

ForwardResult Model::Forward(Tape<float>& tape, const Tensor<float>& audio,
                             bool training, Rng& dropout_rng,
                             bool params_need_grad) const {
  const int n = static_cast<int>(config_.channels.size()) + 1;
  const std::vector<int64_t> seq = config_.SequenceLengths();
  const Tensor<float> adapted = AdaptInput(audio, config_.input_len);
  const int64_t batch = adapted.dim(0);

  ForwardResult result;
  std::unordered_map<std::string, VarId> leaf;
  for (const auto& p : params_) {
    const VarId id = tape.Leaf(p.value, params_need_grad);
    leaf[p.name] = id;
    result.params.emplace_back(p.name, id);
  }
  const auto var = [&leaf](const std::string& name) {
    const auto it = leaf.find(name);
    if (it == leaf.end()) throw ConfigError("missing parameter " + name);
    return it->second;
  };
  const auto bank = [&](const std::string& prefix, int64_t flen) {
    return CosBankVars{var(prefix + ".theta1"), var(prefix + ".theta2"), flen};
  };
  // Plain convolutions take their weights leaf directly; cosine layers
  // regenerate filters from theta inside the tape.
  const auto layer_filters = [&](int k) {
    const std::string prefix = LayerPrefix(k);
    const int64_t flen = config_.filter_lens[static_cast<size_t>(k - 1)];
    if (config_.architecture == Architecture::kPlainCnn) {
      return var(prefix + ".weights");
    }
    return GenerateFilters(tape, bank(prefix, flen));
  };

  VarId x = tape.Leaf(adapted, false);
  VarId mem = -1;
  if (config_.memory.enabled) {
    mem = tape.BroadcastRows(var("memory.initial"), batch);
  }

  const auto record_layer = [&](int k, VarId act, VarId shaped) {
    LayerDiagnostics d;
    d.layer = k;
    d.output_shape = tape.Value(shaped).shape;
    MinMax(tape.Value(act), d.min_activation, d.max_activation);
    result.layers.push_back(std::move(d));
  };
  const auto memory_read = [&](int k, VarId features) {
    const std::string rp = "memory.reader" + std::to_string(k);
    ReaderVars r{var(rp + ".fr_w"), var(rp + ".fr_b"),
                 bank(rp, config_.memory.filter_len)};
    return MemoryRead(tape, mem, features, r);
  };
  const auto memory_write = [&](int k, VarId features) {
    const std::string wp = "memory.writer" + std::to_string(k);
    WriterVars w{bank(wp, config_.memory.filter_len), var(wp + ".fw_w"),
                 var(wp + ".fw_b")};
    const VarId next = MemoryWrite(tape, mem, features, w,
                                   config_.memory.gap_axis);
    const Tensor<float>&prev_v = tape.Value(mem), &next_v = tape.Value(next);
    float max_delta = 0.0f;
    for (int64_t i = 0; i < prev_v.numel(); ++i) {
      max_delta = std::max(max_delta, std::abs(next_v.data[i] - prev_v.data[i]));
    }
    result.memory_write_max_delta.push_back(max_delta);
    mem = next;
  };

  // Layer 1: conv, tanh, pool. No dropout here in any architecture; its
  // output feeds the codebook, and dropped maps would corrupt it.
  {
    const VarId conv = tape.Conv1d(x, layer_filters(1));
    const VarId act = tape.Tanh(conv);
    x = tape.MaxPool1d(act, config_.pools[0]);
    record_layer(1, act, x);
  }
  if (config_.vq.enabled) {
    const VqLayerOutput<float> vq =
        ApplyVq(tape, x, var("vq.codebook"), config_.vq.beta);
    x = vq.quantised;
    result.vq_codebook_loss = vq.codebook_loss;
    result.vq_commitment_loss = vq.commitment_loss;
    result.vq_indices = vq.indices;
  }
  if (config_.memory.enabled) memory_write(1, x);

  for (int k = 2; k <= n - 1; ++k) {
    if (config_.memory.enabled) x = memory_read(k, x);
    const VarId conv = tape.Conv1d(x, layer_filters(k));
    const VarId act = tape.Tanh(conv);
    const VarId pooled =
        tape.MaxPool1d(act, config_.pools[static_cast<size_t>(k - 1)]);
    x = tape.SpatialDropout1d(pooled, config_.dropout, training, dropout_rng);
    record_layer(k, act, pooled);
    if (config_.memory.enabled) memory_write(k, x);
  }

  if (config_.memory.enabled) x = memory_read(n, x);
  const VarId conv = tape.Conv1d(x, layer_filters(n));
  result.logits = tape.GapTime(conv);
  record_layer(n, result.logits, result.logits);
  return result;
}

ParamCountReport CountParameters(const ModelConfig& config) {
  config.Validate();
  ParamCountReport report;
  const int n = static_cast<int>(config.channels.size()) + 1;
  const std::vector<int64_t> seq = config.SequenceLengths();
  for (int k = 1; k <= n; ++k) {
    const int64_t cin = CinOf(config, k), cout = CoutOf(config, k);
    const int64_t flen = config.filter_lens[static_cast<size_t>(k - 1)];
    ParamCountRow row;
    row.name = LayerPrefix(k) + " (" + std::to_string(cin) + "x" +
               std::to_string(cout) + ", L=" + std::to_string(flen) + ")";
    row.coscov_count = 2 * cin * cout;
    row.plain_count = cin * cout * flen;
    report.conv_coscov_total += row.coscov_count;
    report.conv_plain_total += row.plain_count;
    report.conv_rows.push_back(std::move(row));
  }
  report.reduction_percent =
      100.0 *
      static_cast<double>(report.conv_plain_total - report.conv_coscov_total) /
      static_cast<double>(report.conv_plain_total);
  if (config.vq.enabled) {
    report.vq_params = config.vq.codebook_size * config.VqDim();
  }
  if (config.memory.enabled) {
    const int64_t m = config.memory.size;
    int64_t total = m;  // initial vector
    for (int k = 2; k <= n; ++k) {
      const int64_t s = seq[static_cast<size_t>(k - 1)];
      total += m * s + s + 2 * CinOf(config, k);
    }
    for (int k = 1; k <= n - 1; ++k) {
      const int64_t c = CoutOf(config, k);
      total += 2 * c * c + WriterFanIn(config, k, seq) * m + m;
    }
    report.memory_params = total;
  }
  report.total = (config.architecture == Architecture::kPlainCnn
                      ? report.conv_plain_total
                      : report.conv_coscov_total) +
                 report.vq_params + report.memory_params;
  return report;
}

}  // namespace coscov
