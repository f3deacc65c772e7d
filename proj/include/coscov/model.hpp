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

#ifndef COSCOV_MODEL_H_
#define COSCOV_MODEL_H_

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "coscov/config.hpp"
#include "coscov/rng.hpp"
#include "coscov/tape.hpp"
#include "coscov/tensor.hpp"

// Whole-network assembly. A Model owns named parameter tensors in a
// stable order; every forward pass registers them on a fresh tape, so
// training reads gradients back by name. Parameter initialisation draws
// from a single seeded stream in a fixed order (conv banks first, then
// codebook, then memory blocks), which makes a vqccm model with both
// switches off bit-identical to the coscov model of the same seed.
//
// Full wiring with N layers (hidden 1..N-1 plus head):
//   adapter -> layer1(conv,tanh,pool) -> VQ -> write ->
//   [layer k: read -> conv,tanh,pool,dropout -> write] for k=2..N-1 ->
//   read -> head(conv, gap_time) -> logits
// VQ and the read/write sites drop out of the chain when disabled.
// Dropout never applies to layer 1: its features feed the codebook, and
// quantising dropped maps would corrupt codebook statistics.

namespace coscov {

struct ParamTensor {
  std::string name;
  Tensor<float> value;
};

struct LayerDiagnostics {
  int layer = 0;                      // 1-based, N = head
  std::vector<int64_t> output_shape;  // post-pool (head: logits)
  float min_activation = 0.0f;        // post-tanh (head: logits)
  float max_activation = 0.0f;
};

struct ForwardResult {
  VarId logits = -1;
  VarId vq_codebook_loss = -1;    // -1 when VQ disabled
  VarId vq_commitment_loss = -1;  // -1 when VQ disabled
  std::vector<int64_t> vq_indices;
  std::vector<LayerDiagnostics> layers;
  // max |new_mem - mem| per writer, in layer order.
  std::vector<float> memory_write_max_delta;
  // name -> tape leaf, in params() order.
  std::vector<std::pair<std::string, VarId>> params;
};

class Model {
 public:
  explicit Model(ModelConfig config);  // validates, then seeds parameters

  const ModelConfig& config() const { return config_; }
  std::vector<ParamTensor>& params() { return params_; }
  const std::vector<ParamTensor>& params() const { return params_; }
  Tensor<float>* FindParam(std::string_view name);
  const Tensor<float>* FindParam(std::string_view name) const;
  int64_t TotalParams() const;

  // audio: [B,1,S_raw]; runs the input adapter, then the network.
  // dropout_rng is consumed only when training and dropout > 0.
  ForwardResult Forward(Tape<float>& tape, const Tensor<float>& audio,
                        bool training, Rng& dropout_rng,
                        bool params_need_grad) const;

  // Length normalisation: identity at target; zero-pad right when short;
  // max-pool of window k when S_raw == k * target; otherwise pad right
  // to the next multiple and pool.
  static Tensor<float> AdaptInput(const Tensor<float>& audio,
                                  int64_t target_len);

 private:
  void InitParams();

  ModelConfig config_;
  std::vector<ParamTensor> params_;
};

// Exact integer parameter accounting for a config, including the
// structurally identical plain-convolution twin of the conv stack.
struct ParamCountRow {
  std::string name;
  int64_t coscov_count = 0;
  int64_t plain_count = 0;
};

struct ParamCountReport {
  std::vector<ParamCountRow> conv_rows;  // one per layer
  int64_t conv_coscov_total = 0;
  int64_t conv_plain_total = 0;
  double reduction_percent = 0.0;  // (plain - coscov) / plain * 100
  int64_t vq_params = 0;           // k * d when enabled
  int64_t memory_params = 0;       // when enabled
  int64_t total = 0;               // params of the configured architecture
};

ParamCountReport CountParameters(const ModelConfig& config);

}  // namespace coscov

#endif  // COSCOV_MODEL_H_
