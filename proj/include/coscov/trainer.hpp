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

#ifndef COSCOV_TRAINER_H_
#define COSCOV_TRAINER_H_

#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "coscov/config.hpp"
#include "coscov/data.hpp"
#include "coscov/model.hpp"

// Training loop and experiment runners. One step records a fresh tape:
// total loss = cross-entropy + codebook + commitment, where the VQ terms
// are the very same node as zero contributions when VQ is off (total is
// then the cross-entropy node itself, equal by identity). Determinism
// contract: fixed (config, seed, manifest) reproduce bit-identical
// parameters, because batch order, dropout masks, and kernel accumulation
// order are all seed- or structure-fixed.
//
// Sweep and ablation runners take an injectable cell hook (config, seed)
// -> accuracy so experiment logic is testable without training.

namespace coscov {

struct StepMetrics {
  double total = 0.0;
  double cross_entropy = 0.0;
  double codebook = 0.0;
  double commitment = 0.0;
  int64_t correct = 0;  // argmax hits under the training-mode forward
  int64_t examples = 0;
};

class Optimizer {
 public:
  virtual ~Optimizer() = default;
  // grads parallel to params; called once per step.
  virtual void Step(std::vector<ParamTensor>& params,
                    const std::vector<Tensor<float>>& grads) = 0;
};

std::unique_ptr<Optimizer> MakeOptimizer(const TrainConfig& config);

// NumericError with a per-layer diagnostic dump when the loss leaves the
// finite range.
StepMetrics TrainStep(Model& model, const Batch& batch, Optimizer& optimizer,
                      Rng& dropout_rng, double clip_norm);

struct EvalResult {
  double accuracy = 0.0;
  double mean_loss = 0.0;
};

EvalResult Evaluate(const Model& model, const Dataset& dataset, Split split,
                    int batch_size, int64_t pad_to);

// Ties go to the lowest class index.
int64_t ArgmaxClass(const float* row, int64_t z);

struct EpochRow {
  int epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
  double seconds = 0.0;
};

struct RunReport {
  std::string model_config_json;
  std::string train_config_json;
  std::string data_manifest_source;
  std::vector<EpochRow> epochs;
  double test_accuracy = 0.0;
  double test_loss = 0.0;
  double wall_seconds = 0.0;
  int epochs_run = 0;
  std::string ToJson() const;
};

// Trains in place; evaluates val every eval_every epochs, stops early on
// target_val_accuracy or patience, then measures test.
RunReport Fit(Model& model, const Dataset& dataset, const TrainConfig& config,
              int64_t pad_to, std::ostream* log);

// (model config, seed) -> test accuracy; throwing marks the cell failed.
using CellHook = std::function<double(const ModelConfig&, uint64_t seed)>;

// Full-training hook used by the CLI.
CellHook MakeTrainingHook(const Dataset& dataset, TrainConfig train,
                          int64_t pad_to);

struct SweepAxisResult {
  std::string axis;  // "memory_size" | "embedding_count"
  std::vector<int64_t> values;
  std::vector<std::vector<double>> run_accuracies;  // per value
  std::vector<double> max_accuracy;                 // per value
};

// Two independent axes (memory size, codebook size) swept around the
// base config; per cell the max over runs_per_cell seeded runs.
std::vector<SweepAxisResult> SweepMemoryVq(
    const ModelConfig& base, const std::vector<int64_t>& memory_sizes,
    const std::vector<int64_t>& embedding_counts, int runs_per_cell,
    uint64_t seed, const CellHook& hook);

void WriteSweepCsv(std::ostream& os, const SweepAxisResult& axis);

struct AblationRow {
  std::string label;  // CosCovNN | +Memory | +VQ | +Memory+VQ
  ModelConfig config;
  std::vector<double> accuracies;
  double mean = 0.0;
  double stddev = 0.0;
};

// Four variants from one base, shared seeds, in fixed order:
// CosCovNN, +Memory, +VQ, +Memory+VQ.
std::vector<AblationRow> Ablation(const ModelConfig& base, int runs,
                                  uint64_t seed, const CellHook& hook);

void WriteAblationTable(std::ostream& os,
                        const std::vector<AblationRow>& rows);

}  // namespace coscov

#endif  // COSCOV_TRAINER_H_
