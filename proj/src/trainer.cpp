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

#include "coscov/trainer.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include "coscov/errors.hpp"
#include "coscov/tape.hpp"
#include "json.hpp"

namespace coscov {
namespace {

using Clock = std::chrono::steady_clock;

double Seconds(Clock::time_point from, Clock::time_point to) {
  return std::chrono::duration<double>(to - from).count();
}

class AdamOptimizer : public Optimizer {
 public:
  explicit AdamOptimizer(const TrainConfig& c)
      : lr_(c.learning_rate), beta1_(c.beta1), beta2_(c.beta2), eps_(c.epsilon) {}

  void Step(std::vector<ParamTensor>& params,
            const std::vector<Tensor<float>>& grads) override {
    if (m_.empty()) {
      for (const auto& p : params) {
        m_.push_back(Tensor<float>(p.value.shape));
        v_.push_back(Tensor<float>(p.value.shape));
      }
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (size_t i = 0; i < params.size(); ++i) {
      Tensor<float>& w = params[i].value;
      const Tensor<float>& g = grads[i];
      for (int64_t j = 0; j < w.numel(); ++j) {
        const double gj = g.data[j];
        const double mj = beta1_ * m_[i].data[j] + (1.0 - beta1_) * gj;
        const double vj = beta2_ * v_[i].data[j] + (1.0 - beta2_) * gj * gj;
        m_[i].data[j] = static_cast<float>(mj);
        v_[i].data[j] = static_cast<float>(vj);
        const double update = lr_ * (mj / bc1) / (std::sqrt(vj / bc2) + eps_);
        w.data[j] = static_cast<float>(w.data[j] - update);
      }
    }
  }

 private:
  double lr_, beta1_, beta2_, eps_;
  int64_t t_ = 0;
  std::vector<Tensor<float>> m_, v_;
};

class SgdOptimizer : public Optimizer {
 public:
  explicit SgdOptimizer(const TrainConfig& c)
      : lr_(c.learning_rate), momentum_(c.momentum) {}

  void Step(std::vector<ParamTensor>& params,
            const std::vector<Tensor<float>>& grads) override {
    if (velocity_.empty()) {
      for (const auto& p : params) {
        velocity_.push_back(Tensor<float>(p.value.shape));
      }
    }
    for (size_t i = 0; i < params.size(); ++i) {
      Tensor<float>& w = params[i].value;
      for (int64_t j = 0; j < w.numel(); ++j) {
        const double vj =
            momentum_ * velocity_[i].data[j] + static_cast<double>(grads[i].data[j]);
        velocity_[i].data[j] = static_cast<float>(vj);
        w.data[j] = static_cast<float>(w.data[j] - lr_ * vj);
      }
    }
  }

 private:
  double lr_, momentum_;
  std::vector<Tensor<float>> velocity_;
};

std::string DescribeLayers(const std::vector<LayerDiagnostics>& layers) {
  std::ostringstream ss;
  for (const auto& l : layers) {
    ss << " layer" << l.layer << "[min=" << l.min_activation
       << ",max=" << l.max_activation << "]";
  }
  return ss.str();
}

int64_t CountCorrect(const Tensor<float>& logits,
                     const std::vector<int64_t>& labels) {
  const int64_t b = logits.dim(0), z = logits.dim(1);
  int64_t correct = 0;
  for (int64_t r = 0; r < b; ++r) {
    if (ArgmaxClass(logits.ptr() + r * z, z) == labels[static_cast<size_t>(r)]) {
      ++correct;
    }
  }
  return correct;
}

}  // namespace

std::unique_ptr<Optimizer> MakeOptimizer(const TrainConfig& config) {
  config.Validate();
  if (config.optimizer == "adam") {
    return std::make_unique<AdamOptimizer>(config);
  }
  return std::make_unique<SgdOptimizer>(config);
}

int64_t ArgmaxClass(const float* row, int64_t z) {
  int64_t best = 0;
  for (int64_t j = 1; j < z; ++j) {
    if (row[j] > row[best]) best = j;
  }
  return best;
}

StepMetrics TrainStep(Model& model, const Batch& batch, Optimizer& optimizer,
                      Rng& dropout_rng, double clip_norm) {
  Tape<float> tape;
  const ForwardResult fwd = model.Forward(tape, batch.audio, /*training=*/true,
                                          dropout_rng, /*params_need_grad=*/true);
  const VarId ce = tape.SoftmaxCrossEntropy(fwd.logits, batch.labels);
  VarId total = ce;
  if (fwd.vq_codebook_loss >= 0) {
    total = tape.Add(tape.Add(ce, fwd.vq_codebook_loss), fwd.vq_commitment_loss);
  }

  StepMetrics metrics;
  metrics.cross_entropy = tape.Value(ce).data[0];
  metrics.total = tape.Value(total).data[0];
  if (fwd.vq_codebook_loss >= 0) {
    metrics.codebook = tape.Value(fwd.vq_codebook_loss).data[0];
    metrics.commitment = tape.Value(fwd.vq_commitment_loss).data[0];
  }
  metrics.correct = CountCorrect(tape.Value(fwd.logits), batch.labels);
  metrics.examples = static_cast<int64_t>(batch.labels.size());
  if (!std::isfinite(metrics.total)) {
    throw NumericError("training loss is not finite; activations:" +
                       DescribeLayers(fwd.layers));
  }

  tape.Backward(total);
  std::vector<Tensor<float>> grads;
  grads.reserve(fwd.params.size());
  for (const auto& [name, id] : fwd.params) grads.push_back(tape.Grad(id));

  if (clip_norm > 0.0) {
    double sq = 0.0;
    for (const auto& g : grads) {
      for (int64_t j = 0; j < g.numel(); ++j) {
        sq += static_cast<double>(g.data[j]) * g.data[j];
      }
    }
    const double norm = std::sqrt(sq);
    if (norm > clip_norm) {
      const float scale = static_cast<float>(clip_norm / norm);
      for (auto& g : grads) {
        for (int64_t j = 0; j < g.numel(); ++j) g.data[j] *= scale;
      }
    }
  }
  optimizer.Step(model.params(), grads);
  return metrics;
}

EvalResult Evaluate(const Model& model, const Dataset& dataset, Split split,
                    int batch_size, int64_t pad_to) {
  const std::vector<Batch> batches =
      MakeBatches(dataset, split, batch_size, /*seed=*/0, pad_to,
                  /*shuffle=*/false);
  Rng unused(0);
  double loss_sum = 0.0;
  int64_t correct = 0, total = 0;
  for (const Batch& batch : batches) {
    Tape<float> tape;
    const ForwardResult fwd =
        model.Forward(tape, batch.audio, /*training=*/false, unused,
                      /*params_need_grad=*/false);
    const VarId ce = tape.SoftmaxCrossEntropy(fwd.logits, batch.labels);
    const int64_t b = static_cast<int64_t>(batch.labels.size());
    loss_sum += tape.Value(ce).data[0] * static_cast<double>(b);
    correct += CountCorrect(tape.Value(fwd.logits), batch.labels);
    total += b;
  }
  EvalResult result;
  result.accuracy = static_cast<double>(correct) / static_cast<double>(total);
  result.mean_loss = loss_sum / static_cast<double>(total);
  return result;
}

std::string RunReport::ToJson() const {
  using nlohmann::json;
  json j;
  j["model_config"] = json::parse(model_config_json);
  j["train_config"] = json::parse(train_config_json);
  j["data_source"] = data_manifest_source;
  j["epochs_run"] = epochs_run;
  j["test_accuracy"] = test_accuracy;
  j["test_loss"] = test_loss;
  j["wall_seconds"] = wall_seconds;
  json rows = json::array();
  for (const auto& e : epochs) {
    rows.push_back({{"epoch", e.epoch},
                    {"train_loss", e.train_loss},
                    {"train_accuracy", e.train_accuracy},
                    {"val_loss", e.val_loss},
                    {"val_accuracy", e.val_accuracy},
                    {"seconds", e.seconds}});
  }
  j["epochs"] = std::move(rows);
  return j.dump();
}

RunReport Fit(Model& model, const Dataset& dataset, const TrainConfig& config,
              int64_t pad_to, std::ostream* log) {
  config.Validate();
  RunReport report;
  report.model_config_json = ToJson(model.config());
  report.train_config_json = ToJson(config);
  report.data_manifest_source = dataset.source;

  const auto run_start = Clock::now();
  std::unique_ptr<Optimizer> optimizer = MakeOptimizer(config);
  Rng master(config.seed);
  double best_val = -1.0;
  int stale_epochs = 0;
  bool stop = false;

  for (int epoch = 1; epoch <= config.epochs && !stop; ++epoch) {
    const auto epoch_start = Clock::now();
    Rng dropout_rng = master.Fork(static_cast<uint64_t>(epoch));
    const std::vector<Batch> batches = MakeBatches(
        dataset, Split::kTrain, config.batch_size,
        config.seed * 1000003ull + static_cast<uint64_t>(epoch), pad_to,
        /*shuffle=*/true);

    double loss_sum = 0.0;
    int64_t correct = 0, seen = 0;
    for (const Batch& batch : batches) {
      const StepMetrics m =
          TrainStep(model, batch, *optimizer, dropout_rng, config.clip_norm);
      loss_sum += m.total * static_cast<double>(m.examples);
      correct += m.correct;
      seen += m.examples;
    }

    EpochRow row;
    row.epoch = epoch;
    row.train_loss = loss_sum / static_cast<double>(seen);
    row.train_accuracy = static_cast<double>(correct) / static_cast<double>(seen);

    const bool eval_now = (epoch % config.eval_every == 0) ||
                          epoch == config.epochs;
    if (eval_now && dataset.CountIn(Split::kVal) > 0) {
      const EvalResult val =
          Evaluate(model, dataset, Split::kVal, config.batch_size, pad_to);
      row.val_loss = val.mean_loss;
      row.val_accuracy = val.accuracy;
      if (config.target_val_accuracy > 0.0 &&
          val.accuracy >= config.target_val_accuracy) {
        stop = true;
      }
      if (config.early_stop_patience > 0) {
        if (val.accuracy > best_val) {
          best_val = val.accuracy;
          stale_epochs = 0;
        } else if (++stale_epochs >= config.early_stop_patience) {
          stop = true;
        }
      }
    }
    row.seconds = Seconds(epoch_start, Clock::now());
    if (log != nullptr) {
      (*log) << "epoch " << epoch << " train_loss=" << row.train_loss
             << " train_acc=" << row.train_accuracy;
      if (eval_now) {
        (*log) << " val_loss=" << row.val_loss
               << " val_acc=" << row.val_accuracy;
      }
      (*log) << " (" << row.seconds << "s)" << std::endl;
    }
    report.epochs.push_back(row);
    report.epochs_run = epoch;
  }

  if (dataset.CountIn(Split::kTest) > 0) {
    const EvalResult test =
        Evaluate(model, dataset, Split::kTest, config.batch_size, pad_to);
    report.test_accuracy = test.accuracy;
    report.test_loss = test.mean_loss;
  }
  report.wall_seconds = Seconds(run_start, Clock::now());
  return report;
}

CellHook MakeTrainingHook(const Dataset& dataset, TrainConfig train,
                          int64_t pad_to) {
  auto shared = std::make_shared<Dataset>(dataset);
  return [shared, train, pad_to](const ModelConfig& config,
                                 uint64_t seed) -> double {
    ModelConfig mc = config;
    mc.seed = seed;
    TrainConfig tc = train;
    tc.seed = seed;
    Model model(mc);
    const RunReport report = Fit(model, *shared, tc, pad_to, nullptr);
    return report.test_accuracy;
  };
}

std::vector<SweepAxisResult> SweepMemoryVq(
    const ModelConfig& base, const std::vector<int64_t>& memory_sizes,
    const std::vector<int64_t>& embedding_counts, int runs_per_cell,
    uint64_t seed, const CellHook& hook) {
  if (runs_per_cell < 1) throw ConfigError("sweep runs per cell must be >= 1");
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<SweepAxisResult> axes;
  const auto run_axis = [&](const std::string& name,
                            const std::vector<int64_t>& values,
                            auto apply_value) {
    SweepAxisResult axis;
    axis.axis = name;
    axis.values = values;
    for (size_t vi = 0; vi < values.size(); ++vi) {
      std::vector<double> runs;
      double best = nan;
      for (int r = 0; r < runs_per_cell; ++r) {
        ModelConfig cell = base;
        apply_value(cell, values[vi]);
        const uint64_t cell_seed = seed * 1000003ull +
                                   static_cast<uint64_t>(axes.size()) * 9176ull +
                                   static_cast<uint64_t>(vi) * 97ull +
                                   static_cast<uint64_t>(r);
        double acc = nan;
        try {
          acc = hook(cell, cell_seed);
        } catch (const std::exception&) {
          acc = nan;  // failed cell, reported as nan in the CSV
        }
        runs.push_back(acc);
        if (std::isfinite(acc) && !(acc <= best)) best = acc;
      }
      axis.run_accuracies.push_back(std::move(runs));
      axis.max_accuracy.push_back(best);
    }
    axes.push_back(std::move(axis));
  };

  run_axis("memory_size", memory_sizes, [](ModelConfig& c, int64_t v) {
    c.memory.enabled = true;
    c.memory.size = v;
  });
  run_axis("embedding_count", embedding_counts, [](ModelConfig& c, int64_t v) {
    c.vq.enabled = true;
    c.vq.codebook_size = v;
  });
  return axes;
}

void WriteSweepCsv(std::ostream& os, const SweepAxisResult& axis) {
  os << axis.axis;
  const size_t runs =
      axis.run_accuracies.empty() ? 0 : axis.run_accuracies[0].size();
  for (size_t r = 0; r < runs; ++r) os << ",run" << (r + 1);
  os << ",max\n";
  for (size_t vi = 0; vi < axis.values.size(); ++vi) {
    os << axis.values[vi];
    for (double acc : axis.run_accuracies[vi]) {
      if (std::isfinite(acc)) {
        os << ',' << acc;
      } else {
        os << ",nan";
      }
    }
    if (std::isfinite(axis.max_accuracy[vi])) {
      os << ',' << axis.max_accuracy[vi] << '\n';
    } else {
      os << ",nan\n";
    }
  }
}

std::vector<AblationRow> Ablation(const ModelConfig& base, int runs,
                                  uint64_t seed, const CellHook& hook) {
  if (runs < 1) throw ConfigError("ablation runs must be >= 1");
  struct Variant {
    const char* label;
    bool memory;
    bool vq;
  };
  constexpr Variant kVariants[] = {{"CosCovNN", false, false},
                                   {"+Memory", true, false},
                                   {"+VQ", false, true},
                                   {"+Memory+VQ", true, true}};
  std::vector<AblationRow> rows;
  for (const Variant& variant : kVariants) {
    AblationRow row;
    row.label = variant.label;
    row.config = base;
    row.config.memory.enabled = variant.memory;
    row.config.vq.enabled = variant.vq;
    double sum = 0.0;
    int finite = 0;
    for (int r = 0; r < runs; ++r) {
      // Shared per-run seeds keep variant rows pairwise comparable.
      const uint64_t run_seed = seed * 1000003ull + static_cast<uint64_t>(r);
      double acc = std::numeric_limits<double>::quiet_NaN();
      try {
        acc = hook(row.config, run_seed);
      } catch (const std::exception&) {
      }
      row.accuracies.push_back(acc);
      if (std::isfinite(acc)) {
        sum += acc;
        ++finite;
      }
    }
    if (finite > 0) {
      row.mean = sum / finite;
      double sq = 0.0;
      for (double acc : row.accuracies) {
        if (std::isfinite(acc)) sq += (acc - row.mean) * (acc - row.mean);
      }
      row.stddev = std::sqrt(sq / finite);
    } else {
      row.mean = std::numeric_limits<double>::quiet_NaN();
      row.stddev = std::numeric_limits<double>::quiet_NaN();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void WriteAblationTable(std::ostream& os, const std::vector<AblationRow>& rows) {
  size_t runs = 0;
  for (const auto& row : rows) runs = std::max(runs, row.accuracies.size());
  os << "variant";
  for (size_t r = 0; r < runs; ++r) os << ",run" << (r + 1);
  os << ",mean,stddev\n";
  for (const auto& row : rows) {
    os << row.label;
    for (double acc : row.accuracies) {
      if (std::isfinite(acc)) {
        os << ',' << acc;
      } else {
        os << ",nan";
      }
    }
    os << ',' << row.mean << ',' << row.stddev << '\n';
  }
}

}  // namespace coscov
