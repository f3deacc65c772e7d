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

#ifndef COSCOV_GRADCHECK_H_
#define COSCOV_GRADCHECK_H_

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "coscov/cos_layers.hpp"
#include "coscov/errors.hpp"
#include "coscov/memory.hpp"
#include "coscov/rng.hpp"
#include "coscov/tape.hpp"
#include "coscov/tensor.hpp"
#include "coscov/vq.hpp"

// Finite-difference validation of every hand-derived gradient. Each op
// owns a family of random scenarios: leaf tensors plus a builder that
// records the op (or a composition ending in it) down to a scalar root.
// Analytic gradients come from one tape backward pass; the numeric
// reference is the 64-bit central difference (f(x+h) - f(x-h)) / 2h per
// leaf element.
//
// Non-smooth points are handled at scenario generation, not by loosening
// tolerances: max-pool windows are redrawn until the top-two gap clears
// the perturbation scale, and the VQ scenario freezes the codebook
// assignment and every stop-gradient argument at the base point, so the
// difference quotient measures exactly the function the backward pass
// differentiates (for the straight-through estimator, the path along
// which quantised - features stays constant).

namespace coscov {

struct GradCheckOptions {
  uint64_t seed = 20260815;
  int instances = 20;   // random scenarios per op
  double h = 1e-5;      // central-difference step
  double atol = 1e-8;   // absolute floor under the relative test
  double perturb = 0.0; // fault-injection hook: offset added to one
                        // analytic gradient entry; nonzero must fail
};

struct GradCheckResult {
  std::string op;
  int instances = 0;
  int64_t checks = 0;
  int64_t failures = 0;
  double max_rel_err = 0.0;
  double rtol = 0.0;
  bool pass() const { return instances > 0 && failures == 0; }
};

namespace gradcheck_internal {

struct Scenario {
  std::vector<Tensor<double>> leaves;
  std::vector<bool> needs_grad;
  std::function<VarId(Tape<double>&, const std::vector<VarId>&)> build;
};

inline Tensor<double> RandTensor(std::vector<int64_t> shape, Rng& rng,
                                 double lo, double hi) {
  Tensor<double> t(std::move(shape));
  for (int64_t i = 0; i < t.numel(); ++i) t.data[i] = rng.Uniform(lo, hi);
  return t;
}

inline double EvalScenario(const Scenario& sc,
                           const std::vector<Tensor<double>>& values) {
  Tape<double> tape;
  std::vector<VarId> ids;
  ids.reserve(values.size());
  for (size_t i = 0; i < values.size(); ++i) {
    ids.push_back(tape.Leaf(values[i], sc.needs_grad[i]));
  }
  const VarId root = sc.build(tape, ids);
  return tape.Value(root).data[0];
}

// ---- scenario factories, one per checked op -----------------------------

inline Scenario MakeConv1d(Rng& rng) {
  Scenario sc;
  const int64_t b = 1 + static_cast<int64_t>(rng.UniformInt(3));
  const int64_t cin = 1 + static_cast<int64_t>(rng.UniformInt(3));
  const int64_t cout = 1 + static_cast<int64_t>(rng.UniformInt(3));
  const int64_t s = 5 + static_cast<int64_t>(rng.UniformInt(8));
  const int64_t flen = 1 + static_cast<int64_t>(rng.UniformInt(s + 2));
  sc.leaves.push_back(RandTensor({b, cin, s}, rng, -1.0, 1.0));
  sc.leaves.push_back(RandTensor({cin, cout, flen}, rng, -1.0, 1.0));
  sc.needs_grad = {true, true};
  Tensor<double> w = RandTensor({b, cout, s}, rng, -1.0, 1.0);
  sc.build = [w](Tape<double>& t, const std::vector<VarId>& ids) {
    return t.WeightedSum(t.Conv1d(ids[0], ids[1]), w);
  };
  return sc;
}

inline Scenario MakeDense(Rng& rng) {
  Scenario sc;
  const int64_t b = 1 + static_cast<int64_t>(rng.UniformInt(4));
  const int64_t in_dim = 1 + static_cast<int64_t>(rng.UniformInt(6));
  const int64_t out_dim = 2 + static_cast<int64_t>(rng.UniformInt(4));
  sc.leaves.push_back(RandTensor({b, in_dim}, rng, -1.0, 1.0));
  sc.leaves.push_back(RandTensor({in_dim, out_dim}, rng, -1.0, 1.0));
  sc.leaves.push_back(RandTensor({out_dim}, rng, -0.5, 0.5));
  sc.needs_grad = {true, true, true};
  Tensor<double> w = RandTensor({b, out_dim}, rng, -1.0, 1.0);
  sc.build = [w](Tape<double>& t, const std::vector<VarId>& ids) {
    return t.WeightedSum(t.Dense(ids[0], ids[1], ids[2]), w);
  };
  return sc;
}

inline Scenario MakeTanh(Rng& rng) {
  Scenario sc;
  sc.leaves.push_back(RandTensor({2, 3, 4}, rng, -2.5, 2.5));
  sc.needs_grad = {true};
  Tensor<double> w = RandTensor({2, 3, 4}, rng, -1.0, 1.0);
  sc.build = [w](Tape<double>& t, const std::vector<VarId>& ids) {
    return t.WeightedSum(t.Tanh(ids[0]), w);
  };
  return sc;
}

// Windows are redrawn until the top-two gap clears the step scale, so no
// argmax flips inside the difference quotient.
inline Scenario MakeMaxPool(Rng& rng) {
  Scenario sc;
  const int64_t b = 2, c = 2, s = 12;
  const int64_t window = 1 + static_cast<int64_t>(rng.UniformInt(4));
  Tensor<double> x({b, c, s});
  const int64_t out_len = s / window;
  for (int64_t r = 0; r < b * c; ++r) {
    for (int64_t ow = 0; ow < out_len; ++ow) {
      double* win = x.ptr() + r * s + ow * window;
      for (int attempt = 0; attempt < 1000; ++attempt) {
        double top1 = -2.0, top2 = -2.0;
        for (int64_t k = 0; k < window; ++k) {
          win[k] = rng.Uniform(-1.0, 1.0);
          if (win[k] > top1) {
            top2 = top1;
            top1 = win[k];
          } else if (win[k] > top2) {
            top2 = win[k];
          }
        }
        if (window == 1 || top1 - top2 >= 1e-3) break;
      }
    }
    // Trailing remainder samples are discarded by the op; fill anyway.
    for (int64_t n = out_len * window; n < s; ++n) {
      x.ptr()[r * s + n] = rng.Uniform(-1.0, 1.0);
    }
  }
  sc.leaves.push_back(std::move(x));
  sc.needs_grad = {true};
  Tensor<double> w = RandTensor({b, c, out_len}, rng, -1.0, 1.0);
  sc.build = [w, window](Tape<double>& t, const std::vector<VarId>& ids) {
    return t.WeightedSum(t.MaxPool1d(ids[0], window), w);
  };
  return sc;
}

inline Scenario MakeMul(Rng& rng) {
  Scenario sc;
  sc.leaves.push_back(RandTensor({2, 3, 5}, rng, -1.0, 1.0));
  sc.leaves.push_back(RandTensor({2, 3, 5}, rng, -1.0, 1.0));
  sc.needs_grad = {true, true};
  Tensor<double> w = RandTensor({2, 3, 5}, rng, -1.0, 1.0);
  sc.build = [w](Tape<double>& t, const std::vector<VarId>& ids) {
    return t.WeightedSum(t.Mul(ids[0], ids[1]), w);
  };
  return sc;
}

inline Scenario MakeAdd(Rng& rng) {
  Scenario sc;
  sc.leaves.push_back(RandTensor({2, 3, 5}, rng, -1.0, 1.0));
  sc.leaves.push_back(RandTensor({2, 3, 5}, rng, -1.0, 1.0));
  sc.needs_grad = {true, true};
  Tensor<double> w = RandTensor({2, 3, 5}, rng, -1.0, 1.0);
  sc.build = [w](Tape<double>& t, const std::vector<VarId>& ids) {
    return t.WeightedSum(t.Add(ids[0], ids[1]), w);
  };
  return sc;
}

inline Scenario MakeGapTime(Rng& rng) {
  Scenario sc;
  sc.leaves.push_back(RandTensor({2, 3, 6}, rng, -1.0, 1.0));
  sc.needs_grad = {true};
  Tensor<double> w = RandTensor({2, 3}, rng, -1.0, 1.0);
  sc.build = [w](Tape<double>& t, const std::vector<VarId>& ids) {
    return t.WeightedSum(t.GapTime(ids[0]), w);
  };
  return sc;
}

inline Scenario MakeGapChannels(Rng& rng) {
  Scenario sc;
  sc.leaves.push_back(RandTensor({2, 3, 6}, rng, -1.0, 1.0));
  sc.needs_grad = {true};
  Tensor<double> w = RandTensor({2, 6}, rng, -1.0, 1.0);
  sc.build = [w](Tape<double>& t, const std::vector<VarId>& ids) {
    return t.WeightedSum(t.GapChannels(ids[0]), w);
  };
  return sc;
}

inline Scenario MakeSoftmaxCe(Rng& rng) {
  Scenario sc;
  const int64_t b = 1 + static_cast<int64_t>(rng.UniformInt(5));
  const int64_t z = 2 + static_cast<int64_t>(rng.UniformInt(5));
  sc.leaves.push_back(RandTensor({b, z}, rng, -3.0, 3.0));
  sc.needs_grad = {true};
  std::vector<int64_t> labels(static_cast<size_t>(b));
  for (auto& l : labels) l = static_cast<int64_t>(rng.UniformInt(z));
  sc.build = [labels](Tape<double>& t, const std::vector<VarId>& ids) {
    return t.SoftmaxCrossEntropy(ids[0], labels);
  };
  return sc;
}

inline Scenario MakeCosFilters(Rng& rng) {
  Scenario sc;
  const int64_t flen = 1 + static_cast<int64_t>(rng.UniformInt(7));
  sc.leaves.push_back(RandTensor({2, 3}, rng, -1.5, 1.5));
  sc.leaves.push_back(RandTensor({2, 3}, rng, 0.0, kPi));
  sc.needs_grad = {true, true};
  Tensor<double> w = RandTensor({2, 3, flen}, rng, -1.0, 1.0);
  sc.build = [w, flen](Tape<double>& t, const std::vector<VarId>& ids) {
    return t.WeightedSum(t.CosFilters(ids[0], ids[1], flen), w);
  };
  return sc;
}

// End-to-end hidden block: generate -> conv -> tanh -> pool. Redraws the
// whole scenario until every pooling window has a clear winner after the
// activation, checked with the serial reference kernels.
inline Scenario MakeCosCovBlock(Rng& rng) {
  const int64_t b = 2, cin = 2, cout = 3, s = 10, flen = 5, window = 2;
  for (int attempt = 0; attempt < 500; ++attempt) {
    Scenario sc;
    sc.leaves.push_back(RandTensor({cin, cout}, rng, -1.0, 1.0));
    sc.leaves.push_back(RandTensor({cin, cout}, rng, 0.0, kPi));
    sc.leaves.push_back(RandTensor({b, cin, s}, rng, -1.0, 1.0));
    sc.needs_grad = {true, true, true};
    const Tensor<double> filters =
        GenerateFilterValues(sc.leaves[0], sc.leaves[1], flen);
    Tensor<double> conv({b, cout, s});
    kernels::Conv1dForwardSerial(sc.leaves[2].ptr(), filters.ptr(), conv.ptr(),
                                 b, cin, cout, s, flen);
    Tensor<double> act(conv.shape);
    kernels::TanhForwardSerial(conv.ptr(), act.ptr(), conv.numel());
    bool clear = true;
    for (int64_t r = 0; r < b * cout && clear; ++r) {
      for (int64_t ow = 0; ow < s / window && clear; ++ow) {
        const double* win = act.ptr() + r * s + ow * window;
        double top1 = -2.0, top2 = -2.0;
        for (int64_t k = 0; k < window; ++k) {
          if (win[k] > top1) {
            top2 = top1;
            top1 = win[k];
          } else if (win[k] > top2) {
            top2 = win[k];
          }
        }
        clear = (top1 - top2) >= 5e-3;
      }
    }
    if (!clear) continue;
    Tensor<double> w = RandTensor({b, cout, s / window}, rng, -1.0, 1.0);
    sc.build = [w](Tape<double>& t, const std::vector<VarId>& ids) {
      const VarId filt = t.CosFilters(ids[0], ids[1], flen);
      const VarId c = t.Conv1d(ids[2], filt);
      const VarId a = t.Tanh(c);
      return t.WeightedSum(t.MaxPool1d(a, window), w);
    };
    return sc;
  }
  throw NumericError("gradcheck: could not draw a margin-safe pooling scenario");
}

// Leaves: features [R,d], codebook [k,d]. The codebook assignment and
// every stop-gradient argument are frozen at the base point: the
// straight-through value is evaluated as features + (quantised - features
// at base), the codebook loss sees base features, the commitment loss
// sees the base quantised rows.
inline Scenario MakeVq(Rng& rng) {
  Scenario sc;
  const int64_t rows = 4, d = 5, k = 6;
  sc.leaves.push_back(RandTensor({rows, d}, rng, -1.0, 1.0));
  sc.leaves.push_back(RandTensor({k, d}, rng, -1.0, 1.0));
  sc.needs_grad = {true, true};
  const Tensor<double>& f0 = sc.leaves[0];
  const VqNearestResult<double> base = VqNearestLookup(sc.leaves[1], f0);
  Tensor<double> delta(f0.shape);
  for (int64_t i = 0; i < delta.numel(); ++i) {
    delta.data[i] = base.quantised.data[i] - f0.data[i];
  }
  const double beta = 0.25;
  Tensor<double> w = RandTensor({rows, d}, rng, -1.0, 1.0);
  const Tensor<double> f0_copy = f0;
  const Tensor<double> q0 = base.quantised;
  const std::vector<int64_t> idx = base.indices;
  sc.build = [w, delta, f0_copy, q0, idx, beta,
              d](Tape<double>& t, const std::vector<VarId>& ids) {
    const Tensor<double>& f_cur = t.Value(ids[0]);
    Tensor<double> q_path(f_cur.shape);
    for (int64_t i = 0; i < q_path.numel(); ++i) {
      q_path.data[i] = f_cur.data[i] + delta.data[i];
    }
    const VarId st = t.WeightedSum(t.VqStraightThrough(ids[0], q_path), w);
    const VarId cb = t.VqCodebookLoss(ids[1], f0_copy, idx);
    const VarId cm = t.VqCommitmentLoss(ids[0], q0, beta, d);
    return t.Add(t.Add(st, cb), cm);
  };
  return sc;
}

inline Scenario MakeMemoryRead(Rng& rng) {
  Scenario sc;
  const int64_t b = 2, c = 3, s = 8, m = 6, flen = 3;
  sc.leaves.push_back(RandTensor({1, m}, rng, -0.5, 0.5));     // initial mem
  sc.leaves.push_back(RandTensor({b, c, s}, rng, -1.0, 1.0));  // f_l
  sc.leaves.push_back(RandTensor({m, s}, rng, -0.5, 0.5));     // F_R w
  sc.leaves.push_back(RandTensor({s}, rng, -0.1, 0.1));        // F_R b
  sc.leaves.push_back(RandTensor({1, c}, rng, -1.0, 1.0));     // CCL theta1
  sc.leaves.push_back(RandTensor({1, c}, rng, 0.0, kPi));      // CCL theta2
  sc.needs_grad = {true, true, true, true, true, true};
  Tensor<double> w = RandTensor({b, c, s}, rng, -1.0, 1.0);
  sc.build = [w, b, flen](Tape<double>& t, const std::vector<VarId>& ids) {
    ReaderVars r;
    r.fr_w = ids[2];
    r.fr_b = ids[3];
    r.ccl = {ids[4], ids[5], flen};
    const VarId mem = t.BroadcastRows(ids[0], b);
    return t.WeightedSum(MemoryRead(t, mem, ids[1], r), w);
  };
  return sc;
}

inline Scenario MakeMemoryWrite(Rng& rng) {
  Scenario sc;
  const int64_t b = 2, c = 3, s = 8, m = 6, flen = 3;
  sc.leaves.push_back(RandTensor({1, m}, rng, -0.5, 0.5));     // initial mem
  sc.leaves.push_back(RandTensor({b, c, s}, rng, -1.0, 1.0));  // f_l'
  sc.leaves.push_back(RandTensor({c, c}, rng, -1.0, 1.0));     // CCL theta1
  sc.leaves.push_back(RandTensor({c, c}, rng, 0.0, kPi));      // CCL theta2
  sc.leaves.push_back(RandTensor({s, m}, rng, -0.5, 0.5));     // F_W w
  sc.leaves.push_back(RandTensor({m}, rng, -0.1, 0.1));        // F_W b
  sc.needs_grad = {true, true, true, true, true, true};
  Tensor<double> w = RandTensor({b, m}, rng, -1.0, 1.0);
  sc.build = [w, b, flen](Tape<double>& t, const std::vector<VarId>& ids) {
    WriterVars wr;
    wr.ccl = {ids[2], ids[3], flen};
    wr.fw_w = ids[4];
    wr.fw_b = ids[5];
    const VarId mem = t.BroadcastRows(ids[0], b);
    return t.WeightedSum(MemoryWrite(t, mem, ids[1], wr), w);
  };
  return sc;
}

struct OpEntry {
  const char* name;
  double rtol;
  Scenario (*make)(Rng&);
};

inline const std::vector<OpEntry>& OpTable() {
  static const std::vector<OpEntry> table = {
      {"conv1d", 1e-5, MakeConv1d},
      {"dense", 1e-5, MakeDense},
      {"tanh", 1e-5, MakeTanh},
      {"maxpool", 1e-5, MakeMaxPool},
      {"mul", 1e-5, MakeMul},
      {"add", 1e-5, MakeAdd},
      {"gap_time", 1e-5, MakeGapTime},
      {"gap_channels", 1e-5, MakeGapChannels},
      {"softmax_ce", 1e-5, MakeSoftmaxCe},
      {"cos_filters", 1e-4, MakeCosFilters},
      {"coscov_block", 1e-4, MakeCosCovBlock},
      {"vq", 1e-4, MakeVq},
      {"memory_read", 1e-4, MakeMemoryRead},
      {"memory_write", 1e-4, MakeMemoryWrite},
  };
  return table;
}

inline uint64_t Fnv1a(const char* s) {
  uint64_t h = 1469598103934665603ull;
  for (; *s; ++s) {
    h ^= static_cast<uint64_t>(static_cast<unsigned char>(*s));
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace gradcheck_internal

inline std::vector<std::string> GradCheckOps() {
  std::vector<std::string> names;
  for (const auto& e : gradcheck_internal::OpTable()) names.push_back(e.name);
  return names;
}

inline GradCheckResult RunGradCheckOp(const std::string& op,
                                      const GradCheckOptions& opt) {
  using namespace gradcheck_internal;
  const OpEntry* entry = nullptr;
  for (const auto& e : OpTable()) {
    if (op == e.name) entry = &e;
  }
  if (entry == nullptr) throw ConfigError("gradcheck: unknown op '" + op + "'");

  GradCheckResult res;
  res.op = op;
  res.rtol = entry->rtol;
  Rng base(opt.seed ^ Fnv1a(entry->name));
  for (int inst = 0; inst < opt.instances; ++inst) {
    Rng rng = base.Fork(static_cast<uint64_t>(inst));
    Scenario sc = entry->make(rng);
    ++res.instances;

    Tape<double> tape;
    std::vector<VarId> ids;
    for (size_t i = 0; i < sc.leaves.size(); ++i) {
      ids.push_back(tape.Leaf(sc.leaves[i], sc.needs_grad[i]));
    }
    const VarId root = sc.build(tape, ids);
    tape.Backward(root);
    std::vector<Tensor<double>> analytic;
    for (size_t i = 0; i < ids.size(); ++i) {
      analytic.push_back(tape.Grad(ids[i]));
    }
    if (opt.perturb != 0.0) {
      for (size_t i = 0; i < analytic.size(); ++i) {
        if (sc.needs_grad[i] && analytic[i].numel() > 0) {
          analytic[i].data[0] += opt.perturb;
          break;
        }
      }
    }

    std::vector<Tensor<double>> values = sc.leaves;
    for (size_t li = 0; li < values.size(); ++li) {
      if (!sc.needs_grad[li]) continue;
      for (int64_t e = 0; e < values[li].numel(); ++e) {
        const double saved = values[li].data[e];
        values[li].data[e] = saved + opt.h;
        const double fp = EvalScenario(sc, values);
        values[li].data[e] = saved - opt.h;
        const double fm = EvalScenario(sc, values);
        values[li].data[e] = saved;
        const double numeric = (fp - fm) / (2.0 * opt.h);
        const double a = analytic[li].data[e];
        const double err = std::abs(a - numeric);
        const double scale = std::max(std::abs(a), std::abs(numeric));
        const double rel = err / (scale + opt.atol);
        res.max_rel_err = std::max(res.max_rel_err, rel);
        ++res.checks;
        if (err > entry->rtol * scale + opt.atol) ++res.failures;
      }
    }
  }
  return res;
}

// which: "all" or a single op name.
inline std::vector<GradCheckResult> RunGradCheckSuite(
    const std::string& which, const GradCheckOptions& opt) {
  std::vector<GradCheckResult> results;
  if (which == "all") {
    for (const auto& e : gradcheck_internal::OpTable()) {
      results.push_back(RunGradCheckOp(e.name, opt));
    }
  } else {
    results.push_back(RunGradCheckOp(which, opt));
  }
  return results;
}

}  // namespace coscov

#endif  // COSCOV_GRADCHECK_H_
