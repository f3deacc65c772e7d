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

#ifndef COSCOV_SEARCH_H_
#define COSCOV_SEARCH_H_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "coscov/config.hpp"
#include "coscov/trainer.hpp"

// Greedy coordinate search over layer hyperparameters: for each layer in
// order, train every candidate with the other layers fixed at the
// current best, fix the per-layer argmax (ties to the smaller value),
// and move on. The filter pass runs first over all N layers, then the
// pool pass over the N-1 hidden layers with the chosen filters. A failed
// training cell records NaN and the search continues, flagged.
//
// The selector is separable from training so recorded accuracy matrices
// (mock-oracle CSV) replay through the identical argmax path.

namespace coscov {

struct AccuracyMatrix {
  std::vector<int64_t> candidates;          // row labels
  int64_t layers = 0;                       // column count
  std::vector<std::vector<double>> cells;   // [candidate][layer], NaN = missing
};

// Per-layer argmax over rows; NaN cells skipped; ties to the smaller
// candidate. ConfigError on an empty matrix; NumericError naming the
// layer when a whole column is NaN.
std::vector<int64_t> SelectPerLayer(const AccuracyMatrix& matrix);

// CSV: header "candidate,layer1,..,layerN"; cells are numbers or "nan".
AccuracyMatrix ReadAccuracyCsv(std::istream& is);
void WriteAccuracyCsv(std::ostream& os, const AccuracyMatrix& matrix);

struct SearchSpace {
  std::vector<int64_t> filter_candidates{3, 6, 12, 25, 50, 100, 200, 300};
  std::vector<int64_t> pool_candidates{2, 4, 6, 8, 10, 20};
  int runs_per_candidate = 5;
  ModelConfig backbone;  // default BbnBackbone()

  SearchSpace();
};

// Fixed backbone the search starts from: channels 32/64/128/256 -> Z,
// every filter length 12, every pool window 2, dropout 0.5.
ModelConfig BbnBackbone(int64_t num_classes = 10, int64_t input_len = 16000);

struct GreedyPassResult {
  AccuracyMatrix matrix;
  std::vector<int64_t> chosen;
  bool any_failed = false;
};

GreedyPassResult GreedyFilterPass(const SearchSpace& space, uint64_t seed,
                                  const CellHook& hook);
GreedyPassResult GreedyPoolPass(const SearchSpace& space,
                                const std::vector<int64_t>& filter_lens,
                                uint64_t seed, const CellHook& hook);

// "[100,50,12,6,3]" - the bracketed comma form used on stdout.
std::string FormatChoices(const std::vector<int64_t>& values);

}  // namespace coscov

#endif  // COSCOV_SEARCH_H_
