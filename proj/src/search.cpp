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

#include "coscov/search.hpp"

#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "coscov/errors.hpp"

namespace coscov {
namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

// Candidate-cell seed; pass/layer/row salts keep every cell's run
// sequence distinct while the whole search stays a pure function of the
// top-level seed.
uint64_t CellSeed(uint64_t seed, int pass, size_t layer, size_t row, int run) {
  return seed * 1000003ull + static_cast<uint64_t>(pass) * 1299709ull +
         static_cast<uint64_t>(layer) * 9176ull +
         static_cast<uint64_t>(row) * 97ull + static_cast<uint64_t>(run);
}

// Best-of-runs accuracy for one candidate cell; NaN when every run fails.
double RunCell(const ModelConfig& config, uint64_t seed, int pass,
               size_t layer, size_t row, int runs, const CellHook& hook,
               bool& any_failed) {
  double best = kNan;
  for (int r = 0; r < runs; ++r) {
    double acc = kNan;
    try {
      acc = hook(config, CellSeed(seed, pass, layer, row, r));
    } catch (const std::exception&) {
      any_failed = true;
    }
    if (std::isfinite(acc) && !(acc <= best)) best = acc;
  }
  if (!std::isfinite(best)) any_failed = true;
  return best;
}

// Shared greedy loop: `apply` writes candidate value v into layer j of a
// config derived from the current best choices.
template <typename Apply>
GreedyPassResult RunGreedyPass(const std::vector<int64_t>& candidates,
                               std::vector<int64_t> current, int pass,
                               const SearchSpace& space, uint64_t seed,
                               const CellHook& hook, Apply apply) {
  GreedyPassResult result;
  result.matrix.candidates = candidates;
  result.matrix.layers = static_cast<int64_t>(current.size());
  result.matrix.cells.assign(
      candidates.size(),
      std::vector<double>(current.size(), kNan));

  for (size_t layer = 0; layer < current.size(); ++layer) {
    double best_acc = kNan;
    int64_t best_value = current[layer];
    for (size_t row = 0; row < candidates.size(); ++row) {
      std::vector<int64_t> trial = current;
      trial[layer] = candidates[row];
      ModelConfig config = space.backbone;
      apply(config, trial);
      const double acc =
          RunCell(config, seed, pass, layer, row, space.runs_per_candidate,
                  hook, result.any_failed);
      result.matrix.cells[row][layer] = acc;
      const bool better =
          std::isfinite(acc) &&
          (!std::isfinite(best_acc) || acc > best_acc ||
           (acc == best_acc && candidates[row] < best_value));
      if (better) {
        best_acc = acc;
        best_value = candidates[row];
      }
    }
    // A fully failed column keeps the incumbent value, flagged above.
    current[layer] = best_value;
  }
  result.chosen = std::move(current);
  return result;
}

}  // namespace

std::vector<int64_t> SelectPerLayer(const AccuracyMatrix& matrix) {
  if (matrix.candidates.empty() || matrix.layers < 1) {
    throw ConfigError("accuracy matrix is empty");
  }
  std::vector<int64_t> chosen;
  for (int64_t layer = 0; layer < matrix.layers; ++layer) {
    bool found = false;
    double best_acc = 0.0;
    int64_t best_value = 0;
    for (size_t row = 0; row < matrix.candidates.size(); ++row) {
      const double acc = matrix.cells[row][static_cast<size_t>(layer)];
      if (!std::isfinite(acc)) continue;
      if (!found || acc > best_acc ||
          (acc == best_acc && matrix.candidates[row] < best_value)) {
        found = true;
        best_acc = acc;
        best_value = matrix.candidates[row];
      }
    }
    if (!found) {
      throw NumericError("accuracy matrix layer " + std::to_string(layer + 1) +
                         " has no finite cells");
    }
    chosen.push_back(best_value);
  }
  return chosen;
}

AccuracyMatrix ReadAccuracyCsv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw DataError("accuracy csv is empty");
  AccuracyMatrix matrix;
  {
    std::istringstream header(line);
    std::string cell;
    if (!std::getline(header, cell, ',') || cell != "candidate") {
      throw DataError("accuracy csv must start with a 'candidate' column, got '" +
                      cell + "'");
    }
    while (std::getline(header, cell, ',')) ++matrix.layers;
    if (matrix.layers < 1) throw DataError("accuracy csv has no layer columns");
  }
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    if (!std::getline(row, cell, ',')) continue;
    try {
      matrix.candidates.push_back(std::stoll(cell));
    } catch (const std::exception&) {
      throw DataError("accuracy csv has a non-integer candidate '" + cell + "'");
    }
    std::vector<double> cells;
    while (std::getline(row, cell, ',')) {
      if (cell == "nan" || cell == "NaN" || cell == "NAN") {
        cells.push_back(kNan);
        continue;
      }
      try {
        cells.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw DataError("accuracy csv has a non-numeric cell '" + cell + "'");
      }
    }
    if (static_cast<int64_t>(cells.size()) != matrix.layers) {
      throw DataError("accuracy csv row for candidate " +
                      std::to_string(matrix.candidates.back()) + " has " +
                      std::to_string(cells.size()) + " cells, expected " +
                      std::to_string(matrix.layers));
    }
    matrix.cells.push_back(std::move(cells));
  }
  if (matrix.candidates.empty()) throw DataError("accuracy csv has no rows");
  return matrix;
}

void WriteAccuracyCsv(std::ostream& os, const AccuracyMatrix& matrix) {
  os << "candidate";
  for (int64_t j = 1; j <= matrix.layers; ++j) os << ",layer" << j;
  os << '\n';
  for (size_t row = 0; row < matrix.candidates.size(); ++row) {
    os << matrix.candidates[row];
    for (int64_t j = 0; j < matrix.layers; ++j) {
      const double acc = matrix.cells[row][static_cast<size_t>(j)];
      if (std::isfinite(acc)) {
        os << ',' << acc;
      } else {
        os << ",nan";
      }
    }
    os << '\n';
  }
}

SearchSpace::SearchSpace() : backbone(BbnBackbone()) {}

ModelConfig BbnBackbone(int64_t num_classes, int64_t input_len) {
  ModelConfig config = ModelConfig::Defaults(Architecture::kCosCov);
  config.num_classes = num_classes;
  config.input_len = input_len;
  config.filter_lens.assign(config.channels.size() + 1, 12);
  config.pools.assign(config.channels.size(), 2);
  return config;
}

GreedyPassResult GreedyFilterPass(const SearchSpace& space, uint64_t seed,
                                  const CellHook& hook) {
  return RunGreedyPass(space.filter_candidates, space.backbone.filter_lens,
                       /*pass=*/1, space, seed, hook,
                       [](ModelConfig& config, const std::vector<int64_t>& v) {
                         config.filter_lens = v;
                       });
}

GreedyPassResult GreedyPoolPass(const SearchSpace& space,
                                const std::vector<int64_t>& filter_lens,
                                uint64_t seed, const CellHook& hook) {
  if (filter_lens.size() != space.backbone.filter_lens.size()) {
    throw ConfigError("pool pass needs " +
                      std::to_string(space.backbone.filter_lens.size()) +
                      " filter lengths, got " +
                      std::to_string(filter_lens.size()));
  }
  return RunGreedyPass(space.pool_candidates, space.backbone.pools,
                       /*pass=*/2, space, seed, hook,
                       [&filter_lens](ModelConfig& config,
                                      const std::vector<int64_t>& v) {
                         config.filter_lens = filter_lens;
                         config.pools = v;
                       });
}

std::string FormatChoices(const std::vector<int64_t>& values) {
  std::ostringstream ss;
  ss << '[';
  for (size_t i = 0; i < values.size(); ++i) {
    if (i > 0) ss << ',';
    ss << values[i];
  }
  ss << ']';
  return ss.str();
}

}  // namespace coscov
