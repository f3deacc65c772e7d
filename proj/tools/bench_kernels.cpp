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

// Benchmarks the OpenMP kernels against their serial reference twins on
// training-shaped workloads and verifies that both routes produce
// bit-identical outputs (the axpy inner loops fix the accumulation order
// regardless of thread count). Exits non-zero on any mismatch, so the
// benchmark doubles as an equivalence check.

#include <chrono>
#include <cstring>
#include <iomanip>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "coscov/kernels.hpp"
#include "coscov/rng.hpp"
#include "coscov/tensor.hpp"

namespace {

using namespace coscov;
using Clock = std::chrono::steady_clock;

Tensor<float> RandTensor(std::vector<int64_t> shape, Rng& rng) {
  Tensor<float> t(std::move(shape));
  for (int64_t i = 0; i < t.numel(); ++i) {
    t.data[i] = static_cast<float>(rng.Uniform(-1.0, 1.0));
  }
  return t;
}

struct RowResult {
  std::string name;
  std::string size;
  double serial_ms = 0.0;
  double parallel_ms = 0.0;
  bool identical = false;
};

template <typename SerialFn, typename ParallelFn>
RowResult Compare(const std::string& name, const std::string& size, int repeat,
                  int64_t out_numel, SerialFn serial, ParallelFn parallel) {
  std::vector<float> a(static_cast<size_t>(out_numel));
  std::vector<float> b(static_cast<size_t>(out_numel));
  RowResult row{name, size, 0.0, 0.0, false};
  for (int r = 0; r < repeat; ++r) {
    const auto t0 = Clock::now();
    serial(a.data());
    const auto t1 = Clock::now();
    parallel(b.data());
    const auto t2 = Clock::now();
    row.serial_ms += std::chrono::duration<double, std::milli>(t1 - t0).count();
    row.parallel_ms += std::chrono::duration<double, std::milli>(t2 - t1).count();
  }
  row.serial_ms /= repeat;
  row.parallel_ms /= repeat;
  row.identical =
      std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
  return row;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"serial vs OpenMP kernel benchmark"};
  int repeat = 5;
  int jobs = 0;
  app.add_option("--repeat", repeat, "timing repetitions per kernel");
  app.add_option("--jobs", jobs, "worker thread cap");
  CLI11_PARSE(app, argc, argv);
  if (jobs > 0) kernels::SetThreadCap(jobs);

  Rng rng(73);
  std::vector<RowResult> rows;

  {
    const int64_t b = 8, cin = 32, cout = 64, s = 1600, flen = 50;
    const Tensor<float> in = RandTensor({b, cin, s}, rng);
    const Tensor<float> filt = RandTensor({cin, cout, flen}, rng);
    rows.push_back(Compare(
        "conv1d_forward", "8x32x1600 L=50 -> 64ch", repeat, b * cout * s,
        [&](float* out) {
          kernels::Conv1dForwardSerial(in.ptr(), filt.ptr(), out, b, cin, cout,
                                       s, flen);
        },
        [&](float* out) {
          kernels::Conv1dForward(in.ptr(), filt.ptr(), out, b, cin, cout, s,
                                 flen);
        }));
  }
  {
    const int64_t b = 8, cin = 32, cout = 64, s = 1600, flen = 50;
    const Tensor<float> gout = RandTensor({b, cout, s}, rng);
    const Tensor<float> in = RandTensor({b, cin, s}, rng);
    const Tensor<float> filt = RandTensor({cin, cout, flen}, rng);
    rows.push_back(Compare(
        "conv1d_backward_input", "8x64x1600 L=50 -> 32ch", repeat, b * cin * s,
        [&](float* out) {
          kernels::Conv1dBackwardInputSerial(gout.ptr(), filt.ptr(), out, b,
                                             cin, cout, s, flen);
        },
        [&](float* out) {
          kernels::Conv1dBackwardInput(gout.ptr(), filt.ptr(), out, b, cin,
                                       cout, s, flen);
        }));
    rows.push_back(Compare(
        "conv1d_backward_filters", "8x(32->64)x1600 L=50", repeat,
        cin * cout * flen,
        [&](float* out) {
          kernels::Conv1dBackwardFiltersSerial(gout.ptr(), in.ptr(), out, b,
                                               cin, cout, s, flen);
        },
        [&](float* out) {
          kernels::Conv1dBackwardFilters(gout.ptr(), in.ptr(), out, b, cin,
                                         cout, s, flen);
        }));
  }
  {
    const int64_t rows_n = 8 * 64, s = 1600, window = 8;
    const Tensor<float> in = RandTensor({rows_n, s}, rng);
    std::vector<int64_t> arg_a(static_cast<size_t>(rows_n * (s / window)));
    std::vector<int64_t> arg_b(arg_a.size());
    rows.push_back(Compare(
        "maxpool1d_forward", "512 rows of 1600, w=8", repeat,
        rows_n * (s / window),
        [&](float* out) {
          kernels::MaxPool1dForwardSerial(in.ptr(), out, arg_a.data(), rows_n,
                                          s, window);
        },
        [&](float* out) {
          kernels::MaxPool1dForward(in.ptr(), out, arg_b.data(), rows_n, s,
                                    window);
        }));
  }
  {
    const int64_t n = 8 * 64 * 1600;
    const Tensor<float> in = RandTensor({n}, rng);
    rows.push_back(Compare(
        "tanh", "819200 values", repeat, n,
        [&](float* out) { kernels::TanhForwardSerial(in.ptr(), out, n); },
        [&](float* out) { kernels::TanhForward(in.ptr(), out, n); }));
  }
  {
    const int64_t b = 32, in_dim = 100, out_dim = 1600;
    const Tensor<float> in = RandTensor({b, in_dim}, rng);
    const Tensor<float> w = RandTensor({in_dim, out_dim}, rng);
    const Tensor<float> bias = RandTensor({out_dim}, rng);
    rows.push_back(Compare(
        "dense", "32x100 -> 1600", repeat, b * out_dim,
        [&](float* out) {
          kernels::DenseForwardSerial(in.ptr(), w.ptr(), bias.ptr(), out, b,
                                      in_dim, out_dim);
        },
        [&](float* out) {
          kernels::DenseForward(in.ptr(), w.ptr(), bias.ptr(), out, b, in_dim,
                                out_dim);
        }));
  }
  {
    const int64_t nrows = 32 * 32, k = 512, d = 1600;
    const Tensor<float> feats = RandTensor({nrows, d}, rng);
    const Tensor<float> codes = RandTensor({k, d}, rng);
    std::vector<int64_t> idx_a(static_cast<size_t>(nrows));
    std::vector<int64_t> idx_b(static_cast<size_t>(nrows));
    const auto t0 = Clock::now();
    for (int r = 0; r < repeat; ++r) {
      kernels::VqNearestSerial(feats.ptr(), codes.ptr(), nrows, k, d,
                               idx_a.data());
    }
    const auto t1 = Clock::now();
    for (int r = 0; r < repeat; ++r) {
      kernels::VqNearest(feats.ptr(), codes.ptr(), nrows, k, d, idx_b.data());
    }
    const auto t2 = Clock::now();
    RowResult row;
    row.name = "vq_nearest";
    row.size = "1024 rows, k=512, d=1600";
    row.serial_ms =
        std::chrono::duration<double, std::milli>(t1 - t0).count() / repeat;
    row.parallel_ms =
        std::chrono::duration<double, std::milli>(t2 - t1).count() / repeat;
    row.identical = idx_a == idx_b;
    rows.push_back(row);
  }

  std::cout << "threads=" << kernels::MaxThreads() << " repeat=" << repeat
            << "\n";
  std::cout << std::left << std::setw(26) << "kernel" << std::setw(28) << "size"
            << std::right << std::setw(12) << "serial_ms" << std::setw(12)
            << "omp_ms" << std::setw(10) << "speedup" << std::setw(12)
            << "identical" << '\n';
  bool all_identical = true;
  for (const auto& row : rows) {
    std::cout << std::left << std::setw(26) << row.name << std::setw(28)
              << row.size << std::right << std::fixed << std::setprecision(3)
              << std::setw(12) << row.serial_ms << std::setw(12)
              << row.parallel_ms << std::setprecision(2) << std::setw(10)
              << (row.parallel_ms > 0 ? row.serial_ms / row.parallel_ms : 0.0)
              << std::setw(12) << (row.identical ? "yes" : "NO") << '\n';
    all_identical = all_identical && row.identical;
  }
  if (!all_identical) {
    std::cerr << "serial and OpenMP kernels disagree" << std::endl;
    return 1;
  }
  return 0;
}
