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

// coscov command-line front end.
//
// Exit codes: 0 success, 1 configuration error (bad flags, bad config
// file, bad checkpoint metadata), 2 data error (missing or corrupt data
// files), 3 numeric error (non-finite loss, failed gradient check,
// failed search cells).
//
// Every command echoes its fully resolved configuration to stderr before
// running. stdout carries only the promised machine-parseable results;
// CSV and JSON artifacts go to files.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "coscov/checkpoint.hpp"
#include "coscov/config.hpp"
#include "coscov/cos_layers.hpp"
#include "coscov/data.hpp"
#include "coscov/errors.hpp"
#include "coscov/gradcheck.hpp"
#include "coscov/kernels.hpp"
#include "coscov/model.hpp"
#include "coscov/search.hpp"
#include "coscov/trainer.hpp"
#include "json.hpp"

namespace {

namespace fs = std::filesystem;
using namespace coscov;

// Flags shared by every data-consuming command; flags win over the file.
struct CommonFlags {
  std::string config_path;
  std::string arch;
  bool synthetic = false;
  std::string data_dir;
  std::string manifest;
  int64_t seed = -1;
  int jobs = 0;
};

void AddCommonFlags(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "JSON config file");
  cmd->add_option("--arch", flags.arch,
                  "architecture preset: coscov, vqccm, plain-cnn");
  cmd->add_flag("--synthetic", flags.synthetic, "use the synthetic dataset");
  cmd->add_option("--data-dir", flags.data_dir,
                  "labelled WAV directory (one subdirectory per class)");
  cmd->add_option("--manifest", flags.manifest, "dataset manifest JSON");
  cmd->add_option("--seed", flags.seed, "model and trainer seed override");
  cmd->add_option("--jobs", flags.jobs,
                  "worker thread cap (overrides COSCOV_NUM_THREADS)");
}

void ApplyThreadCap(int jobs) {
  if (jobs <= 0) {
    if (const char* env = std::getenv("COSCOV_NUM_THREADS")) {
      jobs = std::atoi(env);
    }
  }
  if (jobs > 0) kernels::SetThreadCap(jobs);
}

FullConfig ResolveConfig(const CommonFlags& flags) {
  FullConfig config;
  if (!flags.arch.empty()) {
    config.model = ModelConfig::Defaults(ParseArchitecture(flags.arch));
  }
  if (!flags.config_path.empty()) {
    config = LoadConfigFile(flags.config_path, config);
  }
  if (!flags.arch.empty()) {  // flags win over the file
    const Architecture arch = ParseArchitecture(flags.arch);
    config.model.architecture = arch;
    config.model.vq.enabled = (arch == Architecture::kVqccm);
    config.model.memory.enabled = (arch == Architecture::kVqccm);
  }
  if (flags.synthetic) config.data.source = "synthetic";
  if (!flags.data_dir.empty()) {
    config.data.source = "dir";
    config.data.dir = flags.data_dir;
  }
  if (!flags.manifest.empty()) {
    config.data.source = "manifest";
    config.data.manifest = flags.manifest;
  }
  if (flags.seed >= 0) {
    config.model.seed = static_cast<uint64_t>(flags.seed);
    config.train.seed = static_cast<uint64_t>(flags.seed);
  }
  return config;
}

void EchoConfig(const FullConfig& config) {
  std::cerr << "config: " << ToJson(config) << std::endl;
}

// Synthetic data defaults to as many classes as generated; directory
// data to the number of subdirectories. Keeps num_classes consistent.
void AlignNumClasses(FullConfig& config, const Dataset& dataset) {
  config.model.num_classes =
      static_cast<int64_t>(dataset.class_names.size());
}

std::string FormatAccuracy(double accuracy) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(4) << accuracy;
  return ss.str();
}

int CmdTrain(const CommonFlags& flags, const std::string& out_dir, int epochs,
             int batch_size, double learning_rate, double target_val_acc,
             int patience) {
  FullConfig config = ResolveConfig(flags);
  if (epochs > 0) config.train.epochs = epochs;
  if (batch_size > 0) config.train.batch_size = batch_size;
  if (learning_rate > 0) config.train.learning_rate = learning_rate;
  if (target_val_acc > 0) config.train.target_val_accuracy = target_val_acc;
  if (patience > 0) config.train.early_stop_patience = patience;
  config.model.Validate();
  config.train.Validate();
  config.data.Validate();

  Dataset dataset = BuildDataset(config.data);
  AlignNumClasses(config, dataset);
  EchoConfig(config);

  fs::create_directories(out_dir);
  WriteDatasetManifest(dataset, (fs::path(out_dir) / "manifest.json").string());

  Model model(config.model);
  const RunReport report =
      Fit(model, dataset, config.train, config.data.pad_to, &std::cerr);
  SaveCheckpoint(model, (fs::path(out_dir) / "checkpoint.bin").string());
  std::ofstream report_file(fs::path(out_dir) / "report.json");
  report_file << report.ToJson() << '\n';
  if (!report_file) throw DataError("cannot write report to '" + out_dir + "'");
  std::cout << "test_accuracy " << FormatAccuracy(report.test_accuracy)
            << std::endl;
  return 0;
}

int CmdEval(const CommonFlags& flags, const std::string& checkpoint,
            const std::string& split_name, int batch_size) {
  FullConfig config = ResolveConfig(flags);
  Model model = LoadCheckpoint(checkpoint);
  config.model = model.config();
  config.data.Validate();
  const Split split = ParseSplit(split_name);
  Dataset dataset = BuildDataset(config.data);
  EchoConfig(config);
  const EvalResult result =
      Evaluate(model, dataset, split, batch_size, config.data.pad_to);
  std::cout << FormatAccuracy(result.accuracy) << std::endl;
  return 0;
}

int CmdParamCount(const CommonFlags& flags) {
  FullConfig config = ResolveConfig(flags);
  EchoConfig(config);
  const ParamCountReport report = CountParameters(config.model);
  std::cout << "layer,coscov_params,plain_cnn_params\n";
  for (const auto& row : report.conv_rows) {
    std::cout << row.name << ',' << row.coscov_count << ',' << row.plain_count
              << '\n';
  }
  std::cout << "conv_total," << report.conv_coscov_total << ','
            << report.conv_plain_total << '\n';
  std::cout << "reduction," << std::fixed << std::setprecision(2)
            << report.reduction_percent << "%\n";
  if (report.vq_params > 0) {
    std::cout << "vq_codebook," << report.vq_params << ",0\n";
  }
  if (report.memory_params > 0) {
    std::cout << "memory," << report.memory_params << ",0\n";
  }
  std::cout << "total," << report.total << std::endl;
  return 0;
}

int CmdGradcheck(const CommonFlags& flags, const std::string& ops,
                 uint64_t seed, int instances, double perturb) {
  FullConfig config = ResolveConfig(flags);
  EchoConfig(config);
  GradCheckOptions options;
  options.seed = seed;
  if (instances > 0) options.instances = instances;
  options.perturb = perturb;
  const std::vector<GradCheckResult> results = RunGradCheckSuite(ops, options);
  bool all_pass = true;
  for (const auto& r : results) {
    std::cout << r.op << ' ' << (r.pass() ? "pass" : "FAIL") << " instances="
              << r.instances << " checks=" << r.checks
              << " max_rel_err=" << r.max_rel_err << '\n';
    all_pass = all_pass && r.pass();
  }
  std::cout.flush();
  if (!all_pass) {
    throw NumericError("gradient check failed; see per-op report above");
  }
  return 0;
}

int CmdExportFilters(const CommonFlags& flags, const std::string& checkpoint,
                     int layer, const std::string& out_path) {
  FullConfig config = ResolveConfig(flags);
  Model model = checkpoint.empty() ? Model(config.model)
                                   : LoadCheckpoint(checkpoint);
  config.model = model.config();
  EchoConfig(config);
  if (config.model.architecture == Architecture::kPlainCnn) {
    throw ConfigError("export-filters needs a cosine architecture");
  }
  const int layers = static_cast<int>(config.model.channels.size()) + 1;
  if (layer < 0 || layer > layers) {
    throw ConfigError("--layer must be in 0.." + std::to_string(layers) +
                      " (0 = all layers)");
  }
  std::ofstream os(out_path, std::ios::trunc);
  if (!os) throw DataError("cannot write '" + out_path + "'");
  os << "layer,in_ch,out_ch,n,value\n";
  for (int k = 1; k <= layers; ++k) {
    if (layer != 0 && layer != k) continue;
    const std::string prefix = "layer" + std::to_string(k);
    const Tensor<float>* theta1 = model.FindParam(prefix + ".theta1");
    const Tensor<float>* theta2 = model.FindParam(prefix + ".theta2");
    WriteFilterCsv(os, k, *theta1, *theta2,
                   config.model.filter_lens[static_cast<size_t>(k - 1)]);
  }
  std::cerr << "wrote " << out_path << std::endl;
  return 0;
}

SearchSpace LoadSearchSpace(const std::string& path,
                            const ModelConfig& backbone) {
  SearchSpace space;
  space.backbone = backbone;
  if (path.empty()) return space;
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open search space file '" + path + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  nlohmann::json j = nlohmann::json::parse(ss.str(), nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw ConfigError("search space file '" + path + "' is not valid JSON");
  }
  for (const auto& item : j.items()) {
    if (item.key() == "filter_candidates") {
      space.filter_candidates = item.value().get<std::vector<int64_t>>();
    } else if (item.key() == "pool_candidates") {
      space.pool_candidates = item.value().get<std::vector<int64_t>>();
    } else if (item.key() == "runs_per_candidate") {
      space.runs_per_candidate = item.value().get<int>();
    } else {
      throw ConfigError("unknown config key: search." + item.key());
    }
  }
  if (space.filter_candidates.empty() || space.pool_candidates.empty() ||
      space.runs_per_candidate < 1) {
    throw ConfigError("search space needs candidates and runs_per_candidate >= 1");
  }
  return space;
}

int CmdSearch(const CommonFlags& flags, const std::string& mock_oracle,
              const std::string& space_path, int runs,
              const std::string& out_dir) {
  FullConfig config = ResolveConfig(flags);
  EchoConfig(config);
  if (!mock_oracle.empty()) {
    std::ifstream is(mock_oracle);
    if (!is) throw DataError("cannot open mock oracle '" + mock_oracle + "'");
    const AccuracyMatrix matrix = ReadAccuracyCsv(is);
    std::cout << FormatChoices(SelectPerLayer(matrix)) << std::endl;
    return 0;
  }

  Dataset dataset = BuildDataset(config.data);
  AlignNumClasses(config, dataset);
  SearchSpace space =
      LoadSearchSpace(space_path, BbnBackbone(config.model.num_classes,
                                              config.data.pad_to));
  if (runs > 0) space.runs_per_candidate = runs;
  const CellHook hook =
      MakeTrainingHook(dataset, config.train, config.data.pad_to);

  fs::create_directories(out_dir);
  const GreedyPassResult filters =
      GreedyFilterPass(space, config.train.seed, hook);
  {
    std::ofstream os(fs::path(out_dir) / "filter_matrix.csv");
    WriteAccuracyCsv(os, filters.matrix);
  }
  const GreedyPassResult pools =
      GreedyPoolPass(space, filters.chosen, config.train.seed, hook);
  {
    std::ofstream os(fs::path(out_dir) / "pool_matrix.csv");
    WriteAccuracyCsv(os, pools.matrix);
  }
  std::cout << "filters " << FormatChoices(filters.chosen) << '\n'
            << "pools " << FormatChoices(pools.chosen) << std::endl;
  if (filters.any_failed || pools.any_failed) {
    throw NumericError("one or more search cells failed; matrices record nan");
  }
  return 0;
}

int CmdSweep(const CommonFlags& flags, std::vector<int64_t> memory_sizes,
             std::vector<int64_t> embedding_counts, int runs,
             const std::string& out_dir) {
  FullConfig config = ResolveConfig(flags);
  Dataset dataset = BuildDataset(config.data);
  AlignNumClasses(config, dataset);
  EchoConfig(config);
  const CellHook hook =
      MakeTrainingHook(dataset, config.train, config.data.pad_to);
  const std::vector<SweepAxisResult> axes =
      SweepMemoryVq(config.model, memory_sizes, embedding_counts, runs,
                    config.train.seed, hook);
  fs::create_directories(out_dir);
  for (const auto& axis : axes) {
    std::ofstream os(fs::path(out_dir) / ("sweep_" + axis.axis + ".csv"));
    WriteSweepCsv(os, axis);
    for (size_t i = 0; i < axis.values.size(); ++i) {
      std::cout << axis.axis << ' ' << axis.values[i] << " max_accuracy "
                << axis.max_accuracy[i] << '\n';
    }
  }
  std::cout.flush();
  return 0;
}

int CmdAblation(const CommonFlags& flags, int runs,
                const std::string& out_dir) {
  FullConfig config = ResolveConfig(flags);
  Dataset dataset = BuildDataset(config.data);
  AlignNumClasses(config, dataset);
  EchoConfig(config);
  const CellHook hook =
      MakeTrainingHook(dataset, config.train, config.data.pad_to);
  const std::vector<AblationRow> rows =
      Ablation(config.model, runs, config.train.seed, hook);
  fs::create_directories(out_dir);
  {
    std::ofstream os(fs::path(out_dir) / "ablation.csv");
    WriteAblationTable(os, rows);
  }
  WriteAblationTable(std::cout, rows);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"coscov: cosine-filter audio classification engine"};
  app.require_subcommand(1);

  CommonFlags flags;

  auto* train = app.add_subcommand("train", "train a model");
  AddCommonFlags(train, flags);
  std::string out_dir = "out";
  int epochs = 0, batch_size = 0, patience = 0;
  double learning_rate = 0.0, target_val_acc = 0.0;
  train->add_option("--out", out_dir, "output directory");
  train->add_option("--epochs", epochs, "epoch budget override");
  train->add_option("--batch-size", batch_size, "batch size override");
  train->add_option("--lr", learning_rate, "learning rate override");
  train->add_option("--target-val-acc", target_val_acc,
                    "stop once validation accuracy reaches this");
  train->add_option("--patience", patience, "early stop patience override");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  AddCommonFlags(eval, flags);
  std::string checkpoint, split_name = "test";
  int eval_batch = 32;
  eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  eval->add_option("--split", split_name, "train, val, or test");
  eval->add_option("--batch-size", eval_batch, "evaluation batch size");

  auto* param_count = app.add_subcommand("param-count", "parameter table");
  AddCommonFlags(param_count, flags);

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference suite");
  AddCommonFlags(gradcheck, flags);
  std::string ops = "all";
  uint64_t gc_seed = 20260815;
  int gc_instances = 0;
  double gc_perturb = 0.0;
  gradcheck->add_option("--ops", ops, "all, or one op name");
  gradcheck->add_option("--gc-seed", gc_seed, "gradient check seed");
  gradcheck->add_option("--instances", gc_instances, "instances per op");
  gradcheck->add_option("--perturb", gc_perturb,
                        "inject this analytic-gradient offset (negative control)");

  auto* export_filters =
      app.add_subcommand("export-filters", "dump generated filters to CSV");
  AddCommonFlags(export_filters, flags);
  std::string ef_checkpoint, ef_out = "filters.csv";
  int ef_layer = 0;
  export_filters->add_option("--checkpoint", ef_checkpoint,
                             "checkpoint (omit for a fresh seeded model)");
  export_filters->add_option("--layer", ef_layer, "layer index (0 = all)");
  export_filters->add_option("--out", ef_out, "output CSV path");

  auto* search = app.add_subcommand("search", "greedy architecture search");
  AddCommonFlags(search, flags);
  std::string mock_oracle, space_path, search_out = "out";
  int search_runs = 0;
  search->add_option("--mock-oracle", mock_oracle,
                     "accuracy matrix CSV; replays the selector only");
  search->add_option("--space", space_path, "search space JSON");
  search->add_option("--runs", search_runs, "runs per candidate override");
  search->add_option("--out", search_out, "output directory");

  auto* sweep = app.add_subcommand("sweep", "memory/VQ size sweep");
  AddCommonFlags(sweep, flags);
  std::vector<int64_t> memory_sizes{10, 100, 500};
  std::vector<int64_t> embedding_counts{64, 256, 512};
  int sweep_runs = 5;
  std::string sweep_out = "out";
  sweep->add_option("--memory-sizes", memory_sizes, "memory size axis")
      ->delimiter(',');
  sweep->add_option("--embedding-counts", embedding_counts,
                    "codebook size axis")
      ->delimiter(',');
  sweep->add_option("--runs", sweep_runs, "runs per cell");
  sweep->add_option("--out", sweep_out, "output directory");

  auto* ablation = app.add_subcommand("ablation", "four-variant ablation");
  AddCommonFlags(ablation, flags);
  int ablation_runs = 3;
  std::string ablation_out = "out";
  ablation->add_option("--runs", ablation_runs, "runs per variant");
  ablation->add_option("--out", ablation_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;  // flag errors are configuration errors
  }

  try {
    ApplyThreadCap(flags.jobs);
    if (train->parsed()) {
      return CmdTrain(flags, out_dir, epochs, batch_size, learning_rate,
                      target_val_acc, patience);
    }
    if (eval->parsed()) return CmdEval(flags, checkpoint, split_name, eval_batch);
    if (param_count->parsed()) return CmdParamCount(flags);
    if (gradcheck->parsed()) {
      return CmdGradcheck(flags, ops, gc_seed, gc_instances, gc_perturb);
    }
    if (export_filters->parsed()) {
      return CmdExportFilters(flags, ef_checkpoint, ef_layer, ef_out);
    }
    if (search->parsed()) {
      return CmdSearch(flags, mock_oracle, space_path, search_runs, search_out);
    }
    if (sweep->parsed()) {
      return CmdSweep(flags, memory_sizes, embedding_counts, sweep_runs,
                      sweep_out);
    }
    if (ablation->parsed()) return CmdAblation(flags, ablation_runs, ablation_out);
    std::cerr << "no command given" << std::endl;
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << std::endl;
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << std::endl;
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << std::endl;
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
}
