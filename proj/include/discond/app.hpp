// SPDX-License-Identifier: Apache-2.0
//
// Experiment driver: run configuration, presets and the train / eval /
// traverse / make-condsprites commands.
#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "discond/data.hpp"
#include "discond/metrics.hpp"
#include "discond/objective.hpp"
#include "discond/prior.hpp"

namespace discond {

/// Invalid configuration or inputs (exit code 2).
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Training produced a non-finite loss (exit code 3).
class NumericalAbort : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EvalSettings {
  std::size_t repeats = 10;
  FactorVaeOptions factorvae;
  MigOptions mig{20, 10000};
  std::size_t nll_samples = 100;
  std::size_t nll_examples = 500;
  std::size_t max_examples = 20000;  // eval split cap, seeded subset beyond it
  std::size_t min_per_class = 100;
};

struct RunConfig {
  std::string name = "custom";
  std::string dataset = "condsprites";  // condsprites | dsprites | mnist
  ModelConfig model;
  LossWeights weights;
  double lr = 5e-4;
  std::size_t epochs = 1;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
  PriorUpdatePolicy prior;
  float temperature = kDefaultTemperature;
  std::uint64_t max_iters = 0;  // 0 = no truncation
  std::size_t subset = 0;       // 0 = full training split
  EvalSettings eval;

  // Inputs; not part of the experiment identity but echoed for re-runs.
  std::string dsprites_path;
  std::string mnist_dir;
  std::string condsprites_cache;

  /// Throws ValidationError.
  void validate() const;
};

std::string config_to_json(const RunConfig& cfg);
/// Unknown keys and bad values throw ValidationError.
RunConfig config_from_json(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

/// Hyperparameter presets for every column of the exact, approx and
/// JointVAE tables.
std::vector<std::string> preset_names();
RunConfig preset(const std::string& name);

/// Training split after the optional seeded subset.
ImageDataset load_train_data(const RunConfig& cfg);
/// Evaluation split (CondSprites: all; dSprites: capped subset; MNIST: test).
ImageDataset load_eval_data(const RunConfig& cfg);

struct TrainOptions {
  std::filesystem::path out_dir;
  std::filesystem::path resume;  // checkpoint to continue from, or empty
  std::ostream* progress = nullptr;
  std::uint64_t progress_every = 500;
};

struct TrainSummary {
  std::uint64_t iterations = 0;
  double first_recon = 0.0;
  double last_recon = 0.0;
  std::filesystem::path checkpoint;
};

/// Writes config.json, loss.csv, checkpoint.dcvk and dump.dcvk under out_dir.
TrainSummary run_train(const RunConfig& cfg, const TrainOptions& options);

/// Model and prior restored from a checkpoint; throws ValidationError
/// listing shape mismatches.
struct LoadedModel {
  Model model;
  PriorMeans prior;
};
LoadedModel load_checkpoint(const RunConfig& cfg, const std::filesystem::path& checkpoint);

/// Writes rows `metric,value,class,seed,n` to csv_path and returns them.
std::vector<MetricReport> run_eval(const RunConfig& cfg, const std::filesystem::path& checkpoint,
                                   const std::filesystem::path& csv_path, std::ostream* progress = nullptr);

/// One PNG per public axis, per private axis and one discrete grid.
/// Rows are examples, columns traversal steps.
std::vector<std::filesystem::path> run_traverse(const RunConfig& cfg, const std::filesystem::path& checkpoint,
                                                const std::vector<std::size_t>& indices, std::size_t steps,
                                                float range, const std::filesystem::path& out_dir);

struct CondspritesSummary {
  std::size_t total = 0;
  std::size_t squares = 0;
  std::size_t ellipses = 0;
  std::size_t hearts = 0;
  double seconds = 0.0;
};
/// Writes condsprites.dcvk and condsprites_factors.csv under out_dir.
CondspritesSummary run_make_condsprites(const std::filesystem::path& dsprites, const std::filesystem::path& out_dir,
                                        std::size_t extent = 32);

/// Quick self-checks of the numeric core; prints one line per check.
bool run_selftest(std::ostream& out);

}  // namespace discond
