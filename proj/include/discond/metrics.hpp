// SPDX-License-Identifier: Apache-2.0
//
// Disentanglement metrics (FactorVAE vote metric, MIG and their class-
// conditional forms), majority-vote clustering accuracy and the
// importance-weighted NLL estimate.
#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "discond/data.hpp"
#include "discond/models.hpp"

namespace discond {

/// Posterior-mean representations of a dataset.
struct RepresentationDump {
  Tensor reps;   // [N, Pb + Pr] (or [N, Pb])
  Tensor alpha;  // [N, d]
};

RepresentationDump dump_representations(const Model& model, const ImageDataset& data, std::size_t batch_size = 256);

struct MetricReport {
  std::string metric;
  double value = 0.0;
  std::string cls;  // "all" or a class id
  std::uint64_t seed = 0;
  std::size_t n = 0;
};

struct FactorVaeOptions {
  std::size_t batch_size = 64;
  std::size_t train_votes = 800;
  std::size_t eval_votes = 200;
};

/// Dimensions whose dataset std falls below this are dropped before voting.
inline constexpr double kCollapsedStd = 1e-6;

/// Majority-vote accuracy of predicting the fixed factor from the argmin of
/// normalized per-dimension variance. Only non-constant factors vote.
double factorvae_metric(const Tensor& reps, const FactorTable& factors, const FactorVaeOptions& options,
                        RandomSource& rng);

struct MigOptions {
  std::size_t bins = 20;
  std::size_t max_samples = 0;  // 0 keeps all rows; otherwise a seeded subset
};

/// Mean over non-constant factors of (top-1 - top-2 MI) / H(factor) with
/// equal-count binning of each representation dimension. Natural log.
double mig(const Tensor& reps, const FactorTable& factors, const MigOptions& options, RandomSource& rng);

using MetricFn = std::function<double(const Tensor& reps, const FactorTable& factors, RandomSource& rng)>;

struct ConditionalResult {
  double value = 0.0;
  std::vector<std::int32_t> classes;
  std::vector<double> per_class;
  std::vector<std::size_t> counts;
};

/// sum_c p(c) metric(X_c), with p(c) the empirical class frequency. Throws
/// naming the class when one has fewer than `min_per_class` examples.
ConditionalResult conditional_metric(const MetricFn& metric, const Tensor& reps, const FactorTable& factors,
                                     std::span<const std::int32_t> labels, RandomSource& rng,
                                     std::size_t min_per_class = 100);

/// Accuracy after mapping each cluster to its most frequent label (lowest
/// label on ties).
double unsupervised_accuracy(std::span<const std::size_t> clusters, std::span<const std::int32_t> labels);

/// -log(1/K sum_k sum_c exp(log_weights[k, c])), log-sum-exp stable.
double iwae_from_log_weights(std::span<const double> log_weights, std::size_t samples);

/// Per-example importance-weighted NLL in nats with K samples of the
/// continuous latents and the discrete latent summed over all classes.
std::vector<double> iwae_nll(const Model& model, const Tensor& x, const PriorMeans& prior, std::size_t samples,
                             RandomSource& rng);

/// Rows of `reps` and the factor table restricted to `index`.
Tensor select_rows(const Tensor& reps, std::span<const std::size_t> index);
FactorTable select_rows(const FactorTable& factors, std::span<const std::size_t> index);

}  // namespace discond
