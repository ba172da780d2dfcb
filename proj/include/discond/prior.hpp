// SPDX-License-Identifier: Apache-2.0
//
// Mixture prior means: initial choice and the closed-form responsibility-
// weighted update mu*_i = sum_n a_ni mu_i(x_n) / sum_n a_ni.
#pragma once

#include <string>

#include "discond/data.hpp"
#include "discond/models.hpp"

namespace discond {

enum class PriorPolicyMode { fixed_zero, fixed_random, warmup_once, em_periodic };

std::string policy_name(PriorPolicyMode mode);
PriorPolicyMode parse_policy(const std::string& s);

struct PriorUpdatePolicy {
  PriorPolicyMode mode = PriorPolicyMode::fixed_zero;
  double fraction = 0.1;

  void validate() const;
  /// Epoch that triggers updates: ceil(fraction * total_epochs), at least 1.
  std::size_t period(std::size_t total_epochs) const;
  /// Whether an update runs after `epoch` (1-based) completes.
  bool fires(std::size_t epoch, std::size_t total_epochs) const;
};

/// Zero means for fixed_zero; seeded standard-normal draws otherwise.
PriorMeans initial_prior(const PriorUpdatePolicy& policy, std::size_t modes, std::size_t dim, std::uint64_t seed);

/// Modes whose total responsibility is below this keep their previous mean.
inline constexpr double kMinResponsibility = 1e-8;

/// alpha [N, d], mode_mu [N, d, Pr]. Sums accumulate in f64.
PriorMeans mu_star(const Tensor& alpha, const Tensor& mode_mu, const PriorMeans& previous);

struct ModeEncodings {
  Tensor alpha;        // [N, d]
  Tensor mode_mu;      // [N, d, Pr]
  Tensor mode_logvar;  // [N, d, Pr]
};

/// Encodes a dataset without gradients.
ModeEncodings collect_mode_encodings(const Model& model, const ImageDataset& data, std::size_t batch_size = 256);

/// Dataset mean of sum_i alpha_i KL(q_i || N(mu_i, I)), in f64.
double mean_private_kl(const ModeEncodings& enc, const PriorMeans& prior);

/// Runs mu_star over the dataset when the policy fires at `epoch`.
/// Returns whether the prior changed.
bool apply_policy(const PriorUpdatePolicy& policy, std::size_t epoch, std::size_t total_epochs, const Model& model,
                  const ImageDataset& data, PriorMeans& prior);

}  // namespace discond
