// SPDX-License-Identifier: Apache-2.0
//
// Capacity-controlled training objective:
//   total = recon + b_z |KL_z - C_z| + b_w |KL_w - C_w| + b_c |KL_c - C_c|
// with each C ramping linearly from 0 to its target.
#pragma once

#include <cstdint>

#include "discond/models.hpp"

namespace discond {

struct CapacitySchedule {
  double target = 0.0;          // nats
  std::uint64_t ramp_iters = 1;
};

/// target * min(iter / ramp_iters, 1).
double capacity_at(const CapacitySchedule& schedule, std::uint64_t iter);

struct LossWeights {
  double beta_z = 0.0;
  double beta_w = 0.0;
  double beta_c = 0.0;
  CapacitySchedule cap_z;
  CapacitySchedule cap_w;
  CapacitySchedule cap_c;

  void validate() const;
};

/// Scalar terms are batch means in nats per example. `total` carries the
/// gradient graph.
struct LossBreakdown {
  Tensor total;
  double recon = 0.0;
  double kl_z = 0.0;
  double kl_w = 0.0;
  double kl_c = 0.0;
  double cap_z = 0.0;
  double cap_w = 0.0;
  double cap_c = 0.0;
  double penalty_z = 0.0;
  double penalty_w = 0.0;
  double penalty_c = 0.0;
  double total_value = 0.0;
};

/// Bernoulli negative log-likelihood per example, summed over pixels. [B].
Tensor reconstruction_loss(const Tensor& x, const Tensor& logits);

/// Private-variable KL: sum_i alpha_i KL(q(w | x, e_i) || N(mu_i, I)). [B].
Tensor private_kl(const EncoderOutput& out, const PriorMeans& prior);

LossBreakdown discond_loss(const Tensor& x, const EncoderOutput& out, const Tensor& logits, const PriorMeans& prior,
                           const LossWeights& weights, std::uint64_t iter);
LossBreakdown jointvae_loss(const Tensor& x, const EncoderOutput& out, const Tensor& logits,
                            const LossWeights& weights, std::uint64_t iter);

}  // namespace discond
