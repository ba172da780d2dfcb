// SPDX-License-Identifier: Apache-2.0
#include "discond/objective.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "discond/ops.hpp"

namespace discond {
namespace {

struct Penalty {
  Tensor term;
  double kl;
  double capacity;
  double value;
};

Penalty capacity_penalty(const Tensor& per_example_kl, double beta, const CapacitySchedule& schedule,
                         std::uint64_t iter) {
  const Tensor kl = mean(per_example_kl);
  const double cap = capacity_at(schedule, iter);
  const Tensor term = mul_scalar(abs(add_scalar(kl, static_cast<float>(-cap))), static_cast<float>(beta));
  return {term, kl.item(), cap, term.item()};
}

LossBreakdown assemble(const Tensor& x, const Tensor& logits, const EncoderOutput& out, const Tensor* kl_w,
                       const LossWeights& weights, std::uint64_t iter) {
  weights.validate();
  const Tensor recon = mean(reconstruction_loss(x, logits));
  const Penalty z = capacity_penalty(gaussian_kl_to_prior(out.z), weights.beta_z, weights.cap_z, iter);
  const Penalty c = capacity_penalty(categorical_kl_to_uniform_logits(out.c.logits), weights.beta_c, weights.cap_c, iter);
  LossBreakdown b;
  Tensor total = recon + z.term + c.term;
  if (kl_w) {
    const Penalty w = capacity_penalty(*kl_w, weights.beta_w, weights.cap_w, iter);
    total = total + w.term;
    b.kl_w = w.kl;
    b.cap_w = w.capacity;
    b.penalty_w = w.value;
  }
  b.total = total;
  b.recon = recon.item();
  b.kl_z = z.kl;
  b.cap_z = z.capacity;
  b.penalty_z = z.value;
  b.kl_c = c.kl;
  b.cap_c = c.capacity;
  b.penalty_c = c.value;
  b.total_value = total.item();
  return b;
}

}  // namespace

double capacity_at(const CapacitySchedule& schedule, std::uint64_t iter) {
  if (schedule.ramp_iters == 0) return schedule.target;
  if (iter >= schedule.ramp_iters) return schedule.target;
  return schedule.target * (static_cast<double>(iter) / static_cast<double>(schedule.ramp_iters));
}

void LossWeights::validate() const {
  for (double v : {beta_z, beta_w, beta_c, cap_z.target, cap_w.target, cap_c.target}) {
    if (!std::isfinite(v) || v < 0.0) {
      throw std::invalid_argument("loss weights must be finite and non-negative, got " + std::to_string(v));
    }
  }
}

Tensor reconstruction_loss(const Tensor& x, const Tensor& logits) { return bce_with_logits(logits, x); }

Tensor private_kl(const EncoderOutput& out, const PriorMeans& prior) {
  if (!out.w.mu.defined()) throw std::invalid_argument("private_kl: encoder output has no private variable");
  if (prior.mu.shape() != Shape{out.w.mu.size(1), out.w.mu.size(2)}) {
    throw ShapeError("private_kl: prior means " + shape_str(prior.mu.shape()) + " do not match private modes " +
                     shape_str(out.w.mu.shape()));
  }
  return mixture_kl_expectation(out.c.probs, gaussian_kl_to_prior(out.w, prior.mu));
}

LossBreakdown discond_loss(const Tensor& x, const EncoderOutput& out, const Tensor& logits, const PriorMeans& prior,
                           const LossWeights& weights, std::uint64_t iter) {
  const Tensor kl_w = private_kl(out, prior);
  return assemble(x, logits, out, &kl_w, weights, iter);
}

LossBreakdown jointvae_loss(const Tensor& x, const EncoderOutput& out, const Tensor& logits,
                            const LossWeights& weights, std::uint64_t iter) {
  return assemble(x, logits, out, nullptr, weights, iter);
}

}  // namespace discond
