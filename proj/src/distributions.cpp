// SPDX-License-Identifier: Apache-2.0
#include "discond/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "discond/ops.hpp"

namespace discond {

CategoricalPosterior CategoricalPosterior::from_logits(const Tensor& logits) {
  return {logits, softmax(logits)};
}

PriorMeans PriorMeans::zeros(std::size_t modes, std::size_t dim) { return {Tensor({modes, dim})}; }

PriorMeans PriorMeans::standard_normal(std::size_t modes, std::size_t dim, RandomSource& rng) {
  Tensor mu({modes, dim});
  rng.fill_normal(mu.values());
  return {mu};
}

Tensor gaussian_kl_to_prior(const DiagonalGaussian& q, const Tensor& prior_mu) {
  if (q.mu.shape() != q.logvar.shape()) {
    throw ShapeError("gaussian_kl_to_prior: mu " + shape_str(q.mu.shape()) + " vs logvar " +
                     shape_str(q.logvar.shape()));
  }
  if (q.mu.rank() < 2) throw ShapeError("gaussian_kl_to_prior: expected a batch axis, got " + shape_str(q.mu.shape()));
  const Tensor diff = prior_mu.defined() ? q.mu - prior_mu : q.mu;
  const Tensor terms = square(diff) + exp(q.logvar) - q.logvar - 1.0f;
  return mul_scalar(sum(terms, q.mu.rank() - 1), 0.5f);
}

Tensor categorical_kl_to_uniform(const Tensor& probs) {
  if (probs.rank() != 2) throw ShapeError("categorical_kl_to_uniform: expected [B, d], got " + shape_str(probs.shape()));
  const std::size_t batch = probs.size(0), d = probs.size(1);
  const double log_d = std::log(static_cast<double>(d));
  const auto a = probs.values();
  std::vector<float> out(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double ai = a[b * d + i];
      if (ai > 0.0) acc += ai * (std::log(ai) + log_d);
    }
    out[b] = static_cast<float>(acc);
  }
  return detail::make_result("categorical_kl", {batch}, std::move(out), {probs}, [d, log_d](detail::Node& self) {
    auto& in = *self.inputs[0];
    if (!in.requires_grad) return;
    for (std::size_t k = 0; k < in.value.size(); ++k) {
      const double ai = in.value[k];
      if (ai > 0.0) in.grad[k] += self.grad[k / d] * static_cast<float>(std::log(ai) + log_d + 1.0);
    }
  });
}

Tensor categorical_kl_to_uniform_logits(const Tensor& logits) {
  if (logits.rank() != 2) {
    throw ShapeError("categorical_kl_to_uniform_logits: expected [B, d], got " + shape_str(logits.shape()));
  }
  const float log_d = static_cast<float>(std::log(static_cast<double>(logits.size(1))));
  const Tensor logp = log_softmax(logits);
  return sum(exp(logp) * (logp + log_d), 1);
}

Tensor gaussian_reparam(const DiagonalGaussian& q, const Tensor& eps) {
  if (q.mu.shape() != q.logvar.shape() || q.mu.shape() != eps.shape()) {
    throw ShapeError("gaussian_reparam: mu " + shape_str(q.mu.shape()) + ", logvar " + shape_str(q.logvar.shape()) +
                     ", eps " + shape_str(eps.shape()));
  }
  return q.mu + exp(mul_scalar(q.logvar, 0.5f)) * eps;
}

Tensor gaussian_reparam(const DiagonalGaussian& q, RandomSource& rng) {
  Tensor eps(q.mu.shape());
  rng.fill_normal(eps.values());
  return gaussian_reparam(q, eps);
}

Tensor gumbel_noise(Shape shape, RandomSource& rng) {
  Tensor g(std::move(shape));
  for (float& v : g.values()) {
    const double u = std::clamp(rng.uniform(), kGumbelLow, kGumbelHigh);
    v = static_cast<float>(-std::log(-std::log(u)));
  }
  return g;
}

Tensor gumbel_softmax(const Tensor& logits, float temperature, const Tensor& gumbel) {
  if (!(temperature > 0.0f)) {
    throw std::invalid_argument("gumbel_softmax: temperature must be positive, got " + std::to_string(temperature));
  }
  return softmax(mul_scalar(logits + gumbel, 1.0f / temperature));
}

Tensor gumbel_softmax_sample(const Tensor& logits, float temperature, RandomSource& rng) {
  if (!(temperature > 0.0f)) {
    throw std::invalid_argument("gumbel_softmax: temperature must be positive, got " + std::to_string(temperature));
  }
  return gumbel_softmax(logits, temperature, gumbel_noise(logits.shape(), rng));
}

Tensor mixture_kl_expectation(const Tensor& alpha, const Tensor& per_mode_kl) {
  if (alpha.shape() != per_mode_kl.shape() || alpha.rank() != 2) {
    throw ShapeError("mixture_kl_expectation: alpha " + shape_str(alpha.shape()) + " vs per-mode KL " +
                     shape_str(per_mode_kl.shape()));
  }
  return sum(alpha * per_mode_kl, 1);
}

double log_normal_diag(std::span<const float> x, std::span<const float> mu, std::span<const float> logvar) {
  constexpr double kLog2Pi = 1.8378770664093454836;
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lv = logvar.empty() ? 0.0 : logvar[i];
    const double diff = static_cast<double>(x[i]) - mu[i];
    acc += -0.5 * (kLog2Pi + lv + diff * diff * std::exp(-lv));
  }
  return acc;
}

}  // namespace discond
