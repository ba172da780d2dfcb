// SPDX-License-Identifier: Apache-2.0
//
// Gaussian and categorical posteriors, their KLs to the model priors and
// reparametrized samplers.
#pragma once

#include <span>

#include "discond/random.hpp"
#include "discond/tensor.hpp"

namespace discond {

/// Diagonal Gaussian; the last axis is the event axis.
struct DiagonalGaussian {
  Tensor mu;
  Tensor logvar;
};

struct CategoricalPosterior {
  Tensor logits;  // [B, d]
  Tensor probs;   // softmax(logits)

  static CategoricalPosterior from_logits(const Tensor& logits);
};

/// Gaussian mixture prior means [d, Pr]; covariances are identity.
struct PriorMeans {
  Tensor mu;

  static PriorMeans zeros(std::size_t modes, std::size_t dim);
  static PriorMeans standard_normal(std::size_t modes, std::size_t dim, RandomSource& rng);
  std::size_t modes() const { return mu.size(0); }
  std::size_t dim() const { return mu.size(1); }
};

/// KL(q || N(prior_mu, I)) summed over the last axis. prior_mu broadcasts
/// against q.mu and may be undefined (zero mean). [B, D] -> [B];
/// [B, d, P] with prior [d, P] -> [B, d].
Tensor gaussian_kl_to_prior(const DiagonalGaussian& q, const Tensor& prior_mu = {});

/// KL(alpha || uniform over d) = sum_i alpha_i log(alpha_i d), with
/// 0 log 0 = 0. [B, d] -> [B].
Tensor categorical_kl_to_uniform(const Tensor& probs);
/// Same quantity evaluated from logits through log-softmax.
Tensor categorical_kl_to_uniform_logits(const Tensor& logits);

/// mu + exp(logvar / 2) * eps.
Tensor gaussian_reparam(const DiagonalGaussian& q, const Tensor& eps);
Tensor gaussian_reparam(const DiagonalGaussian& q, RandomSource& rng);

inline constexpr double kGumbelLow = 1e-10;
inline constexpr double kGumbelHigh = 1.0 - 1e-7;
inline constexpr float kDefaultTemperature = 0.67f;

/// -log(-log u) with u clamped to [kGumbelLow, kGumbelHigh].
Tensor gumbel_noise(Shape shape, RandomSource& rng);
/// softmax((logits + g) / tau). Throws for tau <= 0.
Tensor gumbel_softmax(const Tensor& logits, float temperature, const Tensor& gumbel);
Tensor gumbel_softmax_sample(const Tensor& logits, float temperature, RandomSource& rng);

/// sum_i alpha_i * per_mode_kl_i. [B, d] x [B, d] -> [B].
Tensor mixture_kl_expectation(const Tensor& alpha, const Tensor& per_mode_kl);

/// log N(x; mu, diag(exp(logvar))) accumulated in f64. An empty logvar
/// means unit variance.
double log_normal_diag(std::span<const float> x, std::span<const float> mu, std::span<const float> logvar);

}  // namespace discond
