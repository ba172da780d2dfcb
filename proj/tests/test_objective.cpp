// SPDX-License-Identifier: Apache-2.0
#include "support.hpp"

#include "discond/objective.hpp"

using namespace discond;
using test::pattern_tensor;

namespace {

EncoderOutput encoder_output(std::size_t batch, std::size_t pb, std::size_t d, std::size_t pr, bool requires_grad) {
  EncoderOutput out;
  out.z = {pattern_tensor({batch, pb}, 0.31, 0.1, 1.0, requires_grad),
           pattern_tensor({batch, pb}, 0.47, 0.6, 1.0, requires_grad)};
  if (pr != 0) {
    out.w = {pattern_tensor({batch, d, pr}, 0.23, 0.2, 1.0, requires_grad),
             pattern_tensor({batch, d, pr}, 0.59, 0.9, 1.0, requires_grad)};
  }
  Tensor logits = pattern_tensor({batch, d}, 0.71, 0.3, 2.0, requires_grad);
  out.c = CategoricalPosterior::from_logits(logits);
  return out;
}

Tensor targets(std::size_t batch, std::size_t extent) {
  Tensor x = pattern_tensor({batch, 1, extent, extent}, 0.13, 0.5);
  for (float& v : x.values()) v = v > 0.0f ? 1.0f : 0.0f;
  return x;
}

}  // namespace

TEST_CASE("capacity ramps linearly and then holds") {
  const CapacitySchedule s{5.0, 25000};
  CHECK(capacity_at(s, 0) == 0.0);
  CHECK(capacity_at(s, 12500) == 2.5);
  CHECK(capacity_at(s, 25000) == 5.0);
  CHECK(capacity_at(s, 1000000) == 5.0);
  CHECK(capacity_at(s, 5000) == doctest::Approx(1.0));
  CHECK(capacity_at({3.0, 0}, 0) == 3.0);
  double previous = -1.0;
  for (std::uint64_t t = 0; t <= 30000; t += 997) {
    CHECK(capacity_at(s, t) >= previous);
    previous = capacity_at(s, t);
  }
}

TEST_CASE("discond loss is recon plus capacity penalties") {
  const std::size_t batch = 3, pb = 4, d = 3, pr = 2, extent = 4;
  const EncoderOutput out = encoder_output(batch, pb, d, pr, false);
  const Tensor logits = pattern_tensor({batch, 1, extent, extent}, 0.37, 0.2, 3.0);
  const Tensor x = targets(batch, extent);
  const PriorMeans prior{pattern_tensor({d, pr}, 0.9, 0.4)};
  LossWeights w;
  w.beta_z = 30;
  w.beta_w = 20;
  w.beta_c = 10;
  w.cap_z = {30.0, 100};
  w.cap_w = {10.0, 100};
  w.cap_c = {1.1, 100};
  const LossBreakdown l = discond_loss(x, out, logits, prior, w, 40);

  const double recon = mean(bce_with_logits(logits, x)).item();
  const double kl_z = mean(gaussian_kl_to_prior(out.z)).item();
  const double kl_c = mean(categorical_kl_to_uniform(out.c.probs)).item();
  double kl_w = 0.0;
  const Tensor per_mode = gaussian_kl_to_prior(out.w, prior.mu);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t i = 0; i < d; ++i) kl_w += out.c.probs.values()[b * d + i] * per_mode.values()[b * d + i];
  kl_w /= batch;

  CHECK(l.recon == doctest::Approx(recon).epsilon(1e-6));
  CHECK(l.kl_z == doctest::Approx(kl_z).epsilon(1e-5));
  CHECK(l.kl_w == doctest::Approx(kl_w).epsilon(1e-5));
  CHECK(l.kl_c == doctest::Approx(kl_c).epsilon(1e-5));
  CHECK(l.cap_z == doctest::Approx(12.0));
  CHECK(l.cap_w == doctest::Approx(4.0));
  CHECK(l.cap_c == doctest::Approx(0.44));
  const double expect = recon + 30 * std::abs(kl_z - 12.0) + 20 * std::abs(kl_w - 4.0) + 10 * std::abs(kl_c - 0.44);
  CHECK(l.total_value == doctest::Approx(expect).epsilon(1e-5));
  CHECK(l.total.item() == doctest::Approx(l.total_value));
  CHECK(l.penalty_z + l.penalty_w + l.penalty_c + l.recon == doctest::Approx(l.total_value).epsilon(1e-5));
}

TEST_CASE("jointvae loss has no private term") {
  const EncoderOutput out = encoder_output(2, 3, 4, 0, false);
  const Tensor logits = pattern_tensor({2, 1, 4, 4}, 0.37, 0.2);
  LossWeights w;
  w.beta_z = w.beta_c = 5;
  w.beta_w = 1000;
  const LossBreakdown l = jointvae_loss(targets(2, 4), out, logits, w, 0);
  CHECK(l.kl_w == 0.0);
  CHECK(l.penalty_w == 0.0);
  CHECK(l.total_value == doctest::Approx(l.recon + 5 * l.kl_z + 5 * l.kl_c).epsilon(1e-5));
}

TEST_CASE("loss gradients agree with finite differences") {
  EncoderOutput out = encoder_output(2, 3, 3, 2, true);
  Tensor logits_c = out.c.logits;
  Tensor dec = pattern_tensor({2, 1, 4, 4}, 0.37, 0.2, 2.0, true);
  const Tensor x = targets(2, 4);
  const PriorMeans prior{pattern_tensor({3, 2}, 0.9, 0.4)};
  LossWeights w;
  w.beta_z = 3;
  w.beta_w = 2;
  w.beta_c = 4;
  // Capacities chosen so no |KL - C| sits near its kink.
  w.cap_z = {0.5, 1};
  w.cap_w = {100.0, 1};
  w.cap_c = {0.01, 1};
  auto loss = [&] {
    EncoderOutput o = out;
    o.c = CategoricalPosterior::from_logits(logits_c);
    return discond_loss(x, o, dec, prior, w, 5).total;
  };
  CHECK(test::gradient_error({out.z.mu, out.z.logvar, out.w.mu, out.w.logvar, logits_c, dec}, loss) < 5e-3);
}

TEST_CASE("loss inputs are validated") {
  const EncoderOutput out = encoder_output(2, 3, 3, 2, false);
  const Tensor logits = pattern_tensor({2, 1, 4, 4}, 0.37, 0.2);
  LossWeights w;
  w.beta_z = -1;
  CHECK_THROWS_AS(discond_loss(targets(2, 4), out, logits, PriorMeans::zeros(3, 2), w, 0), std::invalid_argument);
  CHECK_THROWS_AS(private_kl(out, PriorMeans::zeros(2, 2)), ShapeError);
  CHECK_THROWS_AS(private_kl(encoder_output(2, 3, 3, 0, false), PriorMeans::zeros(3, 2)), std::invalid_argument);
}
