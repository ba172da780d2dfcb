// SPDX-License-Identifier: Apache-2.0
#include "support.hpp"

#include "discond/prior.hpp"

using namespace discond;

TEST_CASE("update policies fire on 10 percent epoch boundaries") {
  PriorUpdatePolicy p;
  CHECK(p.period(200) == 20);
  CHECK(p.period(30) == 3);
  CHECK(p.period(5) == 1);
  p.mode = PriorPolicyMode::warmup_once;
  std::vector<std::size_t> fired;
  for (std::size_t e = 1; e <= 200; ++e)
    if (p.fires(e, 200)) fired.push_back(e);
  CHECK(fired == std::vector<std::size_t>{20});
  p.mode = PriorPolicyMode::em_periodic;
  fired.clear();
  for (std::size_t e = 1; e <= 30; ++e)
    if (p.fires(e, 30)) fired.push_back(e);
  CHECK(fired == std::vector<std::size_t>{3, 6, 9, 12, 15, 18, 21, 24, 27, 30});
  for (auto m : {PriorPolicyMode::fixed_zero, PriorPolicyMode::fixed_random}) {
    p.mode = m;
    for (std::size_t e = 0; e <= 30; ++e) CHECK_FALSE(p.fires(e, 30));
  }
  p.fraction = 0.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  CHECK(parse_policy("em_periodic") == PriorPolicyMode::em_periodic);
  CHECK_THROWS_AS(parse_policy("em"), std::invalid_argument);
}

TEST_CASE("initial priors") {
  PriorUpdatePolicy p;
  const PriorMeans z = initial_prior(p, 3, 2, 11);
  for (float v : z.mu.values()) CHECK(v == 0.0f);
  p.mode = PriorPolicyMode::fixed_random;
  const PriorMeans a = initial_prior(p, 3, 2, 11), b = initial_prior(p, 3, 2, 11), c = initial_prior(p, 3, 2, 12);
  CHECK(a.mu.shape() == Shape{3, 2});
  CHECK(a.mu.to_vector() == b.mu.to_vector());
  CHECK(a.mu.to_vector() != c.mu.to_vector());
}

TEST_CASE("mu_star is the responsibility-weighted mean") {
  RandomSource rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + rng.below(40), d = 2 + rng.below(3), p = 1 + rng.below(3);
    Tensor logits({n, d}), mm({n, d, p});
    rng.fill_normal(logits.values());
    rng.fill_normal(mm.values());
    const Tensor alpha = softmax(logits * 2.0f);
    const PriorMeans prev = PriorMeans::zeros(d, p);
    const PriorMeans got = mu_star(alpha, mm, prev);
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < p; ++j) {
        long double num = 0, den = 0;
        for (std::size_t k = 0; k < n; ++k) {
          num += (long double)alpha.values()[k * d + i] * mm.values()[(k * d + i) * p + j];
          den += alpha.values()[k * d + i];
        }
        CHECK(got.mu.values()[i * p + j] == doctest::Approx(double(num / den)).epsilon(1e-6));
      }
    }
  }
}

TEST_CASE("modes without responsibility keep their previous mean") {
  const Tensor alpha({2, 2}, {1.0f, 0.0f, 1.0f, 0.0f});
  const Tensor mm({2, 2, 1}, {1.0f, 5.0f, 3.0f, 7.0f});
  const PriorMeans prev{Tensor({2, 1}, {-4.0f, 9.0f})};
  const PriorMeans got = mu_star(alpha, mm, prev);
  CHECK(got.mu.to_vector() == std::vector<float>{2.0f, 9.0f});
  CHECK(prev.mu.to_vector() == std::vector<float>{-4.0f, 9.0f});
  CHECK_THROWS_AS(mu_star(alpha, Tensor({3, 2, 1}), prev), ShapeError);
  CHECK_THROWS_AS(mu_star(alpha, mm, PriorMeans::zeros(3, 1)), ShapeError);
}

TEST_CASE("mu_star never increases the averaged private KL") {
  RandomSource rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 50, d = 3, p = 2;
    ModeEncodings enc{Tensor({n, d}), Tensor({n, d, p}), Tensor({n, d, p})};
    Tensor logits({n, d});
    rng.fill_normal(logits.values());
    enc.alpha = softmax(logits);
    rng.fill_normal(enc.mode_mu.values());
    rng.fill_normal(enc.mode_logvar.values());
    PriorMeans prior{Tensor({d, p})};
    rng.fill_normal(prior.mu.values());
    const double before = mean_private_kl(enc, prior);
    const double after = mean_private_kl(enc, mu_star(enc.alpha, enc.mode_mu, prior));
    CHECK(after <= before + 1e-9);
  }
}
