// SPDX-License-Identifier: Apache-2.0
#include "discond/prior.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "discond/ops.hpp"

namespace discond {

std::string policy_name(PriorPolicyMode mode) {
  switch (mode) {
    case PriorPolicyMode::fixed_zero: return "fixed_zero";
    case PriorPolicyMode::fixed_random: return "fixed_random";
    case PriorPolicyMode::warmup_once: return "warmup_once";
    case PriorPolicyMode::em_periodic: return "em_periodic";
  }
  return "?";
}

PriorPolicyMode parse_policy(const std::string& s) {
  for (auto m : {PriorPolicyMode::fixed_zero, PriorPolicyMode::fixed_random, PriorPolicyMode::warmup_once,
                 PriorPolicyMode::em_periodic}) {
    if (policy_name(m) == s) return m;
  }
  throw std::invalid_argument("unknown prior policy '" + s +
                              "' (expected fixed_zero, fixed_random, warmup_once or em_periodic)");
}

void PriorUpdatePolicy::validate() const {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw std::invalid_argument("prior policy: fraction must lie in (0, 1), got " + std::to_string(fraction));
  }
}

std::size_t PriorUpdatePolicy::period(std::size_t total_epochs) const {
  const auto k = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(total_epochs) - 1e-12));
  return std::max<std::size_t>(k, 1);
}

bool PriorUpdatePolicy::fires(std::size_t epoch, std::size_t total_epochs) const {
  const std::size_t k = period(total_epochs);
  switch (mode) {
    case PriorPolicyMode::warmup_once: return epoch == k;
    case PriorPolicyMode::em_periodic: return epoch > 0 && epoch % k == 0;
    default: return false;
  }
}

PriorMeans initial_prior(const PriorUpdatePolicy& policy, std::size_t modes, std::size_t dim, std::uint64_t seed) {
  if (policy.mode == PriorPolicyMode::fixed_zero) return PriorMeans::zeros(modes, dim);
  RandomSource rng(seed, 0x7072696f72ull);  // "prior"
  return PriorMeans::standard_normal(modes, dim, rng);
}

PriorMeans mu_star(const Tensor& alpha, const Tensor& mode_mu, const PriorMeans& previous) {
  if (alpha.rank() != 2 || mode_mu.rank() != 3 || alpha.size(0) != mode_mu.size(0) || alpha.size(1) != mode_mu.size(1)) {
    throw ShapeError("mu_star: alpha " + shape_str(alpha.shape()) + " does not match mode means " +
                     shape_str(mode_mu.shape()));
  }
  const std::size_t n = alpha.size(0), d = alpha.size(1), p = mode_mu.size(2);
  if (n == 0) throw std::invalid_argument("mu_star: empty dataset");
  if (previous.mu.shape() != Shape{d, p}) {
    throw ShapeError("mu_star: previous prior " + shape_str(previous.mu.shape()) + " vs [" + std::to_string(d) + ", " +
                     std::to_string(p) + "]");
  }
  const auto a = alpha.values();
  const auto m = mode_mu.values();
  std::vector<double> weight(d, 0.0), acc(d * p, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t i = 0; i < d; ++i) {
      const double w = a[k * d + i];
      weight[i] += w;
      for (std::size_t j = 0; j < p; ++j) acc[i * p + j] += w * m[(k * d + i) * p + j];
    }
  }
  PriorMeans out{previous.mu.detach()};
  auto v = out.mu.values();
  for (std::size_t i = 0; i < d; ++i) {
    if (weight[i] < kMinResponsibility) continue;
    for (std::size_t j = 0; j < p; ++j) v[i * p + j] = static_cast<float>(acc[i * p + j] / weight[i]);
  }
  return out;
}

ModeEncodings collect_mode_encodings(const Model& model, const ImageDataset& data, std::size_t batch_size) {
  NoGradGuard guard;
  const ModelConfig& cfg = model.config();
  if (cfg.variant == Variant::joint) throw std::invalid_argument("collect_mode_encodings: joint model has no private modes");
  const std::size_t n = data.size(), d = cfg.discrete_dim, p = cfg.private_dim;
  ModeEncodings enc{Tensor({n, d}), Tensor({n, d, p}), Tensor({n, d, p})};
  std::vector<std::size_t> index(n);
  std::iota(index.begin(), index.end(), std::size_t{0});
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t count = std::min(batch_size, n - start);
    const EncoderOutput out = model.encode(data.images(std::span(index).subspan(start, count)));
    std::copy_n(out.c.probs.values().data(), count * d, enc.alpha.values().data() + start * d);
    std::copy_n(out.w.mu.values().data(), count * d * p, enc.mode_mu.values().data() + start * d * p);
    std::copy_n(out.w.logvar.values().data(), count * d * p, enc.mode_logvar.values().data() + start * d * p);
  }
  return enc;
}

double mean_private_kl(const ModeEncodings& enc, const PriorMeans& prior) {
  const std::size_t n = enc.alpha.size(0), d = enc.alpha.size(1), p = enc.mode_mu.size(2);
  const auto a = enc.alpha.values();
  const auto m = enc.mode_mu.values();
  const auto lv = enc.mode_logvar.values();
  const auto pm = prior.mu.values();
  double total = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t i = 0; i < d; ++i) {
      double kl = 0.0;
      for (std::size_t j = 0; j < p; ++j) {
        const std::size_t q = (k * d + i) * p + j;
        const double diff = static_cast<double>(m[q]) - pm[i * p + j];
        kl += 0.5 * (diff * diff + std::exp(static_cast<double>(lv[q])) - lv[q] - 1.0);
      }
      total += a[k * d + i] * kl;
    }
  }
  return total / static_cast<double>(n);
}

bool apply_policy(const PriorUpdatePolicy& policy, std::size_t epoch, std::size_t total_epochs, const Model& model,
                  const ImageDataset& data, PriorMeans& prior) {
  if (epoch > total_epochs) {
    throw std::invalid_argument("apply_policy: epoch " + std::to_string(epoch) + " exceeds total " +
                                std::to_string(total_epochs));
  }
  if (!policy.fires(epoch, total_epochs)) return false;
  const ModeEncodings enc = collect_mode_encodings(model, data);
  prior = mu_star(enc.alpha, enc.mode_mu, prior);
  return true;
}

}  // namespace discond
