// SPDX-License-Identifier: Apache-2.0
//
// Encoder/decoder networks for Discond-VAE (exact and approx) and the
// JointVAE baseline, their reparametrizations and latent traversals.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "discond/distributions.hpp"
#include "discond/nn.hpp"

namespace discond {

enum class Variant { exact, approx, joint };
/// conv: the strided conv stacks. mlp: one hidden layer each way, used for
/// small gradient checks.
enum class Trunk { conv, mlp };

std::string variant_name(Variant v);
Variant parse_variant(const std::string& s);
std::string trunk_name(Trunk t);
Trunk parse_trunk(const std::string& s);

struct ModelConfig {
  Variant variant = Variant::exact;
  std::size_t public_dim = 5;    // Pb
  std::size_t private_dim = 3;   // Pr, 0 for joint
  std::size_t discrete_dim = 2;  // d
  std::size_t image_extent = 32;
  std::size_t channels = 1;
  Trunk trunk = Trunk::conv;
  std::size_t mlp_hidden = 32;

  /// Throws std::invalid_argument on inconsistent settings.
  void validate() const;
};

struct EncoderOutput {
  DiagonalGaussian z;    // [B, Pb]
  DiagonalGaussian w;    // [B, d, Pr]; undefined for joint
  CategoricalPosterior c;
  std::size_t batch() const { return c.logits.size(0); }
};

struct LatentSample {
  Tensor z;                                        // [B, Pb]
  Tensor w;                                        // [B, Pr]; undefined for joint
  Tensor discrete_repr;                            // [B, d]
  std::optional<std::vector<std::size_t>> selected_mode;
};

/// Standard-normal and Gumbel noise for one reparametrization.
struct LatentNoise {
  Tensor eps_z;   // [B, Pb]
  Tensor eps_w;   // [B, d, Pr]
  Tensor gumbel;  // [B, d]

  static LatentNoise draw(const ModelConfig& cfg, std::size_t batch, RandomSource& rng);
  static LatentNoise zeros(const ModelConfig& cfg, std::size_t batch);
};

/// j = argmax alpha (lowest index on ties); w sampled from mode j only;
/// discrete_repr = one-hot(j).
LatentSample reparam_exact(const EncoderOutput& out, const LatentNoise& noise);
/// w = sum_i pi_i (mu_i + sigma_i eps_i) with pi ~ Gumbel-Softmax, or pi =
/// forced_pi when given.
LatentSample reparam_approx(const EncoderOutput& out, float temperature, const LatentNoise& noise,
                            const Tensor& forced_pi = {});
/// z plus Gumbel-Softmax pi.
LatentSample reparam_joint(const EncoderOutput& out, float temperature, const LatentNoise& noise);

enum class TraverseKind { public_axis, private_axis, discrete };

class Model {
 public:
  /// Builds freshly initialised parameters.
  Model(const ModelConfig& cfg, std::uint64_t seed);

  const ModelConfig& config() const noexcept { return cfg_; }
  ParameterSet& parameters() noexcept { return params_; }
  const ParameterSet& parameters() const noexcept { return params_; }

  /// x [B, 1, H, W] with values in [0, 1].
  EncoderOutput encode(const Tensor& x) const;
  /// Dispatches on the variant.
  LatentSample reparam(const EncoderOutput& out, float temperature, const LatentNoise& noise) const;
  /// Posterior means: z = mu; exact w = mode-j mean; approx w = alpha-weighted
  /// mode means; discrete_repr = one-hot(argmax alpha).
  LatentSample mean_sample(const EncoderOutput& out) const;
  /// Pixel logits [B, 1, H, W].
  Tensor decode(const LatentSample& sample) const;

  /// argmax alpha per example, lowest index on ties.
  std::vector<std::size_t> classify(const Tensor& x) const;

  /// Decoded probabilities [N, steps, H, W]. Continuous kinds add offsets
  /// evenly spaced over [-range, range] (offset 0 when steps == 1) to the
  /// encoded mean of one axis; the discrete kind decodes once per class.
  Tensor traverse(const Tensor& x, TraverseKind kind, std::size_t axis, float range, std::size_t steps) const;

  /// Continuous representation means used by the metrics: [B, Pb + Pr].
  Tensor representation(const EncoderOutput& out) const;

 private:
  Tensor trunk(const Tensor& x) const;
  Tensor decoder_stack(const Tensor& h) const;
  void check_input(const Tensor& x) const;

  ModelConfig cfg_;
  ParameterSet params_;
  std::vector<Conv2d> enc_convs_;
  Linear enc_hidden_;  // conv: flattened features -> 256; mlp: pixels -> hidden
  Linear z_mu_, z_logvar_, c_logits_, w_mu_, w_logvar_;
  Linear dec_public_, dec_private_, dec_input_;
  Linear dec_hidden_;  // conv: 256 -> 64*4*4; mlp: embedding -> pixels
  std::vector<ConvTranspose2d> dec_deconvs_;
};

}  // namespace discond
