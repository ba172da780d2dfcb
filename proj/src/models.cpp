// SPDX-License-Identifier: Apache-2.0
#include "discond/models.hpp"

#include <stdexcept>

#include "discond/ops.hpp"

namespace discond {
namespace {

constexpr std::size_t kConvFeatures = 256;
constexpr std::size_t kConvEmbed = 128;
constexpr std::size_t kGridChannels = 64;
constexpr std::size_t kGridExtent = 4;
constexpr std::size_t kKernel = 4;

std::size_t feature_width(const ModelConfig& cfg) {
  return cfg.trunk == Trunk::conv ? kConvFeatures : cfg.mlp_hidden;
}

std::size_t embed_width(const ModelConfig& cfg) { return cfg.trunk == Trunk::conv ? kConvEmbed : cfg.mlp_hidden; }

Tensor set_column_offset(const Tensor& base, std::size_t column, float offset) {
  Tensor out = base.detach();
  const std::size_t width = out.size(1);
  auto v = out.values();
  for (std::size_t r = 0; r < out.size(0); ++r) v[r * width + column] += offset;
  return out;
}

}  // namespace

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::exact: return "exact";
    case Variant::approx: return "approx";
    case Variant::joint: return "joint";
  }
  return "?";
}

Variant parse_variant(const std::string& s) {
  if (s == "exact") return Variant::exact;
  if (s == "approx") return Variant::approx;
  if (s == "joint") return Variant::joint;
  throw std::invalid_argument("unknown variant '" + s + "' (expected exact, approx or joint)");
}

std::string trunk_name(Trunk t) { return t == Trunk::conv ? "conv" : "mlp"; }

Trunk parse_trunk(const std::string& s) {
  if (s == "conv") return Trunk::conv;
  if (s == "mlp") return Trunk::mlp;
  throw std::invalid_argument("unknown trunk '" + s + "' (expected conv or mlp)");
}

void ModelConfig::validate() const {
  if (discrete_dim < 2) throw std::invalid_argument("model: discrete_dim must be >= 2, got " + std::to_string(discrete_dim));
  if (variant == Variant::joint && private_dim != 0) {
    throw std::invalid_argument("model: joint variant takes no private variable, got private_dim " +
                                std::to_string(private_dim));
  }
  if (variant != Variant::joint && private_dim == 0) {
    throw std::invalid_argument("model: " + variant_name(variant) + " variant needs private_dim >= 1");
  }
  if (channels != 1) throw std::invalid_argument("model: only single-channel images are supported");
  if (trunk == Trunk::conv && image_extent != 32 && image_extent != 64) {
    throw std::invalid_argument("model: conv trunk needs image_extent 32 or 64, got " + std::to_string(image_extent));
  }
  if (trunk == Trunk::mlp && (image_extent == 0 || mlp_hidden == 0)) {
    throw std::invalid_argument("model: mlp trunk needs positive image_extent and mlp_hidden");
  }
}

LatentNoise LatentNoise::draw(const ModelConfig& cfg, std::size_t batch, RandomSource& rng) {
  LatentNoise n = zeros(cfg, batch);
  rng.fill_normal(n.eps_z.values());
  if (n.eps_w.defined()) rng.fill_normal(n.eps_w.values());
  n.gumbel = gumbel_noise({batch, cfg.discrete_dim}, rng);
  return n;
}

LatentNoise LatentNoise::zeros(const ModelConfig& cfg, std::size_t batch) {
  LatentNoise n;
  n.eps_z = Tensor({batch, cfg.public_dim});
  if (cfg.private_dim > 0) n.eps_w = Tensor({batch, cfg.discrete_dim, cfg.private_dim});
  n.gumbel = Tensor({batch, cfg.discrete_dim});
  return n;
}

LatentSample reparam_exact(const EncoderOutput& out, const LatentNoise& noise) {
  const std::size_t d = out.c.probs.size(1);
  std::vector<std::size_t> j = argmax_rows(out.c.probs);
  LatentSample s;
  s.z = gaussian_reparam(out.z, noise.eps_z);
  const DiagonalGaussian mode{gather_mode(out.w.mu, j), gather_mode(out.w.logvar, j)};
  s.w = gaussian_reparam(mode, gather_mode(noise.eps_w, j));
  s.discrete_repr = one_hot(j, d);
  s.selected_mode = std::move(j);
  return s;
}

LatentSample reparam_approx(const EncoderOutput& out, float temperature, const LatentNoise& noise,
                            const Tensor& forced_pi) {
  const std::size_t batch = out.batch();
  const std::size_t d = out.c.probs.size(1);
  LatentSample s;
  s.z = gaussian_reparam(out.z, noise.eps_z);
  const Tensor modes = gaussian_reparam(out.w, noise.eps_w);  // [B, d, Pr]
  const Tensor pi = forced_pi.defined() ? forced_pi : gumbel_softmax(out.c.logits, temperature, noise.gumbel);
  if (pi.shape() != Shape{batch, d}) {
    throw ShapeError("reparam_approx: pi " + shape_str(pi.shape()) + " does not match [" + std::to_string(batch) +
                     ", " + std::to_string(d) + "]");
  }
  s.w = sum(reshape(pi, {batch, d, 1}) * modes, 1);
  s.discrete_repr = pi;
  return s;
}

LatentSample reparam_joint(const EncoderOutput& out, float temperature, const LatentNoise& noise) {
  LatentSample s;
  s.z = gaussian_reparam(out.z, noise.eps_z);
  s.discrete_repr = gumbel_softmax(out.c.logits, temperature, noise.gumbel);
  return s;
}

Model::Model(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  RandomSource rng(seed, 0x696e6974ull);  // "init"
  const std::size_t pb = cfg_.public_dim, pr = cfg_.private_dim, d = cfg_.discrete_dim;
  const std::size_t features = feature_width(cfg_);
  const std::size_t embed = embed_width(cfg_);
  const std::size_t pixels = cfg_.image_extent * cfg_.image_extent;

  if (cfg_.trunk == Trunk::conv) {
    enc_convs_.push_back(Conv2d::create(params_, "enc.conv1", cfg_.channels, 32, kKernel, rng));
    if (cfg_.image_extent == 64) enc_convs_.push_back(Conv2d::create(params_, "enc.conv1b", 32, 32, kKernel, rng));
    enc_convs_.push_back(Conv2d::create(params_, "enc.conv2", 32, 64, kKernel, rng));
    enc_convs_.push_back(Conv2d::create(params_, "enc.conv3", 64, 64, kKernel, rng));
    enc_hidden_ = Linear::create(params_, "enc.fc", kGridChannels * kGridExtent * kGridExtent, features, rng);
  } else {
    enc_hidden_ = Linear::create(params_, "enc.fc", pixels, features, rng);
  }
  z_mu_ = Linear::create(params_, "enc.z_mu", features, pb, rng);
  z_logvar_ = Linear::create(params_, "enc.z_logvar", features, pb, rng);
  c_logits_ = Linear::create(params_, "enc.c_logits", features, d, rng);
  if (cfg_.variant != Variant::joint) {
    w_mu_ = Linear::create(params_, "enc.w_mu", features + d, d * pr, rng);
    w_logvar_ = Linear::create(params_, "enc.w_logvar", features + d, d * pr, rng);
  }

  if (cfg_.variant == Variant::exact) {
    dec_public_ = Linear::create(params_, "dec.public", pb, embed, rng);
    dec_private_ = Linear::create(params_, "dec.private", d * pr + d, embed, rng);
  } else {
    const std::size_t in = pb + pr + d;
    dec_input_ = Linear::create(params_, "dec.input", in, 2 * embed, rng);
  }
  if (cfg_.trunk == Trunk::conv) {
    dec_hidden_ = Linear::create(params_, "dec.fc", 2 * embed, kGridChannels * kGridExtent * kGridExtent, rng);
    if (cfg_.image_extent == 64) {
      dec_deconvs_.push_back(ConvTranspose2d::create(params_, "dec.deconv0", 64, 64, kKernel, rng));
    }
    dec_deconvs_.push_back(ConvTranspose2d::create(params_, "dec.deconv1", 64, 32, kKernel, rng));
    dec_deconvs_.push_back(ConvTranspose2d::create(params_, "dec.deconv2", 32, 32, kKernel, rng));
    dec_deconvs_.push_back(ConvTranspose2d::create(params_, "dec.deconv3", 32, cfg_.channels, kKernel, rng));
  } else {
    dec_hidden_ = Linear::create(params_, "dec.fc", 2 * embed, pixels, rng);
  }
}

void Model::check_input(const Tensor& x) const {
  const Shape expected{cfg_.channels, cfg_.image_extent, cfg_.image_extent};
  if (x.rank() != 4 || Shape(x.shape().begin() + 1, x.shape().end()) != expected) {
    throw ShapeError("encode: expected images [B, " + std::to_string(cfg_.channels) + ", " +
                     std::to_string(cfg_.image_extent) + ", " + std::to_string(cfg_.image_extent) + "], got " +
                     shape_str(x.shape()));
  }
}

Tensor Model::trunk(const Tensor& x) const {
  const std::size_t batch = x.size(0);
  if (cfg_.trunk == Trunk::mlp) return relu(enc_hidden_(reshape(x, {batch, x.numel() / batch})));
  Tensor h = x;
  for (const Conv2d& conv : enc_convs_) h = relu(conv(h));
  return relu(enc_hidden_(reshape(h, {batch, h.numel() / batch})));
}

EncoderOutput Model::encode(const Tensor& x) const {
  check_input(x);
  const std::size_t batch = x.size(0);
  const std::size_t d = cfg_.discrete_dim, pr = cfg_.private_dim;
  const Tensor features = trunk(x);
  EncoderOutput out;
  out.z = {z_mu_(features), z_logvar_(features)};
  out.c = CategoricalPosterior::from_logits(c_logits_(features));
  if (cfg_.variant == Variant::exact) {
    // Pass i sees e_i and contributes only block i of the head output.
    std::vector<Tensor> mu_blocks, lv_blocks;
    for (std::size_t i = 0; i < d; ++i) {
      const std::vector<std::size_t> index(batch, i);
      const Tensor in = concat({features, one_hot(index, d)}, 1);
      mu_blocks.push_back(reshape(slice(w_mu_(in), 1, i * pr, pr), {batch, 1, pr}));
      lv_blocks.push_back(reshape(slice(w_logvar_(in), 1, i * pr, pr), {batch, 1, pr}));
    }
    out.w = {concat(mu_blocks, 1), concat(lv_blocks, 1)};
  } else if (cfg_.variant == Variant::approx) {
    const Tensor in = concat({features, out.c.probs}, 1);
    out.w = {reshape(w_mu_(in), {batch, d, pr}), reshape(w_logvar_(in), {batch, d, pr})};
  }
  return out;
}

LatentSample Model::reparam(const EncoderOutput& out, float temperature, const LatentNoise& noise) const {
  switch (cfg_.variant) {
    case Variant::exact: return reparam_exact(out, noise);
    case Variant::approx: return reparam_approx(out, temperature, noise);
    case Variant::joint: return reparam_joint(out, temperature, noise);
  }
  throw std::logic_error("reparam: bad variant");
}

LatentSample Model::mean_sample(const EncoderOutput& out) const {
  const std::size_t batch = out.batch();
  const std::size_t d = cfg_.discrete_dim;
  std::vector<std::size_t> j = argmax_rows(out.c.probs);
  LatentSample s;
  s.z = out.z.mu;
  if (cfg_.variant == Variant::exact) {
    s.w = gather_mode(out.w.mu, j);
  } else if (cfg_.variant == Variant::approx) {
    s.w = sum(reshape(out.c.probs, {batch, d, 1}) * out.w.mu, 1);
  }
  s.discrete_repr = one_hot(j, d);
  s.selected_mode = std::move(j);
  return s;
}

Tensor Model::decoder_stack(const Tensor& h) const {
  const std::size_t batch = h.size(0);
  if (cfg_.trunk == Trunk::mlp) {
    return reshape(dec_hidden_(h), {batch, cfg_.channels, cfg_.image_extent, cfg_.image_extent});
  }
  Tensor g = reshape(relu(dec_hidden_(h)), {batch, kGridChannels, kGridExtent, kGridExtent});
  for (std::size_t i = 0; i < dec_deconvs_.size(); ++i) {
    g = dec_deconvs_[i](g);
    if (i + 1 < dec_deconvs_.size()) g = relu(g);
  }
  return g;
}

Tensor Model::decode(const LatentSample& sample) const {
  const std::size_t d = cfg_.discrete_dim;
  if (!sample.z.defined() || !sample.discrete_repr.defined()) throw std::invalid_argument("decode: incomplete sample");
  if (cfg_.variant == Variant::exact) {
    const std::vector<std::size_t> j =
        sample.selected_mode ? *sample.selected_mode : argmax_rows(sample.discrete_repr);
    const Tensor private_in = concat({scatter_mode(sample.w, j, d), one_hot(j, d)}, 1);
    const Tensor h = concat({relu(dec_public_(sample.z)), relu(dec_private_(private_in))}, 1);
    return decoder_stack(h);
  }
  const Tensor in = cfg_.variant == Variant::approx ? concat({sample.z, sample.w, sample.discrete_repr}, 1)
                                                    : concat({sample.z, sample.discrete_repr}, 1);
  return decoder_stack(relu(dec_input_(in)));
}

std::vector<std::size_t> Model::classify(const Tensor& x) const {
  NoGradGuard guard;
  check_input(x);
  return argmax_rows(c_logits_(trunk(x)));
}

Tensor Model::representation(const EncoderOutput& out) const {
  const LatentSample s = mean_sample(out);
  return s.w.defined() ? concat({s.z.detach(), s.w.detach()}, 1) : s.z.detach();
}

Tensor Model::traverse(const Tensor& x, TraverseKind kind, std::size_t axis, float range, std::size_t steps) const {
  NoGradGuard guard;
  const std::size_t d = cfg_.discrete_dim;
  if (kind == TraverseKind::discrete) {
    steps = d;
  } else if (steps == 0) {
    throw std::invalid_argument("traverse: steps must be positive");
  }
  if (kind == TraverseKind::public_axis && axis >= cfg_.public_dim) {
    throw std::out_of_range("traverse: public axis " + std::to_string(axis) + " >= " + std::to_string(cfg_.public_dim));
  }
  if (kind == TraverseKind::private_axis && axis >= cfg_.private_dim) {
    throw std::out_of_range("traverse: private axis " + std::to_string(axis) + " >= " +
                            std::to_string(cfg_.private_dim));
  }
  const EncoderOutput enc = encode(x);
  const LatentSample base = mean_sample(enc);
  const std::size_t batch = x.size(0);
  const std::size_t pixels = cfg_.image_extent * cfg_.image_extent * cfg_.channels;
  Tensor grid({batch, steps, cfg_.image_extent, cfg_.image_extent});
  auto gv = grid.values();
  for (std::size_t s = 0; s < steps; ++s) {
    LatentSample sample = base;
    if (kind == TraverseKind::discrete) {
      const std::vector<std::size_t> cls(batch, s);
      sample.discrete_repr = one_hot(cls, d);
      sample.selected_mode = cls;
      if (cfg_.variant == Variant::exact) sample.w = gather_mode(enc.w.mu, cls);
    } else {
      const float offset = steps == 1 ? 0.0f
                                      : -range + 2.0f * range * static_cast<float>(s) / static_cast<float>(steps - 1);
      if (kind == TraverseKind::public_axis) {
        sample.z = set_column_offset(base.z, axis, offset);
      } else {
        sample.w = set_column_offset(base.w, axis, offset);
      }
    }
    const Tensor probs = sigmoid(decode(sample));
    const auto pv = probs.values();
    for (std::size_t b = 0; b < batch; ++b) {
      std::copy_n(pv.data() + b * pixels, pixels, gv.data() + (b * steps + s) * pixels);
    }
  }
  return grid;
}

}  // namespace discond
