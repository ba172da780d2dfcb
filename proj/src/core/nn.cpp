// SPDX-License-Identifier: Apache-2.0
#include "discond/nn.hpp"

#include <cmath>

#include "discond/kernels.hpp"
#include "discond/ops.hpp"

namespace discond {

Tensor ParameterSet::add(const std::string& name, Tensor value) {
  if (!value.defined()) throw std::invalid_argument("parameters: undefined tensor for '" + name + "'");
  value.set_requires_grad(true);
  if (!params_.emplace(name, value).second) {
    throw std::invalid_argument("parameters: duplicate name '" + name + "'");
  }
  return value;
}

Tensor ParameterSet::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("parameters: no parameter named '" + name + "'");
  return it->second;
}

std::size_t ParameterSet::numel() const {
  std::size_t n = 0;
  for (const auto& [name, t] : params_) n += t.numel();
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& [name, t] : params_) {
    Tensor handle = t;
    handle.zero_grad();
  }
}

void ParameterSet::save(Archive& archive, const std::string& prefix) const {
  for (const auto& [name, t] : params_) archive.insert_or_assign(prefix + name, t.detach());
}

void ParameterSet::load(const Archive& archive, const std::string& prefix) {
  std::string problems;
  for (auto& [name, t] : params_) {
    auto it = archive.find(prefix + name);
    if (it == archive.end()) {
      problems += "\n  " + prefix + name + ": expected " + shape_str(t.shape()) + ", found nothing";
    } else if (it->second.shape() != t.shape()) {
      problems += "\n  " + prefix + name + ": expected " + shape_str(t.shape()) + ", found " +
                  shape_str(it->second.shape());
    }
  }
  if (!problems.empty()) throw ArchiveError("parameters do not match the archive:" + problems);
  for (auto& [name, t] : params_) {
    Tensor handle = t;
    const auto src = archive.at(prefix + name).values();
    std::copy(src.begin(), src.end(), handle.values().begin());
  }
}

void kaiming_uniform(Tensor& weight, std::size_t fan_in, RandomSource& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (float& w : weight.values()) w = static_cast<float>((2.0 * rng.uniform() - 1.0) * bound);
}

Linear Linear::create(ParameterSet& params, const std::string& name, std::size_t in, std::size_t out,
                      RandomSource& rng) {
  Tensor w({out, in});
  kaiming_uniform(w, in, rng);
  return {params.add(name + ".weight", w), params.add(name + ".bias", Tensor({out}))};
}

Linear Linear::bind(const ParameterSet& params, const std::string& name) {
  return {params.at(name + ".weight"), params.at(name + ".bias")};
}

Tensor Linear::operator()(const Tensor& x) const { return linear(x, weight, bias); }

Conv2d Conv2d::create(ParameterSet& params, const std::string& name, std::size_t in, std::size_t out,
                      std::size_t kernel, RandomSource& rng) {
  Tensor w({out, in, kernel, kernel});
  kaiming_uniform(w, in * kernel * kernel, rng);
  Conv2d c;
  c.weight = params.add(name + ".weight", w);
  c.bias = params.add(name + ".bias", Tensor({out}));
  return c;
}

Conv2d Conv2d::bind(const ParameterSet& params, const std::string& name) {
  Conv2d c;
  c.weight = params.at(name + ".weight");
  c.bias = params.at(name + ".bias");
  return c;
}

Tensor Conv2d::operator()(const Tensor& x) const { return conv2d(x, weight, bias, stride, padding); }

ConvTranspose2d ConvTranspose2d::create(ParameterSet& params, const std::string& name, std::size_t in,
                                        std::size_t out, std::size_t kernel, RandomSource& rng) {
  Tensor w({in, out, kernel, kernel});
  ConvTranspose2d c;
  const std::size_t taps = kernel / c.stride;
  kaiming_uniform(w, in * std::max<std::size_t>(taps * taps, 1), rng);
  c.weight = params.add(name + ".weight", w);
  c.bias = params.add(name + ".bias", Tensor({out}));
  return c;
}

ConvTranspose2d ConvTranspose2d::bind(const ParameterSet& params, const std::string& name) {
  ConvTranspose2d c;
  c.weight = params.at(name + ".weight");
  c.bias = params.at(name + ".bias");
  return c;
}

Tensor ConvTranspose2d::operator()(const Tensor& x) const {
  return conv_transpose2d(x, weight, bias, stride, padding);
}

Adam::Adam(const ParameterSet& params, AdamOptions options) : params_(&params), options_(options) {
  for (const auto& [name, t] : params) {
    m_[name].assign(t.numel(), 0.0f);
    v_[name].assign(t.numel(), 0.0f);
  }
}

void Adam::step() {
  ++steps_;
  const double t = static_cast<double>(steps_);
  kernels::AdamStep s{options_.lr,
                      options_.beta1,
                      options_.beta2,
                      options_.eps,
                      static_cast<float>(1.0 - std::pow(static_cast<double>(options_.beta1), t)),
                      static_cast<float>(1.0 - std::pow(static_cast<double>(options_.beta2), t))};
  for (const auto& [name, t_param] : *params_) {
    Tensor p = t_param;
    kernels::adam_update(s, p.values(), p.grad(), m_.at(name), v_.at(name));
  }
}

void Adam::save(Archive& archive) const {
  for (const auto& [name, t] : *params_) {
    archive.insert_or_assign("adam.m/" + name, Tensor(t.shape(), m_.at(name)));
    archive.insert_or_assign("adam.v/" + name, Tensor(t.shape(), v_.at(name)));
  }
  archive_put_u64(archive, "adam.t", steps_);
}

void Adam::load(const Archive& archive) {
  for (const auto& [name, t] : *params_) {
    for (auto* state : {&m_, &v_}) {
      const std::string key = (state == &m_ ? "adam.m/" : "adam.v/") + name;
      const Tensor& src = archive_get(archive, key);
      if (src.shape() != t.shape()) {
        throw ArchiveError("optimizer state '" + key + "': expected " + shape_str(t.shape()) + ", found " +
                           shape_str(src.shape()));
      }
      auto& dst = state->at(name);
      std::copy(src.values().begin(), src.values().end(), dst.begin());
    }
  }
  steps_ = archive_get_u64(archive, "adam.t");
}

}  // namespace discond
