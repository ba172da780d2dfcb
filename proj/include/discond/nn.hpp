// SPDX-License-Identifier: Apache-2.0
//
// Parameters, layers and the Adam optimizer.
#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "discond/archive.hpp"
#include "discond/random.hpp"
#include "discond/tensor.hpp"

namespace discond {

/// Named trainable tensors, iterated in name order.
class ParameterSet {
 public:
  using Map = std::map<std::string, Tensor>;

  /// Registers a leaf; it becomes requires_grad. Duplicate names throw.
  Tensor add(const std::string& name, Tensor value);
  Tensor at(const std::string& name) const;
  bool contains(const std::string& name) const { return params_.count(name) != 0; }

  std::size_t size() const noexcept { return params_.size(); }
  std::size_t numel() const;
  Map::const_iterator begin() const { return params_.begin(); }
  Map::const_iterator end() const { return params_.end(); }

  /// Resets every gradient buffer to zeros (allocating where needed).
  void zero_grad();

  /// Copies values into an archive under `prefix + name`.
  void save(Archive& archive, const std::string& prefix = "") const;
  /// Overwrites values from an archive. Missing names or shape mismatches
  /// throw, listing expected and found shapes.
  void load(const Archive& archive, const std::string& prefix = "");

 private:
  Map params_;
};

/// Kaiming-uniform fill, U(-b, b) with b = sqrt(6 / fan_in).
void kaiming_uniform(Tensor& weight, std::size_t fan_in, RandomSource& rng);

struct Linear {
  Tensor weight;  // [out, in]
  Tensor bias;    // [out]

  static Linear create(ParameterSet& params, const std::string& name, std::size_t in, std::size_t out,
                       RandomSource& rng);
  static Linear bind(const ParameterSet& params, const std::string& name);
  Tensor operator()(const Tensor& x) const;
};

struct Conv2d {
  Tensor weight;  // [out, in, k, k]
  Tensor bias;
  std::size_t stride = 2;
  std::size_t padding = 1;

  static Conv2d create(ParameterSet& params, const std::string& name, std::size_t in, std::size_t out,
                       std::size_t kernel, RandomSource& rng);
  static Conv2d bind(const ParameterSet& params, const std::string& name);
  Tensor operator()(const Tensor& x) const;
};

struct ConvTranspose2d {
  Tensor weight;  // [in, out, k, k]
  Tensor bias;
  std::size_t stride = 2;
  std::size_t padding = 1;

  // fan_in = in * (k / stride)^2: the taps that reach one output pixel.
  static ConvTranspose2d create(ParameterSet& params, const std::string& name, std::size_t in, std::size_t out,
                                std::size_t kernel, RandomSource& rng);
  static ConvTranspose2d bind(const ParameterSet& params, const std::string& name);
  Tensor operator()(const Tensor& x) const;
};

struct AdamOptions {
  float lr = 5e-4f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
};

/// Adam without weight decay. Moment buffers follow the parameter names.
class Adam {
 public:
  Adam(const ParameterSet& params, AdamOptions options);

  /// Applies one update from the current gradients.
  void step();
  std::uint64_t steps() const noexcept { return steps_; }
  const AdamOptions& options() const noexcept { return options_; }
  void set_lr(float lr) noexcept { options_.lr = lr; }

  /// Moments under "adam.m/<name>", "adam.v/<name>", count under "adam.t".
  void save(Archive& archive) const;
  void load(const Archive& archive);

 private:
  const ParameterSet* params_;
  AdamOptions options_;
  std::map<std::string, std::vector<float>> m_;
  std::map<std::string, std::vector<float>> v_;
  std::uint64_t steps_ = 0;
};

}  // namespace discond
