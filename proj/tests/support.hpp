// SPDX-License-Identifier: Apache-2.0
//
// Shared helpers for the unit tests: frozen oracle values, deterministic
// input patterns, finite-difference checks and scratch directories.
#pragma once

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "discond/ops.hpp"
#include "discond/random.hpp"
#include "discond/tensor.hpp"

namespace test {

/// float32(sin(a * i + b)), matching tests/oracles/make_oracles.py.
inline std::vector<float> pattern(std::size_t n, double a, double b, double scale = 1.0) {
  std::vector<float> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<float>(std::sin(a * static_cast<double>(i) + b));
  if (scale != 1.0) {
    for (float& x : v) x = static_cast<float>(static_cast<double>(x) * scale);
  }
  return v;
}

inline discond::Tensor pattern_tensor(discond::Shape shape, double a, double b, double scale = 1.0,
                                      bool requires_grad = false) {
  const std::size_t n = discond::shape_numel(shape);
  return discond::Tensor(std::move(shape), pattern(n, a, b, scale), requires_grad);
}

inline const std::vector<double>& oracle(const std::string& name) {
  static const std::map<std::string, std::vector<double>> table = [] {
    std::map<std::string, std::vector<double>> t;
    std::ifstream in(DISCOND_ORACLE_FILE);
    REQUIRE_MESSAGE(in.good(), "missing oracle file " << DISCOND_ORACLE_FILE);
    std::string line;
    while (std::getline(in, line)) {
      std::istringstream row(line);
      std::string key;
      std::size_t count = 0;
      row >> key >> count;
      std::vector<double> values(count);
      for (double& v : values) row >> v;
      t.emplace(key, std::move(values));
    }
    return t;
  }();
  const auto it = table.find(name);
  REQUIRE_MESSAGE(it != table.end(), "no oracle named " << name);
  return it->second;
}

/// max |a - b| / max(max |b|, floor).
inline double normwise_error(std::span<const float> a, std::span<const double> b, double floor = 1e-12) {
  REQUIRE(a.size() == b.size());
  double diff = 0.0, scale = floor;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, std::abs(static_cast<double>(a[i]) - b[i]));
    scale = std::max(scale, std::abs(b[i]));
  }
  return diff / scale;
}

inline double normwise_error(std::span<const float> a, std::span<const float> b, double floor = 1e-12) {
  std::vector<double> bd(b.begin(), b.end());
  return normwise_error(a, bd, floor);
}

/// Central-difference gradient of `loss` with respect to `x`, evaluated in
/// f32 with step h.
inline std::vector<double> numeric_gradient(discond::Tensor& x, const std::function<discond::Tensor()>& loss,
                                            float h = 1e-2f) {
  discond::NoGradGuard guard;
  std::vector<double> g(x.numel());
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const float keep = x.values()[i];
    x.values()[i] = keep + h;
    const double up = loss().item();
    x.values()[i] = keep - h;
    const double down = loss().item();
    x.values()[i] = keep;
    g[i] = (up - down) / (2.0 * static_cast<double>(h));
  }
  return g;
}

/// Backpropagates `loss` and compares every input gradient with central
/// differences. Returns the worst normwise relative error.
inline double gradient_error(std::vector<discond::Tensor> inputs, const std::function<discond::Tensor()>& loss,
                             float h = 1e-2f) {
  for (auto& t : inputs) t.zero_grad();
  discond::backward(loss());
  double worst = 0.0;
  for (auto& t : inputs) {
    const std::vector<float> analytic(t.grad().begin(), t.grad().end());
    const std::vector<double> numeric = numeric_gradient(t, loss, h);
    worst = std::max(worst, normwise_error(analytic, numeric, 1e-6));
  }
  return worst;
}

/// Fresh directory under the build tree, removed on destruction.
class ScratchDir {
 public:
  explicit ScratchDir(const std::string& name)
      : path_(std::filesystem::path(DISCOND_SCRATCH_DIR) / name) {
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& leaf) const { return path_ / leaf; }

 private:
  std::filesystem::path path_;
};

inline std::string read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace test
