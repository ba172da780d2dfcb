// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <ostream>

#include "discond/app.hpp"
#include "discond/kernels.hpp"
#include "discond/ops.hpp"

namespace discond {
namespace {

bool check_philox(std::string& detail) {
  // Random123 known answer for a zero counter and key.
  const auto out = philox4x32({0, 0, 0, 0}, {0, 0});
  detail = "philox4x32-10 zero vector";
  return out == std::array<std::uint32_t, 4>{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u};
}

bool check_backends(std::string& detail) {
  using kernels::Backend;
  detail = std::string("gemm backends agree (active ") + std::string(kernels::backend_name(kernels::active_backend())) + ")";
  if (!kernels::backend_supported(Backend::avx2)) return true;
  const std::size_t m = 37, n = 29, k = 53;
  RandomSource rng(1);
  std::vector<float> a(m * k), b(k * n), c1(m * n), c2(m * n);
  rng.fill_normal(a);
  rng.fill_normal(b);
  kernels::scalar::gemm(kernels::Trans::no, kernels::Trans::no, m, n, k, 1.0f, a.data(), k, b.data(), n, 0.0f,
                        c1.data(), n);
  kernels::avx2::gemm(kernels::Trans::no, kernels::Trans::no, m, n, k, 1.0f, a.data(), k, b.data(), n, 0.0f,
                      c2.data(), n);
  for (std::size_t i = 0; i < c1.size(); ++i) {
    if (std::abs(c1[i] - c2[i]) > 1e-4f * (1.0f + std::abs(c1[i]))) return false;
  }
  return true;
}

bool check_gradient(std::string& detail) {
  detail = "linear + sigmoid gradient vs central differences";
  RandomSource rng(2);
  Tensor x({4, 3}), w({2, 3}, true), b({2}, true);
  rng.fill_normal(x.values());
  rng.fill_normal(w.values());
  rng.fill_normal(b.values());
  auto f = [&] { return sum(square(sigmoid(linear(x, w, b)))); };
  backward(f());
  const std::vector<float> analytic(w.grad().begin(), w.grad().end());
  NoGradGuard guard;
  double worst = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < w.numel(); ++i) {
    const float keep = w.values()[i];
    const float h = 1e-2f;
    w.values()[i] = keep + h;
    const double up = f().item();
    w.values()[i] = keep - h;
    const double down = f().item();
    w.values()[i] = keep;
    const double numeric = (up - down) / (2.0 * h);
    worst = std::max(worst, std::abs(numeric - analytic[i]));
    scale = std::max(scale, std::abs(numeric));
  }
  return worst <= 1e-2 * scale;
}

bool check_archive(std::string& detail) {
  detail = "checkpoint container round trip";
  Archive a;
  a["t"] = Tensor({2, 2}, {1.0f, -2.5f, 3.25f, 0.0f});
  archive_put_u64(a, "n", 0x0123456789abcdefULL);
  const Archive back = decode_archive(encode_archive(a));
  return archive_get_u64(back, "n") == 0x0123456789abcdefULL && back.at("t").to_vector() == a.at("t").to_vector() &&
         back.at("t").shape() == a.at("t").shape();
}

}  // namespace

bool run_selftest(std::ostream& out) {
  bool all = true;
  for (auto check : {check_philox, check_backends, check_gradient, check_archive}) {
    std::string detail;
    bool ok = false;
    try {
      ok = check(detail);
    } catch (const std::exception& e) {
      detail += std::string(": ") + e.what();
    }
    out << (ok ? "PASS " : "FAIL ") << detail << '\n';
    all = all && ok;
  }
  return all;
}

}  // namespace discond
