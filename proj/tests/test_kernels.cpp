// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "discond/kernels.hpp"
#include "discond/random.hpp"

using namespace discond;
using kernels::Trans;

namespace {

std::vector<float> normals(std::size_t n, std::uint64_t seed) {
  std::vector<float> v(n);
  RandomSource(seed).fill_normal(v);
  return v;
}

// Naive f64 reference for row-major C = alpha op(A) op(B) + beta C.
std::vector<double> reference_gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, float alpha,
                                   const std::vector<float>& a, const std::vector<float>& b, float beta,
                                   const std::vector<float>& c) {
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) {
        const double av = ta == Trans::no ? a[i * k + p] : a[p * m + i];
        const double bv = tb == Trans::no ? b[p * n + j] : b[j * k + p];
        acc += av * bv;
      }
      out[i * n + j] = alpha * acc + (beta == 0.0f ? 0.0 : beta * static_cast<double>(c[i * n + j]));
    }
  }
  return out;
}

bool have_avx2() { return kernels::backend_supported(kernels::Backend::avx2); }

}  // namespace

TEST_CASE("gemm backends match an f64 reference for every transpose combination") {
  const std::size_t shapes[][3] = {{1, 1, 1}, {7, 5, 3}, {6, 16, 9}, {13, 37, 300}, {97, 33, 17}, {64, 129, 260}};
  for (const auto& s : shapes) {
    const std::size_t m = s[0], n = s[1], k = s[2];
    for (Trans ta : {Trans::no, Trans::yes}) {
      for (Trans tb : {Trans::no, Trans::yes}) {
        for (float beta : {0.0f, 1.0f, 0.5f}) {
          const auto a = normals(m * k, 1), b = normals(k * n, 2), c0 = normals(m * n, 3);
          const auto ref = reference_gemm(ta, tb, m, n, k, 0.75f, a, b, beta, c0);
          const std::size_t lda = ta == Trans::no ? k : m, ldb = tb == Trans::no ? n : k;
          auto check = [&](auto gemm_fn, const char* name) {
            auto c = c0;
            gemm_fn(ta, tb, m, n, k, 0.75f, a.data(), lda, b.data(), ldb, beta, c.data(), n);
            double worst = 0.0;
            for (std::size_t i = 0; i < c.size(); ++i) {
              worst = std::max(worst, std::abs(c[i] - ref[i]) / (1.0 + std::abs(ref[i])));
            }
            INFO(name << " m=" << m << " n=" << n << " k=" << k << " ta=" << int(ta) << " tb=" << int(tb)
                      << " beta=" << beta);
            CHECK(worst < 2e-5 * std::sqrt(static_cast<double>(k)));
          };
          check(kernels::scalar::gemm, "scalar");
          if (have_avx2()) check(kernels::avx2::gemm, "avx2");
        }
      }
    }
  }
}

TEST_CASE("gemm with beta 0 ignores NaN garbage in C") {
  const auto a = normals(12, 4), b = normals(12, 5);
  for (auto fn : {kernels::scalar::gemm, kernels::gemm}) {
    std::vector<float> c(9, std::nanf(""));
    fn(Trans::no, Trans::no, 3, 3, 4, 1.0f, a.data(), 4, b.data(), 3, 0.0f, c.data(), 3);
    for (float v : c) CHECK(std::isfinite(v));
  }
}

TEST_CASE("gemm with k == 0 scales C by beta") {
  std::vector<float> c{1.0f, 2.0f, 3.0f, 4.0f};
  kernels::gemm(Trans::no, Trans::no, 2, 2, 0, 1.0f, nullptr, 0, nullptr, 2, 0.5f, c.data(), 2);
  CHECK(c == std::vector<float>{0.5f, 1.0f, 1.5f, 2.0f});
}

TEST_CASE("elementwise kernels agree across backends") {
  if (!have_avx2()) return;
  for (std::size_t n : {0u, 1u, 7u, 8u, 9u, 31u, 1000u}) {
    const auto x = normals(n, 6), y0 = normals(n, 7);

    auto ys = y0, ya = y0;
    kernels::scalar::axpy(-0.3f, x, ys);
    kernels::avx2::axpy(-0.3f, x, ya);
    for (std::size_t i = 0; i < n; ++i) CHECK(ya[i] == doctest::Approx(ys[i]).epsilon(1e-6));

    std::vector<float> rs(n), ra(n);
    kernels::scalar::relu(x, rs);
    kernels::avx2::relu(x, ra);
    CHECK(rs == ra);
    for (std::size_t i = 0; i < n; ++i) CHECK(rs[i] == std::max(x[i], 0.0f));

    auto gs = y0, ga = y0;
    kernels::scalar::relu_backward(x, y0, gs);
    kernels::avx2::relu_backward(x, y0, ga);
    CHECK(gs == ga);

    CHECK(kernels::avx2::sum(x) == doctest::Approx(kernels::scalar::sum(x)).epsilon(1e-12));
  }
}

TEST_CASE("f64 sum keeps small terms that f32 accumulation drops") {
  std::vector<float> x(1 << 20, 1e-4f);
  x[0] = 1e4f;
  const double expect = 1e4 + (x.size() - 1) * static_cast<double>(1e-4f);
  CHECK(kernels::scalar::sum(x) == doctest::Approx(expect).epsilon(1e-12));
  if (have_avx2()) CHECK(kernels::avx2::sum(x) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("adam update agrees across backends") {
  if (!have_avx2()) return;
  const std::size_t n = 37;
  const kernels::AdamStep step{1e-3f, 0.9f, 0.999f, 1e-8f, 1.0f - 0.9f * 0.9f, 1.0f - 0.999f * 0.999f};
  auto ps = normals(n, 8), ms = normals(n, 9), vs = normals(n, 10);
  for (float& v : vs) v = v * v;
  const auto g = normals(n, 11);
  auto pa = ps, ma = ms, va = vs;
  kernels::scalar::adam_update(step, ps, g, ms, vs);
  kernels::avx2::adam_update(step, pa, g, ma, va);
  for (std::size_t i = 0; i < n; ++i) {
    CHECK(pa[i] == doctest::Approx(ps[i]).epsilon(1e-6));
    CHECK(ma[i] == doctest::Approx(ms[i]).epsilon(1e-6));
    CHECK(va[i] == doctest::Approx(vs[i]).epsilon(1e-6));
  }
}

TEST_CASE("backend selection") {
  CHECK(kernels::parse_backend("scalar") == kernels::Backend::scalar);
  CHECK(kernels::parse_backend("avx2") == kernels::Backend::avx2);
  CHECK_THROWS_AS(kernels::parse_backend("neon"), std::invalid_argument);
  {
    kernels::ScopedBackend pin(kernels::Backend::scalar);
    CHECK(kernels::active_backend() == kernels::Backend::scalar);
  }
  CHECK(kernels::backend_supported(kernels::Backend::scalar));
}
