// SPDX-License-Identifier: Apache-2.0
#include "discond/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace discond::kernels {
namespace {

bool cpu_has_avx2() noexcept {
#if DISCOND_HAVE_AVX2 && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Backend initial_backend() {
  if (const char* env = std::getenv("DISCOND_KERNELS"); env != nullptr && *env != '\0') {
    const Backend requested = parse_backend(env);
    if (!backend_supported(requested)) {
      throw std::runtime_error(std::string("DISCOND_KERNELS=") + env + " is not supported on this CPU");
    }
    return requested;
  }
  return cpu_has_avx2() ? Backend::avx2 : Backend::scalar;
}

std::atomic<Backend>& current() {
  static std::atomic<Backend> backend{initial_backend()};
  return backend;
}

}  // namespace

Backend active_backend() noexcept { return current().load(std::memory_order_relaxed); }

bool backend_supported(Backend b) noexcept {
  switch (b) {
    case Backend::scalar:
      return true;
    case Backend::avx2:
      return cpu_has_avx2();
  }
  return false;
}

void set_backend(Backend b) {
  if (!backend_supported(b)) {
    throw std::invalid_argument(std::string("kernel backend not supported: ") +
                                std::string(backend_name(b)));
  }
  current().store(b, std::memory_order_relaxed);
}

std::string_view backend_name(Backend b) noexcept {
  return b == Backend::avx2 ? "avx2" : "scalar";
}

Backend parse_backend(std::string_view name) {
  if (name == "scalar") return Backend::scalar;
  if (name == "avx2") return Backend::avx2;
  throw std::invalid_argument("unknown kernel backend '" + std::string(name) + "'");
}

#if DISCOND_HAVE_AVX2
#define DISCOND_DISPATCH(fn, ...)                                                  \
  (active_backend() == Backend::avx2 ? avx2::fn(__VA_ARGS__) : scalar::fn(__VA_ARGS__))
#else
#define DISCOND_DISPATCH(fn, ...) scalar::fn(__VA_ARGS__)
#endif

void gemm(Trans trans_a, Trans trans_b, std::size_t m, std::size_t n, std::size_t k, float alpha,
          const float* a, std::size_t lda, const float* b, std::size_t ldb, float beta, float* c,
          std::size_t ldc) {
  DISCOND_DISPATCH(gemm, trans_a, trans_b, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

void axpy(float alpha, std::span<const float> x, std::span<float> y) {
  DISCOND_DISPATCH(axpy, alpha, x, y);
}

void relu(std::span<const float> x, std::span<float> y) { DISCOND_DISPATCH(relu, x, y); }

void relu_backward(std::span<const float> x, std::span<const float> grad_y, std::span<float> grad_x) {
  DISCOND_DISPATCH(relu_backward, x, grad_y, grad_x);
}

double sum(std::span<const float> x) { return DISCOND_DISPATCH(sum, x); }

void adam_update(const AdamStep& step, std::span<float> param, std::span<const float> grad,
                 std::span<float> m, std::span<float> v) {
  DISCOND_DISPATCH(adam_update, step, param, grad, m, v);
}

#undef DISCOND_DISPATCH

}  // namespace discond::kernels
