// SPDX-License-Identifier: Apache-2.0
//
// Data-parallel inner loops behind the tensor engine. Every kernel has a
// portable scalar reference and, on x86-64, an AVX2+FMA variant. The active
// backend is chosen once at startup from CPUID and can be pinned with the
// DISCOND_KERNELS environment variable ("scalar" or "avx2") or set_backend().
//
// Results are bit-deterministic for a fixed backend. Scalar and AVX2 results
// differ only by floating-point reassociation.
#pragma once

#include <cstddef>
#include <span>
#include <string_view>

namespace discond::kernels {

enum class Backend { scalar, avx2 };

enum class Trans : bool { no = false, yes = true };

Backend active_backend() noexcept;
bool backend_supported(Backend b) noexcept;
/// Throws std::invalid_argument when the CPU cannot run `b`.
void set_backend(Backend b);
std::string_view backend_name(Backend b) noexcept;
Backend parse_backend(std::string_view name);

/// Pins a backend for the lifetime of the guard.
class ScopedBackend {
 public:
  explicit ScopedBackend(Backend b) : previous_(active_backend()) { set_backend(b); }
  ~ScopedBackend() { set_backend(previous_); }
  ScopedBackend(const ScopedBackend&) = delete;
  ScopedBackend& operator=(const ScopedBackend&) = delete;

 private:
  Backend previous_;
};

/// Row-major C[m x n] = alpha * op(A) * op(B) + beta * C.
/// op(A) is m x k, op(B) is k x n. When beta == 0, C is not read.
void gemm(Trans trans_a, Trans trans_b, std::size_t m, std::size_t n, std::size_t k, float alpha,
          const float* a, std::size_t lda, const float* b, std::size_t ldb, float beta, float* c,
          std::size_t ldc);

/// y += alpha * x
void axpy(float alpha, std::span<const float> x, std::span<float> y);

/// y = max(x, 0)
void relu(std::span<const float> x, std::span<float> y);

/// grad_x += grad_y where x > 0
void relu_backward(std::span<const float> x, std::span<const float> grad_y, std::span<float> grad_x);

/// Sum with f64 accumulation.
double sum(std::span<const float> x);

struct AdamStep {
  float lr;
  float beta1;
  float beta2;
  float eps;
  float bias_correction1;  // 1 - beta1^t
  float bias_correction2;  // 1 - beta2^t
};

/// One Adam update in the PyTorch formulation (no weight decay).
void adam_update(const AdamStep& step, std::span<float> param, std::span<const float> grad,
                 std::span<float> m, std::span<float> v);

namespace scalar {
void gemm(Trans trans_a, Trans trans_b, std::size_t m, std::size_t n, std::size_t k, float alpha,
          const float* a, std::size_t lda, const float* b, std::size_t ldb, float beta, float* c,
          std::size_t ldc);
void axpy(float alpha, std::span<const float> x, std::span<float> y);
void relu(std::span<const float> x, std::span<float> y);
void relu_backward(std::span<const float> x, std::span<const float> grad_y, std::span<float> grad_x);
double sum(std::span<const float> x);
void adam_update(const AdamStep& step, std::span<float> param, std::span<const float> grad,
                 std::span<float> m, std::span<float> v);
}  // namespace scalar

namespace avx2 {
void gemm(Trans trans_a, Trans trans_b, std::size_t m, std::size_t n, std::size_t k, float alpha,
          const float* a, std::size_t lda, const float* b, std::size_t ldb, float beta, float* c,
          std::size_t ldc);
void axpy(float alpha, std::span<const float> x, std::span<float> y);
void relu(std::span<const float> x, std::span<float> y);
void relu_backward(std::span<const float> x, std::span<const float> grad_y, std::span<float> grad_x);
double sum(std::span<const float> x);
void adam_update(const AdamStep& step, std::span<float> param, std::span<const float> grad,
                 std::span<float> m, std::span<float> v);
}  // namespace avx2

}  // namespace discond::kernels
