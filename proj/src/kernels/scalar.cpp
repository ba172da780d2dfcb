// SPDX-License-Identifier: Apache-2.0
// Portable reference kernels. Kept deliberately plain: these define the
// semantics the SIMD variants are tested against.
#include <cmath>

#include "discond/kernels.hpp"

namespace discond::kernels::scalar {

void gemm(Trans trans_a, Trans trans_b, std::size_t m, std::size_t n, std::size_t k, float alpha,
          const float* a, std::size_t lda, const float* b, std::size_t ldb, float beta, float* c,
          std::size_t ldc) {
  for (std::size_t i = 0; i < m; ++i) {
    float* c_row = c + i * ldc;
    if (beta == 0.0f) {
      for (std::size_t j = 0; j < n; ++j) c_row[j] = 0.0f;
    } else if (beta != 1.0f) {
      for (std::size_t j = 0; j < n; ++j) c_row[j] *= beta;
    }
    for (std::size_t p = 0; p < k; ++p) {
      const float a_ip = alpha * (trans_a == Trans::no ? a[i * lda + p] : a[p * lda + i]);
      if (trans_b == Trans::no) {
        const float* b_row = b + p * ldb;
        for (std::size_t j = 0; j < n; ++j) c_row[j] += a_ip * b_row[j];
      } else {
        for (std::size_t j = 0; j < n; ++j) c_row[j] += a_ip * b[j * ldb + p];
      }
    }
  }
}

void axpy(float alpha, std::span<const float> x, std::span<float> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

void relu(std::span<const float> x, std::span<float> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_backward(std::span<const float> x, std::span<const float> grad_y, std::span<float> grad_x) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] > 0.0f) grad_x[i] += grad_y[i];
  }
}

double sum(std::span<const float> x) {
  double acc = 0.0;
  for (float v : x) acc += v;
  return acc;
}

void adam_update(const AdamStep& step, std::span<float> param, std::span<const float> grad,
                 std::span<float> m, std::span<float> v) {
  const float step_size = step.lr / step.bias_correction1;
  const float sqrt_bc2 = std::sqrt(step.bias_correction2);
  for (std::size_t i = 0; i < param.size(); ++i) {
    const float g = grad[i];
    m[i] = step.beta1 * m[i] + (1.0f - step.beta1) * g;
    v[i] = step.beta2 * v[i] + (1.0f - step.beta2) * g * g;
    const float denom = std::sqrt(v[i]) / sqrt_bc2 + step.eps;
    param[i] -= step_size * m[i] / denom;
  }
}

}  // namespace discond::kernels::scalar
