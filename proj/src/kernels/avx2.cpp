// SPDX-License-Identifier: Apache-2.0
// AVX2 + FMA kernels. Compiled with -mavx2 -mfma; only reached through the
// dispatcher after a CPUID check.
#include <immintrin.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "discond/kernels.hpp"

namespace discond::kernels::avx2 {
namespace {

// Register tile 6 x 16 (12 ymm accumulators), cache blocks sized for a
// typical 32-48 KiB L1d / 1-2 MiB L2.
constexpr std::size_t kMR = 6;
constexpr std::size_t kNR = 16;
constexpr std::size_t kKC = 256;
constexpr std::size_t kMC = 96;
constexpr std::size_t kNC = 3072;

struct PackBuffers {
  std::vector<float> a;
  std::vector<float> b;
};

PackBuffers& buffers() {
  thread_local PackBuffers bufs;
  return bufs;
}

void pack_a(Trans trans_a, const float* a, std::size_t lda, std::size_t i0, std::size_t mc,
            std::size_t p0, std::size_t kc, float* dst) {
  for (std::size_t ir = 0; ir < mc; ir += kMR) {
    const std::size_t mr = std::min(kMR, mc - ir);
    if (trans_a == Trans::no) {
      for (std::size_t p = 0; p < kc; ++p) {
        for (std::size_t r = 0; r < mr; ++r) dst[p * kMR + r] = a[(i0 + ir + r) * lda + p0 + p];
        for (std::size_t r = mr; r < kMR; ++r) dst[p * kMR + r] = 0.0f;
      }
    } else {
      for (std::size_t p = 0; p < kc; ++p) {
        const float* src = a + (p0 + p) * lda + i0 + ir;
        for (std::size_t r = 0; r < mr; ++r) dst[p * kMR + r] = src[r];
        for (std::size_t r = mr; r < kMR; ++r) dst[p * kMR + r] = 0.0f;
      }
    }
    dst += kMR * kc;
  }
}

void pack_b(Trans trans_b, const float* b, std::size_t ldb, std::size_t p0, std::size_t kc,
            std::size_t j0, std::size_t nc, float* dst) {
  for (std::size_t jr = 0; jr < nc; jr += kNR) {
    const std::size_t nr = std::min(kNR, nc - jr);
    if (trans_b == Trans::no) {
      for (std::size_t p = 0; p < kc; ++p) {
        const float* src = b + (p0 + p) * ldb + j0 + jr;
        if (nr == kNR) {
          _mm256_storeu_ps(dst + p * kNR, _mm256_loadu_ps(src));
          _mm256_storeu_ps(dst + p * kNR + 8, _mm256_loadu_ps(src + 8));
        } else {
          for (std::size_t c = 0; c < nr; ++c) dst[p * kNR + c] = src[c];
          for (std::size_t c = nr; c < kNR; ++c) dst[p * kNR + c] = 0.0f;
        }
      }
    } else {
      for (std::size_t c = 0; c < kNR; ++c) {
        if (c < nr) {
          const float* src = b + (j0 + jr + c) * ldb + p0;
          for (std::size_t p = 0; p < kc; ++p) dst[p * kNR + c] = src[p];
        } else {
          for (std::size_t p = 0; p < kc; ++p) dst[p * kNR + c] = 0.0f;
        }
      }
    }
    dst += kNR * kc;
  }
}

inline __m256 finish(__m256 acc, __m256 alpha, __m256 beta, const float* c, bool read_c) {
  const __m256 scaled = _mm256_mul_ps(alpha, acc);
  return read_c ? _mm256_fmadd_ps(beta, _mm256_loadu_ps(c), scaled) : scaled;
}

void micro_kernel(std::size_t kc, const float* ap, const float* bp, float* c, std::size_t ldc,
                  float alpha, float beta, std::size_t mr, std::size_t nr) {
  __m256 c00 = _mm256_setzero_ps(), c01 = _mm256_setzero_ps();
  __m256 c10 = _mm256_setzero_ps(), c11 = _mm256_setzero_ps();
  __m256 c20 = _mm256_setzero_ps(), c21 = _mm256_setzero_ps();
  __m256 c30 = _mm256_setzero_ps(), c31 = _mm256_setzero_ps();
  __m256 c40 = _mm256_setzero_ps(), c41 = _mm256_setzero_ps();
  __m256 c50 = _mm256_setzero_ps(), c51 = _mm256_setzero_ps();

  for (std::size_t p = 0; p < kc; ++p) {
    const __m256 b0 = _mm256_loadu_ps(bp);
    const __m256 b1 = _mm256_loadu_ps(bp + 8);
    __m256 a = _mm256_broadcast_ss(ap + 0);
    c00 = _mm256_fmadd_ps(a, b0, c00);
    c01 = _mm256_fmadd_ps(a, b1, c01);
    a = _mm256_broadcast_ss(ap + 1);
    c10 = _mm256_fmadd_ps(a, b0, c10);
    c11 = _mm256_fmadd_ps(a, b1, c11);
    a = _mm256_broadcast_ss(ap + 2);
    c20 = _mm256_fmadd_ps(a, b0, c20);
    c21 = _mm256_fmadd_ps(a, b1, c21);
    a = _mm256_broadcast_ss(ap + 3);
    c30 = _mm256_fmadd_ps(a, b0, c30);
    c31 = _mm256_fmadd_ps(a, b1, c31);
    a = _mm256_broadcast_ss(ap + 4);
    c40 = _mm256_fmadd_ps(a, b0, c40);
    c41 = _mm256_fmadd_ps(a, b1, c41);
    a = _mm256_broadcast_ss(ap + 5);
    c50 = _mm256_fmadd_ps(a, b0, c50);
    c51 = _mm256_fmadd_ps(a, b1, c51);
    ap += kMR;
    bp += kNR;
  }

  const __m256 va = _mm256_set1_ps(alpha);
  const __m256 vb = _mm256_set1_ps(beta);
  const bool read_c = beta != 0.0f;
  const __m256 acc[kMR][2] = {{c00, c01}, {c10, c11}, {c20, c21}, {c30, c31}, {c40, c41}, {c50, c51}};

  if (mr == kMR && nr == kNR) {
    for (std::size_t r = 0; r < kMR; ++r) {
      float* row = c + r * ldc;
      const __m256 lo = finish(acc[r][0], va, vb, row, read_c);
      const __m256 hi = finish(acc[r][1], va, vb, row + 8, read_c);
      _mm256_storeu_ps(row, lo);
      _mm256_storeu_ps(row + 8, hi);
    }
    return;
  }

  alignas(32) float tile[kMR][kNR];
  for (std::size_t r = 0; r < kMR; ++r) {
    _mm256_store_ps(tile[r], _mm256_mul_ps(va, acc[r][0]));
    _mm256_store_ps(tile[r] + 8, _mm256_mul_ps(va, acc[r][1]));
  }
  for (std::size_t r = 0; r < mr; ++r) {
    float* row = c + r * ldc;
    for (std::size_t j = 0; j < nr; ++j) {
      row[j] = read_c ? std::fma(beta, row[j], tile[r][j]) : tile[r][j];
    }
  }
}

}  // namespace

void gemm(Trans trans_a, Trans trans_b, std::size_t m, std::size_t n, std::size_t k, float alpha,
          const float* a, std::size_t lda, const float* b, std::size_t ldb, float beta, float* c,
          std::size_t ldc) {
  if (m == 0 || n == 0) return;
  if (k == 0) {
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) c[i * ldc + j] = beta == 0.0f ? 0.0f : beta * c[i * ldc + j];
    }
    return;
  }

  PackBuffers& bufs = buffers();
  const std::size_t nc_max = std::min(kNC, n);
  const std::size_t kc_max = std::min(kKC, k);
  const std::size_t mc_max = std::min(kMC, m);
  bufs.b.resize(((nc_max + kNR - 1) / kNR) * kNR * kc_max);
  bufs.a.resize(((mc_max + kMR - 1) / kMR) * kMR * kc_max);

  for (std::size_t jc = 0; jc < n; jc += kNC) {
    const std::size_t nc = std::min(kNC, n - jc);
    for (std::size_t pc = 0; pc < k; pc += kKC) {
      const std::size_t kc = std::min(kKC, k - pc);
      const float beta_block = pc == 0 ? beta : 1.0f;
      pack_b(trans_b, b, ldb, pc, kc, jc, nc, bufs.b.data());
      for (std::size_t ic = 0; ic < m; ic += kMC) {
        const std::size_t mc = std::min(kMC, m - ic);
        pack_a(trans_a, a, lda, ic, mc, pc, kc, bufs.a.data());
        for (std::size_t jr = 0; jr < nc; jr += kNR) {
          const float* bp = bufs.b.data() + (jr / kNR) * kNR * kc;
          for (std::size_t ir = 0; ir < mc; ir += kMR) {
            const float* ap = bufs.a.data() + (ir / kMR) * kMR * kc;
            micro_kernel(kc, ap, bp, c + (ic + ir) * ldc + jc + jr, ldc, alpha, beta_block,
                         std::min(kMR, mc - ir), std::min(kNR, nc - jr));
          }
        }
      }
    }
  }
}

void axpy(float alpha, std::span<const float> x, std::span<float> y) {
  const std::size_t n = x.size();
  const __m256 va = _mm256_set1_ps(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_ps(y.data() + i,
                     _mm256_fmadd_ps(va, _mm256_loadu_ps(x.data() + i), _mm256_loadu_ps(y.data() + i)));
  }
  for (; i < n; ++i) y[i] = std::fma(alpha, x[i], y[i]);
}

void relu(std::span<const float> x, std::span<float> y) {
  const std::size_t n = x.size();
  const __m256 zero = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 v = _mm256_loadu_ps(x.data() + i);
    // Keep the scalar rule (x > 0 ? x : 0) so NaN maps to 0 identically.
    const __m256 mask = _mm256_cmp_ps(v, zero, _CMP_GT_OQ);
    _mm256_storeu_ps(y.data() + i, _mm256_and_ps(mask, v));
  }
  for (; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_backward(std::span<const float> x, std::span<const float> grad_y, std::span<float> grad_x) {
  const std::size_t n = x.size();
  const __m256 zero = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 mask = _mm256_cmp_ps(_mm256_loadu_ps(x.data() + i), zero, _CMP_GT_OQ);
    const __m256 g = _mm256_and_ps(mask, _mm256_loadu_ps(grad_y.data() + i));
    _mm256_storeu_ps(grad_x.data() + i, _mm256_add_ps(_mm256_loadu_ps(grad_x.data() + i), g));
  }
  for (; i < n; ++i) {
    if (x[i] > 0.0f) grad_x[i] += grad_y[i];
  }
}

double sum(std::span<const float> x) {
  const std::size_t n = x.size();
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_add_pd(acc0, _mm256_cvtps_pd(_mm_loadu_ps(x.data() + i)));
    acc1 = _mm256_add_pd(acc1, _mm256_cvtps_pd(_mm_loadu_ps(x.data() + i + 4)));
  }
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, _mm256_add_pd(acc0, acc1));
  double total = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
  for (; i < n; ++i) total += x[i];
  return total;
}

void adam_update(const AdamStep& step, std::span<float> param, std::span<const float> grad,
                 std::span<float> m, std::span<float> v) {
  const std::size_t n = param.size();
  const float step_size = step.lr / step.bias_correction1;
  const float sqrt_bc2 = std::sqrt(step.bias_correction2);
  const __m256 b1 = _mm256_set1_ps(step.beta1);
  const __m256 b2 = _mm256_set1_ps(step.beta2);
  const __m256 one_b1 = _mm256_set1_ps(1.0f - step.beta1);
  const __m256 one_b2 = _mm256_set1_ps(1.0f - step.beta2);
  const __m256 eps = _mm256_set1_ps(step.eps);
  const __m256 vsqrt_bc2 = _mm256_set1_ps(sqrt_bc2);
  const __m256 vstep = _mm256_set1_ps(step_size);
  std::size_t i = 0;
  // Mirrors the scalar operation order without contraction so both
  // backends produce identical parameters.
  for (; i + 8 <= n; i += 8) {
    const __m256 g = _mm256_loadu_ps(grad.data() + i);
    const __m256 mi = _mm256_add_ps(_mm256_mul_ps(b1, _mm256_loadu_ps(m.data() + i)), _mm256_mul_ps(one_b1, g));
    const __m256 vi = _mm256_add_ps(_mm256_mul_ps(b2, _mm256_loadu_ps(v.data() + i)),
                                    _mm256_mul_ps(_mm256_mul_ps(one_b2, g), g));
    const __m256 denom = _mm256_add_ps(_mm256_div_ps(_mm256_sqrt_ps(vi), vsqrt_bc2), eps);
    const __m256 p = _mm256_sub_ps(_mm256_loadu_ps(param.data() + i),
                                   _mm256_div_ps(_mm256_mul_ps(vstep, mi), denom));
    _mm256_storeu_ps(m.data() + i, mi);
    _mm256_storeu_ps(v.data() + i, vi);
    _mm256_storeu_ps(param.data() + i, p);
  }
  for (; i < n; ++i) {
    const float g = grad[i];
    m[i] = step.beta1 * m[i] + (1.0f - step.beta1) * g;
    v[i] = step.beta2 * v[i] + (1.0f - step.beta2) * g * g;
    const float denom = std::sqrt(v[i]) / sqrt_bc2 + step.eps;
    param[i] -= step_size * m[i] / denom;
  }
}

}  // namespace discond::kernels::avx2
