// Compiled with -mavx2 -mfma. Only reached after a runtime CPU check.
#include <immintrin.h>

#include <cmath>

#include "navlab/simd/kernels.hpp"

namespace navlab::simd {
namespace {

inline float hsum(__m256 v) {
  __m128 lo = _mm256_castps256_ps128(v);
  __m128 hi = _mm256_extractf128_ps(v, 1);
  lo = _mm_add_ps(lo, hi);
  __m128 shuf = _mm_movehdup_ps(lo);
  __m128 sums = _mm_add_ps(lo, shuf);
  shuf = _mm_movehl_ps(shuf, sums);
  sums = _mm_add_ss(sums, shuf);
  return _mm_cvtss_f32(sums);
}

float dot_avx2(const float* a, const float* b, std::size_t n) {
  __m256 acc0 = _mm256_setzero_ps();
  __m256 acc1 = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc0);
    acc1 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i + 8), _mm256_loadu_ps(b + i + 8), acc1);
  }
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc0);
  }
  float acc = hsum(_mm256_add_ps(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void gemv_avx2(const float* w, std::size_t rows, std::size_t cols, const float* x,
               const float* bias, float* y) {
  for (std::size_t r = 0; r < rows; ++r) {
    const float acc = dot_avx2(w + r * cols, x, cols);
    y[r] = bias ? acc + bias[r] : acc;
  }
}

void axpy_avx2(float a, const float* x, float* y, std::size_t n) {
  const __m256 va = _mm256_set1_ps(a);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 vy = _mm256_loadu_ps(y + i);
    vy = _mm256_add_ps(vy, _mm256_mul_ps(va, _mm256_loadu_ps(x + i)));
    _mm256_storeu_ps(y + i, vy);
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void gemv_t_acc_avx2(const float* w, std::size_t rows, std::size_t cols, const float* g,
                     float* dx) {
  for (std::size_t r = 0; r < rows; ++r) axpy_avx2(g[r], w + r * cols, dx, cols);
}

void ger_acc_avx2(float* grad, std::size_t rows, std::size_t cols, const float* g,
                  const float* x) {
  for (std::size_t r = 0; r < rows; ++r) axpy_avx2(g[r], x, grad + r * cols, cols);
}

void scale_avx2(float* x, std::size_t n, float s) {
  const __m256 vs = _mm256_set1_ps(s);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) _mm256_storeu_ps(x + i, _mm256_mul_ps(_mm256_loadu_ps(x + i), vs));
  for (; i < n; ++i) x[i] *= s;
}

float sum_squares_avx2(const float* x, std::size_t n) { return dot_avx2(x, x, n); }

// Elementwise ops avoid FMA so results match the scalar reference bit for bit.
void rmsprop_avx2(float* theta, float* v, const float* g, std::size_t n, float alpha,
                  float lr, float eps) {
  const float keep = 1.0f - alpha;
  const __m256 va = _mm256_set1_ps(alpha);
  const __m256 vk = _mm256_set1_ps(keep);
  const __m256 vlr = _mm256_set1_ps(lr);
  const __m256 veps = _mm256_set1_ps(eps);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 vg = _mm256_loadu_ps(g + i);
    __m256 vv = _mm256_loadu_ps(v + i);
    vv = _mm256_add_ps(_mm256_mul_ps(va, vv), _mm256_mul_ps(_mm256_mul_ps(vk, vg), vg));
    _mm256_storeu_ps(v + i, vv);
    const __m256 step =
        _mm256_div_ps(_mm256_mul_ps(vlr, vg), _mm256_sqrt_ps(_mm256_add_ps(vv, veps)));
    _mm256_storeu_ps(theta + i, _mm256_sub_ps(_mm256_loadu_ps(theta + i), step));
  }
  for (; i < n; ++i) {
    v[i] = alpha * v[i] + (keep * g[i]) * g[i];
    theta[i] -= (lr * g[i]) / std::sqrt(v[i] + eps);
  }
}

}  // namespace

const KernelTable* avx2_kernels() {
  static const KernelTable table{
      "avx2",         &dot_avx2,  &gemv_avx2,        &gemv_t_acc_avx2, &ger_acc_avx2,
      &axpy_avx2,     &scale_avx2, &sum_squares_avx2, &rmsprop_avx2,
  };
  return &table;
}

}  // namespace navlab::simd
