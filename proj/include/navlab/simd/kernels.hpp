#pragma once

#include <cstddef>
#include <string_view>

namespace navlab::simd {

/// Dense float32 kernels used by every layer and by the optimizer.
/// Row-major weights: w[r * cols + c].
struct KernelTable {
  std::string_view name;
  float (*dot)(const float* a, const float* b, std::size_t n);
  /// y = W x + bias (bias may be null)
  void (*gemv)(const float* w, std::size_t rows, std::size_t cols, const float* x,
               const float* bias, float* y);
  /// dx += W^T g
  void (*gemv_t_acc)(const float* w, std::size_t rows, std::size_t cols, const float* g,
                     float* dx);
  /// G += g x^T
  void (*ger_acc)(float* grad, std::size_t rows, std::size_t cols, const float* g,
                  const float* x);
  /// y += a x
  void (*axpy)(float a, const float* x, float* y, std::size_t n);
  void (*scale)(float* x, std::size_t n, float s);
  float (*sum_squares)(const float* x, std::size_t n);
  /// v = alpha v + (1 - alpha) g^2 ; theta -= lr g / sqrt(v + eps)
  void (*rmsprop)(float* theta, float* v, const float* g, std::size_t n, float alpha,
                  float lr, float eps);
};

const KernelTable& scalar_kernels();

/// Null when the build has no AVX2 translation unit.
const KernelTable* avx2_kernels();

bool cpu_supports_avx2();

/// Picks AVX2 when both compiled and supported by the running CPU, unless the
/// environment variable NAVLAB_SIMD=scalar forces the reference path. The
/// choice is made once per process.
const KernelTable& active_kernels();

}  // namespace navlab::simd
