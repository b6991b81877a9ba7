#pragma once

#include <cmath>
#include <cstddef>

// Reference implementations. Templated so the 64-bit gradient checks run the
// same arithmetic as the float path.
namespace navlab::simd::ref {

template <typename T>
T dot(const T* a, const T* b, std::size_t n) {
  T acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

template <typename T>
void gemv(const T* w, std::size_t rows, std::size_t cols, const T* x, const T* bias, T* y) {
  for (std::size_t r = 0; r < rows; ++r) {
    T acc = dot(w + r * cols, x, cols);
    y[r] = bias ? acc + bias[r] : acc;
  }
}

template <typename T>
void axpy(T a, const T* x, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

template <typename T>
void gemv_t_acc(const T* w, std::size_t rows, std::size_t cols, const T* g, T* dx) {
  for (std::size_t r = 0; r < rows; ++r) axpy(g[r], w + r * cols, dx, cols);
}

template <typename T>
void ger_acc(T* grad, std::size_t rows, std::size_t cols, const T* g, const T* x) {
  for (std::size_t r = 0; r < rows; ++r) axpy(g[r], x, grad + r * cols, cols);
}

template <typename T>
void scale(T* x, std::size_t n, T s) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= s;
}

template <typename T>
T sum_squares(const T* x, std::size_t n) {
  return dot(x, x, n);
}

template <typename T>
void rmsprop(T* theta, T* v, const T* g, std::size_t n, T alpha, T lr, T eps) {
  const T keep = T(1) - alpha;
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = alpha * v[i] + (keep * g[i]) * g[i];
    theta[i] -= (lr * g[i]) / std::sqrt(v[i] + eps);
  }
}

}  // namespace navlab::simd::ref
