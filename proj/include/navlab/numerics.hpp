#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "navlab/error.hpp"
#include "navlab/gridworld.hpp"
#include "navlab/rng.hpp"
#include "navlab/simd/kernels.hpp"
#include "navlab/simd/scalar_ref.hpp"

namespace navlab {

// Type-dispatched kernel entry points: float goes through the runtime-selected
// SIMD table, double always uses the scalar reference.
namespace kern {

inline float dot(const float* a, const float* b, std::size_t n) { return simd::active_kernels().dot(a, b, n); }
inline double dot(const double* a, const double* b, std::size_t n) { return simd::ref::dot(a, b, n); }

inline void gemv(const float* w, std::size_t r, std::size_t c, const float* x, const float* b, float* y) {
  simd::active_kernels().gemv(w, r, c, x, b, y);
}
inline void gemv(const double* w, std::size_t r, std::size_t c, const double* x, const double* b, double* y) {
  simd::ref::gemv(w, r, c, x, b, y);
}
inline void gemv_t_acc(const float* w, std::size_t r, std::size_t c, const float* g, float* dx) {
  simd::active_kernels().gemv_t_acc(w, r, c, g, dx);
}
inline void gemv_t_acc(const double* w, std::size_t r, std::size_t c, const double* g, double* dx) {
  simd::ref::gemv_t_acc(w, r, c, g, dx);
}
inline void ger_acc(float* gw, std::size_t r, std::size_t c, const float* g, const float* x) {
  simd::active_kernels().ger_acc(gw, r, c, g, x);
}
inline void ger_acc(double* gw, std::size_t r, std::size_t c, const double* g, const double* x) {
  simd::ref::ger_acc(gw, r, c, g, x);
}
inline void axpy(float a, const float* x, float* y, std::size_t n) { simd::active_kernels().axpy(a, x, y, n); }
inline void axpy(double a, const double* x, double* y, std::size_t n) { simd::ref::axpy(a, x, y, n); }
inline void scale(float* x, std::size_t n, float s) { simd::active_kernels().scale(x, n, s); }
inline void scale(double* x, std::size_t n, double s) { simd::ref::scale(x, n, s); }
inline float sum_squares(const float* x, std::size_t n) { return simd::active_kernels().sum_squares(x, n); }
inline double sum_squares(const double* x, std::size_t n) { return simd::ref::sum_squares(x, n); }

}  // namespace kern

/// Dense layer parameters: weights (rows = out, cols = in) and bias (out).
template <typename T>
struct BasicParamBlock {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<T> weights;
  std::vector<T> bias;

  BasicParamBlock() = default;
  BasicParamBlock(std::string n, std::size_t out, std::size_t in)
      : name(std::move(n)), rows(out), cols(in), weights(out * in, T(0)), bias(out, T(0)) {}

  std::size_t size() const { return weights.size() + bias.size(); }
  T* row(std::size_t r) { return weights.data() + r * cols; }
  const T* row(std::size_t r) const { return weights.data() + r * cols; }
  bool all_finite() const;

  friend bool operator==(const BasicParamBlock&, const BasicParamBlock&) = default;
};

/// Gradient accumulator mirroring a parameter block's shapes.
template <typename T>
struct BasicGradBlock {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<T> weights;
  std::vector<T> bias;

  BasicGradBlock() = default;
  BasicGradBlock(std::size_t out, std::size_t in) : rows(out), cols(in), weights(out * in, T(0)), bias(out, T(0)) {}
  template <typename P>
  explicit BasicGradBlock(const BasicParamBlock<P>& p) : BasicGradBlock(p.rows, p.cols) {}

  void zero();
  T sum_squares() const;
  bool all_finite() const;
  bool matches(const BasicParamBlock<T>& p) const { return rows == p.rows && cols == p.cols; }
};

using ParamBlock = BasicParamBlock<float>;
using GradBlock = BasicGradBlock<float>;

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases.
template <typename T>
void init_uniform_fan_in(BasicParamBlock<T>& block, Rng& rng);

template <typename T>
BasicParamBlock<T> convert_block(const BasicParamBlock<float>& in) {
  BasicParamBlock<T> out;
  out.name = in.name;
  out.rows = in.rows;
  out.cols = in.cols;
  out.weights.assign(in.weights.begin(), in.weights.end());
  out.bias.assign(in.bias.begin(), in.bias.end());
  return out;
}

/// Saved activations of one affine(+ReLU) layer.
template <typename T>
struct AffineCache {
  std::vector<T> input;
  std::vector<T> pre;
  bool final_layer = false;
};

/// out = ReLU(W x + b), or W x + b when final_layer. Writes into preallocated
/// spans; pre receives the pre-activation.
template <typename T>
void affine_forward_into(const BasicParamBlock<T>& block, std::span<const T> input, bool final_layer,
                         std::span<T> pre, std::span<T> out);

template <typename T>
std::vector<T> affine_relu_forward(const BasicParamBlock<T>& block, std::span<const T> input,
                                   bool final_layer, AffineCache<T>& cache);

/// Accumulates dL/dW, dL/db into grad; when dx is non-empty, writes dL/dx
/// into it (overwriting). dout is the gradient w.r.t. the layer output.
template <typename T>
void affine_relu_backward(const BasicParamBlock<T>& block, std::span<const T> input,
                          std::span<const T> pre, bool final_layer, std::span<const T> dout,
                          BasicGradBlock<T>& grad, std::span<T> dx, std::span<T> scratch);

template <typename T>
std::vector<T> affine_relu_backward(const BasicParamBlock<T>& block, const AffineCache<T>& cache,
                                    std::span<const T> dout, BasicGradBlock<T>& grad);

/// Max-subtracted softmax.
template <typename T>
void softmax_into(std::span<const T> logits, std::span<T> probs);

template <typename T>
std::vector<T> softmax(std::span<const T> logits);

template <typename T>
T entropy(std::span<const T> probs);

/// Output of the actor-critic loss over one rollout.
template <typename T>
struct A3cLoss {
  T total = 0;
  T policy = 0;   // sum of -log pi(a_t) (R_t - V_t)
  T entropy = 0;  // sum of H(pi_t)
  T value = 0;    // sum of (R_t - V_t)^2
  std::vector<T> dlogits;  // steps x kNumActions, gradient at the pre-softmax policy head
  std::vector<T> dvalues;  // steps
};

/// Per step: -log pi(a_t) * A_t - beta * H(pi_t) + (R_t - V_t)^2, with the
/// advantage A_t = R_t - V_t held constant in the policy term.
/// probs is steps x kNumActions, row-major. Throws NumericError when the
/// chosen action has zero probability.
template <typename T>
A3cLoss<T> a3c_loss_and_grads(std::span<const T> probs, std::span<const T> values,
                              std::span<const Action> actions, std::span<const T> returns, T beta);

/// R_t = r_t + gamma R_{t+1}; the tail is 0 when terminal, else bootstrap.
template <typename T>
std::vector<T> n_step_returns(std::span<const T> rewards, T bootstrap, bool terminal, T gamma);

/// Shared-optimizer hyperparameters; eps sits inside the square root.
struct RmsPropConfig {
  float lr = 7e-4f;
  float decay = 0.99f;
  float eps = 0.1f;
};

/// Running mean-square accumulator for one block.
struct RmsAccumulator {
  std::vector<float> weights;
  std::vector<float> bias;

  RmsAccumulator() = default;
  explicit RmsAccumulator(const ParamBlock& p) : weights(p.weights.size(), 0.0f), bias(p.bias.size(), 0.0f) {}
};

/// v <- decay v + (1 - decay) g^2 ; theta <- theta - lr g / sqrt(v + eps); then
/// grads are zeroed. Returns false (and leaves params and v untouched, grads
/// zeroed) when the gradient holds a non-finite entry.
bool rmsprop_apply(const RmsPropConfig& config, RmsAccumulator& v, ParamBlock& params, GradBlock& grads);

/// Scales all grads so their joint L2 norm is at most max_norm (0 disables).
/// Returns the norm before clipping.
float clip_global_norm(std::span<GradBlock* const> grads, float max_norm);

}  // namespace navlab
