#include "navlab/numerics.hpp"

#include <algorithm>
#include <limits>

namespace navlab {

template <typename T>
bool BasicParamBlock<T>::all_finite() const {
  auto finite = [](T v) { return std::isfinite(v); };
  return std::all_of(weights.begin(), weights.end(), finite) && std::all_of(bias.begin(), bias.end(), finite);
}

template <typename T>
void BasicGradBlock<T>::zero() {
  std::fill(weights.begin(), weights.end(), T(0));
  std::fill(bias.begin(), bias.end(), T(0));
}

template <typename T>
T BasicGradBlock<T>::sum_squares() const {
  return kern::sum_squares(weights.data(), weights.size()) + kern::sum_squares(bias.data(), bias.size());
}

template <typename T>
bool BasicGradBlock<T>::all_finite() const {
  auto finite = [](T v) { return std::isfinite(v); };
  return std::all_of(weights.begin(), weights.end(), finite) && std::all_of(bias.begin(), bias.end(), finite);
}

template <typename T>
void init_uniform_fan_in(BasicParamBlock<T>& block, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(block.cols));
  for (T& w : block.weights) w = static_cast<T>((2.0 * rng.uniform() - 1.0) * bound);
  for (T& b : block.bias) b = static_cast<T>((2.0 * rng.uniform() - 1.0) * bound);
}

template <typename T>
void affine_forward_into(const BasicParamBlock<T>& block, std::span<const T> input, bool final_layer,
                         std::span<T> pre, std::span<T> out) {
  if (input.size() != block.cols || pre.size() != block.rows || out.size() != block.rows) {
    throw ValidationError("layer " + block.name + ": dimension mismatch (expected input " +
                          std::to_string(block.cols) + ", got " + std::to_string(input.size()) + ")");
  }
  kern::gemv(block.weights.data(), block.rows, block.cols, input.data(), block.bias.data(), pre.data());
  if (final_layer) {
    std::copy(pre.begin(), pre.end(), out.begin());
  } else {
    for (std::size_t i = 0; i < pre.size(); ++i) out[i] = pre[i] > T(0) ? pre[i] : T(0);
  }
}

template <typename T>
std::vector<T> affine_relu_forward(const BasicParamBlock<T>& block, std::span<const T> input,
                                   bool final_layer, AffineCache<T>& cache) {
  cache.input.assign(input.begin(), input.end());
  cache.pre.assign(block.rows, T(0));
  cache.final_layer = final_layer;
  std::vector<T> out(block.rows);
  affine_forward_into<T>(block, input, final_layer, cache.pre, out);
  return out;
}

template <typename T>
void affine_relu_backward(const BasicParamBlock<T>& block, std::span<const T> input,
                          std::span<const T> pre, bool final_layer, std::span<const T> dout,
                          BasicGradBlock<T>& grad, std::span<T> dx, std::span<T> scratch) {
  if (dout.size() != block.rows || input.size() != block.cols || !grad.matches(block) ||
      scratch.size() < block.rows) {
    throw ValidationError("layer " + block.name + ": backward shape mismatch");
  }
  T* dpre = scratch.data();
  for (std::size_t i = 0; i < block.rows; ++i) {
    dpre[i] = (final_layer || pre[i] > T(0)) ? dout[i] : T(0);
  }
  kern::ger_acc(grad.weights.data(), block.rows, block.cols, dpre, input.data());
  kern::axpy(T(1), dpre, grad.bias.data(), block.rows);
  if (!dx.empty()) {
    if (dx.size() != block.cols) throw ValidationError("layer " + block.name + ": dx size mismatch");
    std::fill(dx.begin(), dx.end(), T(0));
    kern::gemv_t_acc(block.weights.data(), block.rows, block.cols, dpre, dx.data());
  }
}

template <typename T>
std::vector<T> affine_relu_backward(const BasicParamBlock<T>& block, const AffineCache<T>& cache,
                                    std::span<const T> dout, BasicGradBlock<T>& grad) {
  std::vector<T> dx(block.cols);
  std::vector<T> scratch(block.rows);
  affine_relu_backward<T>(block, cache.input, cache.pre, cache.final_layer, dout, grad, dx, scratch);
  return dx;
}

template <typename T>
void softmax_into(std::span<const T> logits, std::span<T> probs) {
  const T top = *std::max_element(logits.begin(), logits.end());
  T sum = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    probs[i] = std::exp(logits[i] - top);
    sum += probs[i];
  }
  for (T& p : probs) p /= sum;
}

template <typename T>
std::vector<T> softmax(std::span<const T> logits) {
  std::vector<T> probs(logits.size());
  softmax_into<T>(logits, probs);
  return probs;
}

template <typename T>
T entropy(std::span<const T> probs) {
  T h = 0;
  for (T p : probs) {
    if (p > T(0)) h -= p * std::log(p);
  }
  return h;
}

template <typename T>
A3cLoss<T> a3c_loss_and_grads(std::span<const T> probs, std::span<const T> values,
                              std::span<const Action> actions, std::span<const T> returns, T beta) {
  const std::size_t steps = values.size();
  if (actions.size() != steps || returns.size() != steps || probs.size() != steps * kNumActions) {
    throw ValidationError("a3c loss: rollout arrays have mismatched lengths");
  }
  A3cLoss<T> out;
  out.dlogits.assign(steps * kNumActions, T(0));
  out.dvalues.assign(steps, T(0));
  for (std::size_t t = 0; t < steps; ++t) {
    std::span<const T> pi = probs.subspan(t * kNumActions, kNumActions);
    const int a = static_cast<int>(actions[t]);
    if (!(pi[a] > T(0))) throw NumericError("a3c loss: chosen action has zero probability");
    const T advantage = returns[t] - values[t];
    const T h = entropy<T>(pi);
    out.policy += -std::log(pi[a]) * advantage;
    out.entropy += h;
    out.value += advantage * advantage;
    T* dz = out.dlogits.data() + t * kNumActions;
    for (int j = 0; j < kNumActions; ++j) {
      // d(-log pi_a)/dz_j = pi_j - [j == a];  d(-H)/dz_j = pi_j (log pi_j + H)
      const T log_pj = pi[j] > T(0) ? std::log(pi[j]) : T(0);
      dz[j] = (pi[j] - (j == a ? T(1) : T(0))) * advantage + beta * pi[j] * (log_pj + h);
    }
    out.dvalues[t] = T(-2) * advantage;
  }
  out.total = out.policy - beta * out.entropy + out.value;
  return out;
}

template <typename T>
std::vector<T> n_step_returns(std::span<const T> rewards, T bootstrap, bool terminal, T gamma) {
  std::vector<T> out(rewards.size());
  T running = terminal ? T(0) : bootstrap;
  for (std::size_t i = rewards.size(); i-- > 0;) {
    running = rewards[i] + gamma * running;
    out[i] = running;
  }
  return out;
}

bool rmsprop_apply(const RmsPropConfig& config, RmsAccumulator& v, ParamBlock& params, GradBlock& grads) {
  if (!grads.matches(params) || v.weights.size() != params.weights.size() || v.bias.size() != params.bias.size()) {
    throw ValidationError("rmsprop: shape mismatch for block " + params.name);
  }
  if (!grads.all_finite()) {
    grads.zero();
    return false;
  }
  const auto& k = simd::active_kernels();
  k.rmsprop(params.weights.data(), v.weights.data(), grads.weights.data(), params.weights.size(), config.decay,
            config.lr, config.eps);
  k.rmsprop(params.bias.data(), v.bias.data(), grads.bias.data(), params.bias.size(), config.decay, config.lr,
            config.eps);
  grads.zero();
  return true;
}

float clip_global_norm(std::span<GradBlock* const> grads, float max_norm) {
  double sq = 0.0;
  for (const GradBlock* g : grads) sq += g->sum_squares();
  const float norm = static_cast<float>(std::sqrt(sq));
  if (max_norm > 0.0f && norm > max_norm && std::isfinite(norm)) {
    const float s = max_norm / norm;
    for (GradBlock* g : grads) {
      kern::scale(g->weights.data(), g->weights.size(), s);
      kern::scale(g->bias.data(), g->bias.size(), s);
    }
  }
  return norm;
}

#define NAVLAB_INSTANTIATE(T)                                                                              \
  template struct BasicParamBlock<T>;                                                                      \
  template struct BasicGradBlock<T>;                                                                       \
  template void init_uniform_fan_in<T>(BasicParamBlock<T>&, Rng&);                                         \
  template void affine_forward_into<T>(const BasicParamBlock<T>&, std::span<const T>, bool, std::span<T>,  \
                                       std::span<T>);                                                      \
  template std::vector<T> affine_relu_forward<T>(const BasicParamBlock<T>&, std::span<const T>, bool,      \
                                                 AffineCache<T>&);                                         \
  template void affine_relu_backward<T>(const BasicParamBlock<T>&, std::span<const T>, std::span<const T>, \
                                        bool, std::span<const T>, BasicGradBlock<T>&, std::span<T>,        \
                                        std::span<T>);                                                     \
  template std::vector<T> affine_relu_backward<T>(const BasicParamBlock<T>&, const AffineCache<T>&,        \
                                                  std::span<const T>, BasicGradBlock<T>&);                 \
  template void softmax_into<T>(std::span<const T>, std::span<T>);                                         \
  template std::vector<T> softmax<T>(std::span<const T>);                                                  \
  template T entropy<T>(std::span<const T>);                                                               \
  template A3cLoss<T> a3c_loss_and_grads<T>(std::span<const T>, std::span<const T>,                        \
                                            std::span<const Action>, std::span<const T>, T);               \
  template std::vector<T> n_step_returns<T>(std::span<const T>, T, bool, T);

NAVLAB_INSTANTIATE(float)
NAVLAB_INSTANTIATE(double)
#undef NAVLAB_INSTANTIATE

}  // namespace navlab
