#pragma once

#include <array>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "navlab/config.hpp"
#include "navlab/evaluate.hpp"
#include "navlab/model.hpp"
#include "navlab/trainer.hpp"

namespace navlab {

/// Heuristic baselines, evaluated through the shared pipeline.
EvalReport random_walk_eval(const Scene& scene, const Pose& goal, int episodes, int episode_cap, std::uint64_t seed);
EvalReport shortest_path_eval(const Scene& scene, const Pose& goal, int episodes, std::uint64_t seed);

/// A plain layer chain: ReLU after every block except the last.
template <typename T>
struct BasicMlp {
  std::vector<BasicParamBlock<T>> layers;
};
using Mlp = BasicMlp<float>;

template <typename T>
struct MlpCache {
  std::vector<AffineCache<T>> layers;
  std::vector<T> output;
};

template <typename T>
std::span<const T> mlp_forward(const BasicMlp<T>& net, std::span<const T> input, MlpCache<T>& cache,
                               bool last_is_final = true);
/// Accumulates into grads[i] for each layer i.
template <typename T>
void mlp_backward(const BasicMlp<T>& net, const MlpCache<T>& cache, std::span<const T> dout,
                  std::vector<BasicGradBlock<T>>& grads);

/// Per-target actor-critic without a goal stream: trunk (stack -> embed ->
/// fuse -> fuse, ReLU) then policy and value heads, sized like the
/// target-driven model's state stream.
template <typename T>
struct BasicGoalFreeNet {
  BasicMlp<T> trunk;
  BasicParamBlock<T> policy;
  BasicParamBlock<T> value;
};
using GoalFreeNet = BasicGoalFreeNet<float>;

template <typename T>
struct GoalFreeCache {
  MlpCache<T> trunk;
  std::array<T, kNumActions> logits{};
  T value_pre[1] = {0};
};

GoalFreeNet make_goal_free_net(const ModelDims& dims, Rng& rng, const std::string& prefix);

template <typename T>
BasicPolicyValue<T> goal_free_forward(const BasicGoalFreeNet<T>& net, std::span<const T> state, GoalFreeCache<T>& cache);

/// grads: trunk layers followed by policy and value.
template <typename T>
void goal_free_backward(const BasicGoalFreeNet<T>& net, const GoalFreeCache<T>& cache, std::span<const T> dlogits,
                        T dvalue, std::vector<BasicGradBlock<T>>& grads);

/// Q-network over the state stack only: embed -> fuse (ReLU) -> 4 Q values.
Mlp make_q_network(const ModelDims& dims, Rng& rng, const std::string& prefix);

/// One-step Q target: r for terminal transitions, else r + gamma * max_a Q'(s', a).
float one_step_q_target(float reward, bool terminal, float gamma, std::span<const float> next_q);

/// Trained per-target networks (one per task) plus training metrics.
struct BaselineRun {
  Checkpoint checkpoint;
  std::vector<MetricsRow> metrics;
  std::int64_t frames = 0;
};

/// Asynchronous one-step Q on one task. Epsilon anneals linearly from
/// q_eps_start to q_eps_end over the first half of the budget; the target
/// network is refreshed every q_target_period frames.
BaselineRun one_step_q_train(const TrainConfig& config, const BaselineConfig& bcfg, const Task& task,
                             std::uint64_t seed);

/// Actor-critic on one task with threads_per_target workers sharing one
/// goal-free network.
BaselineRun per_target_a3c_train(const TrainConfig& config, const Task& task, int threads_per_target,
                                 std::uint64_t seed);

/// Every scene key maps to one shared branch from now on.
ModelParams& single_branch_mode(ModelParams& params);

/// Agents restored from baseline checkpoints (one network per task id).
class GoalFreeAgent final : public Agent {
 public:
  GoalFreeAgent(const Checkpoint& ckpt, bool argmax = false);
  void begin_episode(const Task& task, const Pose& start) override;
  Action act(const AgentInput& input, Rng& rng) override;

 private:
  std::map<int, GoalFreeNet> nets_;
  const GoalFreeNet* current_ = nullptr;
  GoalFreeCache<float> cache_;
  bool argmax_;
};

class QAgent final : public Agent {
 public:
  explicit QAgent(const Checkpoint& ckpt);
  void begin_episode(const Task& task, const Pose& start) override;
  Action act(const AgentInput& input, Rng& rng) override;

 private:
  std::map<int, Mlp> nets_;
  const Mlp* current_ = nullptr;
  MlpCache<float> cache_;
};

/// Merges per-task baseline checkpoints into one file-level checkpoint.
Checkpoint merge_task_checkpoints(const std::string& arch, const std::vector<std::pair<int, Checkpoint>>& parts);

/// Builds the right evaluation agent for any checkpoint this tool writes.
std::unique_ptr<Agent> make_agent(const Checkpoint& ckpt, std::unique_ptr<ModelParams>& model_holder, bool argmax);

}  // namespace navlab
