#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "navlab/gridworld.hpp"
#include "navlab/model.hpp"

namespace navlab {

/// One navigation task: reach `goal` in `scene`.
struct Task {
  const Scene* scene = nullptr;
  Pose goal;
  int task_id = 0;
};

/// All targets of all scenes (first `per_scene` of each when positive),
/// numbered in order.
std::vector<Task> make_tasks(std::span<const Scene> scenes, int per_scene = 0);

/// Throws ValidationError unless the goal is one of the scene's targets.
void check_task_targets(std::span<const Task> tasks);

/// What an agent sees at each step. Learned agents only use the stacks;
/// heuristic agents may use the pose and scene map.
struct AgentInput {
  const Task& task;
  const Pose& pose;
  const ObservationStack& state;
  const ObservationStack& goal;
};

class Agent {
 public:
  virtual ~Agent() = default;
  virtual void begin_episode(const Task& /*task*/, const Pose& /*start*/) {}
  virtual Action act(const AgentInput& input, Rng& rng) = 0;
};

/// Uniformly random action every step.
class RandomAgent final : public Agent {
 public:
  Action act(const AgentInput& input, Rng& rng) override;
};

/// Follows a BFS-optimal action sequence using the full map.
class OracleAgent final : public Agent {
 public:
  void begin_episode(const Task& task, const Pose& start) override;
  Action act(const AgentInput& input, Rng& rng) override;

 private:
  const Scene* scene_ = nullptr;
  Pose goal_;
  std::vector<int> to_goal_;
};

/// The target-driven model: actions sampled from pi(s, g), or argmax.
class SiameseAgent final : public Agent {
 public:
  SiameseAgent(ModelParams& params, bool argmax = false);
  void begin_episode(const Task& task, const Pose& start) override;
  Action act(const AgentInput& input, Rng& rng) override;

 private:
  ModelParams& params_;
  bool argmax_;
  SiameseCore core_;
  SceneBranch branch_;
  std::string branch_key_;
  ModelCache<float> cache_;
};

/// Draws an action index from a probability vector (or takes the argmax;
/// ties go to the lowest index).
Action sample_action(std::span<const float> probs, Rng& rng, bool argmax = false);

struct EvalOptions {
  int episodes_per_task = 10;
  int episode_cap = 500;
  int success_cap = 500;
  double slip_prob = 0.0;
};

struct TaskEval {
  int task_id = 0;
  std::string scene_id;
  Pose goal;
  int episodes = 0;
  double mean_length = 0.0;    // failures counted at episode_cap
  double success_rate = 0.0;   // reached within success_cap
  double sp_ratio = 0.0;       // mean of length / shortest path
  double mean_shortest = 0.0;
};

struct EvalReport {
  std::vector<TaskEval> tasks;
  double mean_length = 0.0;
  double success_rate = 0.0;
  double sp_ratio = 0.0;
  double mean_shortest = 0.0;
  std::uint64_t seed = 0;
  std::int64_t frames_used = 0;
  int episodes = 0;
  /// Every episode length in evaluation order.
  std::vector<int> lengths;
};

/// Start poses depend only on (seed, task_id, episode), so every agent
/// evaluated with the same seed faces the same starts.
Pose evaluation_start(const Task& task, int episode, std::uint64_t seed);

EvalReport evaluate(Agent& agent, std::span<const Task> tasks, const EvalOptions& options, std::uint64_t seed);

/// Convenience overload for the target-driven model.
EvalReport evaluate(ModelParams& params, std::span<const Task> tasks, const EvalOptions& options,
                    std::uint64_t seed, bool argmax = false);

void write_eval_csv(const std::string& path, const EvalReport& report);

}  // namespace navlab
