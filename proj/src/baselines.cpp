#include "navlab/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace navlab {

EvalReport random_walk_eval(const Scene& scene, const Pose& goal, int episodes, int episode_cap, std::uint64_t seed) {
  RandomAgent agent;
  const Task task{&scene, goal, 0};
  return evaluate(agent, std::span<const Task>(&task, 1), {episodes, episode_cap, episode_cap, 0.0}, seed);
}

EvalReport shortest_path_eval(const Scene& scene, const Pose& goal, int episodes, std::uint64_t seed) {
  if (!scene.valid(goal)) throw ValidationError("goal " + to_string(goal) + " is not free");
  const auto dist = distances_from(scene, goal);
  int longest = 0;
  for (const Pose& p : scene.free_poses()) {
    const int d = dist[scene.pose_index(p)];
    if (d < 0) throw ValidationError("goal " + to_string(goal) + " is unreachable from " + to_string(p));
    longest = std::max(longest, d);
  }
  OracleAgent agent;
  const Task task{&scene, goal, 0};
  const int cap = std::max(longest, 1);
  return evaluate(agent, std::span<const Task>(&task, 1), {episodes, cap, cap, 0.0}, seed);
}

template <typename T>
std::span<const T> mlp_forward(const BasicMlp<T>& net, std::span<const T> input, MlpCache<T>& cache,
                               bool last_is_final) {
  cache.layers.resize(net.layers.size());
  std::span<const T> x = input;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const auto& layer = net.layers[i];
    auto& c = cache.layers[i];
    c.input.assign(x.begin(), x.end());
    c.pre.resize(layer.rows);
    c.final_layer = last_is_final && i + 1 == net.layers.size();
    cache.output.resize(layer.rows);
    affine_forward_into<T>(layer, c.input, c.final_layer, c.pre, cache.output);
    x = cache.output;
  }
  return cache.output;
}

template <typename T>
void mlp_backward(const BasicMlp<T>& net, const MlpCache<T>& cache, std::span<const T> dout,
                  std::vector<BasicGradBlock<T>>& grads) {
  std::vector<T> upstream(dout.begin(), dout.end());
  std::vector<T> dx, scratch;
  for (std::size_t i = net.layers.size(); i-- > 0;) {
    const auto& layer = net.layers[i];
    const auto& c = cache.layers[i];
    scratch.resize(layer.rows);
    dx.resize(i > 0 ? layer.cols : 0);
    affine_relu_backward<T>(layer, c.input, c.pre, c.final_layer, upstream, grads[i], dx, scratch);
    upstream.swap(dx);
  }
}

template std::span<const float> mlp_forward<float>(const BasicMlp<float>&, std::span<const float>, MlpCache<float>&, bool);
template std::span<const double> mlp_forward<double>(const BasicMlp<double>&, std::span<const double>,
                                                      MlpCache<double>&, bool);
template void mlp_backward<float>(const BasicMlp<float>&, const MlpCache<float>&, std::span<const float>,
                                  std::vector<BasicGradBlock<float>>&);
template void mlp_backward<double>(const BasicMlp<double>&, const MlpCache<double>&, std::span<const double>,
                                   std::vector<BasicGradBlock<double>>&);

GoalFreeNet make_goal_free_net(const ModelDims& dims, Rng& rng, const std::string& prefix) {
  GoalFreeNet net;
  net.trunk.layers.emplace_back(prefix + "embed", dims.embed, dims.stack_dim());
  net.trunk.layers.emplace_back(prefix + "fc", dims.fuse, dims.embed);
  net.trunk.layers.emplace_back(prefix + "fc1", dims.fuse, dims.fuse);
  for (auto& l : net.trunk.layers) init_uniform_fan_in(l, rng);
  net.policy = ParamBlock(prefix + "policy", kNumActions, dims.fuse);
  net.value = ParamBlock(prefix + "value", 1, dims.fuse);
  return net;
}

template <typename T>
BasicPolicyValue<T> goal_free_forward(const BasicGoalFreeNet<T>& net, std::span<const T> state, GoalFreeCache<T>& cache) {
  const auto h = mlp_forward<T>(net.trunk, state, cache.trunk, false);
  std::array<T, kNumActions> pre{};
  affine_forward_into<T>(net.policy, h, true, pre, cache.logits);
  T v[1];
  affine_forward_into<T>(net.value, h, true, cache.value_pre, v);
  BasicPolicyValue<T> out;
  softmax_into<T>(cache.logits, out.probs);
  out.value = v[0];
  return out;
}

template <typename T>
void goal_free_backward(const BasicGoalFreeNet<T>& net, const GoalFreeCache<T>& cache, std::span<const T> dlogits,
                        T dvalue, std::vector<BasicGradBlock<T>>& grads) {
  const std::size_t n = net.trunk.layers.size();
  const std::vector<T>& h = cache.trunk.output;
  std::vector<T> dh(h.size()), dh_v(h.size()), scratch(kNumActions);
  affine_relu_backward<T>(net.policy, h, cache.logits, true, dlogits, grads[n], dh, scratch);
  const T dv[1] = {dvalue};
  affine_relu_backward<T>(net.value, h, cache.value_pre, true, dv, grads[n + 1], dh_v, scratch);
  for (std::size_t i = 0; i < dh.size(); ++i) dh[i] += dh_v[i];
  mlp_backward<T>(net.trunk, cache.trunk, dh, grads);
}

template BasicPolicyValue<float> goal_free_forward<float>(const BasicGoalFreeNet<float>&, std::span<const float>,
                                                          GoalFreeCache<float>&);
template BasicPolicyValue<double> goal_free_forward<double>(const BasicGoalFreeNet<double>&, std::span<const double>,
                                                            GoalFreeCache<double>&);
template void goal_free_backward<float>(const BasicGoalFreeNet<float>&, const GoalFreeCache<float>&,
                                        std::span<const float>, float, std::vector<BasicGradBlock<float>>&);
template void goal_free_backward<double>(const BasicGoalFreeNet<double>&, const GoalFreeCache<double>&,
                                         std::span<const double>, double, std::vector<BasicGradBlock<double>>&);

Mlp make_q_network(const ModelDims& dims, Rng& rng, const std::string& prefix) {
  Mlp net;
  net.layers.emplace_back(prefix + "embed", dims.embed, dims.stack_dim());
  net.layers.emplace_back(prefix + "fc", dims.fuse, dims.embed);
  net.layers.emplace_back(prefix + "q", kNumActions, dims.fuse);
  for (auto& l : net.layers) init_uniform_fan_in(l, rng);
  return net;
}

float one_step_q_target(float reward, bool terminal, float gamma, std::span<const float> next_q) {
  if (terminal) return reward;
  const float best = *std::max_element(next_q.begin(), next_q.end());
  const float y = reward + gamma * best;
  if (!std::isfinite(y)) throw NumericError("non-finite one-step Q target");
  return y;
}

ModelParams& single_branch_mode(ModelParams& params) {
  params.set_single_branch(true);
  return params;
}

namespace {

std::string task_prefix(int task_id) { return "task" + std::to_string(task_id) + "/"; }

ModelDims dims_for(const TrainConfig& config, const Task& task) {
  return {task.scene->percept_dim(), config.d_embed, config.d_fuse, false};
}

void put_dims(Checkpoint& ckpt, const ModelDims& dims) {
  ckpt.meta["percept_dim"] = std::to_string(dims.percept_dim);
  ckpt.meta["history"] = std::to_string(kHistoryFrames);
  ckpt.meta["d_embed"] = std::to_string(dims.embed);
  ckpt.meta["d_fuse"] = std::to_string(dims.fuse);
}

std::vector<int> parse_task_list(const std::string& text) {
  std::vector<int> ids;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) ids.push_back(std::stoi(item));
  }
  return ids;
}

ParamBlock take_block(const Checkpoint& ckpt, const std::string& name) {
  const ParamBlock* b = ckpt.find(name);
  if (!b) throw ValidationError("checkpoint lacks block " + name);
  return *b;
}

class GoalFreeLearner final : public ActorCriticLearner {
 public:
  GoalFreeLearner(ParamStore& store, std::vector<BlockId> ids, const GoalFreeNet& shape, float clip,
                  int t_max)
      : store_(store), ids_(std::move(ids)), net_(shape), clip_(clip), caches_(t_max + 1) {
    for (const auto& l : net_.trunk.layers) grads_.emplace_back(l);
    grads_.emplace_back(net_.policy);
    grads_.emplace_back(net_.value);
  }

  void begin_task(const Task&) override {}

  void sync() override {
    std::vector<ParamBlock*> dst;
    for (auto& l : net_.trunk.layers) dst.push_back(&l);
    dst.push_back(&net_.policy);
    dst.push_back(&net_.value);
    store_.snapshot(ids_, dst);
  }

  PolicyValue forward(int slot, const ObservationStack& state) override {
    return goal_free_forward<float>(net_, state.flat(), caches_[slot]);
  }

  void backward(int slot, std::span<const float> dlogits, float dvalue) override {
    goal_free_backward<float>(net_, caches_[slot], dlogits, dvalue, grads_);
  }

  void apply() override {
    std::vector<GradBlock*> g;
    for (auto& x : grads_) g.push_back(&x);
    clip_global_norm(g, clip_);
    store_.apply(ids_, g);
  }

 private:
  ParamStore& store_;
  std::vector<BlockId> ids_;
  GoalFreeNet net_;
  float clip_;
  std::vector<GoalFreeCache<float>> caches_;
  std::vector<GradBlock> grads_;
};

}  // namespace

BaselineRun per_target_a3c_train(const TrainConfig& config, const Task& task, int threads_per_target,
                                 std::uint64_t seed) {
  if (threads_per_target < 1) throw ValidationError("threads_per_target must be >= 1");
  TrainConfig cfg = config;
  cfg.workers = threads_per_target;
  cfg.seed = seed;
  const ModelDims dims = dims_for(config, task);
  const std::string prefix = task_prefix(task.task_id);
  Rng rng(hash_combine(seed, 0x61336300ULL + static_cast<std::uint64_t>(task.task_id)));
  GoalFreeNet net = make_goal_free_net(dims, rng, prefix);

  ParamStore store(cfg.mode, cfg.optimizer());
  std::vector<BlockId> ids;
  for (const auto& l : net.trunk.layers) ids.push_back(store.add(l));
  ids.push_back(store.add(net.policy));
  ids.push_back(store.add(net.value));

  MetricsSink sink;
  const Task tasks[] = {task};
  const auto stats = run_actor_critic(
      cfg, tasks,
      [&](int) {
        return std::make_unique<GoalFreeLearner>(store, ids, net, static_cast<float>(cfg.clip_norm), cfg.t_max);
      },
      sink);

  BaselineRun run;
  run.metrics = sink.rows();
  run.frames = stats.frames;
  run.checkpoint.meta["arch"] = "goal_free_ac";
  run.checkpoint.meta["tasks"] = std::to_string(task.task_id);
  put_dims(run.checkpoint, dims);
  for (BlockId id : ids) run.checkpoint.blocks.push_back(store.copy(id));
  return run;
}

BaselineRun one_step_q_train(const TrainConfig& config, const BaselineConfig& bcfg, const Task& task,
                             std::uint64_t seed) {
  config.validate();
  const ModelDims dims = dims_for(config, task);
  const std::string prefix = task_prefix(task.task_id);
  Rng init_rng(hash_combine(seed, 0x71310000ULL + static_cast<std::uint64_t>(task.task_id)));
  Mlp local = make_q_network(dims, init_rng, prefix);
  ParamStore store(config.mode, config.optimizer());
  std::vector<BlockId> ids;
  for (const auto& l : local.layers) ids.push_back(store.add(l));
  Mlp target = local;

  std::vector<GradBlock> grads;
  for (const auto& l : local.layers) grads.emplace_back(l);
  std::vector<GradBlock*> grad_ptrs;
  for (auto& g : grads) grad_ptrs.push_back(&g);
  std::vector<ParamBlock*> local_ptrs;
  for (auto& l : local.layers) local_ptrs.push_back(&l);
  std::vector<ParamBlock*> target_ptrs;
  for (auto& l : target.layers) target_ptrs.push_back(&l);

  const Scene& scene = *task.scene;
  Rng rng(hash_combine(seed, 0x776f726bULL));
  MetricsSink sink;
  MlpCache<float> cache, target_cache;
  const float gamma = static_cast<float>(config.gamma);
  const double anneal_frames = std::max<double>(1.0, config.frames_budget / 2.0);

  std::int64_t frames = 0;
  bool in_episode = false;
  Pose pose;
  ObservationStack stack;
  int episode_len = 0;
  float episode_return = 0.0f;
  std::array<float, kNumActions> dq{};

  while (frames < config.frames_budget) {
    if (!in_episode) {
      pose = sample_start(scene, task.goal, rng);
      stack = reset_history(scene.frame(pose));
      episode_len = 0;
      episode_return = 0.0f;
      in_episode = true;
    }
    store.snapshot(ids, local_ptrs);
    for (int t = 0; t < config.t_max; ++t) {
      const double progress = std::min(1.0, frames / anneal_frames);
      const double eps = bcfg.q_eps_start + (bcfg.q_eps_end - bcfg.q_eps_start) * progress;
      const auto q = mlp_forward<float>(local, stack.flat(), cache);
      Action a;
      if (rng.uniform() < eps) {
        a = static_cast<Action>(rng.below(kNumActions));
      } else {
        a = static_cast<Action>(std::max_element(q.begin(), q.end()) - q.begin());
      }
      const float q_sa = q[static_cast<int>(a)];
      const StepOutcome out = step(scene, pose, a, task.goal, config.slip_prob, rng);
      ++frames;
      ++episode_len;
      episode_return += out.reward;
      pose = out.next_pose;
      if (!out.done) stack.push(scene.frame(pose));
      float y = out.reward;
      if (!out.done) y = one_step_q_target(out.reward, false, gamma, mlp_forward<float>(target, stack.flat(), target_cache));
      dq.fill(0.0f);
      dq[static_cast<int>(a)] = -2.0f * (y - q_sa);
      mlp_backward<float>(local, cache, dq, grads);
      if (frames % bcfg.q_target_period == 0) {
        // Refresh after applying what has accumulated so far.
        clip_global_norm(grad_ptrs, static_cast<float>(config.clip_norm));
        store.apply(ids, grad_ptrs);
        store.snapshot(ids, target_ptrs);
        store.snapshot(ids, local_ptrs);
      }
      const bool capped = episode_len >= config.episode_cap;
      if (out.done || capped) {
        MetricsRow row;
        row.frames = frames;
        row.task_id = task.task_id;
        row.episode_len = episode_len;
        row.episode_return = episode_return;
        row.success = out.done;
        sink.append(row);
        in_episode = false;
        break;
      }
      if (frames >= config.frames_budget) break;
    }
    clip_global_norm(grad_ptrs, static_cast<float>(config.clip_norm));
    store.apply(ids, grad_ptrs);
  }

  BaselineRun run;
  run.metrics = sink.rows();
  run.frames = frames;
  run.checkpoint.meta["arch"] = "q_network";
  run.checkpoint.meta["tasks"] = std::to_string(task.task_id);
  put_dims(run.checkpoint, dims);
  for (BlockId id : ids) run.checkpoint.blocks.push_back(store.copy(id));
  return run;
}

Checkpoint merge_task_checkpoints(const std::string& arch, const std::vector<std::pair<int, Checkpoint>>& parts) {
  Checkpoint out;
  out.meta["arch"] = arch;
  std::string tasks;
  for (const auto& [id, ckpt] : parts) {
    if (ckpt.require("arch") != arch) throw ValidationError("cannot merge checkpoints of different architectures");
    for (const char* k : {"percept_dim", "history", "d_embed", "d_fuse"}) out.meta[k] = ckpt.require(k);
    tasks += (tasks.empty() ? "" : ",") + std::to_string(id);
    out.blocks.insert(out.blocks.end(), ckpt.blocks.begin(), ckpt.blocks.end());
  }
  out.meta["tasks"] = tasks;
  return out;
}

GoalFreeAgent::GoalFreeAgent(const Checkpoint& ckpt, bool argmax) : argmax_(argmax) {
  if (ckpt.require("arch") != "goal_free_ac") throw ValidationError("checkpoint is not a per-target actor-critic");
  for (int id : parse_task_list(ckpt.require("tasks"))) {
    const std::string p = task_prefix(id);
    GoalFreeNet net;
    for (const char* name : {"embed", "fc", "fc1"}) net.trunk.layers.push_back(take_block(ckpt, p + name));
    net.policy = take_block(ckpt, p + "policy");
    net.value = take_block(ckpt, p + "value");
    nets_.emplace(id, std::move(net));
  }
}

void GoalFreeAgent::begin_episode(const Task& task, const Pose&) {
  auto it = nets_.find(task.task_id);
  if (it == nets_.end()) throw ValidationError("no per-target network for task " + std::to_string(task.task_id));
  current_ = &it->second;
}

Action GoalFreeAgent::act(const AgentInput& input, Rng& rng) {
  const PolicyValue pv = goal_free_forward<float>(*current_, input.state.flat(), cache_);
  return sample_action(pv.probs, rng, argmax_);
}

QAgent::QAgent(const Checkpoint& ckpt) {
  if (ckpt.require("arch") != "q_network") throw ValidationError("checkpoint is not a Q-network");
  for (int id : parse_task_list(ckpt.require("tasks"))) {
    const std::string p = task_prefix(id);
    Mlp net;
    for (const char* name : {"embed", "fc", "q"}) net.layers.push_back(take_block(ckpt, p + name));
    nets_.emplace(id, std::move(net));
  }
}

void QAgent::begin_episode(const Task& task, const Pose&) {
  auto it = nets_.find(task.task_id);
  if (it == nets_.end()) throw ValidationError("no Q-network for task " + std::to_string(task.task_id));
  current_ = &it->second;
}

Action QAgent::act(const AgentInput& input, Rng&) {
  const auto q = mlp_forward<float>(*current_, input.state.flat(), cache_);
  return static_cast<Action>(std::max_element(q.begin(), q.end()) - q.begin());
}

std::unique_ptr<Agent> make_agent(const Checkpoint& ckpt, std::unique_ptr<ModelParams>& model_holder, bool argmax) {
  const std::string& arch = ckpt.require("arch");
  if (arch == "siamese") {
    model_holder = ModelParams::from_checkpoint(ckpt, UpdateMode::Serialized, RmsPropConfig{});
    return std::make_unique<SiameseAgent>(*model_holder, argmax);
  }
  if (arch == "goal_free_ac") return std::make_unique<GoalFreeAgent>(ckpt, argmax);
  if (arch == "q_network") return std::make_unique<QAgent>(ckpt);
  throw ValidationError("unknown checkpoint architecture '" + arch + "'");
}

}  // namespace navlab
