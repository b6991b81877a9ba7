#include "navlab/evaluate.hpp"

#include <cstdio>
#include <fstream>

namespace navlab {

std::vector<Task> make_tasks(std::span<const Scene> scenes, int per_scene) {
  std::vector<Task> tasks;
  for (const Scene& s : scenes) {
    const int n = per_scene > 0 ? std::min<int>(per_scene, static_cast<int>(s.targets().size()))
                                : static_cast<int>(s.targets().size());
    for (int i = 0; i < n; ++i) tasks.push_back({&s, s.targets()[i], static_cast<int>(tasks.size())});
  }
  return tasks;
}

void check_task_targets(std::span<const Task> tasks) {
  if (tasks.empty()) throw ValidationError("at least one task is required");
  for (const Task& t : tasks) {
    if (!t.scene) throw ValidationError("task without scene");
    const auto& targets = t.scene->targets();
    if (std::find(targets.begin(), targets.end(), t.goal) == targets.end()) {
      throw ValidationError("task " + std::to_string(t.task_id) + ": goal " + to_string(t.goal) +
                            " is not a target of scene " + t.scene->id());
    }
  }
}

Action sample_action(std::span<const float> probs, Rng& rng, bool argmax) {
  if (argmax) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(probs.size()); ++i) {
      if (probs[i] > probs[best]) best = i;
    }
    return static_cast<Action>(best);
  }
  const double u = rng.uniform();
  double acc = 0.0;
  int last_positive = 0;
  for (int i = 0; i < static_cast<int>(probs.size()); ++i) {
    if (probs[i] <= 0.0f) continue;
    last_positive = i;
    acc += probs[i];
    if (u < acc) return static_cast<Action>(i);
  }
  return static_cast<Action>(last_positive);
}

Action RandomAgent::act(const AgentInput&, Rng& rng) { return static_cast<Action>(rng.below(kNumActions)); }

void OracleAgent::begin_episode(const Task& task, const Pose&) {
  if (scene_ != task.scene || !(goal_ == task.goal)) {
    scene_ = task.scene;
    goal_ = task.goal;
    // The pose graph is symmetric (moves and turns are invertible), so
    // distances from the goal equal distances to it.
    to_goal_ = distances_from(*scene_, goal_);
  }
}

Action OracleAgent::act(const AgentInput& input, Rng&) {
  const int here = to_goal_[scene_->pose_index(input.pose)];
  for (Action a : kAllActions) {
    const Pose next = apply_action(*scene_, input.pose, a, goal_).next_pose;
    const int d = to_goal_[scene_->pose_index(next)];
    if (d >= 0 && d == here - 1) return a;
  }
  throw Error("oracle agent: goal unreachable from " + to_string(input.pose));
}

SiameseAgent::SiameseAgent(ModelParams& params, bool argmax) : params_(params), argmax_(argmax) {
  params_.snapshot_core(core_);
}

void SiameseAgent::begin_episode(const Task& task, const Pose&) {
  const BranchIds ids = params_.branch_for(task.scene->id(), false);
  if (ids.key != branch_key_) {
    params_.snapshot_branch(ids, branch_);
    branch_key_ = ids.key;
  }
}

Action SiameseAgent::act(const AgentInput& input, Rng& rng) {
  const PolicyValue pv = model_forward(core_, branch_, input.state, input.goal, cache_, params_.dims().goal_first);
  return sample_action(pv.probs, rng, argmax_);
}

Pose evaluation_start(const Task& task, int episode, std::uint64_t seed) {
  Rng rng(hash_combine(hash_combine(seed, static_cast<std::uint64_t>(task.task_id)), static_cast<std::uint64_t>(episode)));
  return sample_start(*task.scene, task.goal, rng);
}

EvalReport evaluate(Agent& agent, std::span<const Task> tasks, const EvalOptions& options, std::uint64_t seed) {
  if (options.episodes_per_task < 1 || options.episode_cap < 1) throw ValidationError("evaluation needs episodes and a cap");
  EvalReport report;
  report.seed = seed;
  double total_len = 0, total_ratio = 0, total_short = 0;
  int total_success = 0;
  for (const Task& task : tasks) {
    const Scene& scene = *task.scene;
    if (!scene.valid(task.goal)) throw ValidationError("evaluation goal " + to_string(task.goal) + " is not free");
    const auto from_goal = distances_from(scene, task.goal);
    const ObservationStack goal_stack = make_goal_stack(scene, task.goal);
    TaskEval te;
    te.task_id = task.task_id;
    te.scene_id = scene.id();
    te.goal = task.goal;
    double len_sum = 0, ratio_sum = 0, short_sum = 0;
    int successes = 0;
    for (int ep = 0; ep < options.episodes_per_task; ++ep) {
      const Pose start = evaluation_start(task, ep, seed);
      const int shortest = from_goal[scene.pose_index(start)];
      if (shortest <= 0) throw ValidationError("goal " + to_string(task.goal) + " unreachable from start");
      Rng rng(hash_combine(hash_combine(seed ^ 0x5eedULL, static_cast<std::uint64_t>(task.task_id)),
                           static_cast<std::uint64_t>(ep)));
      agent.begin_episode(task, start);
      Pose pose = start;
      ObservationStack state = reset_history(scene.frame(pose));
      int steps = 0;
      bool reached = false;
      while (steps < options.episode_cap) {
        const Action a = agent.act(AgentInput{task, pose, state, goal_stack}, rng);
        const StepOutcome out = step(scene, pose, a, task.goal, options.slip_prob, rng);
        ++steps;
        pose = out.next_pose;
        if (out.done) {
          reached = true;
          break;
        }
        state.push(scene.frame(pose));
      }
      const int length = reached ? steps : options.episode_cap;
      len_sum += length;
      ratio_sum += static_cast<double>(length) / shortest;
      short_sum += shortest;
      if (reached && steps <= options.success_cap) ++successes;
      report.frames_used += steps;
      report.lengths.push_back(length);
    }
    const double n = options.episodes_per_task;
    te.episodes = options.episodes_per_task;
    te.mean_length = len_sum / n;
    te.success_rate = successes / n;
    te.sp_ratio = ratio_sum / n;
    te.mean_shortest = short_sum / n;
    total_len += len_sum;
    total_ratio += ratio_sum;
    total_short += short_sum;
    total_success += successes;
    report.episodes += options.episodes_per_task;
    report.tasks.push_back(te);
  }
  if (report.episodes > 0) {
    report.mean_length = total_len / report.episodes;
    report.success_rate = static_cast<double>(total_success) / report.episodes;
    report.sp_ratio = total_ratio / report.episodes;
    report.mean_shortest = total_short / report.episodes;
  }
  return report;
}

EvalReport evaluate(ModelParams& params, std::span<const Task> tasks, const EvalOptions& options, std::uint64_t seed,
                    bool argmax) {
  SiameseAgent agent(params, argmax);
  return evaluate(agent, tasks, options, seed);
}

void write_eval_csv(const std::string& path, const EvalReport& report) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << "task_id,scene_id,goal,episodes,mean_length,success_rate,sp_ratio,mean_shortest\n";
  char buf[256];
  for (const auto& t : report.tasks) {
    std::snprintf(buf, sizeof buf, "%d,%s,%d:%d:%c,%d,%.4f,%.4f,%.4f,%.4f\n", t.task_id, t.scene_id.c_str(), t.goal.x,
                  t.goal.y, heading_char(t.goal.heading), t.episodes, t.mean_length, t.success_rate, t.sp_ratio,
                  t.mean_shortest);
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "all,all,all,%d,%.4f,%.4f,%.4f,%.4f\n", report.episodes, report.mean_length,
                report.success_rate, report.sp_ratio, report.mean_shortest);
  out << buf;
}

}  // namespace navlab
