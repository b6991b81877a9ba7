#include "navlab/trainer.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <sstream>
#include <thread>

namespace navlab {

std::string format_metrics_row(const MetricsRow& row) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%lld,%d,%d,%.4f,%d,%lld", static_cast<long long>(row.frames), row.task_id,
                row.episode_len, static_cast<double>(row.episode_return), row.success ? 1 : 0,
                static_cast<long long>(row.wall_ms));
  return buf;
}

std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open metrics file " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) {
    throw ValidationError(path.string() + ":1: expected header '" + std::string(kMetricsHeader) + "'");
  }
  std::vector<MetricsRow> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    MetricsRow r;
    long long frames = 0, wall = 0;
    int success = 0;
    double ret = 0;
    char tail = 0;
    if (std::sscanf(line.c_str(), "%lld,%d,%d,%lf,%d,%lld%c", &frames, &r.task_id, &r.episode_len, &ret, &success,
                    &wall, &tail) != 6) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": malformed metrics row");
    }
    r.frames = frames;
    r.wall_ms = wall;
    r.success = success != 0;
    r.episode_return = static_cast<float>(ret);
    rows.push_back(r);
  }
  return rows;
}

MetricsSink::MetricsSink(const std::filesystem::path& csv_path) {
  file_.emplace(csv_path);
  if (!*file_) throw Error("cannot write metrics file " + csv_path.string());
  *file_ << kMetricsHeader << '\n' << std::flush;
}

void MetricsSink::append(const MetricsRow& row) {
  std::lock_guard lock(mu_);
  rows_.push_back(row);
  if (file_) *file_ << format_metrics_row(row) << '\n' << std::flush;
  if (stop_rule_ && !stopped_.load() && stop_rule_(rows_)) stopped_ = true;
}

void MetricsSink::set_stop_rule(std::function<bool(const std::vector<MetricsRow>&)> rule) {
  std::lock_guard lock(mu_);
  stop_rule_ = std::move(rule);
}

std::vector<MetricsRow> MetricsSink::rows() const {
  std::lock_guard lock(mu_);
  return rows_;
}

std::vector<std::vector<int>> assign_tasks(int workers, int tasks) {
  std::vector<std::vector<int>> out(workers);
  if (tasks >= workers) {
    for (int t = 0; t < tasks; ++t) out[t % workers].push_back(t);
  } else {
    for (int w = 0; w < workers; ++w) out[w].push_back(w % tasks);
  }
  return out;
}

int resolve_workers(const TrainConfig& config, std::size_t tasks) {
  return config.workers > 0 ? config.workers : static_cast<int>(tasks);
}

int resolve_threads(const TrainConfig& config, int workers) {
  int threads = std::min(config.threads, workers);
  if (const char* cap = std::getenv("NAVLAB_THREADS")) {
    const int limit = std::atoi(cap);
    if (limit >= 1) threads = std::min(threads, limit);
  }
  return std::max(threads, 1);
}

namespace {

struct WorkerState {
  int index = 0;
  std::unique_ptr<ActorCriticLearner> learner;
  Rng rng;
  std::vector<int> task_cycle;
  std::size_t cycle_pos = 0;
  const Task* task = nullptr;
  bool in_episode = false;
  Pose pose;
  ObservationStack stack;
  int episode_len = 0;
  float episode_return = 0.0f;
  std::int64_t frames = 0;

  // rollout buffers
  std::vector<float> probs, values, rewards;
  std::vector<Action> actions;
};

class Runner {
 public:
  Runner(const TrainConfig& config, std::span<const Task> tasks, MetricsSink& sink, const CheckpointHook& hook)
      : config_(config), tasks_(tasks), sink_(sink), hook_(hook), start_(std::chrono::steady_clock::now()) {
    next_checkpoint_ = config.eval_every > 0 ? config.eval_every : -1;
  }

  void start_episode(WorkerState& w) {
    if (!w.task || w.task_cycle.size() > 1) {
      w.task = &tasks_[w.task_cycle[w.cycle_pos]];
      w.cycle_pos = (w.cycle_pos + 1) % w.task_cycle.size();
      w.learner->begin_task(*w.task);
    }
    w.pose = sample_start(*w.task->scene, w.task->goal, w.rng);
    w.stack = reset_history(w.task->scene->frame(w.pose));
    w.episode_len = 0;
    w.episode_return = 0.0f;
    w.in_episode = true;
  }

  // Returns false once the budget is exhausted.
  bool rollout(WorkerState& w) {
    if (counter_.load() >= config_.frames_budget || stop_.load() || sink_.stop_requested()) return false;
    if (!w.in_episode) start_episode(w);
    const Scene& scene = *w.task->scene;
    w.learner->sync();
    w.probs.clear();
    w.values.clear();
    w.rewards.clear();
    w.actions.clear();
    bool terminal = false;
    bool capped = false;
    std::int64_t frames_now = 0;
    for (int t = 0; t < config_.t_max; ++t) {
      const PolicyValue pv = w.learner->forward(t, w.stack);
      const Action a = sample_action(pv.probs, w.rng);
      const StepOutcome out = step(scene, w.pose, a, w.task->goal, config_.slip_prob, w.rng);
      w.probs.insert(w.probs.end(), pv.probs.begin(), pv.probs.end());
      w.values.push_back(pv.value);
      w.actions.push_back(a);
      w.rewards.push_back(out.reward);
      frames_now = ++counter_;
      ++w.frames;
      ++w.episode_len;
      w.episode_return += out.reward;
      w.pose = out.next_pose;
      if (out.done) {
        terminal = true;
        break;
      }
      w.stack.push(scene.frame(w.pose));
      if (w.episode_len >= config_.episode_cap) {
        capped = true;
        break;
      }
    }
    float bootstrap = 0.0f;
    if (!terminal) bootstrap = w.learner->forward(config_.t_max, w.stack).value;
    const auto returns = n_step_returns<float>(w.rewards, bootstrap, terminal, static_cast<float>(config_.gamma));
    A3cLoss<float> loss;
    try {
      loss = a3c_loss_and_grads<float>(w.probs, w.values, w.actions, returns, static_cast<float>(config_.beta));
    } catch (const NumericError& e) {
      throw NumericError(diagnostics(w, e.what()));
    }
    if (!std::isfinite(loss.total)) throw NumericError(diagnostics(w, "non-finite loss"));
    for (std::size_t t = 0; t < w.values.size(); ++t) {
      w.learner->backward(static_cast<int>(t),
                          std::span<const float>(loss.dlogits).subspan(t * kNumActions, kNumActions),
                          loss.dvalues[t]);
    }
    w.learner->apply();
    ++updates_;

    if (terminal || capped) {
      MetricsRow row;
      row.frames = frames_now;
      row.task_id = w.task->task_id;
      row.episode_len = w.episode_len;
      row.episode_return = w.episode_return;
      row.success = terminal;
      row.worker = w.index;
      if (config_.wall_clock) {
        row.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start_)
                          .count();
      }
      sink_.append(row);
      ++episodes_;
      w.in_episode = false;
    }
    maybe_checkpoint();
    return true;
  }

  void maybe_checkpoint() {
    if (!hook_ || next_checkpoint_ < 0) return;
    const std::int64_t now = counter_.load();
    std::lock_guard lock(checkpoint_mu_);
    if (now < next_checkpoint_ || now >= config_.frames_budget) return;
    while (next_checkpoint_ <= now) next_checkpoint_ += config_.eval_every;
    hook_(now);
  }

  std::string diagnostics(const WorkerState& w, const std::string& what) const {
    std::ostringstream os;
    os << "worker " << w.index << " task " << w.task->task_id << " at frame " << counter_.load() << ": " << what
       << " (values:";
    for (float v : w.values) os << ' ' << v;
    os << "; rewards:";
    for (float r : w.rewards) os << ' ' << r;
    os << ')';
    return os.str();
  }

  std::atomic<std::int64_t> counter_{0};
  std::atomic<bool> stop_{false};
  std::atomic<int> episodes_{0};
  std::atomic<int> updates_{0};

 private:
  const TrainConfig& config_;
  std::span<const Task> tasks_;
  MetricsSink& sink_;
  const CheckpointHook& hook_;
  std::chrono::steady_clock::time_point start_;
  std::mutex checkpoint_mu_;
  std::int64_t next_checkpoint_;
};

}  // namespace

RunStats run_actor_critic(const TrainConfig& config, std::span<const Task> tasks, const LearnerFactory& factory,
                          MetricsSink& sink, const CheckpointHook& on_checkpoint) {
  config.validate();
  if (tasks.empty()) throw ValidationError("training needs at least one task");
  const int n_workers = resolve_workers(config, tasks.size());
  const int n_threads = resolve_threads(config, n_workers);
  const auto assignment = assign_tasks(n_workers, static_cast<int>(tasks.size()));

  std::vector<WorkerState> workers(n_workers);
  for (int i = 0; i < n_workers; ++i) {
    workers[i].index = i;
    workers[i].learner = factory(i);
    workers[i].rng = Rng(hash_combine(config.seed, 0x776f726bULL + static_cast<std::uint64_t>(i)));
    workers[i].task_cycle = assignment[i];
  }

  Runner runner(config, tasks, sink, on_checkpoint);
  auto drive = [&](int thread_index) {
    bool active = true;
    while (active) {
      active = false;
      for (int i = thread_index; i < n_workers; i += n_threads) {
        if (runner.rollout(workers[i])) active = true;
      }
    }
  };

  if (n_threads == 1) {
    drive(0);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(n_threads);
    for (int t = 0; t < n_threads; ++t) {
      pool.emplace_back([&, t] {
        try {
          drive(t);
        } catch (...) {
          errors[t] = std::current_exception();
          runner.stop_ = true;
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  RunStats stats;
  stats.frames = runner.counter_.load();
  stats.episodes = runner.episodes_.load();
  stats.updates = runner.updates_.load();
  for (const auto& w : workers) stats.worker_frames.push_back(w.frames);
  return stats;
}

namespace {

class SiameseLearner final : public ActorCriticLearner {
 public:
  SiameseLearner(ModelParams& params, const TrainConfig& config)
      : params_(params), freeze_core_(config.freeze_core), clip_(static_cast<float>(config.clip_norm)),
        goal_first_(params.dims().goal_first), caches_(config.t_max + 1) {}

  void begin_task(const Task& task) override {
    ids_ = params_.branch_for(task.scene->id(), true);
    goal_ = make_goal_stack(*task.scene, task.goal);
    have_branch_ = false;
  }

  void sync() override {
    if (!freeze_core_ || !have_core_) {
      params_.snapshot_core(core_);
      have_core_ = true;
    }
    params_.snapshot_branch(ids_, branch_);
    have_branch_ = true;
    if (grads_.embed.rows == 0) grads_ = ModelGrads(core_, branch_);
  }

  PolicyValue forward(int slot, const ObservationStack& state) override {
    return model_forward<float>(core_, branch_, state.flat(), goal_.flat(), caches_[slot], goal_first_);
  }

  void backward(int slot, std::span<const float> dlogits, float dvalue) override {
    model_backward<float>(core_, branch_, caches_[slot], dlogits, dvalue, grads_, scratch_, !freeze_core_);
  }

  void apply() override {
    if (freeze_core_) {
      GradBlock* g[] = {&grads_.fc1, &grads_.policy, &grads_.value};
      clip_global_norm(g, clip_);
      const BlockId ids[] = {ids_.fc1, ids_.policy, ids_.value};
      params_.store().apply(ids, g);
    } else {
      GradBlock* g[] = {&grads_.embed, &grads_.fusion, &grads_.fc1, &grads_.policy, &grads_.value};
      clip_global_norm(g, clip_);
      const BlockId ids[] = {params_.embed_id(), params_.fusion_id(), ids_.fc1, ids_.policy, ids_.value};
      params_.store().apply(ids, g);
    }
  }

 private:
  ModelParams& params_;
  bool freeze_core_;
  float clip_;
  bool goal_first_;
  BranchIds ids_;
  ObservationStack goal_;
  SiameseCore core_;
  SceneBranch branch_;
  bool have_core_ = false;
  bool have_branch_ = false;
  ModelGrads grads_;
  BackwardScratch<float> scratch_;
  std::vector<ModelCache<float>> caches_;
};

}  // namespace

std::unique_ptr<ActorCriticLearner> make_siamese_learner(ModelParams& params, const TrainConfig& config) {
  return std::make_unique<SiameseLearner>(params, config);
}

std::unique_ptr<ModelParams> make_model(const TrainConfig& config, int percept_dim, const Checkpoint* init) {
  if (init) {
    auto params = ModelParams::from_checkpoint(*init, config.mode, config.optimizer());
    if (params->dims().percept_dim != percept_dim) {
      throw ValidationError("checkpoint percept_dim " + std::to_string(params->dims().percept_dim) +
                            " does not match scenes (" + std::to_string(percept_dim) + ")");
    }
    if (config.single_branch) params->set_single_branch(true);
    return params;
  }
  ModelDims dims{percept_dim, config.d_embed, config.d_fuse, config.goal_first};
  return std::make_unique<ModelParams>(dims, config.mode, config.optimizer(), hash_combine(config.seed, 0x696e6974ULL),
                                       config.single_branch);
}

TrainResult train(const TrainConfig& config, std::span<const Task> tasks, ModelParams& params, MetricsSink* sink,
                  const CheckpointHook& on_checkpoint) {
  check_task_targets(tasks);
  for (const Task& t : tasks) {
    if (t.scene->percept_dim() != params.dims().percept_dim) {
      throw ValidationError("scene " + t.scene->id() + " percept_dim does not match the model");
    }
    // Create branches up front so creation order is fixed.
    params.branch_for(t.scene->id(), true);
  }
  MetricsSink local;
  MetricsSink& out = sink ? *sink : local;
  TrainResult result;
  result.stats = run_actor_critic(
      config, tasks, [&](int) { return make_siamese_learner(params, config); }, out, on_checkpoint);
  result.metrics = out.rows();
  result.checkpoint = params.to_checkpoint();
  return result;
}

TrainResult train(const TrainConfig& config, std::span<const Task> tasks, const Checkpoint* init) {
  if (tasks.empty()) throw ValidationError("training needs at least one task");
  auto params = make_model(config, tasks.front().scene->percept_dim(), init);
  return train(config, tasks, *params);
}

}  // namespace navlab
