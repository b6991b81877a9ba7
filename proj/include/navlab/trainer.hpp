#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "navlab/checkpoint.hpp"
#include "navlab/config.hpp"
#include "navlab/evaluate.hpp"
#include "navlab/model.hpp"

namespace navlab {

/// One finished training episode.
struct MetricsRow {
  std::int64_t frames = 0;  // global frame counter when the episode ended
  int task_id = 0;
  int episode_len = 0;
  float episode_return = 0.0f;
  bool success = false;
  std::int64_t wall_ms = 0;
  int worker = 0;  // not written to CSV

  friend bool operator==(const MetricsRow&, const MetricsRow&) = default;
};

inline constexpr const char* kMetricsHeader = "frames,task_id,episode_len,return,success,wall_ms";
std::string format_metrics_row(const MetricsRow& row);
/// Parses a metrics CSV (header checked). Throws ValidationError with the line number on malformed rows.
std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path);

/// Append-only metrics log shared by all workers. Writes are serialized and
/// each row is flushed as soon as it is appended.
class MetricsSink {
 public:
  MetricsSink() = default;
  explicit MetricsSink(const std::filesystem::path& csv_path);

  void append(const MetricsRow& row);
  std::vector<MetricsRow> rows() const;

  /// Checked after every appended row; once it returns true, training stops
  /// at the next rollout boundary.
  void set_stop_rule(std::function<bool(const std::vector<MetricsRow>&)> rule);
  bool stop_requested() const { return stopped_.load(); }

 private:
  mutable std::mutex mu_;
  std::vector<MetricsRow> rows_;
  std::function<bool(const std::vector<MetricsRow>&)> stop_rule_;
  std::atomic<bool> stopped_{false};
  std::optional<std::ofstream> file_;
};

/// A worker's handle on a shared actor-critic network. Slots index the
/// activations of the current rollout (slot t_max holds the bootstrap state).
class ActorCriticLearner {
 public:
  virtual ~ActorCriticLearner() = default;
  virtual void begin_task(const Task& task) = 0;
  /// Copies the current shared parameters into the worker's local network.
  virtual void sync() = 0;
  virtual PolicyValue forward(int slot, const ObservationStack& state) = 0;
  virtual void backward(int slot, std::span<const float> dlogits, float dvalue) = 0;
  /// Clips and applies the accumulated gradients to the shared store.
  virtual void apply() = 0;
};

using LearnerFactory = std::function<std::unique_ptr<ActorCriticLearner>(int worker)>;
using CheckpointHook = std::function<void(std::int64_t frames)>;

struct RunStats {
  std::int64_t frames = 0;
  std::vector<std::int64_t> worker_frames;
  int episodes = 0;
  int updates = 0;
};

/// Task indices assigned to each worker: worker w owns tasks w, w+W, ... when
/// there are at least as many tasks as workers, otherwise task w mod N.
std::vector<std::vector<int>> assign_tasks(int workers, int tasks);

/// Effective worker/thread counts (workers = 0 means one per task; the
/// NAVLAB_THREADS environment variable caps threads).
int resolve_workers(const TrainConfig& config, std::size_t tasks);
int resolve_threads(const TrainConfig& config, int workers);

/// Asynchronous n-step actor-critic over any learner. Each worker rolls out
/// t_max steps, computes n-step returns (bootstrapped unless terminal),
/// backpropagates the loss and applies a shared update, until the global
/// frame counter reaches the budget.
RunStats run_actor_critic(const TrainConfig& config, std::span<const Task> tasks, const LearnerFactory& factory,
                          MetricsSink& sink, const CheckpointHook& on_checkpoint = {});

/// Learner for the target-driven siamese model.
std::unique_ptr<ActorCriticLearner> make_siamese_learner(ModelParams& params, const TrainConfig& config);

std::unique_ptr<ModelParams> make_model(const TrainConfig& config, int percept_dim, const Checkpoint* init = nullptr);

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<MetricsRow> metrics;
  RunStats stats;
};

/// Trains the target-driven model in place on tasks (which may span scenes).
/// freeze_core comes from config.freeze_core.
TrainResult train(const TrainConfig& config, std::span<const Task> tasks, ModelParams& params,
                  MetricsSink* sink = nullptr, const CheckpointHook& on_checkpoint = {});

/// Builds a fresh model (or one loaded from init) and trains it.
TrainResult train(const TrainConfig& config, std::span<const Task> tasks, const Checkpoint* init = nullptr);

}  // namespace navlab
