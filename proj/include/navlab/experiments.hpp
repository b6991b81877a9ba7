#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "navlab/baselines.hpp"
#include "navlab/config.hpp"
#include "navlab/evaluate.hpp"
#include "navlab/gridworld.hpp"
#include "navlab/stats.hpp"
#include "navlab/trainer.hpp"

namespace navlab {

using Logger = std::function<void(const std::string&)>;

/// count scenes from SceneConfig's size/density/dims, seeded from base_seed.
std::vector<Scene> generate_suite(const SceneConfig& sc, std::uint64_t base_seed, int count, int targets);

EvalOptions eval_options(const Config& cfg);
/// Seed for evaluation starts and action sampling; shared by every method.
std::uint64_t eval_seed(std::uint64_t seed);

// Comparison methods, in table order.
inline const std::vector<std::string> kComparisonMethods = {"random", "shortest", "q1", "a3c1", "a3c4",
                                                            "single-branch", "final"};
std::string method_label(const std::string& method);
bool is_learned(const std::string& method);

struct MethodRun {
  EvalReport report;
  std::vector<MetricsRow> metrics;  // frames are total frames across all tasks
  Checkpoint checkpoint;            // empty for heuristics
  bool trained = false;
};

/// Trains (if learned) and evaluates one method on the tasks. Per-target
/// methods split frames_budget evenly across tasks.
MethodRun run_method(const std::string& method, const Config& cfg, std::span<const Task> tasks, std::uint64_t seed);

/// Mean episode length of training episodes, binned over [0, budget]. Empty
/// bins repeat the previous value (NaN before the first episode).
std::vector<std::pair<double, double>> learning_curve(const std::vector<MetricsRow>& rows, std::int64_t budget,
                                                      int points);

struct MethodSummary {
  std::string method;
  std::vector<double> lengths;    // per seed
  std::vector<double> successes;  // per seed
  double median_length = 0.0;
  double median_success = 0.0;
};

struct ComparisonResult {
  std::vector<MethodSummary> methods;  // table order
  const MethodSummary& at(const std::string& method) const;
};

ComparisonResult run_baseline_comparison(const Config& cfg, const std::filesystem::path& out_dir,
                                         const Logger& log = {});

struct TargetGenCell {
  int trained = 0;
  int distance = 0;  // 0: the trained targets themselves
  std::vector<double> success;  // per seed; NaN when the bin was empty
  std::vector<int> held_out;    // realized targets per seed
  double median_success = 0.0;  // over non-empty seeds; NaN if none
};

struct TargetGenResult {
  std::vector<TargetGenCell> cells;
  /// Spearman rho between trained count and median success, per distance bin
  /// (NaN when undefined, e.g. constant success).
  std::map<int, double> rho;
  const TargetGenCell* find(int trained, int distance) const;
};

/// Poses whose BFS distance to the nearest of `trained` equals distance.
std::vector<Pose> poses_at_distance(const Scene& scene, std::span<const Pose> trained, int distance);

TargetGenResult run_target_generalization(const Config& cfg, const std::filesystem::path& out_dir,
                                          const Logger& log = {});

/// First frame at which the success rate over the last `window` episodes
/// reaches threshold; nullopt if never.
std::optional<std::int64_t> frames_to_threshold(const std::vector<MetricsRow>& rows, int window, double threshold);

struct SceneGenResult {
  /// condition ("pretrain-<n>", "scratch") -> per-seed median frames-to-threshold
  /// over the test scenes (unreached runs count as the fine-tune budget).
  std::map<std::string, std::vector<double>> frames;
  std::map<std::string, std::vector<int>> reached;  // test scenes reaching threshold, per seed
  std::vector<double> zero_shot_success;            // single branch, per seed
  std::vector<double> random_success;               // random walk on identical tasks, per seed
  double median_frames(const std::string& condition) const;
};

SceneGenResult run_scene_generalization(const Config& cfg, const std::filesystem::path& out_dir,
                                        const Logger& log = {});

struct EmbeddingResult {
  Correlation corr;
  std::vector<Pose> poses;
  std::vector<std::array<double, 2>> projection;
};

/// Correlates shared-stream embedding distances with cell distances over up to
/// max_pairs distinct pose pairs (all pairs if fewer). Throws ValidationError
/// when the embeddings are constant.
EmbeddingResult embedding_geometry(const SiameseCore& core, const Scene& scene, int max_pairs, std::uint64_t seed);
void write_projection_csv(const std::filesystem::path& path, const EmbeddingResult& r);

struct EmbeddingStudy {
  std::vector<Correlation> trained;  // per seed, after training
  std::vector<Correlation> null;     // per seed, untrained core on a smoothing-0 scene
};

EmbeddingStudy run_embedding_study(const Config& cfg, const std::filesystem::path& out_dir, const Logger& log = {});

}  // namespace navlab
