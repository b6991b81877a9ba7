#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "navlab/optimizer.hpp"

namespace navlab {

/// Everything a training run needs. Keys in the config file carry the same names.
struct TrainConfig {
  std::uint64_t seed = 1;
  std::int64_t frames_budget = 2'000'000;
  int workers = 0;  // 0: one worker per task
  int threads = 1;  // OS threads executing workers; 1 runs workers round-robin
  int t_max = 5;
  double gamma = 0.99;
  double beta = 0.01;
  double lr = 7e-4;
  double rmsprop_decay = 0.99;
  double rmsprop_eps = 0.1;
  double clip_norm = 40.0;
  double slip_prob = 0.0;
  int episode_cap = 500;
  std::int64_t eval_every = 500'000;
  UpdateMode mode = UpdateMode::Serialized;
  bool wall_clock = false;
  bool freeze_core = false;
  bool single_branch = false;
  int d_embed = 32;
  int d_fuse = 32;
  bool goal_first = false;
  int tasks_per_scene = 0;  // 0: every target of every scene

  RmsPropConfig optimizer() const {
    return {static_cast<float>(lr), static_cast<float>(rmsprop_decay), static_cast<float>(rmsprop_eps)};
  }
  /// Throws ValidationError naming the offending key.
  void validate() const;
};

struct SceneConfig {
  std::uint64_t scene_seed = 1000;  // base seed of scenes generated inside experiments
  int scene_count = 5;
  int scene_width = 10;
  int scene_height = 10;
  double obstacle_density = 0.15;
  int targets_per_scene = 15;
  int percept_dim = 64;
  double smoothing = 0.5;
};

struct EvalConfig {
  int eval_episodes = 10;
  int success_cap = 100;
  bool eval_argmax = false;
};

struct BaselineConfig {
  int q_target_period = 2000;
  double q_eps_start = 1.0;
  double q_eps_end = 0.1;
};

struct ExperimentConfig {
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  int exp_scenes = 5;
  int exp_tasks_per_scene = 4;
  std::int64_t target_gen_budget = 1'000'000;
  std::vector<int> target_gen_counts{1, 2, 4, 8};
  std::vector<int> target_gen_distances{1, 2, 4, 8};
  int target_gen_bin_targets = 10;
  int target_gen_episodes = 20;
  std::vector<int> scene_gen_counts{1, 2, 4, 8};
  int scene_gen_test_scenes = 4;
  int scene_gen_targets = 5;
  std::int64_t scene_gen_pretrain_budget = 2'000'000;
  std::int64_t scene_gen_finetune_budget = 1'000'000;
  double scene_gen_threshold = 0.8;
  int scene_gen_window = 50;
  int embedding_max_pairs = 5000;
  int curve_points = 40;
};

/// One flat `key = value` file covers every subcommand.
struct Config {
  TrainConfig train;
  SceneConfig scenes;
  EvalConfig eval;
  BaselineConfig baseline;
  ExperimentConfig exp;

  /// Canonical `key = value` rendering of every key (effective config).
  std::string to_text() const;
  std::uint64_t hash() const;
};

/// Documentation row for one key.
struct ConfigKeyDoc {
  std::string key;
  std::string type;
  std::string default_value;
  std::string description;
};
const std::vector<ConfigKeyDoc>& config_schema();

/// Strict parse: `#` comments, blank lines, `key = value`. Unknown keys,
/// duplicates, type errors and out-of-range values throw ValidationError
/// with line and key context. Missing keys take defaults.
Config parse_config_text(const std::string& text, const std::string& source = "<config>");
Config parse_config(const std::filesystem::path& path);

}  // namespace navlab
