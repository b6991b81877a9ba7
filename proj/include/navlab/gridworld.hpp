#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "navlab/rng.hpp"

namespace navlab {

/// Headings in clockwise order. N points along +y.
enum class Heading : std::uint8_t { N = 0, E = 1, S = 2, W = 3 };

/// Index order is fixed: it is the policy head's output order.
enum class Action : std::uint8_t { MoveForward = 0, MoveBackward = 1, TurnLeft = 2, TurnRight = 3 };

inline constexpr int kNumActions = 4;
inline constexpr int kNumHeadings = 4;
inline constexpr float kGoalReward = 10.0f;
inline constexpr float kStepPenalty = -0.01f;

constexpr std::array<Action, kNumActions> kAllActions{Action::MoveForward, Action::MoveBackward,
                                                      Action::TurnLeft, Action::TurnRight};

struct Pose {
  int x = 0;
  int y = 0;
  Heading heading = Heading::N;

  friend bool operator==(const Pose&, const Pose&) = default;
};

std::string to_string(const Pose& pose);
char heading_char(Heading h);

constexpr Heading turn_left(Heading h) {
  return static_cast<Heading>((static_cast<int>(h) + 3) % kNumHeadings);
}
constexpr Heading turn_right(Heading h) {
  return static_cast<Heading>((static_cast<int>(h) + 1) % kNumHeadings);
}

struct StepOutcome {
  Pose next_pose;
  float reward = kStepPenalty;
  bool done = false;
  bool collided = false;
};

/// Arguments to generate_scene.
struct SceneSpec {
  std::uint64_t seed = 0;
  int width = 10;
  int height = 10;
  double obstacle_density = 0.15;
  int n_targets = 15;
  int percept_dim = 64;
  double smoothing = 0.5;
  std::string id;  // empty: derived from the seed
};

/// An immutable navigation environment. Perception frames for every pose are
/// synthesized once at construction from feature_seed; they are never stored
/// on disk.
class Scene {
 public:
  /// Validates every invariant (mask size, targets on free cells, targets
  /// reachable from all free cells). Throws ValidationError otherwise.
  Scene(std::string id, int width, int height, std::vector<std::uint8_t> blocked,
        double smoothing, int percept_dim, std::uint64_t feature_seed,
        std::vector<Pose> targets, std::uint64_t generation_seed = 0,
        double obstacle_density = 0.0);

  const std::string& id() const { return id_; }
  int width() const { return width_; }
  int height() const { return height_; }
  int percept_dim() const { return percept_dim_; }
  double smoothing() const { return smoothing_; }
  std::uint64_t feature_seed() const { return feature_seed_; }
  std::uint64_t generation_seed() const { return generation_seed_; }
  double obstacle_density() const { return obstacle_density_; }
  const std::vector<Pose>& targets() const { return targets_; }
  const std::vector<std::uint8_t>& obstacle_mask() const { return blocked_; }

  bool in_bounds(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }
  bool blocked(int x, int y) const { return blocked_[static_cast<std::size_t>(y) * width_ + x] != 0; }
  bool valid(const Pose& p) const { return in_bounds(p.x, p.y) && !blocked(p.x, p.y); }

  /// Dense index over all (cell, heading) slots, free or not.
  int pose_index(const Pose& p) const { return ((p.y * width_) + p.x) * kNumHeadings + static_cast<int>(p.heading); }
  Pose pose_at(int index) const;
  int pose_slots() const { return width_ * height_ * kNumHeadings; }

  const std::vector<Pose>& free_poses() const { return free_poses_; }
  int free_cell_count() const { return static_cast<int>(free_poses_.size()) / kNumHeadings; }

  /// Cached perception frame; same values observe() returns.
  std::span<const float> frame(const Pose& p) const;

 private:
  void synthesize_features();

  std::string id_;
  int width_;
  int height_;
  std::vector<std::uint8_t> blocked_;
  double smoothing_;
  int percept_dim_;
  std::uint64_t feature_seed_;
  std::vector<Pose> targets_;
  std::uint64_t generation_seed_;
  double obstacle_density_;
  std::vector<Pose> free_poses_;
  std::vector<float> features_;
};

/// Procedural scene: obstacles sampled i.i.d., repaired to one connected free
/// region, targets drawn uniformly from free poses without duplicates.
Scene generate_scene(const SceneSpec& spec);

/// Unit-norm perception frame for a pose. Pure.
std::vector<float> observe(const Scene& scene, const Pose& pose);

/// Unnormalized pseudo-random base vector for (cell, heading).
std::vector<double> base_vector(std::uint64_t feature_seed, int x, int y, Heading h, int dim);

/// Noiseless transition. Never touches randomness.
StepOutcome apply_action(const Scene& scene, const Pose& pose, Action action, const Pose& goal);

/// Transition with slip noise: with probability slip_prob the action is
/// replaced by a uniformly drawn different action. The rng is only consumed
/// when slip_prob > 0.
StepOutcome step(const Scene& scene, const Pose& pose, Action action, const Pose& goal,
                 double slip_prob, Rng& rng);

/// BFS distances (in actions) from start to every pose slot; -1 = unreachable
/// or blocked.
std::vector<int> distances_from(const Scene& scene, const Pose& start);

std::optional<int> shortest_path_length(const Scene& scene, const Pose& start, const Pose& goal);

/// Uniform over free poses other than the goal.
Pose sample_start(const Scene& scene, const Pose& goal, Rng& rng);

}  // namespace navlab
