#include "navlab/gridworld.hpp"

#include <cmath>
#include <cstdio>
#include <deque>
#include <queue>

#include "navlab/error.hpp"

namespace navlab {
namespace {

constexpr std::array<int, 4> kDx{0, 1, 0, -1};  // N E S W
constexpr std::array<int, 4> kDy{1, 0, -1, 0};

// Component label per cell (-1 for blocked), 4-connectivity.
std::vector<int> label_components(int width, int height, const std::vector<std::uint8_t>& blocked,
                                  int* count) {
  std::vector<int> label(blocked.size(), -1);
  int next = 0;
  for (int start = 0; start < width * height; ++start) {
    if (blocked[start] || label[start] >= 0) continue;
    std::deque<int> queue{start};
    label[start] = next;
    while (!queue.empty()) {
      const int c = queue.front();
      queue.pop_front();
      const int cx = c % width, cy = c / width;
      for (int k = 0; k < 4; ++k) {
        const int nx = cx + kDx[k], ny = cy + kDy[k];
        if (nx < 0 || ny < 0 || nx >= width || ny >= height) continue;
        const int n = ny * width + nx;
        if (blocked[n] || label[n] >= 0) continue;
        label[n] = next;
        queue.push_back(n);
      }
    }
    ++next;
  }
  *count = next;
  return label;
}

// Unblocks cells along the shortest grid path from the largest free component
// to the nearest other free cell. Returns false if nothing could be joined.
bool join_one_component(int width, int height, std::vector<std::uint8_t>& blocked,
                        const std::vector<int>& label, int components) {
  std::vector<int> sizes(components, 0);
  for (int l : label) {
    if (l >= 0) ++sizes[l];
  }
  int largest = 0;
  for (int i = 1; i < components; ++i) {
    if (sizes[i] > sizes[largest]) largest = i;
  }
  std::vector<int> parent(blocked.size(), -2);
  std::deque<int> queue;
  for (int c = 0; c < width * height; ++c) {
    if (label[c] == largest) {
      parent[c] = -1;
      queue.push_back(c);
    }
  }
  while (!queue.empty()) {
    const int c = queue.front();
    queue.pop_front();
    const int cx = c % width, cy = c / width;
    for (int k = 0; k < 4; ++k) {
      const int nx = cx + kDx[k], ny = cy + kDy[k];
      if (nx < 0 || ny < 0 || nx >= width || ny >= height) continue;
      const int n = ny * width + nx;
      if (parent[n] != -2) continue;
      parent[n] = c;
      if (!blocked[n] && label[n] != largest) {
        for (int p = c; parent[p] != -1; p = parent[p]) blocked[p] = 0;
        return true;
      }
      queue.push_back(n);
    }
  }
  return false;
}

}  // namespace

char heading_char(Heading h) { return "NESW"[static_cast<int>(h)]; }

std::string to_string(const Pose& pose) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "(%d,%d,%c)", pose.x, pose.y, heading_char(pose.heading));
  return buf;
}

Scene::Scene(std::string id, int width, int height, std::vector<std::uint8_t> blocked,
             double smoothing, int percept_dim, std::uint64_t feature_seed,
             std::vector<Pose> targets, std::uint64_t generation_seed, double obstacle_density)
    : id_(std::move(id)),
      width_(width),
      height_(height),
      blocked_(std::move(blocked)),
      smoothing_(smoothing),
      percept_dim_(percept_dim),
      feature_seed_(feature_seed),
      targets_(std::move(targets)),
      generation_seed_(generation_seed),
      obstacle_density_(obstacle_density) {
  if (width_ < 1 || height_ < 1) throw ValidationError("scene dimensions must be positive");
  if (blocked_.size() != static_cast<std::size_t>(width_) * height_) {
    throw ValidationError("obstacle mask must have width*height entries");
  }
  if (percept_dim_ < 1) throw ValidationError("percept_dim must be positive");
  if (!(smoothing_ >= 0.0 && smoothing_ <= 1.0)) throw ValidationError("smoothing must lie in [0,1]");
  if (id_.empty() || id_.find_first_of(" \t\r\n") != std::string::npos) {
    throw ValidationError("scene id must be non-empty without whitespace");
  }
  for (int y = 0; y < height_; ++y) {
    for (int x = 0; x < width_; ++x) {
      if (this->blocked(x, y)) continue;
      for (int h = 0; h < kNumHeadings; ++h) free_poses_.push_back({x, y, static_cast<Heading>(h)});
    }
  }
  for (const Pose& t : targets_) {
    if (!valid(t)) throw ValidationError("target " + to_string(t) + " is not on a free cell");
  }
  if (!targets_.empty()) {
    int components = 0;
    const auto label = label_components(width_, height_, blocked_, &components);
    const int target_label = label[targets_.front().y * width_ + targets_.front().x];
    for (int l : label) {
      if (l >= 0 && l != target_label) {
        throw ValidationError("scene " + id_ + ": free space is not connected to its targets");
      }
    }
  }
  synthesize_features();
}

Pose Scene::pose_at(int index) const {
  const int cell = index / kNumHeadings;
  return {cell % width_, cell / width_, static_cast<Heading>(index % kNumHeadings)};
}

std::span<const float> Scene::frame(const Pose& p) const {
  const std::size_t offset = static_cast<std::size_t>(pose_index(p)) * percept_dim_;
  return {features_.data() + offset, static_cast<std::size_t>(percept_dim_)};
}

std::vector<double> base_vector(std::uint64_t feature_seed, int x, int y, Heading h, int dim) {
  std::uint64_t s = hash_combine(feature_seed, static_cast<std::uint64_t>(x));
  s = hash_combine(s, static_cast<std::uint64_t>(y));
  s = hash_combine(s, static_cast<std::uint64_t>(h));
  Rng rng(s);
  std::vector<double> v(dim);
  for (double& e : v) e = rng.normal();
  return v;
}

void Scene::synthesize_features() {
  const int d = percept_dim_;
  std::vector<std::vector<double>> bases(static_cast<std::size_t>(pose_slots()));
  for (int i = 0; i < pose_slots(); ++i) {
    const Pose p = pose_at(i);
    bases[i] = base_vector(feature_seed_, p.x, p.y, p.heading, d);
  }
  features_.assign(static_cast<std::size_t>(pose_slots()) * d, 0.0f);
  std::vector<double> acc(d);
  for (int i = 0; i < pose_slots(); ++i) {
    const Pose p = pose_at(i);
    acc = bases[i];
    for (int k = 0; k < 4; ++k) {
      const int nx = p.x + kDx[k], ny = p.y + kDy[k];
      if (!in_bounds(nx, ny)) continue;
      const auto& nb = bases[pose_index({nx, ny, p.heading})];
      for (int j = 0; j < d; ++j) acc[j] += smoothing_ * nb[j];
    }
    double norm = 0.0;
    for (double v : acc) norm += v * v;
    norm = std::sqrt(norm);
    float* out = features_.data() + static_cast<std::size_t>(i) * d;
    for (int j = 0; j < d; ++j) out[j] = static_cast<float>(acc[j] / norm);
  }
}

Scene generate_scene(const SceneSpec& spec) {
  if (spec.width < 3 || spec.height < 3) throw ValidationError("scene width and height must be >= 3");
  if (spec.n_targets < 1) throw ValidationError("n_targets must be >= 1");
  if (!(spec.obstacle_density >= 0.0 && spec.obstacle_density <= 0.4)) {
    throw ValidationError("obstacle_density must lie in [0, 0.4]");
  }
  Rng rng(spec.seed);
  const int cells = spec.width * spec.height;
  std::vector<std::uint8_t> blocked(cells, 0);
  for (auto& b : blocked) b = rng.uniform() < spec.obstacle_density ? 1 : 0;

  int components = 0;
  auto label = label_components(spec.width, spec.height, blocked, &components);
  if (components == 0) {
    blocked[rng.below(cells)] = 0;
    label = label_components(spec.width, spec.height, blocked, &components);
  }
  for (int attempt = 0; components > 1; ++attempt) {
    if (attempt >= cells || !join_one_component(spec.width, spec.height, blocked, label, components)) {
      throw Error("connectivity repair failed");
    }
    label = label_components(spec.width, spec.height, blocked, &components);
  }

  std::vector<Pose> free;
  for (int y = 0; y < spec.height; ++y) {
    for (int x = 0; x < spec.width; ++x) {
      if (blocked[y * spec.width + x]) continue;
      for (int h = 0; h < kNumHeadings; ++h) free.push_back({x, y, static_cast<Heading>(h)});
    }
  }
  if (static_cast<std::size_t>(spec.n_targets) > free.size()) {
    throw ValidationError("n_targets exceeds the number of free poses");
  }
  // Partial Fisher-Yates.
  for (int i = 0; i < spec.n_targets; ++i) {
    const auto j = i + rng.below(free.size() - i);
    std::swap(free[i], free[j]);
  }
  std::vector<Pose> targets(free.begin(), free.begin() + spec.n_targets);

  std::string id = spec.id;
  if (id.empty()) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "s%016llx", static_cast<unsigned long long>(spec.seed));
    id = buf;
  }
  return Scene(std::move(id), spec.width, spec.height, std::move(blocked), spec.smoothing,
               spec.percept_dim, hash_combine(spec.seed, 0x6665617475726573ULL), std::move(targets),
               spec.seed, spec.obstacle_density);
}

std::vector<float> observe(const Scene& scene, const Pose& pose) {
  const auto f = scene.frame(pose);
  return {f.begin(), f.end()};
}

StepOutcome apply_action(const Scene& scene, const Pose& pose, Action action, const Pose& goal) {
  StepOutcome out;
  out.next_pose = pose;
  const int h = static_cast<int>(pose.heading);
  switch (action) {
    case Action::TurnLeft:
      out.next_pose.heading = turn_left(pose.heading);
      break;
    case Action::TurnRight:
      out.next_pose.heading = turn_right(pose.heading);
      break;
    case Action::MoveForward:
    case Action::MoveBackward: {
      const int sign = action == Action::MoveForward ? 1 : -1;
      const int nx = pose.x + sign * kDx[h], ny = pose.y + sign * kDy[h];
      if (scene.in_bounds(nx, ny) && !scene.blocked(nx, ny)) {
        out.next_pose.x = nx;
        out.next_pose.y = ny;
      } else {
        out.collided = true;
      }
      break;
    }
  }
  out.done = out.next_pose == goal;
  out.reward = out.done ? kGoalReward : kStepPenalty;
  return out;
}

StepOutcome step(const Scene& scene, const Pose& pose, Action action, const Pose& goal,
                 double slip_prob, Rng& rng) {
  if (slip_prob > 0.0 && rng.bernoulli(slip_prob)) {
    const auto shift = 1 + rng.below(kNumActions - 1);
    action = static_cast<Action>((static_cast<int>(action) + shift) % kNumActions);
  }
  return apply_action(scene, pose, action, goal);
}

std::vector<int> distances_from(const Scene& scene, const Pose& start) {
  std::vector<int> dist(static_cast<std::size_t>(scene.pose_slots()), -1);
  if (!scene.valid(start)) return dist;
  std::deque<Pose> queue{start};
  dist[scene.pose_index(start)] = 0;
  while (!queue.empty()) {
    const Pose p = queue.front();
    queue.pop_front();
    const int base = dist[scene.pose_index(p)];
    for (Action a : kAllActions) {
      const Pose q = apply_action(scene, p, a, p).next_pose;
      int& slot = dist[scene.pose_index(q)];
      if (slot >= 0) continue;
      slot = base + 1;
      queue.push_back(q);
    }
  }
  return dist;
}

std::optional<int> shortest_path_length(const Scene& scene, const Pose& start, const Pose& goal) {
  if (!scene.valid(start) || !scene.valid(goal)) return std::nullopt;
  const int d = distances_from(scene, start)[scene.pose_index(goal)];
  if (d < 0) return std::nullopt;
  return d;
}

Pose sample_start(const Scene& scene, const Pose& goal, Rng& rng) {
  const auto& free = scene.free_poses();
  const bool goal_free = scene.valid(goal);
  const std::size_t candidates = free.size() - (goal_free ? 1 : 0);
  if (candidates < 1) throw Error("scene has no free pose other than the goal");
  std::size_t k = rng.below(candidates);
  // free_poses is sorted by pose index; skip over the goal slot.
  if (goal_free) {
    const int goal_index = scene.pose_index(goal);
    if (scene.pose_index(free[k]) >= goal_index) ++k;
  }
  return free[k];
}

}  // namespace navlab
