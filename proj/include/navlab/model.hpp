#pragma once

#include <array>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "navlab/checkpoint.hpp"
#include "navlab/gridworld.hpp"
#include "navlab/numerics.hpp"
#include "navlab/optimizer.hpp"

namespace navlab {

inline constexpr int kHistoryFrames = 4;

/// Four stacked perception frames, oldest first, most recent last.
class ObservationStack {
 public:
  ObservationStack() = default;
  explicit ObservationStack(int dim) : dim_(dim), data_(static_cast<std::size_t>(dim) * kHistoryFrames, 0.0f) {}

  int dim() const { return dim_; }
  std::span<const float> flat() const { return data_; }
  std::span<const float> frame(int i) const {
    return std::span<const float>(data_).subspan(static_cast<std::size_t>(i) * dim_, dim_);
  }
  /// Drops the oldest frame and appends.
  void push(std::span<const float> frame);

  friend bool operator==(const ObservationStack&, const ObservationStack&) = default;

 private:
  int dim_ = 0;
  std::vector<float> data_;
};

ObservationStack reset_history(std::span<const float> first_frame);
ObservationStack push_frame(ObservationStack stack, std::span<const float> frame);
/// The goal frame replicated four times.
ObservationStack make_goal_stack(const Scene& scene, const Pose& goal);

struct ModelDims {
  int percept_dim = 64;
  int embed = 32;
  int fuse = 32;
  /// Ablation only: concatenate (goal, state) instead of (state, goal).
  bool goal_first = false;

  int stack_dim() const { return percept_dim * kHistoryFrames; }
  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

/// Generic layers shared by every scene. One embed block serves both streams.
template <typename T>
struct BasicSiameseCore {
  BasicParamBlock<T> embed;   // stack_dim -> embed
  BasicParamBlock<T> fusion;  // 2 embed -> fuse
};

/// Scene-specific layers: fc1 then the two heads.
template <typename T>
struct BasicSceneBranch {
  std::string key;
  BasicParamBlock<T> fc1;     // fuse -> fuse
  BasicParamBlock<T> policy;  // fuse -> 4
  BasicParamBlock<T> value;   // fuse -> 1
};

using SiameseCore = BasicSiameseCore<float>;
using SceneBranch = BasicSceneBranch<float>;

template <typename T>
struct BasicPolicyValue {
  std::array<T, kNumActions> probs{};
  T value = 0;
};
using PolicyValue = BasicPolicyValue<float>;

/// Activations kept by model_forward for model_backward.
template <typename T>
struct ModelCache {
  const void* core = nullptr;
  const void* branch = nullptr;
  bool goal_first = false;
  std::vector<T> state_in, goal_in;
  std::vector<T> state_pre, state_emb, goal_pre, goal_emb;
  std::vector<T> joint;  // concatenated embeddings
  std::vector<T> fusion_pre, fusion_out;
  std::vector<T> fc1_pre, fc1_out;
  std::array<T, kNumActions> logits{};
  T value_pre[1] = {0};
};

/// Gradients for every block touched by one forward.
template <typename T>
struct BasicModelGrads {
  BasicGradBlock<T> embed, fusion, fc1, policy, value;

  BasicModelGrads() = default;
  BasicModelGrads(const BasicSiameseCore<T>& core, const BasicSceneBranch<T>& branch)
      : embed(core.embed), fusion(core.fusion), fc1(branch.fc1), policy(branch.policy), value(branch.value) {}
  void zero();
  bool all_zero() const;
};
using ModelGrads = BasicModelGrads<float>;

/// Scratch buffers so backward does not allocate in the training loop.
template <typename T>
struct BackwardScratch {
  std::vector<T> a, b, c, d;
};

template <typename T>
BasicPolicyValue<T> model_forward(const BasicSiameseCore<T>& core, const BasicSceneBranch<T>& branch,
                                  std::span<const T> state, std::span<const T> goal, ModelCache<T>& cache,
                                  bool goal_first = false);

PolicyValue model_forward(const SiameseCore& core, const SceneBranch& branch, const ObservationStack& state,
                          const ObservationStack& goal, ModelCache<float>& cache, bool goal_first = false);

/// Accumulates into grads. dlogits is the gradient at the pre-softmax policy
/// outputs, dvalue at the value output. The embed gradient sums both streams'
/// contributions. With core_grads=false the pass stops after fc1 (frozen core).
template <typename T>
void model_backward(const BasicSiameseCore<T>& core, const BasicSceneBranch<T>& branch, const ModelCache<T>& cache,
                    std::span<const T> dlogits, T dvalue, BasicModelGrads<T>& grads, BackwardScratch<T>& scratch,
                    bool core_grads = true);

template <typename T>
BasicModelGrads<T> model_backward(const BasicSiameseCore<T>& core, const BasicSceneBranch<T>& branch,
                                  const ModelCache<T>& cache, std::span<const T> dlogits, T dvalue);

/// Shared-stream embedding (post-ReLU) of one flattened stack.
std::vector<float> embed_stack(const SiameseCore& core, std::span<const float> stack);

SiameseCore make_core(const ModelDims& dims, Rng& rng);
/// fc1 random, heads zero so a fresh branch yields the uniform policy and value 0.
SceneBranch make_branch(const std::string& key, const ModelDims& dims, Rng& rng);

/// Block ids of one scene branch inside a ParamStore.
struct BranchIds {
  std::string key;
  BlockId fc1 = 0;
  BlockId policy = 0;
  BlockId value = 0;
};

/// The full target-driven model in a shared store: core blocks plus a keyed
/// set of scene branches.
class ModelParams {
 public:
  static constexpr const char* kSharedBranchKey = "__single__";

  ModelParams(const ModelDims& dims, UpdateMode mode, const RmsPropConfig& opt, std::uint64_t init_seed,
              bool single_branch = false);

  /// Rebuilds exact shapes from a checkpoint or throws ValidationError.
  static std::unique_ptr<ModelParams> from_checkpoint(const Checkpoint& ckpt, UpdateMode mode,
                                                      const RmsPropConfig& opt);
  Checkpoint to_checkpoint() const;

  const ModelDims& dims() const { return dims_; }
  bool single_branch() const { return single_branch_; }
  void set_single_branch(bool on);
  std::uint64_t init_seed() const { return init_seed_; }

  ParamStore& store() { return *store_; }
  const ParamStore& store() const { return *store_; }
  BlockId embed_id() const { return embed_id_; }
  BlockId fusion_id() const { return fusion_id_; }

  /// Unique branch for the key (the shared one in single-branch mode).
  /// Creation is atomic; throws if missing and create_if_missing is false.
  BranchIds branch_for(const std::string& scene_key, bool create_if_missing);
  bool has_branch(const std::string& scene_key) const;
  std::vector<std::string> branch_keys() const;

  /// Consistent copies of the current values.
  void snapshot_core(SiameseCore& out) const;
  void snapshot_branch(const BranchIds& ids, SceneBranch& out) const;
  SiameseCore core() const;
  SceneBranch branch(const std::string& scene_key);

  /// Overwrites the core blocks (used to seed transfer runs).
  void load_core(const SiameseCore& core);

 private:
  std::string resolve(const std::string& key) const {
    return single_branch_ ? std::string(kSharedBranchKey) : key;
  }

  ModelDims dims_;
  std::uint64_t init_seed_;
  bool single_branch_;
  std::unique_ptr<ParamStore> store_;
  BlockId embed_id_ = 0;
  BlockId fusion_id_ = 0;
  mutable std::mutex branches_mu_;
  std::map<std::string, BranchIds> branches_;
};

/// Convert a float network to double for gradient checking.
template <typename T>
BasicSiameseCore<T> convert_core(const SiameseCore& c) {
  return {convert_block<T>(c.embed), convert_block<T>(c.fusion)};
}
template <typename T>
BasicSceneBranch<T> convert_branch(const SceneBranch& b) {
  return {b.key, convert_block<T>(b.fc1), convert_block<T>(b.policy), convert_block<T>(b.value)};
}

}  // namespace navlab
