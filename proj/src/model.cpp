#include "navlab/model.hpp"

#include <algorithm>

namespace navlab {

void ObservationStack::push(std::span<const float> frame) {
  if (static_cast<int>(frame.size()) != dim_) throw ValidationError("frame dimension mismatch");
  std::copy(data_.begin() + dim_, data_.end(), data_.begin());
  std::copy(frame.begin(), frame.end(), data_.end() - dim_);
}

ObservationStack reset_history(std::span<const float> first_frame) {
  ObservationStack s(static_cast<int>(first_frame.size()));
  for (int i = 0; i < kHistoryFrames; ++i) s.push(first_frame);
  return s;
}

ObservationStack push_frame(ObservationStack stack, std::span<const float> frame) {
  stack.push(frame);
  return stack;
}

ObservationStack make_goal_stack(const Scene& scene, const Pose& goal) {
  if (!scene.valid(goal)) throw ValidationError("goal pose " + to_string(goal) + " is not free");
  return reset_history(scene.frame(goal));
}

template <typename T>
void BasicModelGrads<T>::zero() {
  embed.zero();
  fusion.zero();
  fc1.zero();
  policy.zero();
  value.zero();
}

template <typename T>
bool BasicModelGrads<T>::all_zero() const {
  for (const auto* g : {&embed, &fusion, &fc1, &policy, &value}) {
    if (std::any_of(g->weights.begin(), g->weights.end(), [](T v) { return v != T(0); })) return false;
    if (std::any_of(g->bias.begin(), g->bias.end(), [](T v) { return v != T(0); })) return false;
  }
  return true;
}

template <typename T>
BasicPolicyValue<T> model_forward(const BasicSiameseCore<T>& core, const BasicSceneBranch<T>& branch,
                                  std::span<const T> state, std::span<const T> goal, ModelCache<T>& cache,
                                  bool goal_first) {
  if (state.size() != core.embed.cols || goal.size() != core.embed.cols) {
    throw ValidationError("model_forward: stack dimension mismatch (expected " + std::to_string(core.embed.cols) +
                          ")");
  }
  const std::size_t e = core.embed.rows;
  cache.core = &core;
  cache.branch = &branch;
  cache.goal_first = goal_first;
  cache.state_in.assign(state.begin(), state.end());
  cache.goal_in.assign(goal.begin(), goal.end());
  cache.state_pre.resize(e);
  cache.state_emb.resize(e);
  cache.goal_pre.resize(e);
  cache.goal_emb.resize(e);
  affine_forward_into<T>(core.embed, cache.state_in, false, cache.state_pre, cache.state_emb);
  affine_forward_into<T>(core.embed, cache.goal_in, false, cache.goal_pre, cache.goal_emb);

  cache.joint.resize(2 * e);
  const auto& first = goal_first ? cache.goal_emb : cache.state_emb;
  const auto& second = goal_first ? cache.state_emb : cache.goal_emb;
  std::copy(first.begin(), first.end(), cache.joint.begin());
  std::copy(second.begin(), second.end(), cache.joint.begin() + e);

  cache.fusion_pre.resize(core.fusion.rows);
  cache.fusion_out.resize(core.fusion.rows);
  affine_forward_into<T>(core.fusion, cache.joint, false, cache.fusion_pre, cache.fusion_out);
  cache.fc1_pre.resize(branch.fc1.rows);
  cache.fc1_out.resize(branch.fc1.rows);
  affine_forward_into<T>(branch.fc1, cache.fusion_out, false, cache.fc1_pre, cache.fc1_out);

  std::array<T, kNumActions> logits_pre{};
  affine_forward_into<T>(branch.policy, cache.fc1_out, true, logits_pre, cache.logits);
  T value_out[1];
  affine_forward_into<T>(branch.value, cache.fc1_out, true, cache.value_pre, value_out);

  BasicPolicyValue<T> out;
  softmax_into<T>(cache.logits, out.probs);
  out.value = value_out[0];
  return out;
}

PolicyValue model_forward(const SiameseCore& core, const SceneBranch& branch, const ObservationStack& state,
                          const ObservationStack& goal, ModelCache<float>& cache, bool goal_first) {
  return model_forward<float>(core, branch, state.flat(), goal.flat(), cache, goal_first);
}

template <typename T>
void model_backward(const BasicSiameseCore<T>& core, const BasicSceneBranch<T>& branch, const ModelCache<T>& cache,
                    std::span<const T> dlogits, T dvalue, BasicModelGrads<T>& grads, BackwardScratch<T>& scratch,
                    bool core_grads) {
  if (cache.core != &core || cache.branch != &branch || cache.fc1_out.size() != branch.fc1.rows) {
    throw Error("model_backward: cache does not belong to these parameters");
  }
  if (dlogits.size() != kNumActions) throw ValidationError("model_backward: dlogits must have 4 entries");
  const std::size_t fuse = branch.fc1.rows;
  const std::size_t e = core.embed.rows;
  const std::size_t widest = std::max({core.embed.rows, core.fusion.rows, fuse, std::size_t(kNumActions)});
  scratch.a.resize(fuse);
  scratch.b.resize(fuse);
  scratch.c.resize(2 * e);
  scratch.d.resize(widest);

  // Heads: dfc1_out = Wp^T dlogits + Wv^T dvalue.
  std::span<T> dfc1_out(scratch.a);
  affine_relu_backward<T>(branch.policy, cache.fc1_out, cache.logits, true, dlogits, grads.policy, dfc1_out,
                          scratch.d);
  const T dv[1] = {dvalue};
  std::span<T> dfc1_from_value(scratch.b);
  affine_relu_backward<T>(branch.value, cache.fc1_out, cache.value_pre, true, dv, grads.value, dfc1_from_value,
                          scratch.d);
  for (std::size_t i = 0; i < fuse; ++i) dfc1_out[i] += dfc1_from_value[i];

  std::span<T> dfusion_out(scratch.b);
  affine_relu_backward<T>(branch.fc1, cache.fusion_out, cache.fc1_pre, false, dfc1_out, grads.fc1,
                          core_grads ? dfusion_out : std::span<T>{}, scratch.d);
  if (!core_grads) return;

  std::span<T> djoint(scratch.c);
  affine_relu_backward<T>(core.fusion, cache.joint, cache.fusion_pre, false, dfusion_out, grads.fusion, djoint,
                          scratch.d);
  std::span<const T> d_first = std::span<const T>(djoint).first(e);
  std::span<const T> d_second = std::span<const T>(djoint).subspan(e, e);
  std::span<const T> d_state = cache.goal_first ? d_second : d_first;
  std::span<const T> d_goal = cache.goal_first ? d_first : d_second;
  affine_relu_backward<T>(core.embed, cache.state_in, cache.state_pre, false, d_state, grads.embed, {}, scratch.d);
  affine_relu_backward<T>(core.embed, cache.goal_in, cache.goal_pre, false, d_goal, grads.embed, {}, scratch.d);
}

template <typename T>
BasicModelGrads<T> model_backward(const BasicSiameseCore<T>& core, const BasicSceneBranch<T>& branch,
                                  const ModelCache<T>& cache, std::span<const T> dlogits, T dvalue) {
  BasicModelGrads<T> grads(core, branch);
  BackwardScratch<T> scratch;
  model_backward<T>(core, branch, cache, dlogits, dvalue, grads, scratch, true);
  return grads;
}

template struct BasicModelGrads<float>;
template struct BasicModelGrads<double>;
template BasicPolicyValue<float> model_forward<float>(const BasicSiameseCore<float>&, const BasicSceneBranch<float>&,
                                                      std::span<const float>, std::span<const float>,
                                                      ModelCache<float>&, bool);
template BasicPolicyValue<double> model_forward<double>(const BasicSiameseCore<double>&,
                                                        const BasicSceneBranch<double>&, std::span<const double>,
                                                        std::span<const double>, ModelCache<double>&, bool);
template void model_backward<float>(const BasicSiameseCore<float>&, const BasicSceneBranch<float>&,
                                    const ModelCache<float>&, std::span<const float>, float,
                                    BasicModelGrads<float>&, BackwardScratch<float>&, bool);
template void model_backward<double>(const BasicSiameseCore<double>&, const BasicSceneBranch<double>&,
                                     const ModelCache<double>&, std::span<const double>, double,
                                     BasicModelGrads<double>&, BackwardScratch<double>&, bool);
template BasicModelGrads<float> model_backward<float>(const BasicSiameseCore<float>&,
                                                      const BasicSceneBranch<float>&, const ModelCache<float>&,
                                                      std::span<const float>, float);
template BasicModelGrads<double> model_backward<double>(const BasicSiameseCore<double>&,
                                                        const BasicSceneBranch<double>&, const ModelCache<double>&,
                                                        std::span<const double>, double);

std::vector<float> embed_stack(const SiameseCore& core, std::span<const float> stack) {
  std::vector<float> pre(core.embed.rows), out(core.embed.rows);
  affine_forward_into<float>(core.embed, stack, false, pre, out);
  return out;
}

SiameseCore make_core(const ModelDims& dims, Rng& rng) {
  SiameseCore core{ParamBlock("embed", dims.embed, dims.stack_dim()), ParamBlock("fusion", dims.fuse, 2 * dims.embed)};
  init_uniform_fan_in(core.embed, rng);
  init_uniform_fan_in(core.fusion, rng);
  return core;
}

SceneBranch make_branch(const std::string& key, const ModelDims& dims, Rng& rng) {
  SceneBranch b{key, ParamBlock("branch/" + key + "/fc1", dims.fuse, dims.fuse),
                ParamBlock("branch/" + key + "/policy", kNumActions, dims.fuse),
                ParamBlock("branch/" + key + "/value", 1, dims.fuse)};
  init_uniform_fan_in(b.fc1, rng);
  return b;
}

ModelParams::ModelParams(const ModelDims& dims, UpdateMode mode, const RmsPropConfig& opt, std::uint64_t init_seed,
                         bool single_branch)
    : dims_(dims), init_seed_(init_seed), single_branch_(single_branch),
      store_(std::make_unique<ParamStore>(mode, opt)) {
  if (dims.percept_dim < 1 || dims.embed < 1 || dims.fuse < 1) throw ValidationError("model dimensions must be positive");
  Rng rng(hash_combine(init_seed, 0x636f7265));
  SiameseCore core = make_core(dims, rng);
  embed_id_ = store_->add(std::move(core.embed));
  fusion_id_ = store_->add(std::move(core.fusion));
}

void ModelParams::set_single_branch(bool on) {
  std::lock_guard lock(branches_mu_);
  single_branch_ = on;
}

BranchIds ModelParams::branch_for(const std::string& scene_key, bool create_if_missing) {
  std::lock_guard lock(branches_mu_);
  const std::string key = resolve(scene_key);
  if (auto it = branches_.find(key); it != branches_.end()) return it->second;
  if (!create_if_missing) throw ValidationError("no scene branch for '" + scene_key + "'");
  if (key.find_first_of(" \t\r\n") != std::string::npos || key.empty()) {
    throw ValidationError("bad scene key '" + key + "'");
  }
  // Seeded by key so creation order does not change initial values.
  Rng rng(hash_combine(init_seed_, fnv1a64(key)));
  SceneBranch b = make_branch(key, dims_, rng);
  BranchIds ids;
  ids.key = key;
  ids.fc1 = store_->add(std::move(b.fc1));
  ids.policy = store_->add(std::move(b.policy));
  ids.value = store_->add(std::move(b.value));
  branches_.emplace(key, ids);
  return ids;
}

bool ModelParams::has_branch(const std::string& scene_key) const {
  std::lock_guard lock(branches_mu_);
  return branches_.count(resolve(scene_key)) > 0;
}

std::vector<std::string> ModelParams::branch_keys() const {
  std::lock_guard lock(branches_mu_);
  std::vector<std::string> keys;
  for (const auto& [k, v] : branches_) keys.push_back(k);
  return keys;
}

void ModelParams::snapshot_core(SiameseCore& out) const {
  const BlockId ids[] = {embed_id_, fusion_id_};
  ParamBlock* dst[] = {&out.embed, &out.fusion};
  store_->snapshot(ids, dst);
}

void ModelParams::snapshot_branch(const BranchIds& ids, SceneBranch& out) const {
  const BlockId list[] = {ids.fc1, ids.policy, ids.value};
  ParamBlock* dst[] = {&out.fc1, &out.policy, &out.value};
  store_->snapshot(list, dst);
  out.key = ids.key;
}

SiameseCore ModelParams::core() const {
  SiameseCore c;
  snapshot_core(c);
  return c;
}

SceneBranch ModelParams::branch(const std::string& scene_key) {
  SceneBranch b;
  snapshot_branch(branch_for(scene_key, false), b);
  return b;
}

void ModelParams::load_core(const SiameseCore& core) {
  auto& embed = store_->block(embed_id_);
  auto& fusion = store_->block(fusion_id_);
  if (embed.rows != core.embed.rows || embed.cols != core.embed.cols || fusion.rows != core.fusion.rows ||
      fusion.cols != core.fusion.cols) {
    throw ValidationError("core shapes do not match the model dimensions");
  }
  embed.weights = core.embed.weights;
  embed.bias = core.embed.bias;
  fusion.weights = core.fusion.weights;
  fusion.bias = core.fusion.bias;
}

Checkpoint ModelParams::to_checkpoint() const {
  Checkpoint ckpt;
  ckpt.meta["arch"] = "siamese";
  ckpt.meta["percept_dim"] = std::to_string(dims_.percept_dim);
  ckpt.meta["history"] = std::to_string(kHistoryFrames);
  ckpt.meta["d_embed"] = std::to_string(dims_.embed);
  ckpt.meta["d_fuse"] = std::to_string(dims_.fuse);
  ckpt.meta["goal_first"] = dims_.goal_first ? "1" : "0";
  ckpt.meta["single_branch"] = single_branch_ ? "1" : "0";
  ckpt.meta["init_seed"] = std::to_string(init_seed_);
  ckpt.blocks.push_back(store_->copy(embed_id_));
  ckpt.blocks.push_back(store_->copy(fusion_id_));
  std::lock_guard lock(branches_mu_);
  for (const auto& [key, ids] : branches_) {
    ckpt.branches.push_back(key);
    ckpt.blocks.push_back(store_->copy(ids.fc1));
    ckpt.blocks.push_back(store_->copy(ids.policy));
    ckpt.blocks.push_back(store_->copy(ids.value));
  }
  return ckpt;
}

namespace {

int meta_int(const Checkpoint& ckpt, const std::string& key) {
  const std::string& v = ckpt.require(key);
  try {
    return std::stoi(v);
  } catch (const std::exception&) {
    throw ValidationError("checkpoint meta '" + key + "' is not an integer");
  }
}

void copy_checked(const ParamBlock& src, ParamBlock& dst) {
  if (src.rows != dst.rows || src.cols != dst.cols) {
    throw ValidationError("checkpoint block " + src.name + " has shape " + std::to_string(src.rows) + "x" +
                          std::to_string(src.cols) + ", model expects " + std::to_string(dst.rows) + "x" +
                          std::to_string(dst.cols));
  }
  dst.weights = src.weights;
  dst.bias = src.bias;
}

const ParamBlock& require_block(const Checkpoint& ckpt, const std::string& name) {
  const ParamBlock* b = ckpt.find(name);
  if (!b) throw ValidationError("checkpoint lacks block " + name);
  return *b;
}

}  // namespace

std::unique_ptr<ModelParams> ModelParams::from_checkpoint(const Checkpoint& ckpt, UpdateMode mode,
                                                          const RmsPropConfig& opt) {
  if (ckpt.require("arch") != "siamese") throw ValidationError("checkpoint is not a target-driven model");
  if (meta_int(ckpt, "history") != kHistoryFrames) throw ValidationError("checkpoint history length mismatch");
  ModelDims dims;
  dims.percept_dim = meta_int(ckpt, "percept_dim");
  dims.embed = meta_int(ckpt, "d_embed");
  dims.fuse = meta_int(ckpt, "d_fuse");
  dims.goal_first = meta_int(ckpt, "goal_first") != 0;
  const bool single = meta_int(ckpt, "single_branch") != 0;
  const auto seed = static_cast<std::uint64_t>(std::stoull(ckpt.require("init_seed")));
  auto params = std::make_unique<ModelParams>(dims, mode, opt, seed, false);
  copy_checked(require_block(ckpt, "embed"), params->store_->block(params->embed_id_));
  copy_checked(require_block(ckpt, "fusion"), params->store_->block(params->fusion_id_));
  for (const auto& key : ckpt.branches) {
    BranchIds ids = params->branch_for(key, true);
    copy_checked(require_block(ckpt, "branch/" + key + "/fc1"), params->store_->block(ids.fc1));
    copy_checked(require_block(ckpt, "branch/" + key + "/policy"), params->store_->block(ids.policy));
    copy_checked(require_block(ckpt, "branch/" + key + "/value"), params->store_->block(ids.value));
  }
  params->single_branch_ = single;
  return params;
}

}  // namespace navlab
