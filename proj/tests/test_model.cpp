#include <doctest.h>

#include <thread>

#include "navlab/baselines.hpp"
#include "navlab/model.hpp"
#include "support.hpp"

using namespace navlab;

namespace {

ObservationStack random_stack(Rng& r, int dim) {
  ObservationStack s(dim);
  for (int i = 0; i < kHistoryFrames; ++i) {
    std::vector<float> f(dim);
    for (auto& v : f) v = static_cast<float>(r.uniform());
    s.push(f);
  }
  return s;
}

ModelDims small_dims() { return {.percept_dim = 8, .embed = 6, .fuse = 5}; }

/// One training-like update through a branch with a nonzero loss signal.
void update_through(ModelParams& m, const std::string& key, Rng& r) {
  const BranchIds ids = m.branch_for(key, true);
  SiameseCore core = m.core();
  SceneBranch br;
  m.snapshot_branch(ids, br);
  ModelCache<float> cache;
  const auto s = random_stack(r, m.dims().percept_dim), g = random_stack(r, m.dims().percept_dim);
  model_forward(core, br, s, g, cache);
  ModelGrads grads(core, br);
  BackwardScratch<float> scratch;
  const float dl[4] = {0.3f, -0.1f, -0.1f, -0.1f};
  model_backward<float>(core, br, cache, dl, -1.0f, grads, scratch);
  const BlockId list[] = {m.embed_id(), m.fusion_id(), ids.fc1, ids.policy, ids.value};
  GradBlock* gs[] = {&grads.embed, &grads.fusion, &grads.fc1, &grads.policy, &grads.value};
  m.store().apply(list, gs);
}

}  // namespace

TEST_CASE("observation stacks") {
  const std::vector<float> a{1, 1}, b{2, 2}, c{3, 3}, d{4, 4}, e{5, 5};
  ObservationStack s = reset_history(a);
  for (int i = 0; i < 4; ++i) CHECK(std::vector<float>(s.frame(i).begin(), s.frame(i).end()) == a);
  s = push_frame(s, b);
  s = push_frame(s, c);
  s = push_frame(s, d);
  CHECK(s.frame(0)[0] == 1);
  s = push_frame(s, e);
  CHECK(s.frame(0)[0] == 2);
  CHECK(s.frame(3)[0] == 5);

  ObservationStack t = reset_history(a);
  for (const auto* f : {&b, &c, &d, &e}) t = push_frame(t, *f);
  CHECK(t == s);
}

TEST_CASE("goal stacks") {
  const Scene scene = generate_scene({.seed = 12, .width = 6, .height = 6, .n_targets = 2, .percept_dim = 8});
  const Pose g1 = scene.targets()[0], g2 = scene.targets()[1];
  const auto st = make_goal_stack(scene, g1);
  const auto f = observe(scene, g1);
  for (int i = 0; i < kHistoryFrames; ++i) {
    CHECK(std::vector<float>(st.frame(i).begin(), st.frame(i).end()) == f);
  }
  CHECK(make_goal_stack(scene, g1) == st);
  CHECK_FALSE(make_goal_stack(scene, g2) == st);
}

TEST_CASE("fresh branches give the uniform policy and zero value") {
  ModelParams m(small_dims(), UpdateMode::Serialized, {}, 5);
  m.branch_for("sceneA", true);
  Rng r(1);
  ModelCache<float> cache;
  const auto pv = model_forward(m.core(), m.branch("sceneA"), random_stack(r, 8), random_stack(r, 8), cache);
  for (float p : pv.probs) CHECK(p == 0.25f);
  CHECK(pv.value == 0.0f);
}

TEST_CASE("weight sharing between the two streams") {
  ModelParams m(small_dims(), UpdateMode::Serialized, {}, 5);
  m.branch_for("s", true);
  SiameseCore core = m.core();
  const SceneBranch br = m.branch("s");
  Rng r(2);
  const auto s = random_stack(r, 8);
  ModelCache<float> cache;
  model_forward(core, br, s, s, cache);
  CHECK(cache.state_emb == cache.goal_emb);

  // mutating embed changes both streams on the next forward
  const auto before = cache.state_emb;
  for (auto& w : core.embed.weights) w += 0.1f;
  model_forward(core, br, s, s, cache);
  CHECK(cache.state_emb != before);
  CHECK(cache.goal_emb == cache.state_emb);
}

TEST_CASE("embed gradient sums the two streams") {
  Rng r(4);
  const ModelDims dims = small_dims();
  ModelParams m(dims, UpdateMode::Serialized, {}, 8);
  m.branch_for("s", true);
  auto core = convert_core<double>(m.core());
  auto br = convert_branch<double>(m.branch("s"));
  for (auto& w : br.policy.weights) w = r.uniform() - 0.5;
  for (auto& w : br.value.weights) w = r.uniform() - 0.5;
  const auto st = random_stack(r, dims.percept_dim), go = random_stack(r, dims.percept_dim);
  std::vector<double> s(st.flat().begin(), st.flat().end()), g(go.flat().begin(), go.flat().end());
  const double dl[4] = {0.2, -0.3, 0.05, 0.05};

  ModelCache<double> c;
  model_forward<double>(core, br, s, g, c);
  const auto full = model_backward<double>(core, br, c, dl, 0.7);

  // hand-written chain rule down to the joint embedding, then one term per stream
  const std::size_t E = dims.embed;
  std::vector<double> djoint(2 * E, 0.0);
  BasicGradBlock<double> manual(core.embed);
  std::vector<double> dfuse_pre(dims.fuse, 0.0);
  {
    std::vector<double> dfc1(dims.fuse, 0.0);
    for (int a = 0; a < kNumActions; ++a)
      for (int j = 0; j < dims.fuse; ++j) dfc1[j] += br.policy.weights[a * dims.fuse + j] * dl[a];
    for (int j = 0; j < dims.fuse; ++j) dfc1[j] += br.value.weights[j] * 0.7;
    std::vector<double> dfc1_pre(dims.fuse);
    for (int j = 0; j < dims.fuse; ++j) dfc1_pre[j] = c.fc1_pre[j] > 0 ? dfc1[j] : 0.0;
    std::vector<double> dfusion_out(dims.fuse, 0.0);
    for (int i = 0; i < dims.fuse; ++i)
      for (int j = 0; j < dims.fuse; ++j) dfusion_out[j] += br.fc1.weights[i * dims.fuse + j] * dfc1_pre[i];
    for (int j = 0; j < dims.fuse; ++j) dfuse_pre[j] = c.fusion_pre[j] > 0 ? dfusion_out[j] : 0.0;
  }
  for (std::size_t i = 0; i < static_cast<std::size_t>(dims.fuse); ++i)
    for (std::size_t j = 0; j < 2 * E; ++j) djoint[j] += core.fusion.weights[i * 2 * E + j] * dfuse_pre[i];
  auto stream = [&](const std::vector<double>& in, const std::vector<double>& pre, std::size_t off) {
    for (std::size_t e = 0; e < E; ++e) {
      const double d = pre[e] > 0 ? djoint[off + e] : 0.0;
      for (std::size_t k = 0; k < in.size(); ++k) manual.weights[e * in.size() + k] += d * in[k];
      manual.bias[e] += d;
    }
  };
  stream(s, c.state_pre, 0);
  stream(g, c.goal_pre, E);
  for (std::size_t i = 0; i < manual.weights.size(); ++i) {
    CHECK(full.embed.weights[i] == doctest::Approx(manual.weights[i]).epsilon(1e-9));
  }
  for (std::size_t i = 0; i < manual.bias.size(); ++i) {
    CHECK(full.embed.bias[i] == doctest::Approx(manual.bias[i]).epsilon(1e-9));
  }
}

TEST_CASE("zero head gradients give zero parameter gradients") {
  ModelParams m(small_dims(), UpdateMode::Serialized, {}, 3);
  m.branch_for("s", true);
  Rng r(6);
  SiameseCore core = m.core();
  SceneBranch br = m.branch("s");
  ModelCache<float> cache;
  model_forward(core, br, random_stack(r, 8), random_stack(r, 8), cache);
  ModelGrads grads(core, br);
  BackwardScratch<float> scratch;
  const float dl[4] = {0, 0, 0, 0};
  model_backward<float>(core, br, cache, dl, 0.0f, grads, scratch);
  CHECK(grads.all_zero());
}

TEST_CASE("branch lookup, isolation and core coupling") {
  ModelParams m(small_dims(), UpdateMode::Serialized, {}, 7);
  const BranchIds a1 = m.branch_for("A", true), a2 = m.branch_for("A", true);
  CHECK(a1.fc1 == a2.fc1);
  CHECK_THROWS(m.branch_for("missing", false));
  m.branch_for("B", true);
  Rng r(3);
  // zero heads block every core gradient on the first update
  const SiameseCore fresh = m.core();
  update_through(m, "A", r);
  CHECK(m.core().embed == fresh.embed);
  const SceneBranch b_before = m.branch("B");
  const SiameseCore core_before = m.core();
  update_through(m, "A", r);
  const SceneBranch b_after = m.branch("B");
  CHECK(b_after.fc1 == b_before.fc1);
  CHECK(b_after.policy == b_before.policy);
  CHECK(b_after.value == b_before.value);
  CHECK_FALSE(m.core().embed == core_before.embed);
  CHECK_FALSE(m.core().fusion == core_before.fusion);
  CHECK_FALSE(m.branch("A").policy.weights == b_before.policy.weights);
}

TEST_CASE("branch initial values do not depend on creation order") {
  ModelParams a(small_dims(), UpdateMode::Serialized, {}, 7), b(small_dims(), UpdateMode::Serialized, {}, 7);
  a.branch_for("x", true);
  a.branch_for("y", true);
  b.branch_for("y", true);
  b.branch_for("x", true);
  CHECK(a.branch("x").fc1 == b.branch("x").fc1);
  CHECK(a.core().embed == b.core().embed);
}

TEST_CASE("concurrent branch creation yields one branch") {
  for (int trial = 0; trial < 20; ++trial) {
    ModelParams m(small_dims(), UpdateMode::Hogwild, {}, 1);
    BranchIds got[2];
    std::thread t1([&] { got[0] = m.branch_for("same", true); });
    std::thread t2([&] { got[1] = m.branch_for("same", true); });
    t1.join();
    t2.join();
    CHECK(m.branch_keys().size() == 1);
    CHECK(got[0].fc1 == got[1].fc1);
    CHECK(m.store().block_count() == 5);
  }
}

TEST_CASE("single-branch mode aliases every scene") {
  ModelParams m(small_dims(), UpdateMode::Serialized, {}, 7);
  single_branch_mode(m);
  const BranchIds a = m.branch_for("A", true), b = m.branch_for("B", true);
  CHECK(a.fc1 == b.fc1);
  CHECK(m.branch("A").fc1 == m.branch("B").fc1);
  Rng r(5);
  const auto before = m.branch("B").policy;
  update_through(m, "A", r);
  CHECK_FALSE(m.branch("B").policy == before);
}

TEST_CASE("forward is deterministic") {
  ModelParams m(small_dims(), UpdateMode::Serialized, {}, 9);
  m.branch_for("s", true);
  Rng r(1);
  update_through(m, "s", r);
  const auto s = random_stack(r, 8), g = random_stack(r, 8);
  ModelCache<float> c1, c2;
  const auto p1 = model_forward(m.core(), m.branch("s"), s, g, c1);
  const auto p2 = model_forward(m.core(), m.branch("s"), s, g, c2);
  CHECK(p1.probs == p2.probs);
  CHECK(p1.value == p2.value);
}

TEST_CASE("model checkpoint round trip") {
  ModelParams m(small_dims(), UpdateMode::Serialized, {}, 9);
  Rng r(2);
  update_through(m, "A", r);
  update_through(m, "B", r);
  const Checkpoint ck = m.to_checkpoint();
  auto back = ModelParams::from_checkpoint(ck, UpdateMode::Serialized, {});
  CHECK(back->to_checkpoint() == ck);
  CHECK(back->dims() == m.dims());

  Checkpoint wrong = ck;
  wrong.meta["d_embed"] = "7";
  CHECK_THROWS_AS(ModelParams::from_checkpoint(wrong, UpdateMode::Serialized, {}), ValidationError);
}
