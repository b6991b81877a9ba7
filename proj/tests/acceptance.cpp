// Acceptance suite: one PASS/FAIL line per criterion, exit 0 only if all pass.
// Usage: acceptance [--only 1,2,...] [--out DIR]

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "navlab/checkpoint.hpp"
#include "navlab/experiments.hpp"
#include "navlab/stats.hpp"
#include "navlab/trainer.hpp"
#include "support.hpp"

using namespace navlab;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int digits = 3) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(digits);
  s << v;
  return s.str();
}

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

std::string list(const std::vector<double>& xs, int digits = 3) {
  std::string out;
  for (double x : xs) out += (out.empty() ? "" : " ") + fmt(x, digits);
  return out;
}

Logger progress() {
  return [](const std::string& line) { std::fprintf(stderr, "    %s\n", line.c_str()); };
}

// ---- 1: gradients -------------------------------------------------------

Verdict gradients() {
  const std::vector<std::pair<std::string, std::function<double(std::uint64_t)>>> checks{
      {"affine", gradcheck::affine_layer},
      {"a3c-loss", gradcheck::a3c_loss},
      {"siamese", [](std::uint64_t s) { return gradcheck::siamese_model(s); }},
      {"siamese-goal-first", [](std::uint64_t s) { return gradcheck::siamese_model(s, true); }},
      {"goal-free", gradcheck::goal_free_net},
      {"q-network", gradcheck::q_network},
  };
  const int seeds = 25;
  double worst = 0;
  std::string worst_name;
  for (const auto& [name, check] : checks) {
    for (int s = 1; s <= seeds; ++s) {
      const double e = check(static_cast<std::uint64_t>(s));
      if (!(e <= worst)) {
        worst = e;
        worst_name = name + " seed " + std::to_string(s);
      }
    }
  }
  return {worst < 1e-4, std::to_string(checks.size()) + " passes x " + std::to_string(seeds) +
                            " seeds, max rel err " + sci(worst) + " (" + worst_name + "), need < 1e-4"};
}

// ---- 2: BFS vs Dijkstra ---------------------------------------------------

Verdict oracle_equivalence() {
  Rng rng(2024);
  int pairs = 0, mismatches = 0;
  for (int sc = 0; sc < 50; ++sc) {
    const Scene s = generate_scene({.seed = 7000u + sc, .width = 8, .height = 8,
                                    .obstacle_density = 0.05 + 0.35 * rng.uniform(), .n_targets = 1,
                                    .percept_dim = 8});
    const auto& fp = s.free_poses();
    for (int i = 0; i < 20; ++i, ++pairs) {
      const Pose a = fp[rng.below(fp.size())], b = fp[rng.below(fp.size())];
      const auto bfs = shortest_path_length(s, a, b);
      if (bfs.value_or(-1) != testsupport::dijkstra(s, a, b)) ++mismatches;
    }
  }
  return {mismatches == 0 && pairs == 1000,
          std::to_string(pairs) + " pairs on 50 scenes, " + std::to_string(mismatches) + " mismatches"};
}

// ---- 3 and 7: learnability and embedding geometry ------------------------

TrainConfig learnability_config(std::uint64_t seed) {
  TrainConfig c;
  c.seed = seed;
  c.frames_budget = 2'000'000;
  c.mode = UpdateMode::Serialized;
  c.threads = 1;
  c.eval_every = 0;
  c.rmsprop_eps = 1e-5;
  c.workers = 20;
  return c;
}

const std::vector<std::uint64_t> kSeeds{1, 2, 3, 4, 5};

struct LearnabilityRun {
  std::uint64_t seed = 0;
  EvalReport report;
  std::unique_ptr<ModelParams> params;
};

struct LearnabilityFixture {
  Scene scene = generate_scene({.seed = 1001, .width = 10, .height = 10, .n_targets = 5});
  std::vector<LearnabilityRun> runs;

  void ensure_trained() {
    if (!runs.empty()) return;
    const auto tasks = make_tasks(std::span<const Scene>(&scene, 1));
    for (std::uint64_t seed : kSeeds) {
      const auto t0 = std::chrono::steady_clock::now();
      const TrainConfig c = learnability_config(seed);
      LearnabilityRun run;
      run.seed = seed;
      run.params = make_model(c, scene.percept_dim());
      train(c, tasks, *run.params);
      run.report = evaluate(*run.params, tasks, {20, 500, 500, 0.0}, hash_combine(seed, 0xacce55ULL));
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      std::fprintf(stderr, "    seed %llu: success %.3f, mean length %.1f (optimum %.1f), %.0f s\n",
                   static_cast<unsigned long long>(seed), run.report.success_rate, run.report.mean_length,
                   run.report.mean_shortest, secs);
      runs.push_back(std::move(run));
    }
  }
};

Verdict learnability(LearnabilityFixture& fx) {
  fx.ensure_trained();
  std::vector<double> success, ratio;
  for (const auto& r : fx.runs) {
    success.push_back(r.report.success_rate);
    ratio.push_back(r.report.mean_length / r.report.mean_shortest);
  }
  const double ms = median(success), mr = median(ratio);
  return {ms >= 0.9 && mr <= 3.0, "median success " + fmt(ms) + " (need >= 0.9), median length/optimum " + fmt(mr, 2) +
                                      " (need <= 3); per seed success [" + list(success) + "], ratio [" +
                                      list(ratio, 2) + "]"};
}

Verdict embedding(LearnabilityFixture& fx) {
  fx.ensure_trained();
  std::vector<double> rs, ps, nulls;
  for (const auto& r : fx.runs) {
    const auto res = embedding_geometry(r.params->core(), fx.scene, 5000, r.seed);
    rs.push_back(res.corr.r);
    ps.push_back(res.corr.p);
  }
  const Scene flat = generate_scene({.seed = 1001, .width = 10, .height = 10, .n_targets = 5, .smoothing = 0.0});
  for (std::uint64_t seed : kSeeds) {
    auto fresh = make_model(learnability_config(seed), flat.percept_dim());
    nulls.push_back(embedding_geometry(fresh->core(), flat, 5000, seed).corr.r);
  }
  const double mr = median(rs), mp = median(ps), mn = median(nulls);
  return {mr > 0.4 && mp < 0.01 && std::abs(mn) < 0.2,
          "median trained r " + fmt(mr) + " (p " + fmt(mp, 6) + "), untrained null r " + fmt(mn) +
              "; per seed r [" + list(rs) + "], null [" + list(nulls) + "]"};
}

// ---- 4: baseline ordering --------------------------------------------------

Config comparison_config() {
  Config cfg;
  cfg.train.frames_budget = 2'000'000;
  cfg.train.eval_every = 0;
  cfg.train.rmsprop_eps = 1e-5;
  cfg.train.workers = 20;
  cfg.scenes.scene_count = 5;
  cfg.exp.exp_scenes = 5;
  cfg.exp.exp_tasks_per_scene = 4;
  cfg.scenes.scene_width = 8;
  cfg.scenes.scene_height = 8;
  cfg.eval.success_cap = 500;
  return cfg;
}

Verdict ordering(const fs::path& out) {
  const auto res = run_baseline_comparison(comparison_config(), out / "comparison", progress());
  const std::vector<std::string> order{"shortest", "final", "single-branch", "a3c4", "a3c1", "q1", "random"};
  const std::vector<bool> strict{false, true, true, true, false, false};  // relation after each entry
  bool ok = true;
  std::string chain;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const double v = res.at(order[i]).median_length;
    chain += order[i] + " " + fmt(v, 1);
    if (i + 1 < order.size()) {
      const double next = res.at(order[i + 1]).median_length;
      const bool holds = strict[i] ? v < next : v <= next;
      ok = ok && holds;
      chain += holds ? (strict[i] ? " < " : " <= ") : (strict[i] ? " !< " : " !<= ");
    }
  }
  return {ok, chain};
}

// ---- 5: target generalization ------------------------------------------------

Config target_gen_config() {
  Config cfg;
  cfg.train.eval_every = 0;
  cfg.train.rmsprop_eps = 1e-5;
  cfg.train.workers = 20;
  cfg.exp.target_gen_budget = 1'000'000;
  return cfg;
}

Verdict target_generalization(const fs::path& out) {
  const Config cfg = target_gen_config();
  const auto res = run_target_generalization(cfg, out / "target_gen", progress());
  bool ok = true;
  std::string detail = "rho by distance:";
  for (int d : cfg.exp.target_gen_distances) {
    const double rho = res.rho.at(d);
    ok = ok && rho > 0;
    detail += " d" + std::to_string(d) + "=" + fmt(rho, 2);
  }
  const auto* near = res.find(8, 1);
  const auto* far = res.find(8, 8);
  const bool adj = near && far && std::isfinite(near->median_success) &&
                   (!std::isfinite(far->median_success) || near->median_success >= far->median_success);
  ok = ok && adj;
  detail += "; at 8 targets bin1 " + fmt(near ? near->median_success : NAN) + " vs bin8 " +
            fmt(far ? far->median_success : NAN);
  return {ok, detail};
}

// ---- 6: scene generalization ---------------------------------------------------

Config scene_gen_config() {
  Config cfg;
  cfg.train.eval_every = 0;
  cfg.train.rmsprop_eps = 1e-5;
  cfg.exp.scene_gen_counts = {8};
  return cfg;
}

Verdict scene_generalization(const fs::path& out) {
  const auto res = run_scene_generalization(scene_gen_config(), out / "scene_gen", progress());
  const double pre = res.median_frames("pretrain-8"), scratch = res.median_frames("scratch");
  const double zs = median(res.zero_shot_success), rw = median(res.random_success);
  return {pre < scratch && zs < rw, "frames-to-threshold pretrained-8 " + fmt(pre, 0) + " vs scratch " +
                                        fmt(scratch, 0) + "; zero-shot success " + fmt(zs) + " vs random walk " +
                                        fmt(rw)};
}

// ---- 8: determinism ------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Verdict determinism(const fs::path& out) {
  const Scene scene = generate_scene({.seed = 88, .width = 6, .height = 6, .n_targets = 3});
  const auto tasks = make_tasks(std::span<const Scene>(&scene, 1));
  TrainConfig c;
  c.seed = 17;
  c.frames_budget = 60'000;
  c.workers = 1;
  c.threads = 1;
  c.mode = UpdateMode::Serialized;
  c.eval_every = 0;
  fs::create_directories(out / "determinism");
  std::vector<std::string> csv;
  std::vector<Checkpoint> ckpts;
  for (int run = 0; run < 2; ++run) {
    const fs::path path = out / "determinism" / ("metrics_" + std::to_string(run) + ".csv");
    {
      MetricsSink sink(path);
      auto params = make_model(c, scene.percept_dim());
      ckpts.push_back(train(c, tasks, *params, &sink).checkpoint);
    }
    csv.push_back(slurp(path));
  }
  const bool same_csv = !csv[0].empty() && csv[0] == csv[1];
  save_checkpoint(out / "determinism" / "final.ckpt", ckpts[0]);
  const Checkpoint back = load_checkpoint(out / "determinism" / "final.ckpt");
  auto same_bits = [](const std::vector<float>& a, const std::vector<float>& b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
  };
  bool bit_exact = back.blocks.size() == ckpts[0].blocks.size() && back.meta == ckpts[0].meta &&
                   back.branches == ckpts[0].branches;
  for (std::size_t i = 0; bit_exact && i < back.blocks.size(); ++i) {
    const auto& a = back.blocks[i];
    const auto& b = ckpts[0].blocks[i];
    bit_exact = a.name == b.name && a.rows == b.rows && a.cols == b.cols && same_bits(a.weights, b.weights) &&
                same_bits(a.bias, b.bias);
  }
  std::ostringstream first, second;
  write_checkpoint(first, ckpts[0]);
  write_checkpoint(second, back);
  bit_exact = bit_exact && first.str() == second.str() && ckpts[0] == ckpts[1];
  const auto lines = std::count(csv[0].begin(), csv[0].end(), '\n');
  return {same_csv && bit_exact, "metrics CSVs " + std::string(same_csv ? "identical" : "DIFFER") + " (" +
                                     std::to_string(lines) + " lines); checkpoint round trip " +
                                     (bit_exact ? "bit-exact" : "NOT bit-exact")};
}

// ---- 9: reward and dynamics contract ----------------------------------------------

Verdict dynamics() {
  Rng rng(909);
  int transitions = 0, violations = 0;
  for (int sc = 0; sc < 25; ++sc) {
    const Scene s = generate_scene({.seed = 9000u + sc, .width = 9, .height = 9, .obstacle_density = 0.3,
                                    .n_targets = 4, .percept_dim = 8});
    const auto& fp = s.free_poses();
    for (int i = 0; i < 400; ++i, ++transitions) {
      const Pose p = fp[rng.below(fp.size())];
      // bias towards goals next to the pose so terminal transitions are exercised
      const Pose goal = rng.uniform() < 0.3 ? testsupport::oracle_successor(s, p, static_cast<int>(rng.below(4)))
                                             : s.targets()[rng.below(s.targets().size())];
      const int a = static_cast<int>(rng.below(kNumActions));
      const auto o = apply_action(s, p, static_cast<Action>(a), goal);
      bool ok = o.reward == 10.0f || o.reward == -0.01f;
      ok = ok && (o.done == (o.reward == 10.0f));
      ok = ok && (o.done == (o.next_pose == goal));
      ok = ok && (!o.collided || o.next_pose == p);
      ok = ok && o.next_pose == testsupport::oracle_successor(s, p, a);
      Pose q = p;
      for (int k = 0; k < 4; ++k) q = apply_action(s, q, Action::TurnLeft, goal).next_pose;
      ok = ok && q == p;
      violations += ok ? 0 : 1;
    }
  }
  return {violations == 0 && transitions == 10000,
          std::to_string(transitions) + " transitions, " + std::to_string(violations) + " violations"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"navlab acceptance suite"};
  std::vector<int> only;
  std::string out_dir = (fs::temp_directory_path() / "navlab_acceptance").string();
  app.add_option("--only", only, "criteria to run (default: all)")->delimiter(',')->check(CLI::Range(1, 9));
  app.add_option("--out", out_dir, "directory for experiment artifacts");
  CLI11_PARSE(app, argc, argv);

  const std::set<int> wanted(only.begin(), only.end());
  const fs::path out(out_dir);
  fs::create_directories(out);
  LearnabilityFixture fixture;

  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"gradient correctness", gradients},
      {"oracle equivalence", oracle_equivalence},
      {"learnability floor", [&] { return learnability(fixture); }},
      {"baseline ordering", [&] { return ordering(out); }},
      {"target generalization", [&] { return target_generalization(out); }},
      {"scene generalization", [&] { return scene_generalization(out); }},
      {"embedding geometry", [&] { return embedding(fixture); }},
      {"determinism", [&] { return determinism(out); }},
      {"reward/dynamics contract", dynamics},
  };

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!wanted.empty() && !wanted.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %d %s: %s (%.1f s) %s\n", id, criteria[i].first.c_str(), v.pass ? "PASS" : "FAIL", secs,
                v.detail.c_str());
    std::fflush(stdout);
    failed += v.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
