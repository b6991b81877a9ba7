#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include "navlab/error.hpp"
#include "navlab/experiments.hpp"
#include "navlab/plot.hpp"
#include "support.hpp"

using namespace navlab;
namespace fs = std::filesystem;

namespace {

MetricsRow row(std::int64_t frames, int len, bool success) {
  MetricsRow r;
  r.frames = frames;
  r.episode_len = len;
  r.success = success;
  return r;
}

double direct_pearson(const std::vector<double>& a, const std::vector<double>& b) {
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i] / a.size();
    mb += b[i] / b.size();
  }
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

Config tiny_config() {
  Config cfg;
  cfg.train.frames_budget = 4000;
  cfg.train.eval_every = 0;
  cfg.train.rmsprop_eps = 1e-5;
  cfg.train.d_embed = 8;
  cfg.train.d_fuse = 8;
  cfg.scenes.scene_width = 4;
  cfg.scenes.scene_height = 4;
  cfg.scenes.targets_per_scene = 3;
  cfg.scenes.percept_dim = 8;
  cfg.eval.eval_episodes = 2;
  cfg.exp.seeds = {1, 2};
  cfg.exp.exp_scenes = 2;
  cfg.exp.exp_tasks_per_scene = 2;
  cfg.exp.curve_points = 4;
  return cfg;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) { fs::remove_all(path); }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("poses_at_distance partitions the free poses by distance to the nearest trained target") {
  const Scene s = generate_scene({.seed = 21, .width = 6, .height = 6, .obstacle_density = 0.2, .n_targets = 3,
                                  .percept_dim = 8});
  const auto& trained = s.targets();
  std::size_t total = 0;
  for (int d = 0; d <= 40; ++d) {
    const auto got = poses_at_distance(s, trained, d);
    total += got.size();
    std::set<int> got_idx;
    for (const Pose& p : got) got_idx.insert(s.pose_index(p));
    for (const Pose& p : s.free_poses()) {
      int best = -1;
      for (const Pose& t : trained) {
        // distance from the pose to the target, as an evaluation episode would travel
        const int dt = testsupport::dijkstra(s, p, t);
        if (dt >= 0 && (best < 0 || dt < best)) best = dt;
      }
      REQUIRE((best == d) == (got_idx.count(s.pose_index(p)) == 1));
    }
  }
  CHECK(total == s.free_poses().size());
  CHECK(poses_at_distance(s, trained, 0).size() == trained.size());
}

TEST_CASE("frames_to_threshold") {
  const std::vector<MetricsRow> rows{row(10, 5, false), row(20, 5, true), row(30, 5, true),
                                     row(40, 5, false), row(50, 5, true), row(60, 5, true)};
  CHECK(frames_to_threshold(rows, 2, 1.0) == 30);
  CHECK(frames_to_threshold(rows, 3, 2.0 / 3.0) == 30);
  CHECK(frames_to_threshold(rows, 1, 1.0) == 20);
  CHECK_FALSE(frames_to_threshold(rows, 4, 1.0).has_value());
  CHECK_FALSE(frames_to_threshold(rows, 10, 0.1).has_value());  // never a full window
  CHECK_THROWS_AS(frames_to_threshold(rows, 0, 0.5), ValidationError);
}

TEST_CASE("learning_curve bins episodes by frame") {
  const std::vector<MetricsRow> rows{row(30, 10, true), row(60, 20, true), row(310, 4, true)};
  const auto c = learning_curve(rows, 400, 4);
  REQUIRE(c.size() == 4);
  CHECK(c[0].first == 100);
  CHECK(c[0].second == 15);
  CHECK(c[1].second == 15);  // empty bin repeats
  CHECK(c[2].second == 15);
  CHECK(c[3].second == 4);
  CHECK(std::isnan(learning_curve({row(350, 3, true)}, 400, 4)[0].second));
  CHECK(learning_curve(rows, 400, 0).empty());
}

TEST_CASE("embedding geometry matches a direct computation") {
  const Scene s = generate_scene({.seed = 4, .width = 3, .height = 3, .obstacle_density = 0.0, .n_targets = 1,
                                  .percept_dim = 8});
  Rng rng(9);
  const SiameseCore core = make_core(ModelDims{.percept_dim = 8, .embed = 6, .fuse = 6}, rng);
  const auto res = embedding_geometry(core, s, 100000, 1);
  const auto& fp = s.free_poses();
  std::vector<double> de, dc;
  for (std::size_t i = 0; i < fp.size(); ++i) {
    for (std::size_t j = i + 1; j < fp.size(); ++j) {
      const auto a = embed_stack(core, reset_history(s.frame(fp[i])).flat());
      const auto b = embed_stack(core, reset_history(s.frame(fp[j])).flat());
      double e = 0;
      for (std::size_t k = 0; k < a.size(); ++k) e += (double(a[k]) - b[k]) * (double(a[k]) - b[k]);
      de.push_back(std::sqrt(e));
      dc.push_back(std::hypot(fp[i].x - fp[j].x, fp[i].y - fp[j].y));
    }
  }
  CHECK(res.corr.n == static_cast<int>(de.size()));
  CHECK(res.corr.r == doctest::Approx(direct_pearson(de, dc)).epsilon(1e-9));
  CHECK(res.projection.size() == fp.size());

  const auto sampled = embedding_geometry(core, s, 50, 1);
  CHECK(sampled.corr.n == 50);
  CHECK(embedding_geometry(core, s, 50, 1).corr.r == sampled.corr.r);
  CHECK_THROWS_AS(embedding_geometry(core, s, 0, 1), ValidationError);

  // a zeroed embed block maps every pose to the same point
  SiameseCore dead = core;
  std::fill(dead.embed.weights.begin(), dead.embed.weights.end(), 0.0f);
  std::fill(dead.embed.bias.begin(), dead.embed.bias.end(), 0.0f);
  CHECK_THROWS_AS(embedding_geometry(dead, s, 100, 1), ValidationError);
}

TEST_CASE("untrained embeddings of unsmoothed scenes carry no geometry") {
  std::vector<double> rs;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Scene s = generate_scene({.seed = 300 + seed, .width = 10, .height = 10, .obstacle_density = 0.15,
                                    .n_targets = 1, .percept_dim = 64, .smoothing = 0.0});
    Rng rng(seed);
    const SiameseCore core = make_core(ModelDims{}, rng);
    rs.push_back(embedding_geometry(core, s, 5000, seed).corr.r);
  }
  for (double r : rs) CHECK(std::abs(r) < 0.2);
}

TEST_CASE("heuristic methods") {
  const Config cfg = tiny_config();
  const auto scenes = generate_suite(cfg.scenes, 77, 2, 2);
  REQUIRE(scenes.size() == 2);
  CHECK(scenes[0].id() != scenes[1].id());
  CHECK(generate_suite(cfg.scenes, 77, 2, 2)[1].obstacle_mask() == scenes[1].obstacle_mask());
  const auto tasks = make_tasks(scenes);

  const auto sp = run_method("shortest", cfg, tasks, 3);
  CHECK_FALSE(sp.trained);
  CHECK(sp.report.sp_ratio == doctest::Approx(1.0));
  const auto walk = run_method("random", cfg, tasks, 3);
  CHECK(walk.report.mean_length >= sp.report.mean_length);
  CHECK(is_learned("final"));
  CHECK_FALSE(is_learned("random"));
  CHECK_THROWS_AS(run_method("teleport", cfg, tasks, 3), ValidationError);
  CHECK_THROWS_AS(run_method("random", cfg, std::span<const Task>{}, 3), ValidationError);
}

TEST_CASE("per-target methods split the budget") {
  const Config cfg = tiny_config();
  const auto scenes = generate_suite(cfg.scenes, 5, 1, 2);
  const auto tasks = make_tasks(scenes);
  for (const std::string m : {"a3c1", "q1"}) {
    const auto run = run_method(m, cfg, tasks, 1);
    CHECK(run.trained);
    REQUIRE_FALSE(run.metrics.empty());
    CHECK(run.metrics.back().frames <= cfg.train.frames_budget);
    CHECK(std::is_sorted(run.metrics.begin(), run.metrics.end(),
                         [](const MetricsRow& a, const MetricsRow& b) { return a.frames < b.frames; }));
    CHECK(run.report.episodes == 2 * cfg.eval.eval_episodes);
  }
}

TEST_CASE("baseline comparison end to end") {
  TempDir dir("navlab_exp_cmp");
  const Config cfg = tiny_config();
  const auto res = run_baseline_comparison(cfg, dir.path);
  REQUIRE(res.methods.size() == kComparisonMethods.size());
  for (std::size_t i = 0; i < res.methods.size(); ++i) {
    CHECK(res.methods[i].method == kComparisonMethods[i]);
    CHECK(res.methods[i].lengths.size() == 2);
  }
  CHECK(res.at("shortest").median_length <= res.at("random").median_length);
  for (const char* f : {"table.csv", "runs.csv", "curves.csv", "curves.svg", "metrics/final_seed1.csv"}) {
    CHECK(fs::exists(dir.path / f));
  }
  CHECK(read_csv_table(dir.path / "table.csv").rows.size() == kComparisonMethods.size());
  CHECK_THROWS_AS(res.at("nonsense"), ValidationError);
}
