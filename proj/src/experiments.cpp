#include "navlab/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "navlab/error.hpp"
#include "navlab/plot.hpp"
#include "navlab/scene_io.hpp"

namespace navlab {

namespace fs = std::filesystem;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void say(const Logger& log, const std::string& msg) {
  if (log) log(msg);
}

std::string num(double v, int digits = 4) {
  if (!std::isfinite(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::ofstream open_out(const fs::path& path) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

void write_metrics(const fs::path& path, const std::vector<MetricsRow>& rows) {
  auto out = open_out(path);
  out << kMetricsHeader << '\n';
  for (const auto& r : rows) out << format_metrics_row(r) << '\n';
}

double median_finite(const std::vector<double>& xs) {
  std::vector<double> v;
  for (double x : xs) {
    if (std::isfinite(x)) v.push_back(x);
  }
  return v.empty() ? kNaN : median(v);
}

std::string join(const std::vector<double>& xs, int digits) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? ";" : "") + num(xs[i], digits);
  return s;
}

TrainConfig seeded(const TrainConfig& base, std::uint64_t seed, std::int64_t budget) {
  TrainConfig t = base;
  t.seed = seed;
  t.frames_budget = std::max<std::int64_t>(budget, t.t_max);
  return t;
}

void save_suite(const fs::path& dir, const std::vector<Scene>& scenes) {
  fs::create_directories(dir);
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "scene_%03zu.navscn", i);
    save_scene(dir / name, scenes[i]);
  }
}

}  // namespace

std::vector<Scene> generate_suite(const SceneConfig& sc, std::uint64_t base_seed, int count, int targets) {
  std::vector<Scene> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    SceneSpec spec;
    spec.seed = hash_combine(base_seed, static_cast<std::uint64_t>(i));
    spec.width = sc.scene_width;
    spec.height = sc.scene_height;
    spec.obstacle_density = sc.obstacle_density;
    spec.n_targets = targets;
    spec.percept_dim = sc.percept_dim;
    spec.smoothing = sc.smoothing;
    out.push_back(generate_scene(spec));
  }
  return out;
}

EvalOptions eval_options(const Config& cfg) {
  return {cfg.eval.eval_episodes, cfg.train.episode_cap, cfg.eval.success_cap, cfg.train.slip_prob};
}

std::uint64_t eval_seed(std::uint64_t seed) { return hash_combine(seed, 0x6576616cULL); }

std::string method_label(const std::string& method) {
  if (method == "random") return "Random walk";
  if (method == "shortest") return "Shortest path";
  if (method == "q1") return "One-step Q";
  if (method == "a3c1") return "A3C (1 thread)";
  if (method == "a3c4") return "A3C (4 threads)";
  if (method == "single-branch") return "Single branch";
  if (method == "final") return "Final";
  throw ValidationError("unknown method '" + method + "'");
}

bool is_learned(const std::string& method) { return method != "random" && method != "shortest"; }

namespace {

std::string method_type(const std::string& method) {
  if (!is_learned(method)) return "heuristic";
  if (method == "single-branch" || method == "final") return "target-driven";
  return "purpose-built";
}

}  // namespace

MethodRun run_method(const std::string& method, const Config& cfg, std::span<const Task> tasks, std::uint64_t seed) {
  method_label(method);
  if (tasks.empty()) throw ValidationError("no tasks to run");
  const EvalOptions opts = eval_options(cfg);
  const std::uint64_t es = eval_seed(seed);
  MethodRun run;

  if (method == "random") {
    RandomAgent agent;
    run.report = evaluate(agent, tasks, opts, es);
    return run;
  }
  if (method == "shortest") {
    OracleAgent agent;
    run.report = evaluate(agent, tasks, opts, es);
    return run;
  }
  run.trained = true;
  if (method == "final" || method == "single-branch") {
    TrainConfig tc = seeded(cfg.train, seed, cfg.train.frames_budget);
    tc.single_branch = method == "single-branch";
    auto params = make_model(tc, tasks.front().scene->percept_dim());
    MetricsSink sink;
    TrainResult r = train(tc, tasks, *params, &sink);
    run.metrics = std::move(r.metrics);
    run.checkpoint = std::move(r.checkpoint);
    run.report = evaluate(*params, tasks, opts, es, cfg.eval.eval_argmax);
    return run;
  }

  // per-target methods: one network per task, budget split evenly
  const auto n = static_cast<std::int64_t>(tasks.size());
  const std::int64_t per_task = std::max<std::int64_t>(cfg.train.frames_budget / n, cfg.train.t_max);
  std::vector<std::pair<int, Checkpoint>> parts;
  for (const Task& task : tasks) {
    const std::uint64_t task_seed = hash_combine(seed, static_cast<std::uint64_t>(task.task_id));
    TrainConfig tc = seeded(cfg.train, task_seed, per_task);
    BaselineRun br = method == "q1" ? one_step_q_train(tc, cfg.baseline, task, task_seed)
                                    : per_target_a3c_train(tc, task, method == "a3c4" ? 4 : 1, task_seed);
    for (MetricsRow row : br.metrics) {
      row.frames *= n;
      run.metrics.push_back(row);
    }
    parts.emplace_back(task.task_id, std::move(br.checkpoint));
  }
  std::stable_sort(run.metrics.begin(), run.metrics.end(), [](const MetricsRow& a, const MetricsRow& b) {
    return a.frames != b.frames ? a.frames < b.frames : a.task_id < b.task_id;
  });
  run.checkpoint = merge_task_checkpoints(method == "q1" ? "q_network" : "goal_free_ac", parts);
  run.checkpoint.meta["method"] = method;
  std::unique_ptr<ModelParams> holder;
  auto agent = make_agent(run.checkpoint, holder, cfg.eval.eval_argmax);
  run.report = evaluate(*agent, tasks, opts, es);
  return run;
}

std::vector<std::pair<double, double>> learning_curve(const std::vector<MetricsRow>& rows, std::int64_t budget,
                                                      int points) {
  std::vector<std::pair<double, double>> out;
  if (points < 1 || budget < 1) return out;
  std::size_t i = 0;
  double last = kNaN;
  for (int b = 1; b <= points; ++b) {
    const double edge = static_cast<double>(budget) * b / points;
    double sum = 0.0;
    int count = 0;
    while (i < rows.size() && static_cast<double>(rows[i].frames) <= edge) {
      sum += rows[i].episode_len;
      ++count;
      ++i;
    }
    if (count > 0) last = sum / count;
    out.emplace_back(edge, last);
  }
  return out;
}

const MethodSummary& ComparisonResult::at(const std::string& method) const {
  for (const auto& m : methods) {
    if (m.method == method) return m;
  }
  throw ValidationError("no result for method " + method);
}

ComparisonResult run_baseline_comparison(const Config& cfg, const fs::path& out_dir, const Logger& log) {
  const auto scenes =
      generate_suite(cfg.scenes, cfg.scenes.scene_seed, cfg.exp.exp_scenes, cfg.scenes.targets_per_scene);
  save_suite(out_dir / "scenes", scenes);
  const auto tasks = make_tasks(scenes, cfg.exp.exp_tasks_per_scene);
  say(log, "baseline-comparison: " + std::to_string(scenes.size()) + " scenes, " + std::to_string(tasks.size()) +
               " tasks, " + std::to_string(cfg.exp.seeds.size()) + " seeds");

  ComparisonResult result;
  std::map<std::string, std::vector<std::vector<std::pair<double, double>>>> curves;
  auto runs = open_out(out_dir / "runs.csv");
  runs << "method,seed,mean_length,success_rate,sp_ratio,train_frames\n";
  for (const auto& method : kComparisonMethods) result.methods.push_back({method, {}, {}, 0.0, 0.0});

  for (std::uint64_t seed : cfg.exp.seeds) {
    for (auto& summary : result.methods) {
      const auto& method = summary.method;
      MethodRun run = run_method(method, cfg, tasks, seed);
      summary.lengths.push_back(run.report.mean_length);
      summary.successes.push_back(run.report.success_rate);
      const std::int64_t frames = run.metrics.empty() ? 0 : run.metrics.back().frames;
      runs << method << ',' << seed << ',' << num(run.report.mean_length, 2) << ',' << num(run.report.success_rate)
           << ',' << num(run.report.sp_ratio) << ',' << frames << '\n';
      if (run.trained) {
        write_metrics(out_dir / "metrics" / (method + "_seed" + std::to_string(seed) + ".csv"), run.metrics);
        curves[method].push_back(learning_curve(run.metrics, cfg.train.frames_budget, cfg.exp.curve_points));
      }
      say(log, "  seed " + std::to_string(seed) + " " + method + ": mean length " + num(run.report.mean_length, 1) +
                   ", success " + num(run.report.success_rate, 3));
    }
  }

  auto table = open_out(out_dir / "table.csv");
  table << "type,method,mean_length,success_rate,seeds,per_seed_mean_length\n";
  for (auto& m : result.methods) {
    m.median_length = median(m.lengths);
    m.median_success = median(m.successes);
    table << method_type(m.method) << ',' << method_label(m.method) << ',' << num(m.median_length, 2) << ','
          << num(m.median_success) << ',' << m.lengths.size() << ',' << join(m.lengths, 2) << '\n';
  }
  table.close();

  {
    auto out = open_out(out_dir / "curves.csv");
    out << "series,frames,episode_length\n";
    for (const auto& method : kComparisonMethods) {
      auto it = curves.find(method);
      if (it == curves.end()) continue;
      const auto& per_seed = it->second;
      for (std::size_t b = 0; b < per_seed.front().size(); ++b) {
        std::vector<double> ys;
        for (const auto& c : per_seed) ys.push_back(c[b].second);
        out << method_label(method) << ',' << num(per_seed.front()[b].first, 0) << ',' << num(median_finite(ys), 2)
            << '\n';
      }
    }
  }
  plot_csv(out_dir / "curves.csv", out_dir);
  return result;
}

const TargetGenCell* TargetGenResult::find(int trained, int distance) const {
  for (const auto& c : cells) {
    if (c.trained == trained && c.distance == distance) return &c;
  }
  return nullptr;
}

std::vector<Pose> poses_at_distance(const Scene& scene, std::span<const Pose> trained, int distance) {
  std::vector<int> best(static_cast<std::size_t>(scene.pose_slots()), -1);
  for (const Pose& t : trained) {
    const auto d = distances_from(scene, t);
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (d[i] >= 0 && (best[i] < 0 || d[i] < best[i])) best[i] = d[i];
    }
  }
  std::vector<Pose> out;
  for (const Pose& p : scene.free_poses()) {
    if (best[scene.pose_index(p)] == distance) out.push_back(p);
  }
  return out;
}

TargetGenResult run_target_generalization(const Config& cfg, const fs::path& out_dir, const Logger& log) {
  const auto& counts = cfg.exp.target_gen_counts;
  const int max_count = *std::max_element(counts.begin(), counts.end());
  if (cfg.scenes.targets_per_scene < max_count) {
    throw ValidationError("targets_per_scene (" + std::to_string(cfg.scenes.targets_per_scene) +
                          ") must cover the largest trained-target count (" + std::to_string(max_count) + ")");
  }
  const auto scenes = generate_suite(cfg.scenes, hash_combine(cfg.scenes.scene_seed, 0x74676eULL), 1,
                                     cfg.scenes.targets_per_scene);
  save_suite(out_dir / "scenes", scenes);
  const Scene& scene = scenes.front();
  EvalOptions opts = eval_options(cfg);
  opts.episodes_per_task = cfg.exp.target_gen_episodes;

  std::vector<int> distances{0};
  distances.insert(distances.end(), cfg.exp.target_gen_distances.begin(), cfg.exp.target_gen_distances.end());
  TargetGenResult result;
  for (int c : counts) {
    for (int d : distances) result.cells.push_back({c, d, {}, {}, kNaN});
  }
  auto cell = [&](int c, int d) -> TargetGenCell& { return *const_cast<TargetGenCell*>(result.find(c, d)); };

  auto per_seed = open_out(out_dir / "target_gen_seeds.csv");
  per_seed << "seed,trained_targets,distance,success_rate,held_out_targets\n";
  for (std::uint64_t seed : cfg.exp.seeds) {
    // nested trained sets: the first c of one shuffled candidate list
    std::vector<Pose> order = scene.targets();
    Rng shuffle_rng(hash_combine(seed, 0x6f72646572ULL));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.below(i)]);

    for (int c : counts) {
      std::vector<Task> tasks;
      std::vector<Pose> trained(order.begin(), order.begin() + c);
      for (int i = 0; i < c; ++i) tasks.push_back({&scene, trained[i], i});
      const TrainConfig tc = seeded(cfg.train, hash_combine(seed, static_cast<std::uint64_t>(c)), cfg.exp.target_gen_budget);
      auto params = make_model(tc, scene.percept_dim());
      train(tc, tasks, *params);

      for (int d : distances) {
        std::vector<Task> eval_tasks;
        if (d == 0) {
          eval_tasks = tasks;
        } else {
          auto pool = poses_at_distance(scene, trained, d);
          Rng pick(hash_combine(hash_combine(seed, static_cast<std::uint64_t>(c)), static_cast<std::uint64_t>(d)));
          const std::size_t take = std::min<std::size_t>(pool.size(), cfg.exp.target_gen_bin_targets);
          for (std::size_t i = 0; i < take; ++i) std::swap(pool[i], pool[i + pick.below(pool.size() - i)]);
          for (std::size_t i = 0; i < take; ++i) eval_tasks.push_back({&scene, pool[i], 1000 + static_cast<int>(i)});
        }
        double success = kNaN;
        if (!eval_tasks.empty()) success = evaluate(*params, eval_tasks, opts, eval_seed(seed), cfg.eval.eval_argmax).success_rate;
        auto& cl = cell(c, d);
        cl.success.push_back(success);
        cl.held_out.push_back(static_cast<int>(eval_tasks.size()));
        per_seed << seed << ',' << c << ',' << d << ',' << num(success) << ',' << eval_tasks.size() << '\n';
      }
      say(log, "  seed " + std::to_string(seed) + " trained " + std::to_string(c) + ": self success " +
                   num(cell(c, 0).success.back(), 3));
    }
  }
  per_seed.close();

  auto grid = open_out(out_dir / "target_gen.csv");
  grid << "trained_targets,distance,success_rate,held_out_targets_min,seeds_with_data\n";
  for (auto& cl : result.cells) {
    cl.median_success = median_finite(cl.success);
    int with_data = 0;
    for (double s : cl.success) with_data += std::isfinite(s) ? 1 : 0;
    grid << cl.trained << ',' << cl.distance << ',' << num(cl.median_success) << ','
         << *std::min_element(cl.held_out.begin(), cl.held_out.end()) << ',' << with_data << '\n';
  }
  grid.close();

  auto rho_out = open_out(out_dir / "target_gen_rho.csv");
  rho_out << "distance,spearman_rho\n";
  for (int d : cfg.exp.target_gen_distances) {
    std::vector<double> xs, ys;
    for (int c : counts) {
      const double s = result.find(c, d)->median_success;
      if (!std::isfinite(s)) continue;
      xs.push_back(c);
      ys.push_back(s);
    }
    double rho = kNaN;
    try {
      rho = spearman(xs, ys).r;
    } catch (const ValidationError&) {
      // fewer than three bins or constant success: undefined
    }
    result.rho[d] = rho;
    rho_out << d << ',' << num(rho) << '\n';
  }
  rho_out.close();
  plot_csv(out_dir / "target_gen.csv", out_dir);
  return result;
}

std::optional<std::int64_t> frames_to_threshold(const std::vector<MetricsRow>& rows, int window, double threshold) {
  if (window < 1) throw ValidationError("window must be >= 1");
  int hits = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    hits += rows[i].success ? 1 : 0;
    if (i >= static_cast<std::size_t>(window)) hits -= rows[i - window].success ? 1 : 0;
    if (i + 1 >= static_cast<std::size_t>(window) && hits >= threshold * window) return rows[i].frames;
  }
  return std::nullopt;
}

double SceneGenResult::median_frames(const std::string& condition) const {
  auto it = frames.find(condition);
  if (it == frames.end() || it->second.empty()) throw ValidationError("no scene-gen result for " + condition);
  return median(it->second);
}

namespace {

struct FinetuneOutcome {
  std::int64_t frames = 0;
  bool reached = false;
  std::vector<MetricsRow> rows;
};

FinetuneOutcome finetune(const Config& cfg, ModelParams& params, std::span<const Task> tasks, std::uint64_t seed,
                         bool freeze) {
  TrainConfig tc = seeded(cfg.train, seed, cfg.exp.scene_gen_finetune_budget);
  tc.freeze_core = freeze;
  MetricsSink sink;
  const int window = cfg.exp.scene_gen_window;
  const double threshold = cfg.exp.scene_gen_threshold;
  sink.set_stop_rule([window, threshold](const std::vector<MetricsRow>& rows) {
    if (rows.size() < static_cast<std::size_t>(window)) return false;
    int hits = 0;
    for (std::size_t i = rows.size() - window; i < rows.size(); ++i) hits += rows[i].success ? 1 : 0;
    return hits >= threshold * window;
  });
  train(tc, tasks, params, &sink);
  FinetuneOutcome out;
  out.rows = sink.rows();
  const auto hit = frames_to_threshold(out.rows, window, threshold);
  out.reached = hit.has_value();
  out.frames = hit.value_or(tc.frames_budget);
  return out;
}

}  // namespace

SceneGenResult run_scene_generalization(const Config& cfg, const fs::path& out_dir, const Logger& log) {
  const auto& counts = cfg.exp.scene_gen_counts;
  const int max_count = *std::max_element(counts.begin(), counts.end());
  const int n_targets = cfg.exp.scene_gen_targets;
  const auto train_pool =
      generate_suite(cfg.scenes, hash_combine(cfg.scenes.scene_seed, 0x7472616eULL), max_count, n_targets);
  const auto test_scenes = generate_suite(cfg.scenes, hash_combine(cfg.scenes.scene_seed, 0x74657374ULL),
                                          cfg.exp.scene_gen_test_scenes, n_targets);
  save_suite(out_dir / "scenes" / "train", train_pool);
  save_suite(out_dir / "scenes" / "test", test_scenes);
  const int percept_dim = cfg.scenes.percept_dim;
  const auto all_test_tasks = make_tasks(test_scenes);

  SceneGenResult result;
  std::map<std::string, std::vector<std::vector<std::pair<double, double>>>> curves;
  auto per_run = open_out(out_dir / "scene_gen_runs.csv");
  per_run << "seed,condition,test_scene,frames_to_threshold,reached\n";

  auto record = [&](std::uint64_t seed, const std::string& condition, std::vector<FinetuneOutcome>& outs) {
    std::vector<double> frames;
    int reached = 0;
    for (std::size_t j = 0; j < outs.size(); ++j) {
      frames.push_back(static_cast<double>(outs[j].frames));
      reached += outs[j].reached ? 1 : 0;
      per_run << seed << ',' << condition << ',' << j << ',' << outs[j].frames << ',' << (outs[j].reached ? 1 : 0)
              << '\n';
      // rolling success over the window, held at its last value after an early stop
      std::vector<std::pair<double, double>> curve;
      const auto budget = cfg.exp.scene_gen_finetune_budget;
      std::size_t i = 0;
      int hits = 0;
      double last = 0.0;
      const int window = cfg.exp.scene_gen_window;
      for (int b = 1; b <= cfg.exp.curve_points; ++b) {
        const double edge = static_cast<double>(budget) * b / cfg.exp.curve_points;
        for (; i < outs[j].rows.size() && outs[j].rows[i].frames <= edge; ++i) {
          hits += outs[j].rows[i].success ? 1 : 0;
          if (i >= static_cast<std::size_t>(window)) hits -= outs[j].rows[i - window].success ? 1 : 0;
          last = static_cast<double>(hits) / std::min<std::size_t>(i + 1, window);
        }
        curve.emplace_back(edge, last);
      }
      curves[condition].push_back(std::move(curve));
    }
    result.frames[condition].push_back(median(frames));
    result.reached[condition].push_back(reached);
    say(log, "  seed " + std::to_string(seed) + " " + condition + ": median frames-to-threshold " +
                 num(result.frames[condition].back(), 0) + " (" + std::to_string(reached) + "/" +
                 std::to_string(outs.size()) + " reached)");
  };

  for (std::uint64_t seed : cfg.exp.seeds) {
    for (int n : counts) {
      std::vector<Scene> subset(train_pool.begin(), train_pool.begin() + n);
      const auto tasks = make_tasks(subset);
      const TrainConfig tc =
          seeded(cfg.train, hash_combine(seed, static_cast<std::uint64_t>(n)), cfg.exp.scene_gen_pretrain_budget);
      auto params = make_model(tc, percept_dim);
      train(tc, tasks, *params);
      const Checkpoint pre = params->to_checkpoint();
      std::vector<FinetuneOutcome> outs;
      for (std::size_t j = 0; j < test_scenes.size(); ++j) {
        auto p = ModelParams::from_checkpoint(pre, cfg.train.mode, cfg.train.optimizer());
        const auto tasks_j = make_tasks(std::span<const Scene>(&test_scenes[j], 1));
        outs.push_back(finetune(cfg, *p, tasks_j, hash_combine(hash_combine(seed, 0x6674ULL + n), j), true));
      }
      record(seed, "pretrain-" + std::to_string(n), outs);
    }

    std::vector<FinetuneOutcome> scratch;
    for (std::size_t j = 0; j < test_scenes.size(); ++j) {
      const TrainConfig tc = seeded(cfg.train, hash_combine(seed, 0x736372ULL + j), cfg.exp.scene_gen_finetune_budget);
      auto p = make_model(tc, percept_dim);
      const auto tasks_j = make_tasks(std::span<const Scene>(&test_scenes[j], 1));
      scratch.push_back(finetune(cfg, *p, tasks_j, tc.seed, false));
    }
    record(seed, "scratch", scratch);

    // single-branch zero-shot on the unseen scenes
    {
      std::vector<Scene> subset(train_pool.begin(), train_pool.begin() + max_count);
      const auto tasks = make_tasks(subset);
      TrainConfig tc = seeded(cfg.train, hash_combine(seed, 0x7a65726fULL), cfg.exp.scene_gen_pretrain_budget);
      tc.single_branch = true;
      auto params = make_model(tc, percept_dim);
      train(tc, tasks, *params);
      const auto opts = eval_options(cfg);
      const double zs = evaluate(*params, all_test_tasks, opts, eval_seed(seed), cfg.eval.eval_argmax).success_rate;
      RandomAgent random;
      const double rw = evaluate(random, all_test_tasks, opts, eval_seed(seed)).success_rate;
      result.zero_shot_success.push_back(zs);
      result.random_success.push_back(rw);
      say(log, "  seed " + std::to_string(seed) + " single-branch zero-shot success " + num(zs, 3) +
                   " vs random walk " + num(rw, 3));
    }
  }
  per_run.close();

  auto summary = open_out(out_dir / "scene_gen.csv");
  summary << "condition,median_frames_to_threshold,reached_runs,total_runs,seeds\n";
  for (const auto& [condition, frames] : result.frames) {
    const auto& reached = result.reached.at(condition);
    summary << condition << ',' << num(median(frames), 0) << ','
            << std::accumulate(reached.begin(), reached.end(), 0) << ','
            << reached.size() * test_scenes.size() << ',' << frames.size() << '\n';
  }
  summary << "zero-shot-single-branch-success," << num(median(result.zero_shot_success)) << ",,,"
          << result.zero_shot_success.size() << '\n';
  summary << "random-walk-success," << num(median(result.random_success)) << ",,," << result.random_success.size()
          << '\n';
  summary.close();

  {
    auto out = open_out(out_dir / "scene_gen_curves.csv");
    out << "series,frames,success_rate\n";
    for (const auto& [condition, runs] : curves) {
      for (std::size_t b = 0; b < runs.front().size(); ++b) {
        double sum = 0.0;
        for (const auto& c : runs) sum += c[b].second;
        out << condition << ',' << num(runs.front()[b].first, 0) << ',' << num(sum / runs.size()) << '\n';
      }
    }
  }
  plot_csv(out_dir / "scene_gen_curves.csv", out_dir);
  return result;
}

EmbeddingResult embedding_geometry(const SiameseCore& core, const Scene& scene, int max_pairs, std::uint64_t seed) {
  if (max_pairs < 1) throw ValidationError("max_pairs must be >= 1");
  EmbeddingResult res;
  res.poses = scene.free_poses();
  const std::size_t n = res.poses.size();
  if (n < 3) throw ValidationError("scene has too few free poses for an embedding analysis");
  std::vector<std::vector<float>> emb;
  emb.reserve(n);
  for (const Pose& p : res.poses) {
    const ObservationStack s = reset_history(scene.frame(p));
    emb.push_back(embed_stack(core, s.flat()));
  }

  std::vector<double> de, dc;
  auto add_pair = [&](std::size_t i, std::size_t j) {
    double e = 0.0;
    for (std::size_t k = 0; k < emb[i].size(); ++k) {
      const double t = static_cast<double>(emb[i][k]) - emb[j][k];
      e += t * t;
    }
    const double dx = res.poses[i].x - res.poses[j].x, dy = res.poses[i].y - res.poses[j].y;
    de.push_back(std::sqrt(e));
    dc.push_back(std::sqrt(dx * dx + dy * dy));
  };
  const std::uint64_t total = static_cast<std::uint64_t>(n) * (n - 1) / 2;
  if (total <= static_cast<std::uint64_t>(max_pairs)) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) add_pair(i, j);
    }
  } else {
    Rng rng(hash_combine(seed, 0x70616972ULL));
    for (int k = 0; k < max_pairs; ++k) {
      const std::size_t i = rng.below(n);
      std::size_t j = rng.below(n - 1);
      if (j >= i) ++j;
      add_pair(i, j);
    }
  }
  try {
    res.corr = pearson(de, dc);
  } catch (const ValidationError& e) {
    throw ValidationError(std::string("embedding geometry undefined: ") + e.what());
  }
  res.projection = pca_2d(emb);
  return res;
}

void write_projection_csv(const fs::path& path, const EmbeddingResult& r) {
  auto out = open_out(path);
  out << "x,y,heading,pc1,pc2\n";
  for (std::size_t i = 0; i < r.poses.size(); ++i) {
    out << r.poses[i].x << ',' << r.poses[i].y << ',' << heading_char(r.poses[i].heading) << ','
        << num(r.projection[i][0], 6) << ',' << num(r.projection[i][1], 6) << '\n';
  }
}

EmbeddingStudy run_embedding_study(const Config& cfg, const fs::path& out_dir, const Logger& log) {
  const auto scenes =
      generate_suite(cfg.scenes, hash_combine(cfg.scenes.scene_seed, 0x656d62ULL), 1, cfg.scenes.targets_per_scene);
  SceneConfig flat = cfg.scenes;
  flat.smoothing = 0.0;
  const auto null_scenes = generate_suite(flat, hash_combine(cfg.scenes.scene_seed, 0x656d62ULL), 1, 1);
  save_suite(out_dir / "scenes", scenes);
  const Scene& scene = scenes.front();
  const auto tasks = make_tasks(scenes);

  EmbeddingStudy study;
  auto out = open_out(out_dir / "embedding.csv");
  out << "seed,condition,pearson_r,p_value,pairs\n";
  for (std::uint64_t seed : cfg.exp.seeds) {
    const TrainConfig tc = seeded(cfg.train, seed, cfg.train.frames_budget);
    auto params = make_model(tc, scene.percept_dim());
    train(tc, tasks, *params);
    const auto trained = embedding_geometry(params->core(), scene, cfg.exp.embedding_max_pairs, seed);
    write_projection_csv(out_dir / ("projection_seed" + std::to_string(seed) + ".csv"), trained);
    study.trained.push_back(trained.corr);
    out << seed << ",trained," << num(trained.corr.r) << ',' << num(trained.corr.p, 6) << ',' << trained.corr.n << '\n';

    auto fresh = make_model(tc, null_scenes.front().percept_dim());
    const auto null = embedding_geometry(fresh->core(), null_scenes.front(), cfg.exp.embedding_max_pairs, seed);
    study.null.push_back(null.corr);
    out << seed << ",untrained-null," << num(null.corr.r) << ',' << num(null.corr.p, 6) << ',' << null.corr.n << '\n';
    say(log, "  seed " + std::to_string(seed) + ": r=" + num(trained.corr.r, 3) + " (p=" + num(trained.corr.p, 4) +
                 "), untrained null r=" + num(null.corr.r, 3));
  }
  return study;
}

}  // namespace navlab
