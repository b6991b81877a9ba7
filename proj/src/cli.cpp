#include "navlab/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "navlab/baselines.hpp"
#include "navlab/checkpoint.hpp"
#include "navlab/config.hpp"
#include "navlab/error.hpp"
#include "navlab/experiments.hpp"
#include "navlab/manifest.hpp"
#include "navlab/plot.hpp"
#include "navlab/scene_io.hpp"
#include "navlab/trainer.hpp"

namespace navlab {

namespace fs = std::filesystem;

namespace {

bool g_quiet = false;

void info(const std::string& msg) {
  if (!g_quiet) std::cerr << msg << '\n';
}

std::string command_line(int argc, char** argv) {
  std::string s;
  for (int i = 0; i < argc; ++i) s += (i ? " " : "") + std::string(argv[i]);
  return s;
}

Config load_config(const std::string& path) {
  if (path.empty()) return Config{};
  return parse_config(path);
}

fs::path write_effective_config(const fs::path& out, const Config& cfg) {
  fs::create_directories(out);
  const auto path = out / "effective_config.txt";
  std::ofstream f(path);
  if (!f) throw Error("cannot write " + path.string());
  f << cfg.to_text();
  return path;
}

void add_scene_inputs(RunManifest& m, const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() == ".navscn") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) m.add_input(f);
}

void print_report(const std::string& what, const EvalReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s: %d episodes, mean length %.1f (shortest %.1f), success %.3f", what.c_str(),
                r.episodes, r.mean_length, r.mean_shortest, r.success_rate);
  info(buf);
}

// Runs body with a manifest that records "running" first and the final status last.
template <typename Body>
void with_manifest(const fs::path& out, const std::string& cmd, Body&& body) {
  fs::create_directories(out);
  RunManifest manifest(out, cmd);
  manifest.write("running");
  try {
    body(manifest);
  } catch (const std::exception& e) {
    manifest.write(std::string("failed: ") + e.what());
    throw;
  }
  manifest.write("ok");
}

struct Args {
  std::string config, scenes, out, init, checkpoint, method, kind;
  bool freeze_core = false;
  std::uint64_t seed = 1;
  int count = 5;
  std::optional<int> width, height, targets, dim;
  std::optional<double> density, smoothing;
  std::optional<int> max_pairs;
  std::optional<std::uint64_t> eval_seed_override;
  std::vector<std::string> inputs;
};

void cmd_gen_scenes(const Args& a, const std::string& cmd) {
  Config cfg = load_config(a.config);
  SceneConfig sc = cfg.scenes;
  if (a.width) sc.scene_width = *a.width;
  if (a.height) sc.scene_height = *a.height;
  if (a.targets) sc.targets_per_scene = *a.targets;
  if (a.dim) sc.percept_dim = *a.dim;
  if (a.density) sc.obstacle_density = *a.density;
  if (a.smoothing) sc.smoothing = *a.smoothing;
  if (a.count < 1) throw ValidationError("--count must be >= 1");
  with_manifest(a.out, cmd, [&](RunManifest& m) {
    m.set_seeds({a.seed});
    m.note("count", static_cast<double>(a.count));
    const auto scenes = generate_suite(sc, a.seed, a.count, sc.targets_per_scene);
    for (std::size_t i = 0; i < scenes.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "scene_%03zu.navscn", i);
      const fs::path p = fs::path(a.out) / name;
      save_scene(p, scenes[i]);
      m.add_output(p);
      info("wrote " + p.string() + " (" + scenes[i].id() + ", " + std::to_string(scenes[i].free_cell_count()) +
           " free cells, " + std::to_string(scenes[i].targets().size()) + " targets)");
    }
  });
}

void cmd_train(const Args& a, const std::string& cmd) {
  const Config cfg = load_config(a.config);
  TrainConfig tc = cfg.train;
  if (a.freeze_core) tc.freeze_core = true;
  if (tc.freeze_core && a.init.empty()) throw ValidationError("--freeze-core needs --init CKPT");
  const auto scenes = load_scene_dir(a.scenes);
  const auto tasks = make_tasks(scenes, tc.tasks_per_scene);
  std::optional<Checkpoint> init;
  if (!a.init.empty()) init = load_checkpoint(a.init);

  with_manifest(a.out, cmd, [&](RunManifest& m) {
    const fs::path out(a.out);
    m.set_config(cfg.hash(), write_effective_config(out, cfg).filename().string());
    m.set_seeds({tc.seed});
    add_scene_inputs(m, a.scenes);
    if (!a.init.empty()) m.add_input(a.init);
    m.write("running");

    auto params = make_model(tc, scenes.front().percept_dim(), init ? &*init : nullptr);
    MetricsSink sink(out / "metrics.csv");
    info("training on " + std::to_string(tasks.size()) + " tasks from " + std::to_string(scenes.size()) +
         " scenes, " + std::to_string(tc.frames_budget) + " frames, " + to_string(tc.mode) + " mode");
    auto hook = [&](std::int64_t frames) {
      fs::create_directories(out / "checkpoints");
      const auto p = out / "checkpoints" / ("frames_" + std::to_string(frames) + ".tdnav");
      save_checkpoint(p, params->to_checkpoint());
      info("  checkpoint at " + std::to_string(frames) + " frames");
    };
    const TrainResult r = train(tc, tasks, *params, &sink, hook);
    const auto ckpt = out / "checkpoint.tdnav";
    save_checkpoint(ckpt, r.checkpoint);
    m.add_output(out / "metrics.csv");
    m.add_output(ckpt);
    info("trained " + std::to_string(r.stats.frames) + " frames, " + std::to_string(r.stats.episodes) +
         " episodes, " + std::to_string(r.stats.updates) + " updates");
    const auto report = evaluate(*params, tasks, eval_options(cfg), eval_seed(tc.seed), cfg.eval.eval_argmax);
    write_eval_csv((out / "eval.csv").string(), report);
    m.add_output(out / "eval.csv");
    print_report("evaluation", report);
  });
}

void cmd_eval(const Args& a, const std::string& cmd) {
  const Config cfg = load_config(a.config);
  const auto scenes = load_scene_dir(a.scenes);
  const auto tasks = make_tasks(scenes, cfg.train.tasks_per_scene);
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  with_manifest(a.out, cmd, [&](RunManifest& m) {
    const fs::path out(a.out);
    m.set_config(cfg.hash(), write_effective_config(out, cfg).filename().string());
    const std::uint64_t seed = a.eval_seed_override.value_or(cfg.train.seed);
    m.set_seeds({seed});
    add_scene_inputs(m, a.scenes);
    m.add_input(a.checkpoint);
    std::unique_ptr<ModelParams> holder;
    auto agent = make_agent(ckpt, holder, cfg.eval.eval_argmax);
    const auto report = evaluate(*agent, tasks, eval_options(cfg), eval_seed(seed));
    write_eval_csv((out / "eval.csv").string(), report);
    m.add_output(out / "eval.csv");
    print_report("evaluation", report);
  });
}

void cmd_baseline(const Args& a, const std::string& cmd) {
  const Config cfg = load_config(a.config);
  method_label(a.method);
  if (a.method == "final") throw ValidationError("use 'navlab train' for the target-driven model");
  const auto scenes = load_scene_dir(a.scenes);
  const auto tasks = make_tasks(scenes, cfg.train.tasks_per_scene);
  with_manifest(a.out, cmd, [&](RunManifest& m) {
    const fs::path out(a.out);
    m.set_config(cfg.hash(), write_effective_config(out, cfg).filename().string());
    m.set_seeds({cfg.train.seed});
    m.note("method", a.method);
    add_scene_inputs(m, a.scenes);
    m.write("running");
    info("running baseline " + method_label(a.method) + " on " + std::to_string(tasks.size()) + " tasks");
    const MethodRun run = run_method(a.method, cfg, tasks, cfg.train.seed);
    if (run.trained) {
      std::ofstream f(out / "metrics.csv", std::ios::binary);
      f << kMetricsHeader << '\n';
      for (const auto& r : run.metrics) f << format_metrics_row(r) << '\n';
      f.close();
      save_checkpoint(out / "checkpoint.tdnav", run.checkpoint);
      m.add_output(out / "metrics.csv");
      m.add_output(out / "checkpoint.tdnav");
    }
    write_eval_csv((out / "eval.csv").string(), run.report);
    m.add_output(out / "eval.csv");
    print_report(method_label(a.method), run.report);
  });
}

void list_outputs(RunManifest& m, const fs::path& out) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(out)) {
    if (e.is_regular_file() && e.path().filename() != "manifest.json" && e.path().extension() != ".tmp") {
      files.push_back(e.path());
    }
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) m.add_output(f);
}

void cmd_exp(const Args& a, const std::string& cmd) {
  const Config cfg = load_config(a.config);
  const std::string& kind = a.kind;
  if (kind != "baseline-comparison" && kind != "target-gen" && kind != "scene-gen" && kind != "embedding") {
    throw ValidationError("unknown experiment '" + kind + "'");
  }
  with_manifest(a.out, cmd, [&](RunManifest& m) {
    const fs::path out(a.out);
    m.set_config(cfg.hash(), write_effective_config(out, cfg).filename().string());
    m.set_seeds(cfg.exp.seeds);
    m.note("experiment", kind);
    if (cfg.exp.seeds.size() == 1) m.note("statistics", "single seed");
    m.write("running");
    if (cfg.exp.seeds.size() == 1) info("note: single-seed run, medians are that seed's values");
    info("experiment " + kind);
    if (kind == "baseline-comparison") {
      const auto r = run_baseline_comparison(cfg, out, info);
      for (const auto& row : r.methods) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "%-16s %10.1f", method_label(row.method).c_str(), row.median_length);
        info(buf);
      }
    } else if (kind == "target-gen") {
      run_target_generalization(cfg, out, info);
    } else if (kind == "scene-gen") {
      run_scene_generalization(cfg, out, info);
    } else {
      run_embedding_study(cfg, out, info);
    }
    list_outputs(m, out);
  });
}

void cmd_analyze_embedding(const Args& a, const std::string& cmd) {
  const auto scenes = load_scene_dir(a.scenes);
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  if (ckpt.require("arch") != "siamese") throw ValidationError("analyze-embedding needs a target-driven checkpoint");
  const auto params = ModelParams::from_checkpoint(ckpt, UpdateMode::Serialized, RmsPropConfig{});
  const int max_pairs = a.max_pairs.value_or(Config{}.exp.embedding_max_pairs);
  with_manifest(a.out, cmd, [&](RunManifest& m) {
    const fs::path out(a.out);
    m.set_seeds({a.seed});
    m.add_input(a.checkpoint);
    add_scene_inputs(m, a.scenes);
    std::ofstream summary(out / "embedding.csv");
    summary << "scene_id,pearson_r,p_value,pairs\n";
    const auto core = params->core();
    for (const Scene& s : scenes) {
      const auto r = embedding_geometry(core, s, max_pairs, a.seed);
      const auto proj = out / ("projection_" + s.id() + ".csv");
      write_projection_csv(proj, r);
      char buf[160];
      std::snprintf(buf, sizeof buf, "%s,%.4f,%.6g,%zu\n", s.id().c_str(), r.corr.r, r.corr.p, r.corr.n);
      summary << buf;
      info(s.id() + ": r=" + std::to_string(r.corr.r) + " p=" + std::to_string(r.corr.p));
      m.add_output(proj);
    }
    summary.close();
    m.add_output(out / "embedding.csv");
  });
}

void cmd_plot(const Args& a, const std::string& cmd) {
  if (a.inputs.empty()) throw ValidationError("plot needs at least one CSV file");
  with_manifest(a.out, cmd, [&](RunManifest& m) {
    for (const auto& in : a.inputs) {
      m.add_input(in);
      const auto svg = plot_csv(in, a.out);
      m.add_output(svg);
      info("wrote " + svg.string());
    }
  });
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"navlab: target-driven visual navigation lab"};
  app.require_subcommand(1);
  app.add_flag("-q,--quiet", g_quiet, "suppress progress logging on stderr");
  Args a;

  auto* gen = app.add_subcommand("gen-scenes", "generate random gridworld scenes");
  gen->add_option("--seed", a.seed, "base seed")->required();
  gen->add_option("--count", a.count, "number of scenes")->required();
  gen->add_option("--out", a.out, "output directory")->required();
  gen->add_option("--config", a.config, "config file supplying scene defaults");
  gen->add_option("--width", a.width, "scene width");
  gen->add_option("--height", a.height, "scene height");
  gen->add_option("--density", a.density, "obstacle density in [0, 0.4]");
  gen->add_option("--targets", a.targets, "targets per scene");
  gen->add_option("--dim", a.dim, "perception feature width");
  gen->add_option("--smoothing", a.smoothing, "neighbor feature weight in [0, 1]");

  auto* tr = app.add_subcommand("train", "train the target-driven model");
  tr->add_option("--config", a.config, "config file")->required();
  tr->add_option("--scenes", a.scenes, "scene directory")->required();
  tr->add_option("--out", a.out, "output directory")->required();
  tr->add_flag("--freeze-core", a.freeze_core, "train only scene branches (needs --init)");
  tr->add_option("--init", a.init, "checkpoint to start from");

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  ev->add_option("--checkpoint", a.checkpoint, "checkpoint file")->required();
  ev->add_option("--scenes", a.scenes, "scene directory")->required();
  ev->add_option("--out", a.out, "output directory")->required();
  ev->add_option("--config", a.config, "config file (evaluation keys)");
  ev->add_option("--seed", a.eval_seed_override, "evaluation seed (default: config seed)");

  auto* bl = app.add_subcommand("baseline", "train and evaluate a comparison method");
  bl->add_option("--method", a.method, "random|shortest|q1|a3c1|a3c4|single-branch")
      ->required()
      ->check(CLI::IsMember({"random", "shortest", "q1", "a3c1", "a3c4", "single-branch"}));
  bl->add_option("--config", a.config, "config file")->required();
  bl->add_option("--scenes", a.scenes, "scene directory")->required();
  bl->add_option("--out", a.out, "output directory")->required();

  auto* ex = app.add_subcommand("exp", "run an experiment");
  ex->add_option("kind", a.kind, "baseline-comparison|target-gen|scene-gen|embedding")
      ->required()
      ->check(CLI::IsMember({"baseline-comparison", "target-gen", "scene-gen", "embedding"}));
  ex->add_option("--config", a.config, "config file")->required();
  ex->add_option("--out", a.out, "output directory")->required();

  auto* an = app.add_subcommand("analyze-embedding", "correlate embedding and map distances");
  an->add_option("--checkpoint", a.checkpoint, "target-driven checkpoint")->required();
  an->add_option("--scenes", a.scenes, "scene directory")->required();
  an->add_option("--out", a.out, "output directory")->required();
  an->add_option("--max-pairs", a.max_pairs, "pose pairs sampled per scene");
  an->add_option("--seed", a.seed, "pair sampling seed");

  auto* pl = app.add_subcommand("plot", "render CSV results as SVG");
  pl->add_option("csv", a.inputs, "CSV files")->required();
  pl->add_option("--out", a.out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  const std::string cmd = command_line(argc, argv);
  try {
    if (gen->parsed()) cmd_gen_scenes(a, cmd);
    else if (tr->parsed()) cmd_train(a, cmd);
    else if (ev->parsed()) cmd_eval(a, cmd);
    else if (bl->parsed()) cmd_baseline(a, cmd);
    else if (ex->parsed()) cmd_exp(a, cmd);
    else if (an->parsed()) cmd_analyze_embedding(a, cmd);
    else if (pl->parsed()) cmd_plot(a, cmd);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

}  // namespace navlab
