#include "navlab/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "navlab/rng.hpp"

namespace navlab {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt_real(double v) {
  // shortest text that parses back to the same double
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

struct KeyEntry {
  ConfigKeyDoc doc;
  std::function<void(Config&, const std::string&)> set;
  std::function<std::string(const Config&)> get;
};

[[noreturn]] void bad(const std::string& key, const std::string& why) {
  throw ValidationError("key '" + key + "': " + why);
}

std::int64_t parse_int(const std::string& key, const std::string& v) {
  std::int64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) bad(key, "expected an integer, got '" + v + "'");
  return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) bad(key, "expected a non-negative integer, got '" + v + "'");
  return out;
}

double parse_real(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const double out = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size() || !std::isfinite(out)) bad(key, "expected a real number, got '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad(key, "expected true or false, got '" + v + "'");
}

std::string join_ints(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::vector<int> parse_int_list(const std::string& key, const std::string& v, int lo, int hi) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const std::int64_t x = parse_int(key, trim(item));
    if (x < lo || x > hi) bad(key, "entries must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    out.push_back(static_cast<int>(x));
  }
  if (out.empty()) bad(key, "needs at least one entry");
  return out;
}

template <typename Get>
KeyEntry make_key(std::string name, std::string type, std::string desc,
                  std::function<void(Config&, const std::string&)> set, Get get) {
  KeyEntry e;
  e.doc = {std::move(name), std::move(type), "", std::move(desc)};
  e.set = std::move(set);
  e.get = get;
  return e;
}

#define NAVLAB_INT(section, field, lo, hi, desc)                                                       \
  make_key(#field, "int", desc,                                                                         \
           [](Config& c, const std::string& v) {                                                        \
             const auto x = parse_int(#field, v);                                                       \
             if (x < (lo) || x > (hi))                                                                  \
               bad(#field, "value " + v + " outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]"); \
             c.section.field = static_cast<decltype(c.section.field)>(x);                               \
           },                                                                                           \
           [](const Config& c) { return std::to_string(c.section.field); })

#define NAVLAB_REAL(section, field, lo, hi, lo_open, desc)                                              \
  make_key(#field, "real", desc,                                                                        \
           [](Config& c, const std::string& v) {                                                        \
             const double x = parse_real(#field, v);                                                    \
             if ((lo_open ? x <= (lo) : x < (lo)) || x > (hi))                                          \
               bad(#field, "value " + v + " outside " + (lo_open ? "(" : "[") + fmt_real(lo) + ", " +   \
                               fmt_real(hi) + "]");                                                     \
             c.section.field = x;                                                                       \
           },                                                                                           \
           [](const Config& c) { return fmt_real(c.section.field); })

#define NAVLAB_BOOL(section, field, desc)                                                               \
  make_key(#field, "bool", desc,                                                                        \
           [](Config& c, const std::string& v) { c.section.field = parse_bool(#field, v); },            \
           [](const Config& c) { return std::string(c.section.field ? "true" : "false"); })

constexpr std::int64_t kBig = std::int64_t{1} << 40;

const std::vector<KeyEntry>& entries() {
  static const std::vector<KeyEntry> table = [] {
    std::vector<KeyEntry> t;
    t.push_back(make_key(
        "seed", "u64", "master seed for initialization, rollouts and evaluation",
        [](Config& c, const std::string& v) { c.train.seed = parse_u64("seed", v); },
        [](const Config& c) { return std::to_string(c.train.seed); }));
    t.push_back(NAVLAB_INT(train, frames_budget, 1, kBig, "total environment steps across all workers"));
    t.push_back(NAVLAB_INT(train, workers, 0, 1024, "logical workers; 0 = one per task"));
    t.push_back(NAVLAB_INT(train, threads, 1, 1024, "OS threads running workers; 1 = deterministic round-robin"));
    t.push_back(NAVLAB_INT(train, t_max, 1, 1000, "rollout length between updates"));
    t.push_back(NAVLAB_REAL(train, gamma, 0.0, 1.0, true, "discount factor, in (0, 1]"));
    t.push_back(NAVLAB_REAL(train, beta, 0.0, 10.0, false, "entropy bonus weight"));
    t.push_back(NAVLAB_REAL(train, lr, 0.0, 1.0, true, "RMSProp learning rate"));
    t.push_back(NAVLAB_REAL(train, rmsprop_decay, 0.0, 1.0, false, "RMSProp decay alpha"));
    t.push_back(NAVLAB_REAL(train, rmsprop_eps, 0.0, 10.0, true, "RMSProp epsilon (inside the square root)"));
    t.push_back(NAVLAB_REAL(train, clip_norm, 0.0, 1e9, false, "global gradient-norm clip; 0 disables"));
    t.push_back(NAVLAB_REAL(train, slip_prob, 0.0, 0.5, false, "probability an action is replaced by another"));
    t.push_back(NAVLAB_INT(train, episode_cap, 1, 10'000'000, "max steps per training episode"));
    t.push_back(NAVLAB_INT(train, eval_every, 0, kBig, "checkpoint cadence in frames; 0 = final only"));
    t.push_back(make_key(
        "mode", "enum", "shared-update mode: serialized or hogwild",
        [](Config& c, const std::string& v) {
          try {
            c.train.mode = parse_update_mode(v);
          } catch (const ValidationError& e) {
            bad("mode", e.what());
          }
        },
        [](const Config& c) { return to_string(c.train.mode); }));
    t.push_back(NAVLAB_BOOL(train, wall_clock, "record wall_ms in metrics (breaks byte-reproducibility)"));
    t.push_back(NAVLAB_BOOL(train, freeze_core, "train only scene branches"));
    t.push_back(NAVLAB_BOOL(train, single_branch, "one branch shared by every scene"));
    t.push_back(NAVLAB_INT(train, d_embed, 1, 4096, "siamese embedding width"));
    t.push_back(NAVLAB_INT(train, d_fuse, 1, 4096, "fusion / branch width"));
    t.push_back(NAVLAB_BOOL(train, goal_first, "ablation: concatenate goal before state"));
    t.push_back(NAVLAB_INT(train, tasks_per_scene, 0, 100000, "targets per scene used as tasks; 0 = all"));

    t.push_back(make_key(
        "scene_seed", "u64", "base seed of the scene suites generated by exp",
        [](Config& c, const std::string& v) { c.scenes.scene_seed = parse_u64("scene_seed", v); },
        [](const Config& c) { return std::to_string(c.scenes.scene_seed); }));
    t.push_back(NAVLAB_INT(scenes, scene_count, 1, 100000, "scenes written by gen-scenes"));
    t.push_back(NAVLAB_INT(scenes, scene_width, 3, 4096, "scene width in cells"));
    t.push_back(NAVLAB_INT(scenes, scene_height, 3, 4096, "scene height in cells"));
    t.push_back(NAVLAB_REAL(scenes, obstacle_density, 0.0, 0.4, false, "obstacle probability per cell"));
    t.push_back(NAVLAB_INT(scenes, targets_per_scene, 1, 100000, "candidate targets per scene"));
    t.push_back(NAVLAB_INT(scenes, percept_dim, 1, 65536, "perception feature width d"));
    t.push_back(NAVLAB_REAL(scenes, smoothing, 0.0, 1.0, false, "neighbor weight lambda of synthetic features"));

    t.push_back(NAVLAB_INT(eval, eval_episodes, 1, 1000000, "evaluation episodes per task"));
    t.push_back(NAVLAB_INT(eval, success_cap, 1, 10'000'000, "an episode succeeds if it reaches the goal within this many steps"));
    t.push_back(NAVLAB_BOOL(eval, eval_argmax, "evaluate with argmax instead of sampling"));

    t.push_back(NAVLAB_INT(baseline, q_target_period, 1, kBig, "one-step Q target-network copy period (frames)"));
    t.push_back(NAVLAB_REAL(baseline, q_eps_start, 0.0, 1.0, false, "initial epsilon"));
    t.push_back(NAVLAB_REAL(baseline, q_eps_end, 0.0, 1.0, false, "final epsilon (reached at half budget)"));

    t.push_back(make_key(
        "seeds", "u64 list", "comma-separated experiment seeds",
        [](Config& c, const std::string& v) {
          std::vector<std::uint64_t> out;
          std::stringstream ss(v);
          std::string item;
          while (std::getline(ss, item, ',')) out.push_back(parse_u64("seeds", trim(item)));
          if (out.empty()) bad("seeds", "needs at least one seed");
          c.exp.seeds = out;
        },
        [](const Config& c) {
          std::string s;
          for (std::size_t i = 0; i < c.exp.seeds.size(); ++i) s += (i ? "," : "") + std::to_string(c.exp.seeds[i]);
          return s;
        }));
    t.push_back(NAVLAB_INT(exp, exp_scenes, 1, 10000, "scenes in the baseline comparison suite"));
    t.push_back(NAVLAB_INT(exp, exp_tasks_per_scene, 1, 10000, "targets per scene in the baseline comparison"));
    t.push_back(NAVLAB_INT(exp, target_gen_budget, 1, kBig, "frames per target-generalization training run"));
    t.push_back(make_key(
        "target_gen_counts", "int list", "numbers of trained targets compared in target-gen",
        [](Config& c, const std::string& v) { c.exp.target_gen_counts = parse_int_list("target_gen_counts", v, 1, 100000); },
        [](const Config& c) { return join_ints(c.exp.target_gen_counts); }));
    t.push_back(make_key(
        "target_gen_distances", "int list", "BFS distance bins of held-out targets",
        [](Config& c, const std::string& v) {
          c.exp.target_gen_distances = parse_int_list("target_gen_distances", v, 1, 100000);
        },
        [](const Config& c) { return join_ints(c.exp.target_gen_distances); }));
    t.push_back(NAVLAB_INT(exp, target_gen_bin_targets, 1, 10000, "max held-out targets per distance bin"));
    t.push_back(NAVLAB_INT(exp, target_gen_episodes, 1, 1000000, "evaluation episodes per held-out target"));
    t.push_back(make_key(
        "scene_gen_counts", "int list", "numbers of pre-training scenes compared in scene-gen",
        [](Config& c, const std::string& v) { c.exp.scene_gen_counts = parse_int_list("scene_gen_counts", v, 1, 10000); },
        [](const Config& c) { return join_ints(c.exp.scene_gen_counts); }));
    t.push_back(NAVLAB_INT(exp, scene_gen_test_scenes, 1, 10000, "unseen scenes for scene generalization"));
    t.push_back(NAVLAB_INT(exp, scene_gen_targets, 1, 10000, "targets per scene for scene generalization"));
    t.push_back(NAVLAB_INT(exp, scene_gen_pretrain_budget, 1, kBig, "frames for core pre-training"));
    t.push_back(NAVLAB_INT(exp, scene_gen_finetune_budget, 1, kBig, "max frames when adapting to an unseen scene"));
    t.push_back(NAVLAB_REAL(exp, scene_gen_threshold, 0.0, 1.0, false, "success rate defining convergence"));
    t.push_back(NAVLAB_INT(exp, scene_gen_window, 1, 1000000, "consecutive episodes the threshold must hold over"));
    t.push_back(NAVLAB_INT(exp, embedding_max_pairs, 1, 100000000, "pose pairs sampled for embedding correlation"));
    t.push_back(NAVLAB_INT(exp, curve_points, 2, 100000, "points per learning curve"));

    const Config defaults;
    for (auto& e : t) e.doc.default_value = e.get(defaults);
    return t;
  }();
  return table;
}

}  // namespace

void TrainConfig::validate() const {
  if (frames_budget < t_max) bad("frames_budget", "must be at least t_max");
  if (episode_cap < 1) bad("episode_cap", "must be >= 1");
  if (workers < 0) bad("workers", "must be >= 0");
  if (threads < 1) bad("threads", "must be >= 1");
  if (!(gamma > 0.0 && gamma <= 1.0)) bad("gamma", "must lie in (0, 1]");
  if (!(slip_prob >= 0.0 && slip_prob <= 0.5)) bad("slip_prob", "must lie in [0, 0.5]");
  if (!(lr > 0.0)) bad("lr", "must be positive");
}

const std::vector<ConfigKeyDoc>& config_schema() {
  static const std::vector<ConfigKeyDoc> docs = [] {
    std::vector<ConfigKeyDoc> d;
    for (const auto& e : entries()) d.push_back(e.doc);
    return d;
  }();
  return docs;
}

std::string Config::to_text() const {
  std::string out;
  for (const auto& e : entries()) out += e.doc.key + " = " + e.get(*this) + "\n";
  return out;
}

std::uint64_t Config::hash() const { return fnv1a64(to_text()); }

Config parse_config_text(const std::string& text, const std::string& source) {
  Config cfg;
  std::map<std::string, int> seen;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const std::string where = source + ":" + std::to_string(line_no) + ": ";
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ValidationError(where + "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto& table = entries();
    auto it = std::find_if(table.begin(), table.end(), [&](const KeyEntry& e) { return e.doc.key == key; });
    if (it == table.end()) throw ValidationError(where + "unknown key '" + key + "'");
    if (auto prev = seen.find(key); prev != seen.end()) {
      throw ValidationError(where + "duplicate key '" + key + "' (first set on line " +
                            std::to_string(prev->second) + ")");
    }
    seen[key] = line_no;
    try {
      it->set(cfg, value);
    } catch (const ValidationError& e) {
      throw ValidationError(where + e.what());
    }
  }
  try {
    cfg.train.validate();
  } catch (const ValidationError& e) {
    throw ValidationError(source + ": " + e.what());
  }
  if (cfg.baseline.q_eps_end > cfg.baseline.q_eps_start) bad("q_eps_end", "must not exceed q_eps_start");
  return cfg;
}

Config parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("config file not found: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path.string());
}

}  // namespace navlab
