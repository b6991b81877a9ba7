#include <doctest.h>

#include <string>

#include "navlab/config.hpp"
#include "navlab/error.hpp"

using namespace navlab;

namespace {

std::string error_of(const std::string& text) {
  try {
    parse_config_text(text, "t.cfg");
  } catch (const ValidationError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("minimal config fills defaults") {
  const Config c = parse_config_text("seed = 9\n");
  CHECK(c.train.seed == 9);
  CHECK(c.train.gamma == 0.99);
  CHECK(c.train.t_max == 5);
  CHECK(c.train.beta == 0.01);
  CHECK(c.train.lr == doctest::Approx(7e-4));
  CHECK(c.train.clip_norm == 40.0);
  CHECK(c.train.episode_cap == 500);
  CHECK(c.train.d_embed == 32);
  CHECK(c.scenes.percept_dim == 64);
  CHECK(c.eval.success_cap == 100);
  CHECK(c.baseline.q_target_period == 2000);
  CHECK(c.exp.seeds.size() == 5);
  const std::string text = c.to_text();
  CHECK(text.find("seed = 9") != std::string::npos);
  CHECK(text.find("gamma = ") != std::string::npos);
}

TEST_CASE("effective config text parses back to the same config") {
  Config c = parse_config_text(
      "# comment\n\n seed=4 \nframes_budget = 1234\nmode = hogwild\nseeds = 3,1,2\nsmoothing = 0.25\n"
      "target_gen_counts = 1,8\nfreeze_core = true\n");
  CHECK(c.train.mode == UpdateMode::Hogwild);
  CHECK(c.exp.seeds == std::vector<std::uint64_t>{3, 1, 2});
  CHECK(c.exp.target_gen_counts == std::vector<int>{1, 8});
  CHECK(c.train.freeze_core);
  const Config again = parse_config_text(c.to_text());
  CHECK(again.to_text() == c.to_text());
  CHECK(again.hash() == c.hash());
  Config d = c;
  d.train.seed = 5;
  CHECK(d.hash() != c.hash());
}

TEST_CASE("validation errors name the key") {
  CHECK(error_of("gamma = 1.5\n").find("gamma") != std::string::npos);
  CHECK(error_of("seed = 1\nseed = 2\n").find("seed") != std::string::npos);
  CHECK(error_of("seed = 1\nseed = 2\n").find("duplicate") != std::string::npos);
  CHECK(error_of("bogus_key = 1\n").find("bogus_key") != std::string::npos);
  CHECK(error_of("t_max = five\n").find("t_max") != std::string::npos);
  CHECK(error_of("t_max = 0\n").find("t_max") != std::string::npos);
  CHECK(error_of("mode = sometimes\n").find("mode") != std::string::npos);
  CHECK(error_of("seed\n").find("t.cfg:1:") != std::string::npos);
  CHECK(error_of("\n\nlr = -1\n").find("t.cfg:3:") != std::string::npos);
  CHECK(error_of("obstacle_density = 0.9\n").find("obstacle_density") != std::string::npos);
  CHECK(error_of("seeds = \n").find("seeds") != std::string::npos);
  CHECK(error_of("smoothing = 2\n").find("smoothing") != std::string::npos);
  CHECK(error_of("seed = 3\n").empty());
}

TEST_CASE("schema covers every key in the effective config") {
  const std::string text = Config{}.to_text();
  for (const auto& doc : config_schema()) {
    CHECK(text.find(doc.key + " = ") != std::string::npos);
    CHECK_FALSE(doc.description.empty());
  }
  std::size_t lines = 0;
  for (char ch : text) lines += ch == '\n';
  CHECK(lines == config_schema().size());
}
