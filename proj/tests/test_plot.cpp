#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "navlab/error.hpp"
#include "navlab/plot.hpp"

using namespace navlab;
namespace fs = std::filesystem;

namespace {

std::size_t count(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
  return n;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("empty series give a valid chart with a no-data note") {
  const std::string svg = render_line_chart("t", "x", "y", {});
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(svg.find("no data") != std::string::npos);
  CHECK(count(svg, "<line") >= 2);  // axes
  const std::string bars = render_bar_chart("t", "y", {}, {});
  CHECK(bars.find("no data") != std::string::npos);
}

TEST_CASE("line charts are deterministic with one polyline per series") {
  const std::vector<LineSeries> s{{"a", {{0, 1}, {1, 2}, {2, 1.5}}}, {"b", {{0, 3}, {2, 0.5}}}};
  const std::string svg = render_line_chart("curves", "frames", "length", s);
  CHECK(svg == render_line_chart("curves", "frames", "length", s));
  CHECK(count(svg, "<polyline") == 2);
  CHECK(svg.find(">a<") != std::string::npos);
  CHECK(svg.find(">b<") != std::string::npos);
  CHECK(svg.find("no data") == std::string::npos);
}

TEST_CASE("plot_csv picks the chart from the header") {
  TempDir dir("navlab_plot_test");
  std::ofstream(dir.path / "curves.csv") << "series,frames,episode_length\nq1,0,400\nq1,100,300\nfinal,0,410\nfinal,100,50\n";
  const fs::path out = plot_csv(dir.path / "curves.csv", dir.path / "svg");
  CHECK(out.filename() == "curves.svg");
  const std::string svg = slurp(out);
  CHECK(count(svg, "<polyline") == 2);
  CHECK(svg.find(">final<") != std::string::npos);
  plot_csv(dir.path / "curves.csv", dir.path / "svg2");
  CHECK(slurp(dir.path / "svg2" / "curves.svg") == svg);

  std::ofstream(dir.path / "metrics.csv") << "frames,task_id,episode_len,return,success,wall_ms\n";
  CHECK(slurp(plot_csv(dir.path / "metrics.csv", dir.path / "svg")).find("no data") != std::string::npos);

  std::ofstream(dir.path / "tg.csv") << "trained_targets,distance,success_rate,seeds\n1,1,0.5,5\n1,2,0.25,5\n2,1,0.75,5\n2,2,nan,5\n";
  const std::string bars = slurp(plot_csv(dir.path / "tg.csv", dir.path / "svg"));
  CHECK(count(bars, "<rect") >= 3);

  std::ofstream(dir.path / "odd.csv") << "alpha,beta\n1,2\n";
  CHECK_THROWS_AS(plot_csv(dir.path / "odd.csv", dir.path / "svg"), ValidationError);
}

TEST_CASE("malformed csv errors name the line") {
  TempDir dir("navlab_plot_bad");
  std::ofstream(dir.path / "bad.csv") << "series,frames,episode_length\nq1,0,400\nq1,100\n";
  try {
    read_csv_table(dir.path / "bad.csv");
    FAIL("expected an error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find(":3") != std::string::npos);
  }
  std::ofstream(dir.path / "nan.csv") << "series,frames,episode_length\nq1,zero,400\n";
  const CsvTable t = read_csv_table(dir.path / "nan.csv");
  CHECK(t.column("frames") == 1);
  CHECK(t.column("nope") == -1);
  CHECK_THROWS_AS(t.number(0, 1), ValidationError);
  CHECK_THROWS_AS(read_csv_table(dir.path / "missing.csv"), ValidationError);
}
