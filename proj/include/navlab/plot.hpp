#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace navlab {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<int> line_numbers;  // source line of each row

  int column(const std::string& name) const;  // -1 if absent
  /// Parses rows[r][c] as a number; throws ValidationError naming the line.
  double number(std::size_t r, int c) const;
};

/// Plain comma-separated file, no quoting. Every row must match the header's width.
CsvTable read_csv_table(const std::filesystem::path& path);

struct LineSeries {
  std::string name;
  std::vector<std::pair<double, double>> points;
};

struct BarSeries {
  std::string name;
  std::vector<double> values;  // one per category; NaN draws nothing
};

/// Standalone SVG documents; identical inputs give identical bytes.
std::string render_line_chart(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                              const std::vector<LineSeries>& series);
std::string render_bar_chart(const std::string& title, const std::string& ylabel,
                             const std::vector<std::string>& categories, const std::vector<BarSeries>& series);

/// Picks a chart from the CSV header:
///   frames,task_id,episode_len,...    training metrics, rolling mean episode length
///   series,<x>,<y>                    one polyline per series
///   trained_targets,distance,success_rate,...   grouped bars
/// Returns the written SVG path (out_dir / stem.svg).
std::filesystem::path plot_csv(const std::filesystem::path& csv, const std::filesystem::path& out_dir);

}  // namespace navlab
