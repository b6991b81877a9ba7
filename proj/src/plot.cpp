#include "navlab/plot.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "navlab/error.hpp"
#include "navlab/trainer.hpp"

namespace navlab {

namespace {

constexpr double kWidth = 640, kHeight = 400;
constexpr double kLeft = 70, kRight = 160, kTop = 40, kBottom = 50;
const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  if (std::fabs(v) >= 1e6) {
    std::snprintf(buf, sizeof buf, "%.1fM", v / 1e6);
  } else if (std::fabs(v) >= 1e4) {
    std::snprintf(buf, sizeof buf, "%.0fk", v / 1e3);
  } else if (v == std::floor(v)) {
    std::snprintf(buf, sizeof buf, "%.0f", v);
  } else {
    std::snprintf(buf, sizeof buf, "%.2f", v);
  }
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Frame {
  double x0, x1, y0, y1;
  double px(double x) const { return kLeft + (x - x0) / (x1 - x0) * (kWidth - kLeft - kRight); }
  double py(double y) const { return kHeight - kBottom - (y - y0) / (y1 - y0) * (kHeight - kTop - kBottom); }
};

void widen(double& lo, double& hi) {
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
}

void open_svg(std::ostringstream& os, const std::string& title) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << fmt(kWidth / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(title)
     << "</text>\n";
}

void axes(std::ostringstream& os, const Frame& f, const std::string& xlabel, const std::string& ylabel,
          bool x_ticks) {
  const double xa = kLeft, xb = kWidth - kRight, ya = kHeight - kBottom, yb = kTop;
  os << "<line x1=\"" << fmt(xa) << "\" y1=\"" << fmt(ya) << "\" x2=\"" << fmt(xb) << "\" y2=\"" << fmt(ya)
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << fmt(xa) << "\" y1=\"" << fmt(ya) << "\" x2=\"" << fmt(xa) << "\" y2=\"" << fmt(yb)
     << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double yv = f.y0 + (f.y1 - f.y0) * i / 4.0;
    os << "<text x=\"" << fmt(xa - 6) << "\" y=\"" << fmt(f.py(yv) + 4) << "\" text-anchor=\"end\">"
       << tick_label(yv) << "</text>\n";
    if (x_ticks) {
      const double xv = f.x0 + (f.x1 - f.x0) * i / 4.0;
      os << "<text x=\"" << fmt(f.px(xv)) << "\" y=\"" << fmt(ya + 16) << "\" text-anchor=\"middle\">"
         << tick_label(xv) << "</text>\n";
    }
  }
  os << "<text x=\"" << fmt((xa + xb) / 2) << "\" y=\"" << fmt(kHeight - 10) << "\" text-anchor=\"middle\">"
     << escape(xlabel) << "</text>\n";
  os << "<text x=\"16\" y=\"" << fmt((ya + yb) / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
     << fmt((ya + yb) / 2) << ")\">" << escape(ylabel) << "</text>\n";
}

void legend(std::ostringstream& os, const std::vector<std::string>& names) {
  const double x = kWidth - kRight + 12;
  for (std::size_t i = 0; i < names.size(); ++i) {
    const double y = kTop + 10 + 18.0 * static_cast<double>(i);
    os << "<rect x=\"" << fmt(x) << "\" y=\"" << fmt(y - 9) << "\" width=\"12\" height=\"10\" fill=\""
       << kPalette[i % std::size(kPalette)] << "\"/>\n";
    os << "<text x=\"" << fmt(x + 18) << "\" y=\"" << fmt(y) << "\">" << escape(names[i]) << "</text>\n";
  }
}

void no_data(std::ostringstream& os) {
  os << "<text x=\"" << fmt((kLeft + kWidth - kRight) / 2) << "\" y=\"" << fmt(kHeight / 2)
     << "\" text-anchor=\"middle\" fill=\"#888\">no data</text>\n";
}

}  // namespace

int CsvTable::column(const std::string& name) const {
  auto it = std::find(header.begin(), header.end(), name);
  return it == header.end() ? -1 : static_cast<int>(it - header.begin());
}

double CsvTable::number(std::size_t r, int c) const {
  const std::string& s = rows.at(r).at(static_cast<std::size_t>(c));
  if (s == "nan" || s == "NaN") return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ValidationError("line " + std::to_string(line_numbers.at(r)) + ": column '" + header.at(c) +
                          "' is not a number: '" + s + "'");
  }
  return v;
}

CsvTable read_csv_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  CsvTable t;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split(line);
    if (t.header.empty()) {
      t.header = std::move(cells);
      continue;
    }
    if (cells.size() != t.header.size()) {
      throw ValidationError(path.string() + ":" + std::to_string(n) + ": expected " +
                            std::to_string(t.header.size()) + " fields, found " + std::to_string(cells.size()));
    }
    t.rows.push_back(std::move(cells));
    t.line_numbers.push_back(n);
  }
  if (t.header.empty()) throw ValidationError(path.string() + ": empty file");
  return t;
}

std::string render_line_chart(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                              const std::vector<LineSeries>& series) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  bool any = false;
  for (const auto& s : series) {
    for (const auto& [x, y] : s.points) {
      if (!std::isfinite(x) || !std::isfinite(y)) continue;
      any = true;
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
  }
  if (!any) x0 = y0 = 0.0, x1 = y1 = 1.0;
  y0 = std::min(y0, 0.0);
  widen(x0, x1);
  widen(y0, y1);
  const Frame f{x0, x1, y0, y1};

  std::ostringstream os;
  open_svg(os, title);
  axes(os, f, xlabel, ylabel, true);
  if (!any) no_data(os);
  std::vector<std::string> names;
  for (std::size_t i = 0; i < series.size(); ++i) {
    names.push_back(series[i].name);
    std::string pts;
    for (const auto& [x, y] : series[i].points) {
      if (!std::isfinite(x) || !std::isfinite(y)) continue;
      if (!pts.empty()) pts += ' ';
      pts += fmt(f.px(x)) + ',' + fmt(f.py(y));
    }
    if (pts.empty()) continue;
    os << "<polyline fill=\"none\" stroke=\"" << kPalette[i % std::size(kPalette)] << "\" stroke-width=\"1.5\" points=\""
       << pts << "\"/>\n";
  }
  legend(os, names);
  os << "</svg>\n";
  return os.str();
}

std::string render_bar_chart(const std::string& title, const std::string& ylabel,
                             const std::vector<std::string>& categories, const std::vector<BarSeries>& series) {
  double y1 = 0.0;
  bool any = false;
  for (const auto& s : series) {
    for (double v : s.values) {
      if (!std::isfinite(v)) continue;
      any = true;
      y1 = std::max(y1, v);
    }
  }
  if (!(y1 > 0.0)) y1 = 1.0;
  const Frame f{0.0, std::max<double>(1.0, static_cast<double>(categories.size())), 0.0, y1};

  std::ostringstream os;
  open_svg(os, title);
  axes(os, f, "", ylabel, false);
  if (!any) no_data(os);
  const double slot = (kWidth - kLeft - kRight) / std::max<double>(1.0, static_cast<double>(categories.size()));
  const double bar = slot * 0.8 / std::max<double>(1.0, static_cast<double>(series.size()));
  for (std::size_t c = 0; c < categories.size(); ++c) {
    const double base = kLeft + slot * static_cast<double>(c) + slot * 0.1;
    for (std::size_t s = 0; s < series.size(); ++s) {
      if (c >= series[s].values.size() || !std::isfinite(series[s].values[c])) continue;
      const double top = f.py(series[s].values[c]);
      os << "<rect x=\"" << fmt(base + bar * static_cast<double>(s)) << "\" y=\"" << fmt(top) << "\" width=\""
         << fmt(bar) << "\" height=\"" << fmt(f.py(0.0) - top) << "\" fill=\"" << kPalette[s % std::size(kPalette)]
         << "\"/>\n";
    }
    os << "<text x=\"" << fmt(base + slot * 0.4) << "\" y=\"" << fmt(kHeight - kBottom + 16)
       << "\" text-anchor=\"middle\">" << escape(categories[c]) << "</text>\n";
  }
  std::vector<std::string> names;
  for (const auto& s : series) names.push_back(s.name);
  legend(os, names);
  os << "</svg>\n";
  return os.str();
}

std::filesystem::path plot_csv(const std::filesystem::path& csv, const std::filesystem::path& out_dir) {
  const CsvTable t = read_csv_table(csv);
  const std::string title = csv.stem().string();
  std::string svg;
  std::string header;
  for (std::size_t i = 0; i < t.header.size(); ++i) header += (i ? "," : "") + t.header[i];

  if (header == kMetricsHeader) {
    // rolling mean of the last 100 episodes
    LineSeries s{"episode length (mean of 100)", {}};
    double sum = 0.0;
    std::vector<double> window;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      const double len = t.number(r, 2);
      window.push_back(len);
      sum += len;
      if (window.size() > 100) {
        sum -= window[window.size() - 101];
      }
      const double n = static_cast<double>(std::min<std::size_t>(window.size(), 100));
      s.points.emplace_back(t.number(r, 0), sum / n);
    }
    svg = render_line_chart(title, "frames", "episode length", {s});
  } else if (t.header.size() >= 3 && t.header[0] == "series") {
    std::vector<LineSeries> series;
    std::map<std::string, std::size_t> index;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      const std::string& name = t.rows[r][0];
      auto [it, inserted] = index.emplace(name, series.size());
      if (inserted) series.push_back({name, {}});
      series[it->second].points.emplace_back(t.number(r, 1), t.number(r, 2));
    }
    svg = render_line_chart(title, t.header[1], t.header[2], series);
  } else if (t.column("trained_targets") == 0 && t.column("distance") == 1 && t.column("success_rate") == 2) {
    std::vector<std::string> categories;
    std::vector<BarSeries> series;
    std::map<std::string, std::size_t> cat_index, series_index;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      const std::string cat = "d=" + t.rows[r][1];
      if (cat_index.emplace(cat, categories.size()).second) categories.push_back(cat);
    }
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      const std::string name = t.rows[r][0] + " trained";
      auto [it, inserted] = series_index.emplace(name, series.size());
      if (inserted) series.push_back({name, std::vector<double>(categories.size(), std::nan(""))});
      series[it->second].values[cat_index.at("d=" + t.rows[r][1])] = t.number(r, 2);
    }
    svg = render_bar_chart(title, "success rate", categories, series);
  } else {
    throw ValidationError(csv.string() + ": unrecognized CSV header '" + header + "'");
  }

  std::filesystem::create_directories(out_dir);
  const auto out = out_dir / (csv.stem().string() + ".svg");
  std::ofstream f(out, std::ios::binary);
  if (!f) throw Error("cannot write " + out.string());
  f << svg;
  return out;
}

}  // namespace navlab
