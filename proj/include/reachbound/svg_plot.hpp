#pragma once

// Minimal SVG line charts.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace reachbound::plot {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> err;  // optional symmetric error bars, same length as y
};

struct Chart {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_y = true;
  std::vector<Series> series;
  std::optional<double> vline;  // dashed vertical marker, e.g. the bound
  std::string vline_label;
};

std::string render_svg(const Chart& c, int width = 640, int height = 420);
void write_svg(const Chart& c, const std::filesystem::path& path);

}  // namespace reachbound::plot
