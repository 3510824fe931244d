#pragma once

#include <string>
#include <vector>

namespace drfwi::svg {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

struct LinePlot {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_y = false;
  std::vector<Series> series;
  // Dashed vertical markers, e.g. a stage boundary.
  std::vector<double> x_markers;
};

/// Non-finite points (and non-positive ones on a log axis) break the polyline.
std::string render(const LinePlot& plot);

struct Heatmap {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<std::string> x_ticks;  // one per column
  std::vector<std::string> y_ticks;  // one per row
  std::vector<std::vector<double>> cells;  // [row][col], NaN drawn grey
  int marked_row = -1;
  int marked_col = -1;
};

std::string render(const Heatmap& map);

}  // namespace drfwi::svg
