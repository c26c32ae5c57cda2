#pragma once

#include <string>
#include <vector>

namespace demexp {

struct PlotSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

struct PlotPanel {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  bool log_y = false;
  std::vector<PlotSeries> series;
};

/// Self-contained SVG with the panels laid out row-major in `columns`
/// columns. Non-finite points, and non-positive points on log axes, are skipped.
std::string render_svg(const std::vector<PlotPanel>& panels, int columns);

}  // namespace demexp
