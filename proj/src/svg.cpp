#include "demexp/svg.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace demexp {

namespace {

constexpr double kPanelWidth = 360.0;
constexpr double kPanelHeight = 280.0;
constexpr double kLeft = 60.0;
constexpr double kRight = 110.0;
constexpr double kTop = 30.0;
constexpr double kBottom = 45.0;

constexpr std::array<const char*, 6> kColors{"#1b6ca8", "#d1495b", "#2e933c",
                                             "#edae49", "#6c4f9e", "#444444"};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

bool usable(double v, bool log_axis) { return std::isfinite(v) && (!log_axis || v > 0.0); }

struct Axis {
  double lo = 0.0;
  double hi = 1.0;
  bool log = false;

  double map(double v, double from, double to) const {
    const double t = log ? (std::log10(v) - lo) / (hi - lo) : (v - lo) / (hi - lo);
    return from + t * (to - from);
  }
  double value_at(double t) const {
    const double v = lo + t * (hi - lo);
    return log ? std::pow(10.0, v) : v;
  }
};

Axis fit_axis(const std::vector<PlotSeries>& series, bool use_x, bool log) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!usable(s.x[i], use_x ? log : false) || !usable(s.y[i], use_x ? false : log)) continue;
      const double v = use_x ? s.x[i] : s.y[i];
      const double t = log ? std::log10(v) : v;
      lo = std::min(lo, t);
      hi = std::max(hi, t);
    }
  }
  if (!std::isfinite(lo)) {
    lo = 0.0;
    hi = 1.0;
  }
  if (hi - lo < 1e-12) {
    lo -= 0.5;
    hi += 0.5;
  } else {
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
  }
  return {lo, hi, log};
}

void draw_panel(std::string& out, const PlotPanel& panel, double ox, double oy) {
  const double x0 = ox + kLeft;
  const double x1 = ox + kPanelWidth - kRight;
  const double y0 = oy + kPanelHeight - kBottom;
  const double y1 = oy + kTop;
  const Axis ax = fit_axis(panel.series, true, panel.log_x);
  const Axis ay = fit_axis(panel.series, false, panel.log_y);

  out += fmt::format(R"(<rect x="{:.1f}" y="{:.1f}" width="{:.1f}" height="{:.1f}" fill="none" stroke="#999"/>)"
                     "\n", x0, y1, x1 - x0, y0 - y1);
  out += fmt::format(R"(<text x="{:.1f}" y="{:.1f}" text-anchor="middle" font-size="13">{}</text>)"
                     "\n", 0.5 * (x0 + x1), oy + 18.0, escape(panel.title));
  out += fmt::format(R"(<text x="{:.1f}" y="{:.1f}" text-anchor="middle" font-size="11">{}</text>)"
                     "\n", 0.5 * (x0 + x1), y0 + 35.0, escape(panel.x_label));
  out += fmt::format(R"svg(<text x="{:.1f}" y="{:.1f}" text-anchor="middle" font-size="11" transform="rotate(-90 {:.1f} {:.1f})">{}</text>)svg"
                     "\n", ox + 14.0, 0.5 * (y0 + y1), ox + 14.0, 0.5 * (y0 + y1),
                     escape(panel.y_label));
  for (int k = 0; k <= 4; ++k) {
    const double t = k / 4.0;
    const double px = x0 + t * (x1 - x0);
    const double py = y0 + t * (y1 - y0);
    out += fmt::format(R"(<text x="{:.1f}" y="{:.1f}" text-anchor="middle" font-size="9">{:.3g}</text>)"
                       "\n", px, y0 + 14.0, ax.value_at(t));
    out += fmt::format(R"(<text x="{:.1f}" y="{:.1f}" text-anchor="end" font-size="9">{:.3g}</text>)"
                       "\n", x0 - 4.0, py + 3.0, ay.value_at(t));
  }

  for (std::size_t s = 0; s < panel.series.size(); ++s) {
    const auto& series = panel.series[s];
    const char* color = kColors[s % kColors.size()];
    std::string points;
    for (std::size_t i = 0; i < series.x.size() && i < series.y.size(); ++i) {
      if (!usable(series.x[i], panel.log_x) || !usable(series.y[i], panel.log_y)) continue;
      const double px = ax.map(series.x[i], x0, x1);
      const double py = ay.map(series.y[i], y0, y1);
      points += fmt::format("{:.1f},{:.1f} ", px, py);
      out += fmt::format(R"(<circle cx="{:.1f}" cy="{:.1f}" r="2.5" fill="{}"/>)" "\n", px, py,
                         color);
    }
    if (!points.empty()) {
      out += fmt::format(R"(<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"/>)"
                         "\n", points, color);
    }
    const double ly = y1 + 14.0 * static_cast<double>(s) + 6.0;
    out += fmt::format(R"(<line x1="{:.1f}" y1="{:.1f}" x2="{:.1f}" y2="{:.1f}" stroke="{}" stroke-width="2"/>)"
                       "\n", x1 + 8.0, ly, x1 + 24.0, ly, color);
    out += fmt::format(R"(<text x="{:.1f}" y="{:.1f}" font-size="10">{}</text>)" "\n", x1 + 28.0,
                       ly + 3.0, escape(series.name));
  }
}

}  // namespace

std::string render_svg(const std::vector<PlotPanel>& panels, int columns) {
  columns = std::max(1, columns);
  const int rows = std::max<int>(1, (static_cast<int>(panels.size()) + columns - 1) / columns);
  const double width = kPanelWidth * columns;
  const double height = kPanelHeight * rows;
  std::string out = fmt::format(
      R"(<svg xmlns="http://www.w3.org/2000/svg" width="{:.0f}" height="{:.0f}" viewBox="0 0 {:.0f} {:.0f}" font-family="sans-serif">)"
      "\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
      width, height, width, height);
  for (std::size_t i = 0; i < panels.size(); ++i) {
    const double ox = kPanelWidth * static_cast<double>(i % static_cast<std::size_t>(columns));
    const double oy = kPanelHeight * static_cast<double>(i / static_cast<std::size_t>(columns));
    draw_panel(out, panels[i], ox, oy);
  }
  out += "</svg>\n";
  return out;
}

}  // namespace demexp
