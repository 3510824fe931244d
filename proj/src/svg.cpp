#include "svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace drfwi::svg {
namespace {

constexpr double kWidth = 640.0, kHeight = 420.0;
constexpr double kLeft = 80.0, kRight = 150.0, kTop = 40.0, kBottom = 60.0;
const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

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

void header(std::ostringstream& o, const std::string& title) {
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
    << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << num(kWidth / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
    << escape(title) << "</text>\n";
}

void axis_labels(std::ostringstream& o, const std::string& xl, const std::string& yl) {
  const double cx = kLeft + (kWidth - kLeft - kRight) / 2;
  const double cy = kTop + (kHeight - kTop - kBottom) / 2;
  o << "<text x=\"" << num(cx) << "\" y=\"" << num(kHeight - 15)
    << "\" text-anchor=\"middle\" font-size=\"12\">" << escape(xl) << "</text>\n";
  o << "<text x=\"18\" y=\"" << num(cy) << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 18 "
    << num(cy) << ")\">" << escape(yl) << "</text>\n";
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void settle() {
    if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
    if (hi <= lo) {
      const double pad = lo == 0.0 ? 1.0 : 0.05 * std::abs(lo);
      lo -= pad;
      hi += pad;
    }
  }
};

}  // namespace

std::string render(const LinePlot& plot) {
  auto ty = [&](double v) { return plot.log_y ? std::log10(v) : v; };
  auto usable = [&](double x, double y) {
    return std::isfinite(x) && std::isfinite(y) && (!plot.log_y || y > 0.0);
  };
  Range rx, ry;
  for (const Series& s : plot.series) {
    for (std::size_t k = 0; k < std::min(s.x.size(), s.y.size()); ++k) {
      if (!usable(s.x[k], s.y[k])) continue;
      rx.add(s.x[k]);
      ry.add(ty(s.y[k]));
    }
  }
  rx.settle();
  ry.settle();
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - rx.lo) / (rx.hi - rx.lo) * pw; };
  auto py = [&](double y) { return kTop + ph - (ty(y) - ry.lo) / (ry.hi - ry.lo) * ph; };

  std::ostringstream o;
  header(o, plot.title);
  o << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double fx = rx.lo + (rx.hi - rx.lo) * t / 4.0;
    const double fy = ry.lo + (ry.hi - ry.lo) * t / 4.0;
    const double x = kLeft + pw * t / 4.0, y = kTop + ph - ph * t / 4.0;
    o << "<line x1=\"" << num(x) << "\" y1=\"" << num(kTop + ph) << "\" x2=\"" << num(x)
      << "\" y2=\"" << num(kTop + ph + 5) << "\" stroke=\"black\"/>\n";
    o << "<text x=\"" << num(x) << "\" y=\"" << num(kTop + ph + 18)
      << "\" text-anchor=\"middle\" font-size=\"10\">" << tick_label(fx) << "</text>\n";
    o << "<line x1=\"" << num(kLeft - 5) << "\" y1=\"" << num(y) << "\" x2=\"" << num(kLeft)
      << "\" y2=\"" << num(y) << "\" stroke=\"black\"/>\n";
    o << "<text x=\"" << num(kLeft - 8) << "\" y=\"" << num(y + 3)
      << "\" text-anchor=\"end\" font-size=\"10\">"
      << tick_label(plot.log_y ? std::pow(10.0, fy) : fy) << "</text>\n";
  }
  axis_labels(o, plot.x_label, plot.y_label + (plot.log_y ? " (log)" : ""));
  for (double m : plot.x_markers) {
    if (m < rx.lo || m > rx.hi) continue;
    o << "<line x1=\"" << num(px(m)) << "\" y1=\"" << kTop << "\" x2=\"" << num(px(m))
      << "\" y2=\"" << num(kTop + ph) << "\" stroke=\"grey\" stroke-dasharray=\"4 3\"/>\n";
  }
  for (std::size_t i = 0; i < plot.series.size(); ++i) {
    const Series& s = plot.series[i];
    const char* color = kPalette[i % std::size(kPalette)];
    std::string points;
    auto flush = [&] {
      if (!points.empty()) {
        o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\""
          << points << "\"/>\n";
      }
      points.clear();
    };
    for (std::size_t k = 0; k < std::min(s.x.size(), s.y.size()); ++k) {
      if (!usable(s.x[k], s.y[k])) {
        flush();
        continue;
      }
      if (!points.empty()) points += ' ';
      points += num(px(s.x[k])) + ',' + num(py(s.y[k]));
    }
    flush();
    const double ly = kTop + 14.0 + 18.0 * static_cast<double>(i);
    o << "<line x1=\"" << num(kWidth - kRight + 10) << "\" y1=\"" << num(ly) << "\" x2=\""
      << num(kWidth - kRight + 30) << "\" y2=\"" << num(ly) << "\" stroke=\"" << color
      << "\" stroke-width=\"2\"/>\n";
    o << "<text x=\"" << num(kWidth - kRight + 35) << "\" y=\"" << num(ly + 4)
      << "\" font-size=\"11\">" << escape(s.name) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

std::string render(const Heatmap& map) {
  Range r;
  for (const auto& row : map.cells)
    for (double v : row)
      if (std::isfinite(v)) r.add(v);
  r.settle();
  const std::size_t rows = map.cells.size();
  const std::size_t cols = rows ? map.cells[0].size() : 0;
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  const double cw = cols ? pw / static_cast<double>(cols) : pw;
  const double ch = rows ? ph / static_cast<double>(rows) : ph;

  std::ostringstream o;
  header(o, map.title);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      const double v = map.cells[i][j];
      std::string fill = "#bbbbbb";
      if (std::isfinite(v)) {
        // low values dark blue, high values pale yellow
        const double t = (v - r.lo) / (r.hi - r.lo);
        const int red = static_cast<int>(std::lround(30 + 225 * t));
        const int green = static_cast<int>(std::lround(40 + 200 * t));
        const int blue = static_cast<int>(std::lround(120 + 40 * (1 - t)));
        char buf[16];
        std::snprintf(buf, sizeof buf, "#%02x%02x%02x", red, green, blue);
        fill = buf;
      }
      const double x = kLeft + cw * static_cast<double>(j);
      const double y = kTop + ch * static_cast<double>(i);
      o << "<rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"" << num(cw)
        << "\" height=\"" << num(ch) << "\" fill=\"" << fill << "\"/>\n";
      o << "<text x=\"" << num(x + cw / 2) << "\" y=\"" << num(y + ch / 2 + 4)
        << "\" text-anchor=\"middle\" font-size=\"10\">"
        << (std::isfinite(v) ? tick_label(v) : "failed") << "</text>\n";
      if (static_cast<int>(i) == map.marked_row && static_cast<int>(j) == map.marked_col) {
        o << "<circle cx=\"" << num(x + cw / 2) << "\" cy=\"" << num(y + ch / 2 - 10)
          << "\" r=\"4\" fill=\"red\"/>\n";
      }
    }
  }
  for (std::size_t j = 0; j < std::min(cols, map.x_ticks.size()); ++j) {
    o << "<text x=\"" << num(kLeft + cw * (static_cast<double>(j) + 0.5)) << "\" y=\""
      << num(kTop + ph + 18) << "\" text-anchor=\"middle\" font-size=\"10\">"
      << escape(map.x_ticks[j]) << "</text>\n";
  }
  for (std::size_t i = 0; i < std::min(rows, map.y_ticks.size()); ++i) {
    o << "<text x=\"" << num(kLeft - 8) << "\" y=\"" << num(kTop + ch * (static_cast<double>(i) + 0.5) + 3)
      << "\" text-anchor=\"end\" font-size=\"10\">" << escape(map.y_ticks[i]) << "</text>\n";
  }
  axis_labels(o, map.x_label, map.y_label);
  o << "</svg>\n";
  return o.str();
}

}  // namespace drfwi::svg
