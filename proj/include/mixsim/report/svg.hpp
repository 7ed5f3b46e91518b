#pragma once

// Minimal deterministic SVG plots: fixed canvas, fixed number formatting,
// no timestamps or ids, so identical inputs give identical bytes.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mixsim/report/csv.hpp"

namespace mixsim::report {

inline constexpr int kSvgWidth = 640;
inline constexpr int kSvgHeight = 400;

enum class SeriesStyle { Line, Dots };

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;
  SeriesStyle style = SeriesStyle::Line;
};

struct HLine {
  std::string name;
  double y = 0.0;
};

struct XYPlot {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  std::vector<HLine> hlines;
  std::optional<std::pair<double, double>> y_range;
};

inline std::string escape_xml(const std::string& s) {
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

namespace detail {

inline constexpr double kLeft = 70.0;
inline constexpr double kRight = 20.0;
inline constexpr double kTop = 40.0;
inline constexpr double kBottom = 50.0;
inline constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

inline std::string px(double v) { return num(v, 2); }

inline std::string header(const std::string& title) {
  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(kSvgWidth) + "\" height=\"" +
                  std::to_string(kSvgHeight) + "\" viewBox=\"0 0 " + std::to_string(kSvgWidth) + " " +
                  std::to_string(kSvgHeight) + "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + px(kSvgWidth / 2.0) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" +
       escape_xml(title) + "</text>\n";
  return s;
}

// Pretty tick label: integers without decimals, others with up to 3.
inline std::string tick(double v) {
  if (std::abs(v - std::round(v)) < 1e-9) return num(std::round(v), 0);
  std::string s = num(v, 3);
  while (s.back() == '0') s.pop_back();
  if (s.back() == '.') s.pop_back();
  return s;
}

inline void axes(std::string& s, double x0, double x1, double y0, double y1, const std::string& xl,
                 const std::string& yl, bool x_ticks) {
  const double w = kSvgWidth - kLeft - kRight;
  const double h = kSvgHeight - kTop - kBottom;
  s += "<rect x=\"" + px(kLeft) + "\" y=\"" + px(kTop) + "\" width=\"" + px(w) + "\" height=\"" + px(h) +
       "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double fy = kTop + h - h * i / 4.0;
    s += "<text x=\"" + px(kLeft - 6) + "\" y=\"" + px(fy + 4) + "\" text-anchor=\"end\">" +
         tick(y0 + (y1 - y0) * i / 4.0) + "</text>\n";
    if (x_ticks) {
      const double fx = kLeft + w * i / 4.0;
      s += "<text x=\"" + px(fx) + "\" y=\"" + px(kTop + h + 16) + "\" text-anchor=\"middle\">" +
           tick(x0 + (x1 - x0) * i / 4.0) + "</text>\n";
    }
  }
  s += "<text x=\"" + px(kLeft + w / 2) + "\" y=\"" + px(kSvgHeight - 10.0) + "\" text-anchor=\"middle\">" +
       escape_xml(xl) + "</text>\n";
  s += "<text x=\"16\" y=\"" + px(kTop + h / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
       px(kTop + h / 2) + ")\">" + escape_xml(yl) + "</text>\n";
}

}  // namespace detail

inline std::string render(const XYPlot& p) {
  using namespace detail;
  double x0 = 0.0, x1 = 1.0, y0 = 0.0, y1 = 1.0;
  bool any = false;
  for (const auto& s : p.series) {
    for (auto [x, y] : s.points) {
      if (!std::isfinite(x) || !std::isfinite(y)) continue;
      if (!any) x0 = x1 = x, y0 = y1 = y, any = true;
      x0 = std::min(x0, x), x1 = std::max(x1, x);
      y0 = std::min(y0, y), y1 = std::max(y1, y);
    }
  }
  for (const auto& l : p.hlines) y0 = std::min(y0, l.y), y1 = std::max(y1, l.y);
  if (p.y_range) std::tie(y0, y1) = *p.y_range;
  if (x1 <= x0) x1 = x0 + 1.0;
  if (y1 <= y0) y1 = y0 + 1.0;
  const double w = kSvgWidth - kLeft - kRight;
  const double h = kSvgHeight - kTop - kBottom;
  const auto fx = [&](double x) { return kLeft + (x - x0) / (x1 - x0) * w; };
  const auto fy = [&](double y) { return kTop + h - (std::clamp(y, y0, y1) - y0) / (y1 - y0) * h; };

  std::string s = header(p.title);
  axes(s, x0, x1, y0, y1, p.x_label, p.y_label, true);
  std::size_t color = 0;
  for (const auto& ser : p.series) {
    const char* c = kPalette[color++ % std::size(kPalette)];
    if (ser.style == SeriesStyle::Line) {
      s += "<polyline fill=\"none\" stroke=\"" + std::string(c) + "\" stroke-width=\"1.5\" points=\"";
      bool first = true;
      for (auto [x, y] : ser.points) {
        if (!std::isfinite(x) || !std::isfinite(y)) continue;
        s += (first ? "" : " ") + px(fx(x)) + "," + px(fy(y));
        first = false;
      }
      s += "\"/>\n";
    } else {
      for (auto [x, y] : ser.points) {
        if (!std::isfinite(x) || !std::isfinite(y)) continue;
        s += "<circle cx=\"" + px(fx(x)) + "\" cy=\"" + px(fy(y)) + "\" r=\"1.5\" fill=\"" + c + "\"/>\n";
      }
    }
  }
  for (const auto& l : p.hlines) {
    const char* c = kPalette[color++ % std::size(kPalette)];
    s += "<line x1=\"" + px(kLeft) + "\" y1=\"" + px(fy(l.y)) + "\" x2=\"" + px(kLeft + w) + "\" y2=\"" +
         px(fy(l.y)) + "\" stroke=\"" + c + "\" stroke-dasharray=\"4 3\"/>\n";
  }
  // Legend
  double ly = kTop + 14;
  color = 0;
  const auto legend = [&](const std::string& name) {
    const char* c = kPalette[color++ % std::size(kPalette)];
    if (!name.empty()) {
      s += "<rect x=\"" + px(kLeft + w - 150) + "\" y=\"" + px(ly - 8) + "\" width=\"10\" height=\"10\" fill=\"" + c +
           "\"/>\n<text x=\"" + px(kLeft + w - 135) + "\" y=\"" + px(ly + 1) + "\">" + escape_xml(name) + "</text>\n";
      ly += 16;
    }
  };
  for (const auto& ser : p.series) legend(ser.name);
  for (const auto& l : p.hlines) legend(l.name);
  s += "</svg>\n";
  return s;
}

struct Bar {
  std::string label;
  double value = 0.0;
};

struct BarChart {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Bar> bars;
};

inline std::string render(const BarChart& b) {
  using namespace detail;
  double y1 = 0.0;
  for (const auto& bar : b.bars) y1 = std::max(y1, bar.value);
  if (y1 <= 0.0) y1 = 1.0;
  const double w = kSvgWidth - kLeft - kRight;
  const double h = kSvgHeight - kTop - kBottom;
  std::string s = header(b.title);
  axes(s, 0.0, 1.0, 0.0, y1, b.x_label, b.y_label, false);
  const double slot = b.bars.empty() ? w : w / static_cast<double>(b.bars.size());
  for (std::size_t i = 0; i < b.bars.size(); ++i) {
    const double bh = b.bars[i].value / y1 * h;
    const double x = kLeft + slot * static_cast<double>(i);
    s += "<rect x=\"" + px(x + slot * 0.1) + "\" y=\"" + px(kTop + h - bh) + "\" width=\"" + px(slot * 0.8) +
         "\" height=\"" + px(bh) + "\" fill=\"" + kPalette[0] + "\"/>\n";
    const double cx = x + slot / 2;
    const double cy = kTop + h + 12;
    s += "<text x=\"" + px(cx) + "\" y=\"" + px(cy) + "\" text-anchor=\"end\" font-size=\"9\" transform=\"rotate(-45 " +
         px(cx) + " " + px(cy) + ")\">" + escape_xml(b.bars[i].label) + "</text>\n";
  }
  s += "</svg>\n";
  return s;
}

}  // namespace mixsim::report
