#pragma once
// Minimal SVG 1.1 line and bar charts for reports.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace sbfnn::svg {

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline const char* palette(std::size_t i) {
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2"};
  return colors[i % 7];
}

struct Series {
  std::string label;
  std::vector<double> x, y;
  std::string color = "#1f77b4";
  bool dashed = false;
  bool markers = false;
};

struct Band {
  std::vector<double> x, lo, hi;
  std::string color = "#1f77b4";
};

class LinePlot {
 public:
  std::string title, xlabel, ylabel;
  bool log_y = false;
  std::vector<Series> series;
  std::vector<Band> bands;

  std::string render(double width = 640, double height = 400) const {
    const double ml = 70, mr = 20, mt = 36, mb = 50;
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    auto take = [&](double x, double y) {
      if (!std::isfinite(x) || !std::isfinite(y) || (log_y && y <= 0.0)) return;
      const double ty = tr(y);
      x0 = std::min(x0, x), x1 = std::max(x1, x), y0 = std::min(y0, ty), y1 = std::max(y1, ty);
    };
    for (const auto& s : series)
      for (std::size_t i = 0; i < s.x.size(); ++i) take(s.x[i], s.y[i]);
    for (const auto& b : bands)
      for (std::size_t i = 0; i < b.x.size(); ++i) take(b.x[i], b.lo[i]), take(b.x[i], b.hi[i]);
    if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (x1 == x0) x1 = x0 + 1;
    if (y1 == y0) y0 -= 0.5, y1 += 0.5;
    const double pw = width - ml - mr, ph = height - mt - mb;
    auto px = [&](double x) { return ml + (x - x0) / (x1 - x0) * pw; };
    auto py = [&](double y) { return mt + (1.0 - (tr(y) - y0) / (y1 - y0)) * ph; };

    std::ostringstream os;
    header(os, width, height);
    os << "<text x=\"" << num(width / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(title)
       << "</text>\n";
    os << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << num(pw) << "\" height=\"" << num(ph)
       << "\" fill=\"none\" stroke=\"#444\"/>\n";
    for (int k = 0; k <= 4; ++k) {
      const double fx = x0 + (x1 - x0) * k / 4.0, fy = y0 + (y1 - y0) * k / 4.0;
      const double yv = log_y ? std::pow(10.0, fy) : fy;
      os << "<text x=\"" << num(px(fx)) << "\" y=\"" << num(mt + ph + 16) << "\" text-anchor=\"middle\" font-size=\"11\">"
         << num(fx) << "</text>\n";
      os << "<text x=\"" << num(ml - 6) << "\" y=\"" << num(mt + (1.0 - k / 4.0) * ph + 4)
         << "\" text-anchor=\"end\" font-size=\"11\">" << num(yv) << "</text>\n";
    }
    os << "<text x=\"" << num(ml + pw / 2) << "\" y=\"" << num(height - 10) << "\" text-anchor=\"middle\" font-size=\"12\">"
       << escape(xlabel) << "</text>\n";
    os << "<text x=\"14\" y=\"" << num(mt + ph / 2) << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 14 "
       << num(mt + ph / 2) << ")\">" << escape(ylabel) << "</text>\n";

    for (const auto& b : bands) {
      std::ostringstream pts;
      for (std::size_t i = 0; i < b.x.size(); ++i)
        if (ok(b.hi[i])) pts << num(px(b.x[i])) << ',' << num(py(b.hi[i])) << ' ';
      for (std::size_t i = b.x.size(); i-- > 0;)
        if (ok(b.lo[i])) pts << num(px(b.x[i])) << ',' << num(py(b.lo[i])) << ' ';
      os << "<polygon points=\"" << pts.str() << "\" fill=\"" << b.color << "\" fill-opacity=\"0.2\" stroke=\"none\"/>\n";
    }
    for (const auto& s : series) {
      std::ostringstream pts;
      for (std::size_t i = 0; i < s.x.size(); ++i)
        if (ok(s.y[i])) pts << num(px(s.x[i])) << ',' << num(py(s.y[i])) << ' ';
      os << "<polyline points=\"" << pts.str() << "\" fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\""
         << (s.dashed ? " stroke-dasharray=\"6 4\"" : "") << "/>\n";
      if (s.markers)
        for (std::size_t i = 0; i < s.x.size(); ++i)
          if (ok(s.y[i]))
            os << "<circle cx=\"" << num(px(s.x[i])) << "\" cy=\"" << num(py(s.y[i])) << "\" r=\"2\" fill=\"" << s.color
               << "\"/>\n";
    }
    double ly = mt + 14;
    for (const auto& s : series) {
      if (s.label.empty()) continue;
      os << "<line x1=\"" << num(ml + pw - 120) << "\" y1=\"" << num(ly - 4) << "\" x2=\"" << num(ml + pw - 100)
         << "\" y2=\"" << num(ly - 4) << "\" stroke=\"" << s.color << "\" stroke-width=\"2\""
         << (s.dashed ? " stroke-dasharray=\"6 4\"" : "") << "/>\n";
      os << "<text x=\"" << num(ml + pw - 95) << "\" y=\"" << num(ly) << "\" font-size=\"11\">" << escape(s.label)
         << "</text>\n";
      ly += 15;
    }
    os << "</svg>\n";
    return os.str();
  }

 private:
  double tr(double y) const { return log_y ? std::log10(y) : y; }
  bool ok(double y) const { return std::isfinite(y) && (!log_y || y > 0.0); }

  static void header(std::ostringstream& os, double w, double h) {
    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
       << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << num(w) << "\" height=\"" << num(h)
       << "\" viewBox=\"0 0 " << num(w) << ' ' << num(h) << "\" font-family=\"sans-serif\">\n"
       << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  }
};

struct Bar {
  std::string label;
  double value = 0.0;
  std::optional<double> error;
};

/// Bars on a log axis with optional symmetric error dashes.
inline std::string bar_chart(const std::string& title, const std::string& ylabel, const std::vector<Bar>& bars,
                             double width = 640, double height = 400) {
  const double ml = 70, mr = 20, mt = 36, mb = 70;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& b : bars) {
    if (b.value > 0.0) lo = std::min(lo, b.value), hi = std::max(hi, b.value + b.error.value_or(0.0));
    if (b.error && b.value - *b.error > 0.0) lo = std::min(lo, b.value - *b.error);
  }
  if (!std::isfinite(lo)) lo = 1e-3, hi = 1.0;
  double y0 = std::floor(std::log10(lo)), y1 = std::ceil(std::log10(hi));
  if (y1 <= y0) y1 = y0 + 1;
  const double pw = width - ml - mr, ph = height - mt - mb;
  auto py = [&](double v) { return mt + (1.0 - (std::log10(v) - y0) / (y1 - y0)) * ph; };

  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << num(width) << "\" height=\""
     << num(height) << "\" viewBox=\"0 0 " << num(width) << ' ' << num(height) << "\" font-family=\"sans-serif\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << num(width / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(title)
     << "</text>\n";
  os << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << num(pw) << "\" height=\"" << num(ph)
     << "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (double e = y0; e <= y1; e += 1.0)
    os << "<text x=\"" << num(ml - 6) << "\" y=\"" << num(py(std::pow(10.0, e)) + 4)
       << "\" text-anchor=\"end\" font-size=\"11\">1e" << num(e) << "</text>\n";
  os << "<text x=\"14\" y=\"" << num(mt + ph / 2) << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 14 "
     << num(mt + ph / 2) << ")\">" << escape(ylabel) << "</text>\n";
  const double slot = bars.empty() ? pw : pw / static_cast<double>(bars.size());
  for (std::size_t i = 0; i < bars.size(); ++i) {
    const auto& b = bars[i];
    const double cx = ml + slot * (static_cast<double>(i) + 0.5);
    if (b.value > 0.0) {
      const double top = py(b.value);
      os << "<rect x=\"" << num(cx - slot * 0.3) << "\" y=\"" << num(top) << "\" width=\"" << num(slot * 0.6)
         << "\" height=\"" << num(mt + ph - top) << "\" fill=\"" << palette(i) << "\"/>\n";
      if (b.error) {
        const double up = py(b.value + *b.error);
        const double down = b.value - *b.error > 0.0 ? py(b.value - *b.error) : mt + ph;
        os << "<line x1=\"" << num(cx) << "\" y1=\"" << num(up) << "\" x2=\"" << num(cx) << "\" y2=\"" << num(down)
           << "\" stroke=\"black\"/>\n";
        for (double yy : {up, down})
          os << "<line x1=\"" << num(cx - 6) << "\" y1=\"" << num(yy) << "\" x2=\"" << num(cx + 6) << "\" y2=\""
             << num(yy) << "\" stroke=\"black\"/>\n";
      }
    }
    os << "<text x=\"" << num(cx) << "\" y=\"" << num(mt + ph + 16) << "\" text-anchor=\"middle\" font-size=\"11\">"
       << escape(b.label) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace sbfnn::svg
