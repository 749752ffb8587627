#include "breather/svg_plot.hpp"

#include "breather/io.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace breather {

namespace {

constexpr double kWidth = 640, kHeight = 440;
constexpr double kLeft = 80, kRight = 20, kTop = 60, kBottom = 60;

std::string escape(const std::string& text) {
  std::string out;
  for (char c : text) {
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

// Fixed-precision coordinates keep the output stable and small.
std::string coord(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

struct Axis {
  bool log = false;
  double lo = 0.0, hi = 1.0;

  bool accepts(double v) const { return std::isfinite(v) && (!log || v > 0.0); }
  double map(double v) const { return log ? std::log10(v) : v; }

  void fit(const std::vector<double>& values) {
    double a = std::numeric_limits<double>::infinity(), b = -a;
    for (double v : values) {
      a = std::min(a, map(v));
      b = std::max(b, map(v));
    }
    if (a == b) {
      a -= 0.5;
      b += 0.5;
    }
    const double pad = 0.05 * (b - a);
    lo = a - pad;
    hi = b + pad;
  }

  std::vector<double> ticks() const {
    std::vector<double> out;
    if (log) {
      for (double e = std::ceil(lo); e <= hi; e += 1.0) out.push_back(e);
      if (out.size() < 2) out = {lo, 0.5 * (lo + hi), hi};
      return out;
    }
    const double raw = (hi - lo) / 5.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double f : {2.0, 5.0, 10.0})
      if (raw > step) step = f * mag;
    for (double t = std::ceil(lo / step) * step; t <= hi; t += step) out.push_back(t);
    return out;
  }

  std::string label(double t) const {
    std::ostringstream s;
    if (log) {
      if (t == std::round(t))
        s << "1e" << static_cast<int>(t);
      else
        s << format_number(std::pow(10.0, t));
    } else {
      s << format_number(std::round(t * 1e6) / 1e6);
    }
    return s.str();
  }
};

}  // namespace

std::string render_svg(const PlotSpec& plot) {
  Axis ax{plot.log_x}, ay{plot.log_y};
  std::vector<double> xs, ys;
  for (const PlotSeries& s : plot.series)
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!ax.accepts(s.x[i]) || !ay.accepts(s.y[i])) continue;
      xs.push_back(s.x[i]);
      ys.push_back(s.y[i]);
      if (i < s.y_low.size() && ay.accepts(s.y_low[i])) ys.push_back(s.y_low[i]);
      if (i < s.y_high.size() && ay.accepts(s.y_high[i])) ys.push_back(s.y_high[i]);
    }
  if (xs.empty()) throw std::invalid_argument("nothing to plot: no finite point on the chosen axes");
  ax.fit(xs);
  ay.fit(ys);

  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto px = [&](double v) { return kLeft + (ax.map(v) - ax.lo) / (ax.hi - ax.lo) * pw; };
  auto py = [&](double v) { return kTop + ph - (ay.map(v) - ay.lo) / (ay.hi - ay.lo) * ph; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << kWidth / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << escape(plot.title)
      << "</text>\n";
  for (std::size_t i = 0; i < plot.notes.size(); ++i)
    svg << "<text x=\"" << kLeft << "\" y=\"" << 36 + 13 * i << "\" font-size=\"11\">" << escape(plot.notes[i])
        << "</text>\n";

  // frame, ticks, labels
  svg << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double t : ax.ticks()) {
    const double x = kLeft + (t - ax.lo) / (ax.hi - ax.lo) * pw;
    svg << "<line x1=\"" << coord(x) << "\" y1=\"" << kTop + ph << "\" x2=\"" << coord(x) << "\" y2=\""
        << kTop + ph + 5 << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << coord(x) << "\" y=\"" << kTop + ph + 18 << "\" text-anchor=\"middle\">"
        << escape(ax.label(t)) << "</text>\n";
  }
  for (double t : ay.ticks()) {
    const double y = kTop + ph - (t - ay.lo) / (ay.hi - ay.lo) * ph;
    svg << "<line x1=\"" << kLeft - 5 << "\" y1=\"" << coord(y) << "\" x2=\"" << kLeft << "\" y2=\"" << coord(y)
        << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << kLeft - 8 << "\" y=\"" << coord(y + 4) << "\" text-anchor=\"end\">"
        << escape(ay.label(t)) << "</text>\n";
  }
  svg << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kHeight - 15 << "\" text-anchor=\"middle\">"
      << escape(plot.x_label) << (plot.log_x ? " (log)" : "") << "</text>\n";
  svg << "<text transform=\"translate(18," << kTop + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
      << escape(plot.y_label) << (plot.log_y ? " (log)" : "") << "</text>\n";

  double legend_y = kTop + 14;
  for (const PlotSeries& s : plot.series) {
    const std::string dash = s.dashed ? " stroke-dasharray=\"6,4\"" : "";
    if (s.line) {
      std::ostringstream pts;
      for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i)
        if (ax.accepts(s.x[i]) && ay.accepts(s.y[i])) pts << coord(px(s.x[i])) << ',' << coord(py(s.y[i])) << ' ';
      svg << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\"" << dash << " points=\""
          << pts.str() << "\"/>\n";
    } else {
      for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
        if (!ax.accepts(s.x[i]) || !ay.accepts(s.y[i])) continue;
        const double cx = px(s.x[i]);
        if (i < s.y_low.size() && i < s.y_high.size() && ay.accepts(s.y_low[i]) && ay.accepts(s.y_high[i]))
          svg << "<line x1=\"" << coord(cx) << "\" y1=\"" << coord(py(s.y_low[i])) << "\" x2=\"" << coord(cx)
              << "\" y2=\"" << coord(py(s.y_high[i])) << "\" stroke=\"" << s.color << "\"/>\n";
        svg << "<circle cx=\"" << coord(cx) << "\" cy=\"" << coord(py(s.y[i])) << "\" r=\"3.5\" fill=\"" << s.color
            << "\"/>\n";
      }
    }
    svg << "<line x1=\"" << kLeft + pw - 170 << "\" y1=\"" << legend_y - 4 << "\" x2=\"" << kLeft + pw - 150
        << "\" y2=\"" << legend_y - 4 << "\" stroke=\"" << s.color << "\" stroke-width=\"2\"" << dash << "/>\n";
    svg << "<text x=\"" << kLeft + pw - 145 << "\" y=\"" << legend_y << "\">" << escape(s.label) << "</text>\n";
    legend_y += 15;
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace breather
