#pragma once

#include <string>
#include <vector>

namespace breather {

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> y_low;   // optional error bars, same length as y
  std::vector<double> y_high;
  bool line = false;           // polyline instead of markers
  bool dashed = false;
  std::string color = "#1f77b4";
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = true;
  bool log_y = true;
  std::vector<PlotSeries> series;
  std::vector<std::string> notes;  // annotation lines under the title
};

// Self-contained SVG document. Points that cannot be shown on a log axis are
// dropped. Throws std::invalid_argument when no point is drawable.
std::string render_svg(const PlotSpec& plot);

}  // namespace breather
