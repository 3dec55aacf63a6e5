#pragma once

#include <string>
#include <vector>

namespace lvrnn::cli {

/// A mean line with a confidence band.
struct Series {
  std::string label;
  std::vector<double> x, mean, lo, hi;
};

struct Extents {
  double xmin = 0.0, xmax = 1.0, ymin = 0.0, ymax = 1.0;
};

inline constexpr double kPlotMargin = 0.05;

/// Data range (including the bands) widened by `margin` of its width on each
/// side. A zero-width range is widened to ±0.5 first. Non-finite values are ignored.
Extents plot_extents(const std::vector<Series>& series, double margin = kPlotMargin);

struct PlotFrame {
  double left = 72.0, top = 40.0, width = 540.0, height = 300.0;
};

/// Standalone SVG line plot. The frame rectangle carries the data extents in
/// a `data-extents` attribute.
std::string render_svg(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                       const std::vector<Series>& series, const PlotFrame& frame = {});

}  // namespace lvrnn::cli
