#include "lvrnn/cli/plot.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include <fmt/format.h>

namespace lvrnn::cli {

namespace {

constexpr std::array<const char*, 6> kColors{"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"};

std::string escape(const std::string& s) {
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

void widen(double& lo, double& hi, double margin) {
  if (!(lo <= hi)) lo = 0.0, hi = 1.0;
  if (hi == lo) lo -= 0.5, hi += 0.5;
  const double pad = margin * (hi - lo);
  lo -= pad;
  hi += pad;
}

}  // namespace

Extents plot_extents(const std::vector<Series>& series, double margin) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  Extents e{inf, -inf, inf, -inf};
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i])) continue;
      for (const auto* v : {&s.mean, &s.lo, &s.hi}) {
        if (i >= v->size() || !std::isfinite((*v)[i])) continue;
        e.xmin = std::min(e.xmin, s.x[i]);
        e.xmax = std::max(e.xmax, s.x[i]);
        e.ymin = std::min(e.ymin, (*v)[i]);
        e.ymax = std::max(e.ymax, (*v)[i]);
      }
    }
  }
  widen(e.xmin, e.xmax, margin);
  widen(e.ymin, e.ymax, margin);
  return e;
}

std::string render_svg(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                       const std::vector<Series>& series, const PlotFrame& f) {
  const Extents e = plot_extents(series);
  auto px = [&](double x) { return f.left + (x - e.xmin) / (e.xmax - e.xmin) * f.width; };
  auto py = [&](double y) { return f.top + (e.ymax - y) / (e.ymax - e.ymin) * f.height; };
  const double w = f.left + f.width + 170.0, h = f.top + f.height + 60.0;

  std::string svg = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\" "
      "font-family=\"sans-serif\" font-size=\"12\">\n",
      w, h);
  svg += fmt::format("<rect width=\"{}\" height=\"{}\" fill=\"white\"/>\n", w, h);
  svg += fmt::format("<text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
                     f.left + f.width / 2, escape(title));
  svg += fmt::format(
      "<rect class=\"frame\" x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#333\" "
      "data-extents=\"{} {} {} {}\"/>\n",
      f.left, f.top, f.width, f.height, e.xmin, e.xmax, e.ymin, e.ymax);

  for (int k = 0; k <= 4; ++k) {
    const double xv = e.xmin + (e.xmax - e.xmin) * k / 4.0, yv = e.ymin + (e.ymax - e.ymin) * k / 4.0;
    svg += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{:.4g}</text>\n", px(xv),
                       f.top + f.height + 16, xv);
    svg += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{:.4g}</text>\n", f.left - 6, py(yv) + 4, yv);
    svg += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"#ddd\"/>\n", f.left, py(yv),
                       f.left + f.width);
  }
  svg += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", f.left + f.width / 2,
                     f.top + f.height + 36, escape(xlabel));
  svg += fmt::format("<text transform=\"translate(16 {}) rotate(-90)\" text-anchor=\"middle\">{}</text>\n",
                     f.top + f.height / 2, escape(ylabel));

  for (std::size_t s = 0; s < series.size(); ++s) {
    const Series& ser = series[s];
    const char* color = kColors[s % kColors.size()];
    std::string upper, lower, line;
    for (std::size_t i = 0; i < ser.x.size(); ++i) {
      if (!std::isfinite(ser.x[i]) || !std::isfinite(ser.mean[i])) continue;
      line += fmt::format("{:.3f},{:.3f} ", px(ser.x[i]), py(ser.mean[i]));
      if (i < ser.lo.size() && std::isfinite(ser.lo[i]) && std::isfinite(ser.hi[i])) {
        upper += fmt::format("{:.3f},{:.3f} ", px(ser.x[i]), py(ser.hi[i]));
        lower.insert(0, fmt::format("{:.3f},{:.3f} ", px(ser.x[i]), py(ser.lo[i])));
      }
    }
    if (!upper.empty())
      svg += fmt::format("<polygon class=\"band\" points=\"{}{}\" fill=\"{}\" fill-opacity=\"0.2\" stroke=\"none\"/>\n",
                         upper, lower, color);
    svg += fmt::format("<polyline class=\"mean\" points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"/>\n",
                       line, color);
    const double ly = f.top + 14.0 + 18.0 * static_cast<double>(s);
    svg += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"{3}\" stroke-width=\"2\"/>\n",
                       f.left + f.width + 12, ly, f.left + f.width + 32, color);
    svg += fmt::format("<text x=\"{}\" y=\"{}\">{}</text>\n", f.left + f.width + 38, ly + 4, escape(ser.label));
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace lvrnn::cli
