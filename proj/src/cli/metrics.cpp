#include "lvrnn/cli/metrics.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

namespace lvrnn::cli {

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double to_double(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw SchemaError("not a number: '" + s + "'");
  return v;
}

}  // namespace

MetricsRow point_row(std::string experiment_id, std::string seed, std::string phase, std::size_t step,
                     std::string metric, double value) {
  return {std::move(experiment_id), std::move(seed), std::move(phase), step, std::move(metric), value, value, value};
}

std::string format_row(const MetricsRow& r) {
  return fmt::format("{},{},{},{},{},{},{},{}", r.experiment_id, r.seed, r.phase, r.step, r.metric, r.value, r.ci_lo,
                     r.ci_hi);
}

MetricsRow parse_row(const std::string& line) {
  const auto c = split(line);
  if (c.size() != 8) throw SchemaError(fmt::format("expected 8 columns, found {}", c.size()));
  MetricsRow r;
  r.experiment_id = c[0];
  r.seed = c[1];
  r.phase = c[2];
  std::size_t step = 0;
  const auto [p, ec] = std::from_chars(c[3].data(), c[3].data() + c[3].size(), step);
  if (ec != std::errc() || p != c[3].data() + c[3].size()) throw SchemaError("bad step '" + c[3] + "'");
  r.step = step;
  r.metric = c[4];
  r.value = to_double(c[5]);
  r.ci_lo = to_double(c[6]);
  r.ci_hi = to_double(c[7]);
  return r;
}

void write_metrics(const std::filesystem::path& path, const std::vector<MetricsRow>& rows) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << kMetricsHeader << '\n';
  for (const auto& r : rows) out << format_row(r) << '\n';
}

std::vector<MetricsRow> read_metrics(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError(path.string() + ": cannot be read");
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader)
    throw SchemaError(path.string() + ": header is '" + line + "', expected '" + std::string(kMetricsHeader) + "'");
  std::vector<MetricsRow> rows;
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      rows.push_back(parse_row(line));
    } catch (const SchemaError& e) {
      throw SchemaError(fmt::format("{}:{}: {}", path.string(), n, e.what()));
    }
  }
  return rows;
}

}  // namespace lvrnn::cli
