#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace lvrnn::cli {

inline constexpr std::string_view kMetricsHeader = "experiment_id,seed,phase,step,metric,value,ci_lo,ci_hi";

/// A metrics file whose header or rows do not follow the schema.
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One CSV row. `phase` is train or eval; `step` is the update index during
/// training and the timestep t during evaluation. `seed` is "all" in
/// aggregated files.
struct MetricsRow {
  std::string experiment_id;
  std::string seed;
  std::string phase;
  std::size_t step = 0;
  std::string metric;
  double value = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;

  friend bool operator==(const MetricsRow&, const MetricsRow&) = default;
};

/// Point value: the interval collapses onto it.
MetricsRow point_row(std::string experiment_id, std::string seed, std::string phase, std::size_t step,
                     std::string metric, double value);

/// Round-trip exact (shortest representation) formatting.
std::string format_row(const MetricsRow& row);
MetricsRow parse_row(const std::string& line);

void write_metrics(const std::filesystem::path& path, const std::vector<MetricsRow>& rows);
std::vector<MetricsRow> read_metrics(const std::filesystem::path& path);

}  // namespace lvrnn::cli
