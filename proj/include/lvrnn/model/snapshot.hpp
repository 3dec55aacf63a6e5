#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>

#include "lvrnn/model/model.hpp"

namespace lvrnn::model {

inline constexpr std::uint32_t kSnapshotVersion = 1;

/// Unreadable, corrupt or incompatible snapshot file.
class SnapshotError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Snapshot {
  Architecture architecture;
  PosteriorConfig posterior;
  ParamSet params;
};

/// Layout: 8-byte magic "LVRNNSNP", u32 version, u64 header length, a JSON
/// header (architecture, posterior, parameter names and shapes), then every
/// parameter as little-endian f64 in header order.
void save_snapshot(const Model& model, const std::filesystem::path& path);
Snapshot read_snapshot(const std::filesystem::path& path);

/// The model exactly as saved.
Model load_snapshot(const std::filesystem::path& path);

/// Reinterprets the saved weights under `posterior`. Shared weights are kept
/// bit for bit. A VRNN target without a saved posterior head gets a fresh one
/// drawn from `head_seed`; a non-VRNN target drops any saved head.
Model load_as(const Snapshot& snapshot, const PosteriorConfig& posterior, std::uint64_t head_seed = 0);
Model load_as(const std::filesystem::path& path, const PosteriorConfig& posterior, std::uint64_t head_seed = 0);

/// As above, and additionally requires the saved architecture to equal
/// `expected`; the error message lists every differing dimension.
Model load_as(const std::filesystem::path& path, const Architecture& expected, const PosteriorConfig& posterior,
              std::uint64_t head_seed = 0);

/// Human-readable list of differences, empty when equal.
std::string architecture_diff(const Architecture& expected, const Architecture& actual);

}  // namespace lvrnn::model
