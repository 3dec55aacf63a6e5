#include "lvrnn/model/snapshot.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

namespace lvrnn::model {

static_assert(std::endian::native == std::endian::little, "snapshot I/O assumes a little-endian host");

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'L', 'V', 'R', 'N', 'N', 'S', 'N', 'P'};

json arch_json(const Architecture& a) {
  return {{"observation_dim", a.observation_dim},
          {"num_actions", a.num_actions},
          {"head", a.head == HeadKind::Policy ? "policy" : "regression"},
          {"policy_uses_state", a.policy_uses_state},
          {"embed_hidden", a.embed_hidden},
          {"lstm_hidden", a.lstm_hidden},
          {"latent_dim", a.latent_dim},
          {"head_hidden", a.head_hidden},
          {"leaky_slope", a.leaky_slope}};
}

Architecture arch_from_json(const json& j) {
  Architecture a;
  a.observation_dim = j.at("observation_dim").get<std::size_t>();
  a.num_actions = j.at("num_actions").get<std::size_t>();
  a.head = j.at("head").get<std::string>() == "policy" ? HeadKind::Policy : HeadKind::Regression;
  a.policy_uses_state = j.at("policy_uses_state").get<bool>();
  a.embed_hidden = j.at("embed_hidden").get<std::vector<std::size_t>>();
  a.lstm_hidden = j.at("lstm_hidden").get<std::size_t>();
  a.latent_dim = j.at("latent_dim").get<std::size_t>();
  a.head_hidden = j.at("head_hidden").get<std::vector<std::size_t>>();
  a.leaky_slope = j.at("leaky_slope").get<double>();
  return a;
}

json posterior_json(const PosteriorConfig& p) {
  json j = {{"family", to_string(p.family)},
            {"accumulate", to_string(p.accumulate)},
            {"history_window", p.history_window},
            {"latent_window", p.latent_window}};
  j["covariance"] = p.covariance ? json(belief::to_string(*p.covariance)) : json(nullptr);
  return j;
}

PosteriorConfig posterior_from_json(const json& j) {
  PosteriorConfig p;
  p.family = family_from_string(j.at("family").get<std::string>());
  p.accumulate = accumulate_from_string(j.at("accumulate").get<std::string>());
  p.history_window = j.at("history_window").get<std::size_t>();
  p.latent_window = j.at("latent_window").get<std::size_t>();
  if (!j.at("covariance").is_null()) p.covariance = belief::covariance_kind_from_string(j.at("covariance").get<std::string>());
  return p;
}

template <class T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::istream& is) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw SnapshotError("truncated snapshot header");
  return v;
}

}  // namespace

void save_snapshot(const Model& model, const std::filesystem::path& path) {
  json header = {{"architecture", arch_json(model.architecture())}, {"posterior", posterior_json(model.posterior())}};
  json params = json::array();
  const ParamSet& ps = model.params();
  for (std::size_t i = 0; i < ps.size(); ++i) params.push_back({{"name", ps.names[i]}, {"shape", ps.values[i].shape()}});
  header["params"] = std::move(params);
  const std::string text = header.dump();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw SnapshotError("cannot open '" + path.string() + "' for writing");
  os.write(kMagic, sizeof(kMagic));
  write_pod(os, kSnapshotVersion);
  write_pod(os, static_cast<std::uint64_t>(text.size()));
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const Tensor& t : ps.values)
    os.write(reinterpret_cast<const char*>(t.data().data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
  if (!os) throw SnapshotError("write failed for '" + path.string() + "'");
}

Snapshot read_snapshot(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw SnapshotError("cannot open snapshot '" + path.string() + "'");
  char magic[8];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw SnapshotError("'" + path.string() + "' is not a snapshot file");
  const auto version = read_pod<std::uint32_t>(is);
  if (version != kSnapshotVersion)
    throw SnapshotError("unsupported snapshot version " + std::to_string(version));
  const auto len = read_pod<std::uint64_t>(is);
  std::string text(len, '\0');
  if (!is.read(text.data(), static_cast<std::streamsize>(len))) throw SnapshotError("truncated snapshot header");

  Snapshot snap;
  try {
    const json header = json::parse(text);
    snap.architecture = arch_from_json(header.at("architecture"));
    snap.posterior = posterior_from_json(header.at("posterior"));
    for (const json& p : header.at("params")) {
      Tensor t(p.at("shape").get<Shape>());
      if (!is.read(reinterpret_cast<char*>(t.data().data()), static_cast<std::streamsize>(t.size() * sizeof(double))))
        throw SnapshotError("truncated parameter data for '" + p.at("name").get<std::string>() + "'");
      snap.params.names.push_back(p.at("name").get<std::string>());
      snap.params.values.push_back(std::move(t));
    }
  } catch (const json::exception& e) {
    throw SnapshotError("malformed snapshot header: " + std::string(e.what()));
  }
  if (is.peek() != std::char_traits<char>::eof()) throw SnapshotError("trailing bytes after parameter data");
  return snap;
}

Model load_snapshot(const std::filesystem::path& path) {
  Snapshot s = read_snapshot(path);
  return Model(s.architecture, s.posterior, std::move(s.params));
}

Model load_as(const Snapshot& snapshot, const PosteriorConfig& posterior, std::uint64_t head_seed) {
  posterior.validate();
  const bool want_head = posterior.family == Family::VRNN;
  const auto layout = param_layout(snapshot.architecture, want_head ? posterior.covariance : std::nullopt);
  ParamSet params;
  for (const ParamSpec& spec : layout) {
    const bool is_head = spec.name.rfind("posterior_head.", 0) == 0;
    if (snapshot.params.contains(spec.name)) {
      const Tensor& t = snapshot.params.values[snapshot.params.index(spec.name)];
      if (!is_head || t.shape() == spec.shape) {
        params.names.push_back(spec.name);
        params.values.push_back(t);
        continue;
      }
    }
    if (!is_head) throw SnapshotError("snapshot lacks parameter '" + spec.name + "'");
  }
  if (want_head && params.size() < layout.size()) {
    // Fresh posterior head: draw the whole layout and keep only the head.
    const ParamSet fresh = init_params(layout, head_seed);
    params.names.resize(layout.size() - 2);
    params.values.resize(layout.size() - 2);
    for (std::size_t i = layout.size() - 2; i < layout.size(); ++i) {
      params.names.push_back(fresh.names[i]);
      params.values.push_back(fresh.values[i]);
    }
  }
  return Model(snapshot.architecture, posterior, std::move(params));
}

Model load_as(const std::filesystem::path& path, const PosteriorConfig& posterior, std::uint64_t head_seed) {
  return load_as(read_snapshot(path), posterior, head_seed);
}

Model load_as(const std::filesystem::path& path, const Architecture& expected, const PosteriorConfig& posterior,
              std::uint64_t head_seed) {
  Snapshot s = read_snapshot(path);
  const std::string diff = architecture_diff(expected, s.architecture);
  if (!diff.empty()) throw SnapshotError("architecture mismatch in '" + path.string() + "': " + diff);
  return load_as(s, posterior, head_seed);
}

std::string architecture_diff(const Architecture& e, const Architecture& a) {
  std::string out;
  auto note = [&](const std::string& field, const std::string& want, const std::string& got) {
    if (want == got) return;
    if (!out.empty()) out += "; ";
    out += field + " expected " + want + ", got " + got;
  };
  auto list = [](const std::vector<std::size_t>& v) {
    std::string s = "[";
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s + "]";
  };
  note("observation_dim", std::to_string(e.observation_dim), std::to_string(a.observation_dim));
  note("num_actions", std::to_string(e.num_actions), std::to_string(a.num_actions));
  note("head", e.head == HeadKind::Policy ? "policy" : "regression", a.head == HeadKind::Policy ? "policy" : "regression");
  note("policy_uses_state", e.policy_uses_state ? "true" : "false", a.policy_uses_state ? "true" : "false");
  note("embed_hidden", list(e.embed_hidden), list(a.embed_hidden));
  note("lstm_hidden", std::to_string(e.lstm_hidden), std::to_string(a.lstm_hidden));
  note("latent_dim", std::to_string(e.latent_dim), std::to_string(a.latent_dim));
  note("head_hidden", list(e.head_hidden), list(a.head_hidden));
  if (e.leaky_slope != a.leaky_slope) note("leaky_slope", std::to_string(e.leaky_slope), std::to_string(a.leaky_slope));
  return out;
}

}  // namespace lvrnn::model
