#include "hbmi/datasets.hpp"
#include "hbmi/errors.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace hbmi {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

[[noreturn]] void fail(ErrorKind kind, const std::string& msg) { throw Error(kind, "datasets", msg); }

// Doubles are dumped with shortest round-trip formatting, so matrices reload bit-exactly.
ordered_json matrix_to_json(const Eigen::MatrixXd& m) {
  ordered_json data = ordered_json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  return ordered_json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

Eigen::MatrixXd matrix_from_json(const ordered_json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto& data = j.at("data");
  if (rows < 0 || cols < 0 || static_cast<Eigen::Index>(data.size()) != rows * cols) {
    fail(ErrorKind::Validation, "matrix data holds " + std::to_string(data.size()) + " values, expected " +
                                    std::to_string(rows * cols));
  }
  Eigen::MatrixXd m(rows, cols);
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[k++].get<double>();
  return m;
}

ordered_json vector_to_json(const Eigen::VectorXd& v) {
  ordered_json data = ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) data.push_back(v[i]);
  return data;
}

Eigen::VectorXd vector_from_json(const ordered_json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return v;
}

ordered_json band_to_json(const FrequencyBand& b) { return ordered_json::array({b.low, b.high}); }
FrequencyBand band_from_json(const ordered_json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

ordered_json pipeline_to_json(const PipelineConfig& p) {
  ordered_json j;
  j["eeg_target_rate"] = p.eeg_target_rate;
  j["trial_seconds"] = p.trial_seconds;
  j["baseline_seconds"] = p.baseline_seconds;
  j["window_seconds"] = p.window_seconds;
  j["eeg_bands"] = ordered_json::array({band_to_json(p.eeg_bands[0]), band_to_json(p.eeg_bands[1])});
  j["eeg_band_order"] = p.eeg_band_order;
  j["emg_notch_hz"] = p.emg_notch_hz;
  j["emg_notch_quality"] = p.emg_notch_quality;
  j["emg_band"] = band_to_json(p.emg_band);
  j["emg_band_order"] = p.emg_band_order;
  j["csp_filters"] = p.csp_filters;
  j["csp_shrinkage"] = p.csp_shrinkage;
  j["n_synergies"] = p.n_synergies;
  j["nmf_max_iter"] = p.nmf_max_iter;
  j["nmf_tol"] = p.nmf_tol;
  j["nmf_seed"] = p.nmf_seed;
  return j;
}

PipelineConfig pipeline_from_json(const ordered_json& j) {
  PipelineConfig p;
  p.eeg_target_rate = j.at("eeg_target_rate").get<double>();
  p.trial_seconds = j.at("trial_seconds").get<double>();
  p.baseline_seconds = j.at("baseline_seconds").get<double>();
  p.window_seconds = j.at("window_seconds").get<double>();
  p.eeg_bands = {band_from_json(j.at("eeg_bands").at(0)), band_from_json(j.at("eeg_bands").at(1))};
  p.eeg_band_order = j.at("eeg_band_order").get<int>();
  p.emg_notch_hz = j.at("emg_notch_hz").get<double>();
  p.emg_notch_quality = j.at("emg_notch_quality").get<double>();
  p.emg_band = band_from_json(j.at("emg_band"));
  p.emg_band_order = j.at("emg_band_order").get<int>();
  p.csp_filters = j.at("csp_filters").get<int>();
  p.csp_shrinkage = j.at("csp_shrinkage").get<double>();
  p.n_synergies = j.at("n_synergies").get<int>();
  p.nmf_max_iter = j.at("nmf_max_iter").get<int>();
  p.nmf_tol = j.at("nmf_tol").get<double>();
  p.nmf_seed = j.at("nmf_seed").get<std::uint64_t>();
  return p;
}

ordered_json csp_to_json(const CspModel& m) {
  ordered_json bands = ordered_json::array();
  for (std::size_t b = 0; b < 2; ++b) {
    bands.push_back(ordered_json{{"band", band_to_json(m.bands[b])},
                                 {"filters", matrix_to_json(m.filters_per_band[b])},
                                 {"eigenvalues", vector_to_json(m.eigenvalues_per_band[b])}});
  }
  return ordered_json{{"node", m.node_id}, {"bands", std::move(bands)}};
}

CspModel csp_from_json(const ordered_json& j) {
  CspModel m;
  m.node_id = j.at("node").get<std::string>();
  const auto& bands = j.at("bands");
  if (bands.size() != 2) fail(ErrorKind::Validation, "CSP node " + m.node_id + " must hold two bands");
  for (std::size_t b = 0; b < 2; ++b) {
    m.bands[b] = band_from_json(bands[b].at("band"));
    m.filters_per_band[b] = matrix_from_json(bands[b].at("filters"));
    m.eigenvalues_per_band[b] = vector_from_json(bands[b].at("eigenvalues"));
  }
  return m;
}

ordered_json nmf_to_json(const NmfModel& m, Hand hand) {
  ordered_json history = ordered_json::array();
  for (const double v : m.fit_stats.objective_history) history.push_back(v);
  return ordered_json{{"hand", to_string(hand)},
                      {"base", matrix_to_json(m.base)},
                      {"objective", m.fit_stats.objective},
                      {"initial_objective", m.fit_stats.initial_objective},
                      {"iterations", m.fit_stats.iterations},
                      {"objective_history", std::move(history)}};
}

NmfModel nmf_from_json(const ordered_json& j) {
  NmfModel m;
  m.base = matrix_from_json(j.at("base"));
  m.fit_stats.objective = j.at("objective").get<double>();
  m.fit_stats.initial_objective = j.at("initial_objective").get<double>();
  m.fit_stats.iterations = j.at("iterations").get<int>();
  m.fit_stats.objective_history = j.at("objective_history").get<std::vector<double>>();
  if ((m.base.array() < 0.0).any()) fail(ErrorKind::Validation, "NMF base has negative entries");
  return m;
}

ordered_json kde_to_json(const KdeModel& m) {
  return ordered_json{{"state", m.state_id()},
                      {"points", matrix_to_json(m.points())},
                      {"bandwidths", vector_to_json(m.bandwidths())}};
}

KdeModel kde_from_json(const ordered_json& j) {
  return KdeModel(matrix_from_json(j.at("points")), vector_from_json(j.at("bandwidths")),
                  j.at("state").get<std::string>());
}

ordered_json prior_to_json(const ContextPrior& prior) {
  ordered_json levels = ordered_json::array();
  for (int level = 0; level < kNumLevels; ++level) {
    ordered_json rows = ordered_json::array();
    for (const auto& row : prior.rows(level)) {
      ordered_json children = ordered_json::array();
      for (const State s : row.children) children.push_back(to_string(s));
      rows.push_back(ordered_json{{"parent", row.parent ? ordered_json(to_string(*row.parent)) : ordered_json(nullptr)},
                                  {"children", std::move(children)},
                                  {"probs", row.probs}});
    }
    levels.push_back(std::move(rows));
  }
  return ordered_json{{"levels", std::move(levels)}};
}

ContextPrior prior_from_json(const ordered_json& j) {
  ContextPrior prior = ContextPrior::uniform();
  const auto& levels = j.at("levels");
  if (levels.size() != kNumLevels) fail(ErrorKind::Validation, "prior must list four levels");
  for (int level = 0; level < kNumLevels; ++level) {
    for (const auto& row : levels[static_cast<std::size_t>(level)]) {
      std::optional<State> parent;
      if (!row.at("parent").is_null()) parent = parse_state(row.at("parent").get<std::string>());
      prior.set_row(level, parent, row.at("probs").get<std::vector<double>>());
    }
  }
  return prior;
}

std::string file_key(const std::string& key) {
  std::string out = key;
  for (char& c : out)
    if (c == '/') c = '_';
  return out + ".json";
}

void write_json(const fs::path& path, const ordered_json& j) { write_file_atomic(path, j.dump(1) + "\n"); }

ordered_json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Validation, "model bundle is missing " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return ordered_json::parse(ss.str());
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::Parse, path.string() + ": " + e.what());
  }
}

template <typename F>
auto parse_component(const fs::path& path, F&& from_json) {
  const ordered_json j = read_json(path);
  try {
    return from_json(j);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Parse, path.string() + ": " + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Validation) fail(ErrorKind::Validation, path.string() + ": " + e.detail());
    throw;
  }
}

}  // namespace

void save_model_bundle(const ModelBundle& bundle, const fs::path& dir) {
  fs::create_directories(dir);
  const auto& model = bundle.model;
  ordered_json components;

  ordered_json csp = ordered_json::array();
  for (const auto& [key, m] : model.csp) {
    const std::string file = "csp/" + file_key(key);
    write_json(dir / file, csp_to_json(m));
    csp.push_back(ordered_json{{"node", key}, {"file", file}});
  }
  components["csp"] = std::move(csp);

  ordered_json nmf = ordered_json::array();
  for (const Hand h : {Hand::Right, Hand::Left}) {
    const auto& m = model.nmf[static_cast<std::size_t>(h)];
    if (!m) continue;
    const std::string file = "nmf/" + std::string(to_string(h)) + ".json";
    write_json(dir / file, nmf_to_json(*m, h));
    nmf.push_back(ordered_json{{"hand", to_string(h)}, {"file", file}});
  }
  components["nmf"] = std::move(nmf);

  ordered_json kde = ordered_json::array();
  for (const auto& [key, m] : model.kde) {
    const std::string file = "kde/" + file_key(key);
    write_json(dir / file, kde_to_json(m));
    kde.push_back(ordered_json{{"key", key}, {"file", file}});
  }
  components["kde"] = std::move(kde);

  write_json(dir / "prior.json", prior_to_json(model.default_prior));
  components["prior"] = "prior.json";

  ordered_json meta = ordered_json::object();
  for (const auto& [k, v] : bundle.metadata) meta[k] = v;

  ordered_json top;
  top["format"] = "hbmi-model";
  top["version"] = kBundleVersion;
  top["mode"] = ordered_json{{"name", to_string(bundle.mode.mode)}, {"emg_hand", to_string(bundle.mode.emg_hand)}};
  top["pipeline"] = pipeline_to_json(bundle.pipeline);
  top["metadata"] = std::move(meta);
  top["components"] = std::move(components);
  // Written last so a readable bundle.json implies complete component files.
  write_json(dir / "bundle.json", top);
}

void save_model_bundle(const HierarchyModel& model, const fs::path& dir) {
  save_model_bundle(ModelBundle{model, PipelineConfig{}, ModeSpec{}, {}}, dir);
}

ModelBundle load_model_bundle_full(const fs::path& dir) {
  const fs::path top_path = dir / "bundle.json";
  const ordered_json top = read_json(top_path);
  ModelBundle bundle;
  try {
    if (top.at("format").get<std::string>() != "hbmi-model") fail(ErrorKind::Validation, top_path.string() + ": not a model bundle");
    const int version = top.at("version").get<int>();
    if (version > kBundleVersion) {
      fail(ErrorKind::Validation, top_path.string() + ": bundle version " + std::to_string(version) +
                                      " is newer than supported version " + std::to_string(kBundleVersion));
    }
    bundle.mode.mode = parse_mode(top.at("mode").at("name").get<std::string>());
    bundle.mode.emg_hand = parse_hand(top.at("mode").at("emg_hand").get<std::string>());
    bundle.pipeline = pipeline_from_json(top.at("pipeline"));
    for (const auto& [k, v] : top.at("metadata").items()) bundle.metadata[k] = v.get<std::string>();

    const auto& comps = top.at("components");
    auto& model = bundle.model;
  for (const auto& c : comps.at("csp")) {
    model.csp.emplace(c.at("node").get<std::string>(), parse_component(dir / c.at("file").get<std::string>(), csp_from_json));
  }
  for (const auto& c : comps.at("nmf")) {
    const Hand h = parse_hand(c.at("hand").get<std::string>());
    model.nmf[static_cast<std::size_t>(h)] = parse_component(dir / c.at("file").get<std::string>(), nmf_from_json);
  }
  for (const auto& c : comps.at("kde")) {
    model.kde.emplace(c.at("key").get<std::string>(), parse_component(dir / c.at("file").get<std::string>(), kde_from_json));
  }
  model.default_prior = parse_component(dir / comps.at("prior").get<std::string>(), prior_from_json);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Parse, top_path.string() + ": " + e.what());
  }
  return bundle;
}

HierarchyModel load_model_bundle(const fs::path& dir) { return load_model_bundle_full(dir).model; }

}  // namespace hbmi
