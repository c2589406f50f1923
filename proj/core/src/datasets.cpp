#include "hbmi/datasets.hpp"

#include "hbmi/errors.hpp"
#include "parallel.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <system_error>

namespace hbmi {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

[[noreturn]] void fail(ErrorKind kind, const std::string& msg) { throw Error(kind, "datasets", msg); }

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ordered_json synth_to_json(const SynthConfig& c) {
  ordered_json j;
  j["seed"] = c.seed;
  j["separability_eeg"] = c.separability_eeg;
  j["separability_emg"] = c.separability_emg;
  j["noise_floor"] = c.noise_floor;
  j["session_drift"] = c.session_drift;
  j["n_sessions"] = c.n_sessions;
  j["n_blocks"] = c.n_blocks;
  j["n_trials_per_block"] = c.n_trials_per_block;
  j["rate"] = c.rate;
  j["trial_seconds"] = c.trial_seconds;
  j["eeg_channels"] = c.eeg_channels;
  j["emg_channels"] = c.emg_channels;
  return j;
}

SynthConfig synth_from_json(const ordered_json& j) {
  SynthConfig c;
  c.seed = j.at("seed").get<std::uint64_t>();
  c.separability_eeg = j.at("separability_eeg").get<double>();
  c.separability_emg = j.at("separability_emg").get<double>();
  c.noise_floor = j.at("noise_floor").get<double>();
  c.session_drift = j.at("session_drift").get<double>();
  c.n_sessions = j.at("n_sessions").get<int>();
  c.n_blocks = j.at("n_blocks").get<int>();
  c.n_trials_per_block = j.at("n_trials_per_block").get<int>();
  c.rate = j.at("rate").get<double>();
  c.trial_seconds = j.at("trial_seconds").get<double>();
  c.eeg_channels = j.at("eeg_channels").get<int>();
  c.emg_channels = j.at("emg_channels").get<int>();
  return c;
}

ordered_json manifest_to_json(const DatasetManifest& m) {
  ordered_json j;
  j["format"] = "hbmi-dataset";
  j["version"] = 1;
  j["subject_id"] = m.subject_id;
  j["rates"] = {{"eeg", m.eeg_rate}, {"emg", m.emg_rate}};
  j["trial_seconds"] = m.trial_seconds;
  j["channels"] = {{"eeg", m.eeg_channels}, {"emg", m.emg_channels}};
  if (m.synth) j["synth"] = synth_to_json(*m.synth);

  ordered_json sessions = ordered_json::array();
  for (const int s : m.sessions()) {
    ordered_json blocks = ordered_json::array();
    std::map<int, ordered_json> by_block;
    for (const auto i : m.trials_in_session(s)) {
      const auto& t = m.trials[i];
      by_block[t.info.block].push_back(ordered_json{{"trial", t.info.trial_index},
                                                    {"label", to_string(t.info.label)},
                                                    {"eeg", t.eeg_file},
                                                    {"emg", t.emg_file}});
    }
    for (auto& [b, trials] : by_block) blocks.push_back(ordered_json{{"block", b}, {"trials", std::move(trials)}});
    sessions.push_back(ordered_json{{"session", s}, {"blocks", std::move(blocks)}});
  }
  j["sessions"] = std::move(sessions);
  return j;
}

DatasetManifest manifest_from_json(const ordered_json& j) {
  DatasetManifest m;
  m.subject_id = j.at("subject_id").get<std::string>();
  m.eeg_rate = j.at("rates").at("eeg").get<double>();
  m.emg_rate = j.at("rates").at("emg").get<double>();
  m.trial_seconds = j.at("trial_seconds").get<double>();
  m.eeg_channels = j.at("channels").at("eeg").get<std::vector<std::string>>();
  m.emg_channels = j.at("channels").at("emg").get<std::vector<std::string>>();
  if (j.contains("synth")) m.synth = synth_from_json(j.at("synth"));
  for (const auto& s : j.at("sessions")) {
    const int session = s.at("session").get<int>();
    for (const auto& b : s.at("blocks")) {
      const int block = b.at("block").get<int>();
      for (const auto& t : b.at("trials")) {
        TrialEntry e;
        e.info = TrialInfo{parse_label(t.at("label").get<std::string>()), session, block, t.at("trial").get<int>()};
        e.eeg_file = t.at("eeg").get<std::string>();
        e.emg_file = t.at("emg").get<std::string>();
        m.trials.push_back(std::move(e));
      }
    }
  }
  return m;
}

void check_shape(const Eigen::MatrixXd& samples, std::size_t channels, double rate, double seconds,
                 const std::string& file) {
  const auto expected = static_cast<Eigen::Index>(std::llround(rate * seconds));
  if (samples.rows() != static_cast<Eigen::Index>(channels)) {
    fail(ErrorKind::Validation, file + ": expected " + std::to_string(channels) + " channel rows, found " +
                                    std::to_string(samples.rows()));
  }
  if (samples.cols() != expected) {
    std::ostringstream msg;
    msg << file << ": expected " << expected << " samples at " << rate << " Hz (" << seconds << " s) per channel, found "
        << samples.cols();
    fail(ErrorKind::Validation, msg.str());
  }
}

}  // namespace

void TrialRecording::validate(double seconds) const {
  for (const Recording* r : {&eeg, &emg}) {
    hbmi::validate(*r);
    const double expected = seconds * r->rate;
    if (std::abs(static_cast<double>(r->length()) - expected) > 1.0 + 1e-9) {
      throw Error(ErrorKind::Validation, "datasets",
                  std::string(r == &eeg ? "EEG" : "EMG") + " covers " + std::to_string(r->length()) +
                      " samples, expected " + std::to_string(static_cast<long long>(std::llround(expected))));
    }
  }
}

std::vector<int> DatasetManifest::sessions() const {
  std::set<int> s;
  for (const auto& t : trials) s.insert(t.info.session);
  return {s.begin(), s.end()};
}

std::vector<std::size_t> DatasetManifest::trials_in_session(int session) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < trials.size(); ++i)
    if (trials[i].info.session == session) out.push_back(i);
  return out;
}

std::string trial_file_name(const TrialInfo& info, Modality modality) {
  return "trials/s" + std::to_string(info.session) + "_b" + std::to_string(info.block) + "_t" +
         std::to_string(info.trial_index) + (modality == Modality::EEG ? "_eeg.csv" : "_emg.csv");
}

std::string format_trial_csv(const Eigen::MatrixXd& samples) {
  std::string out;
  out.reserve(static_cast<std::size_t>(samples.size()) * 8);
  char buf[64];
  for (Eigen::Index r = 0; r < samples.rows(); ++r) {
    for (Eigen::Index c = 0; c < samples.cols(); ++c) {
      if (c > 0) out.push_back(',');
      const double v = samples(r, c) + 0.0;
      const auto res = std::to_chars(buf, buf + sizeof buf, v);
      out.append(buf, res.ptr);
    }
    out.push_back('\n');
  }
  return out;
}

Eigen::MatrixXd read_trial_csv(const fs::path& file) {
  const std::string text = read_file(file);
  std::vector<std::vector<double>> rows;
  std::size_t pos = 0;
  int line = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    ++line;
    std::string_view row(text.data() + pos, end - pos);
    if (!row.empty() && row.back() == '\r') row.remove_suffix(1);
    pos = end + 1;
    if (row.empty()) continue;
    std::vector<double> values;
    const char* p = row.data();
    const char* stop = row.data() + row.size();
    while (p <= stop) {
      double v = 0.0;
      const auto res = std::from_chars(p, stop, v);
      if (res.ec != std::errc() || (res.ptr != stop && *res.ptr != ',')) {
        fail(ErrorKind::Parse, file.string() + ":" + std::to_string(line) + ": malformed number at column " +
                                   std::to_string(values.size() + 1));
      }
      values.push_back(v);
      p = res.ptr + 1;
    }
    if (!rows.empty() && values.size() != rows.front().size()) {
      fail(ErrorKind::Validation, file.string() + ":" + std::to_string(line) + ": row has " +
                                      std::to_string(values.size()) + " samples, first row has " +
                                      std::to_string(rows.front().size()));
    }
    rows.push_back(std::move(values));
  }
  if (rows.empty()) fail(ErrorKind::Parse, file.string() + ": empty trial file");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  return m;
}

void write_file_atomic(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) fail(ErrorKind::Io, "short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) fail(ErrorKind::Io, "cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

void write_dataset(const TrialSource& source, const fs::path& dir) {
  const auto& m = source.manifest();
  fs::create_directories(dir / "trials");
  for (std::size_t i = 0; i < source.size(); ++i) {
    const TrialRecording trial = source.load(i);
    write_file_atomic(dir / m.trials[i].eeg_file, format_trial_csv(trial.eeg.samples));
    write_file_atomic(dir / m.trials[i].emg_file, format_trial_csv(trial.emg.samples));
  }
  write_file_atomic(dir / "manifest.json", manifest_to_json(m).dump(2) + "\n");
}

DiskDataset::DiskDataset(fs::path root) : root_(std::move(root)) {
  const fs::path manifest_path = root_ / "manifest.json";
  if (!fs::exists(manifest_path)) fail(ErrorKind::Validation, "dataset has no manifest: " + manifest_path.string());
  try {
    manifest_ = manifest_from_json(ordered_json::parse(read_file(manifest_path)));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Parse, manifest_path.string() + ": " + e.what());
  }
  if (manifest_.trials.empty()) fail(ErrorKind::Validation, manifest_path.string() + " lists no trials");
  for (const auto& t : manifest_.trials) {
    for (const auto* f : {&t.eeg_file, &t.emg_file}) {
      if (!fs::exists(root_ / *f)) fail(ErrorKind::Validation, "manifest references missing file " + *f);
    }
  }
}

TrialRecording DiskDataset::load(std::size_t index) const {
  if (index >= manifest_.trials.size()) fail(ErrorKind::InvalidArgument, "trial index out of range");
  const auto& e = manifest_.trials[index];
  TrialRecording t;
  t.info = e.info;
  t.eeg = Recording{read_trial_csv(root_ / e.eeg_file), manifest_.eeg_rate, Modality::EEG};
  t.emg = Recording{read_trial_csv(root_ / e.emg_file), manifest_.emg_rate, Modality::EMG};
  check_shape(t.eeg.samples, manifest_.eeg_channels.size(), manifest_.eeg_rate, manifest_.trial_seconds, e.eeg_file);
  check_shape(t.emg.samples, manifest_.emg_channels.size(), manifest_.emg_rate, manifest_.trial_seconds, e.emg_file);
  return t;
}

DiskDataset load_dataset(const fs::path& dir) { return DiskDataset(dir); }

std::vector<PreprocessedTrial> preprocess_dataset(const TrialSource& source, const PipelineConfig& config,
                                                  const std::vector<int>& sessions, int jobs) {
  const std::set<int> wanted(sessions.begin(), sessions.end());
  std::vector<std::size_t> indices;
  for (std::size_t i = 0; i < source.size(); ++i) {
    if (wanted.empty() || wanted.count(source.manifest().trials[i].info.session)) indices.push_back(i);
  }
  std::vector<PreprocessedTrial> out(indices.size());
  detail::parallel_for(indices.size(), jobs, [&](std::size_t k) { out[k] = preprocess_trial(source.load(indices[k]), config); });
  return out;
}

}  // namespace hbmi
