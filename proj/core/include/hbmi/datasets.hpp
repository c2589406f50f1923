#pragma once

#include "hbmi/decoder.hpp"
#include "hbmi/pipeline.hpp"
#include "hbmi/trial.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hbmi {

// Parameters of the synthetic EEG/EMG generator that stands in for recorded subjects.
struct SynthConfig {
  std::uint64_t seed = 7;
  double separability_eeg = 2.0;  // scales class-dependent log-variance of band-limited EEG sources
  double separability_emg = 2.0;  // scales divergence between per-gesture synergy templates
  double noise_floor = 1.0;       // additive sensor noise level (> 0)
  double session_drift = 0.0;     // magnitude of the per-session channel rotation
  int n_sessions = 5;
  int n_blocks = 8;
  int n_trials_per_block = 50;
  double rate = 1200.0;
  double trial_seconds = 5.0;
  int eeg_channels = 19;
  int emg_channels = 6;

  void validate() const;
};

struct TrialEntry {
  TrialInfo info;
  std::string eeg_file;  // relative to the dataset root
  std::string emg_file;
};

struct DatasetManifest {
  std::string subject_id;
  double eeg_rate = 1200.0;
  double emg_rate = 1200.0;
  double trial_seconds = 5.0;
  std::vector<std::string> eeg_channels;
  std::vector<std::string> emg_channels;
  std::vector<TrialEntry> trials;
  std::optional<SynthConfig> synth;

  std::vector<int> sessions() const;
  std::vector<std::size_t> trials_in_session(int session) const;
};

// Trial file names inside a dataset directory.
std::string trial_file_name(const TrialInfo& info, Modality modality);

// Random-access trial storage: generated on demand or read from disk.
class TrialSource {
public:
  virtual ~TrialSource() = default;
  virtual const DatasetManifest& manifest() const = 0;
  virtual TrialRecording load(std::size_t index) const = 0;
  std::size_t size() const { return manifest().trials.size(); }
};

// Layout (labels, blocks, file names) of a synthetic dataset without signals.
// Blocks alternate hands starting with the right hand; each block holds every
// gesture equally often in shuffled order.
DatasetManifest plan_synthetic(const SynthConfig& config);

// Deterministic in-memory generator; trial i depends only on (seed, session, block, trial).
class SyntheticDataset final : public TrialSource {
public:
  explicit SyntheticDataset(const SynthConfig& config);

  const DatasetManifest& manifest() const override { return manifest_; }
  TrialRecording load(std::size_t index) const override;
  const SynthConfig& config() const { return config_; }

private:
  SynthConfig config_;
  DatasetManifest manifest_;
  Eigen::MatrixXd eeg_mixing_;                  // channels x sources
  Eigen::MatrixXd emg_base_;                    // channels x 5
  std::array<Eigen::VectorXd, kNumLabels> emg_templates_;
  std::vector<Eigen::MatrixXd> eeg_rotation_;   // per session
  std::vector<Eigen::MatrixXd> emg_rotation_;
  std::array<SosFilter, 2> band_filters_;       // source generators per motor band
  std::array<double, 2> band_gain_{};
};

SyntheticDataset generate_synthetic(const SynthConfig& config);

// Writes manifest.json and trials/ for every trial of `source`.
void write_dataset(const TrialSource& source, const std::filesystem::path& dir);

// Generates and writes in one step; returns the manifest written.
DatasetManifest generate_synthetic(const SynthConfig& config, const std::filesystem::path& dir);

// Reads trials lazily from a dataset directory. Construction validates the
// manifest and that every referenced file exists; shapes are checked on load.
class DiskDataset final : public TrialSource {
public:
  explicit DiskDataset(std::filesystem::path root);

  const DatasetManifest& manifest() const override { return manifest_; }
  TrialRecording load(std::size_t index) const override;
  const std::filesystem::path& root() const { return root_; }

private:
  std::filesystem::path root_;
  DatasetManifest manifest_;
};

DiskDataset load_dataset(const std::filesystem::path& dir);

// Parses one trial CSV (rows = channels). Errors cite file and line.
Eigen::MatrixXd read_trial_csv(const std::filesystem::path& file);
std::string format_trial_csv(const Eigen::MatrixXd& samples);

// Preprocesses every trial of the selected sessions (all when empty).
std::vector<PreprocessedTrial> preprocess_dataset(const TrialSource& source, const PipelineConfig& config,
                                                  const std::vector<int>& sessions = {}, int jobs = 1);

// Trained decoder plus the settings needed to reuse it.
struct ModelBundle {
  HierarchyModel model;
  PipelineConfig pipeline;
  ModeSpec mode;
  std::map<std::string, std::string> metadata;
};

inline constexpr int kBundleVersion = 1;

void save_model_bundle(const ModelBundle& bundle, const std::filesystem::path& dir);
void save_model_bundle(const HierarchyModel& model, const std::filesystem::path& dir);
ModelBundle load_model_bundle_full(const std::filesystem::path& dir);
HierarchyModel load_model_bundle(const std::filesystem::path& dir);

// Writes `content` to a sibling temp file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace hbmi
