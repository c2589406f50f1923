#pragma once

#include "hbmi/decoder.hpp"
#include "hbmi/spatial_filters.hpp"
#include "hbmi/trial.hpp"

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <set>
#include <span>
#include <unordered_set>
#include <vector>

namespace hbmi {

// Processing constants. Defaults follow the published protocol.
struct PipelineConfig {
  double eeg_target_rate = 300.0;
  double trial_seconds = 5.0;
  double baseline_seconds = 1.0;
  double window_seconds = 0.25;
  std::array<FrequencyBand, 2> eeg_bands = kMotorBands;
  int eeg_band_order = 4;
  double emg_notch_hz = 60.0;
  double emg_notch_quality = 30.0;
  FrequencyBand emg_band{20.0, 500.0};
  int emg_band_order = 4;
  int csp_filters = kCspFiltersPerBand;
  double csp_shrinkage = kDefaultShrinkage;
  int n_synergies = kDefaultSynergies;
  int nmf_max_iter = 500;
  double nmf_tol = 1e-6;
  std::uint64_t nmf_seed = 1;
};

// Everything the decoder needs from one 250 ms window.
struct PreprocessedWindow {
  BandCovariances eeg;   // covariance of the alpha- and beta-filtered EEG window
  Eigen::VectorXd rms;   // EMG RMS per channel
  std::uint64_t hash = 0;  // content hash, used for leakage audits
};

struct PreprocessedTrial {
  TrialInfo info;
  std::vector<PreprocessedWindow> windows;
};

// EEG: downsample, band-filter the whole trial, baseline-correct, window.
// EMG: notch + bandpass the whole trial, take the post-baseline segment
// without correction, window, RMS.
PreprocessedTrial preprocess_trial(const TrialRecording& trial, const PipelineConfig& config);

// Which sessions, trials and window hashes went into one fitting call.
struct FitAudit {
  std::set<int> sessions;
  std::size_t n_trials = 0;
  std::unordered_set<std::uint64_t> window_hashes;
};

// Fits CSP, NMF and KDE models for the given mode on the training trials.
// Emg5 uses only trials of the mode's hand.
HierarchyModel fit_hierarchy(std::span<const PreprocessedTrial* const> train, const ModeSpec& mode,
                             const PipelineConfig& config, FitAudit* audit = nullptr);

// Features a mode needs for one window.
WindowFeatures window_features(const HierarchyModel& model, const PreprocessedWindow& window, const ModeSpec& mode);

// Hands whose likelihoods a mode evaluates.
std::vector<Hand> mode_hands(const ModeSpec& mode);

}  // namespace hbmi
