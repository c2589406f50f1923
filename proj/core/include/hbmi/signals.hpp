#pragma once

#include <Eigen/Core>

#include <array>
#include <complex>
#include <cstddef>
#include <vector>

namespace hbmi {

enum class Modality { EEG, EMG };

// Multichannel time series. Rows are channels, columns are samples (EEG in uV, EMG in mV).
struct Recording {
  Eigen::MatrixXd samples;
  double rate = 0.0;
  Modality modality = Modality::EEG;

  Eigen::Index channels() const { return samples.rows(); }
  Eigen::Index length() const { return samples.cols(); }
  double duration() const { return rate > 0.0 ? static_cast<double>(length()) / rate : 0.0; }
};

// Checks rate > 0, at least one channel, and finite samples. Throws Error otherwise.
void validate(const Recording& rec);

struct Window {
  Eigen::MatrixXd samples;  // channels x window length
  int trial_index = 0;
  int ordinal = 0;          // position of the window inside its trial
};

struct FilterSpec {
  enum class Kind { Bandpass, Lowpass, Notch };

  Kind kind = Kind::Bandpass;
  int order = 4;       // Butterworth prototype order (ignored for notch)
  double low = 0.0;    // bandpass low edge, lowpass cutoff, or notch center (Hz)
  double high = 0.0;   // bandpass high edge (Hz)
  double quality = 30.0;  // notch quality factor

  static FilterSpec bandpass(int order, double low_hz, double high_hz);
  static FilterSpec lowpass(int order, double cutoff_hz);
  static FilterSpec notch(double center_hz, double quality = 30.0);

  // Throws Error(InvalidFilter) unless the spec is realizable at `rate`.
  void validate(double rate) const;
};

// Second-order sections, each row {b0, b1, b2, a0, a1, a2} with a0 == 1.
struct SosFilter {
  std::vector<std::array<double, 6>> sections;
};

SosFilter design_filter(const FilterSpec& spec, double rate);

// Complex response of the cascade at `freq_hz` for a single forward pass.
std::complex<double> frequency_response(const SosFilter& sos, double freq_hz, double rate);

// Causal single pass with zero initial state, in place on one row.
void sosfilt(const SosFilter& sos, Eigen::Ref<Eigen::RowVectorXd> signal);

// Zero-phase forward-backward filtering of one row, odd-extension padded with
// steady-state initial conditions.
Eigen::RowVectorXd sosfiltfilt(const SosFilter& sos, const Eigen::Ref<const Eigen::RowVectorXd>& signal);

Recording apply_filter(const Recording& rec, const FilterSpec& spec);

// Order-8 Butterworth lowpass at 0.4 x target rate, then integer decimation.
Recording downsample(const Recording& rec, double target_rate);

// Returns the [baseline_s, total_s) segment minus the per-channel mean of [0, baseline_s).
Recording baseline_correct(const Recording& trial, double baseline_s = 1.0, double total_s = 5.0);

// Takes [start_s, end_s) without any baseline subtraction.
Recording segment(const Recording& rec, double start_s, double end_s);

struct WindowSplit {
  std::vector<Window> windows;
  Eigen::Index dropped_samples = 0;  // trailing partial window
};

WindowSplit split_windows(const Recording& rec, double window_s = 0.25, int trial_index = 0);

Eigen::VectorXd window_rms(const Window& w);

}  // namespace hbmi
