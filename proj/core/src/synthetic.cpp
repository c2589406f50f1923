#include "hbmi/datasets.hpp"
#include "hbmi/errors.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace hbmi {

namespace {

[[noreturn]] void fail(ErrorKind kind, const std::string& msg) { throw Error(kind, "datasets", msg); }

// Stream tags keep the subject, session and trial generators independent.
enum StreamTag : std::uint32_t { kSubject = 1, kSession = 2, kTrial = 3, kBlockOrder = 4 };

std::mt19937_64 stream(std::uint64_t seed, StreamTag tag, int a = 0, int b = 0, int c = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(tag), static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b),
                    static_cast<std::uint32_t>(c)};
  return std::mt19937_64(seq);
}

constexpr int kEegSources = 8;
constexpr double kSourceAmplitude = 10.0;   // microvolts, in-band
constexpr double kEegNoiseAmplitude = 20.0; // microvolts per unit noise_floor, broadband
constexpr double kEmgAmplitude = 0.1;        // millivolts
constexpr double kEmgNoiseAmplitude = 0.002;
constexpr double kLogVarJitter = 0.25;
constexpr double kActivationJitter = 0.1;
constexpr double kWarmupSeconds = 1.0;
// Samples are stored as decimal text; rounding to these resolutions keeps files short and exact.
constexpr double kEegScale = 1e3;   // 0.001 uV
constexpr double kEmgScale = 1e5;   // 0.00001 mV

// Class effect on source log-variance: {alpha, beta} x {hand, grasp, hand*grasp} coefficients.
struct SourceEffect {
  std::array<double, 3> alpha;
  std::array<double, 3> beta;
};
constexpr std::array<SourceEffect, kEegSources> kSourceEffects{{
    {{0.5, 0.0, 0.0}, {0.25, 0.0, 0.0}},
    {{-0.5, 0.0, 0.0}, {-0.25, 0.0, 0.0}},
    {{0.0, 0.25, 0.0}, {0.0, 0.5, 0.0}},
    {{0.0, -0.25, 0.0}, {0.0, -0.5, 0.0}},
    {{0.0, 0.0, 0.5}, {0.0, 0.0, 0.0}},
    {{0.0, 0.0, 0.0}, {0.0, 0.0, -0.5}},
    {{0.0, 0.0, 0.0}, {0.0, 0.0, 0.0}},
    {{0.0, 0.0, 0.0}, {0.0, 0.0, 0.0}},
}};

const std::vector<std::string> kEegNames{"F3", "F4", "FC5", "FC3", "FCz", "FC4", "FC6", "C5", "C3", "C1",
                                         "Cz", "C2", "C4", "C6", "CP5", "CP3", "CPz", "CP4", "CP6"};
const std::vector<std::string> kEmgNames{"ED", "FCU", "FDS", "ECU", "BR", "PT"};

std::vector<std::string> channel_names(const std::vector<std::string>& standard, int count, const char* prefix) {
  if (count == static_cast<int>(standard.size())) return standard;
  std::vector<std::string> names;
  for (int i = 0; i < count; ++i) names.push_back(std::string(prefix) + std::to_string(i + 1));
  return names;
}

// Orthogonal matrix near identity via the Cayley transform of a random skew matrix.
Eigen::MatrixXd random_rotation(std::mt19937_64& rng, int n, double magnitude) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd g(n, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) g(i, j) = normal(rng);
  const Eigen::MatrixXd skew = magnitude * (g - g.transpose()) / std::sqrt(2.0 * n);
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
  return (id - 0.5 * skew).lu().solve(id + 0.5 * skew);
}

double quantize(double x, double scale) { return std::round(x * scale) / scale + 0.0; }

}  // namespace

void SynthConfig::validate() const {
  auto bad = [](const std::string& msg) { fail(ErrorKind::InvalidArgument, msg); };
  if (n_sessions < 1 || n_blocks < 1 || n_trials_per_block < 1) bad("synthetic dataset needs at least one trial");
  if (separability_eeg < 0.0 || separability_emg < 0.0) bad("separability must be non-negative");
  if (!(noise_floor > 0.0)) bad("noise_floor must be positive");
  if (session_drift < 0.0) bad("session_drift must be non-negative");
  if (!(rate > 0.0) || !(trial_seconds > 0.0)) bad("rate and trial duration must be positive");
  if (eeg_channels < 1 || emg_channels < 1) bad("channel counts must be positive");
}

DatasetManifest plan_synthetic(const SynthConfig& config) {
  config.validate();
  DatasetManifest m;
  m.subject_id = "synthetic-" + std::to_string(config.seed);
  m.eeg_rate = config.rate;
  m.emg_rate = config.rate;
  m.trial_seconds = config.trial_seconds;
  m.eeg_channels = channel_names(kEegNames, config.eeg_channels, "EEG");
  m.emg_channels = channel_names(kEmgNames, config.emg_channels, "EMG");
  m.synth = config;
  for (int s = 1; s <= config.n_sessions; ++s) {
    for (int b = 1; b <= config.n_blocks; ++b) {
      const Hand hand = (b % 2 == 1) ? Hand::Right : Hand::Left;
      std::vector<int> gestures(static_cast<std::size_t>(config.n_trials_per_block));
      for (std::size_t i = 0; i < gestures.size(); ++i) gestures[i] = static_cast<int>(i % kNumGestures);
      auto rng = stream(config.seed, kBlockOrder, s, b);
      std::shuffle(gestures.begin(), gestures.end(), rng);
      for (int t = 0; t < config.n_trials_per_block; ++t) {
        TrialEntry e;
        e.info = TrialInfo{GestureLabel{hand, static_cast<Gesture>(gestures[static_cast<std::size_t>(t)])}, s, b, t};
        e.eeg_file = trial_file_name(e.info, Modality::EEG);
        e.emg_file = trial_file_name(e.info, Modality::EMG);
        m.trials.push_back(std::move(e));
      }
    }
  }
  return m;
}

SyntheticDataset::SyntheticDataset(const SynthConfig& config) : config_(config), manifest_(plan_synthetic(config)) {
  auto rng = stream(config.seed, kSubject);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.2, 1.0);

  eeg_mixing_.resize(config.eeg_channels, kEegSources);
  for (int j = 0; j < kEegSources; ++j)
    for (int i = 0; i < config.eeg_channels; ++i) eeg_mixing_(i, j) = normal(rng) / std::sqrt(2.0);

  emg_base_.resize(config.emg_channels, kNumGestures);
  for (int j = 0; j < kNumGestures; ++j)
    for (int i = 0; i < config.emg_channels; ++i) emg_base_(i, j) = uniform(rng);

  // Right-hand gestures each load one synergy; left-hand gestures load two.
  for (const auto& label : all_labels()) {
    Eigen::VectorXd u = Eigen::VectorXd::Zero(kNumGestures);
    const int g = static_cast<int>(label.gesture);
    if (label.hand == Hand::Right) {
      u[g] = 1.0;
    } else {
      u[g] = 0.6;
      u[(g + 2) % kNumGestures] = 0.6;
    }
    emg_templates_[static_cast<std::size_t>(label.index())] =
        Eigen::VectorXd::Constant(kNumGestures, 0.5) + 0.5 * config.separability_emg * u;
  }

  for (std::size_t b = 0; b < 2; ++b) {
    band_filters_[b] = design_filter(FilterSpec::bandpass(4, kMotorBands[b].low, kMotorBands[b].high), config.rate);
    // Unit-variance normalization from the impulse-response energy.
    Eigen::RowVectorXd impulse = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(8 * config.rate));
    impulse[0] = 1.0;
    sosfilt(band_filters_[b], impulse);
    band_gain_[b] = 1.0 / impulse.norm();
  }

  for (int s = 1; s <= config.n_sessions; ++s) {
    auto srng = stream(config.seed, kSession, s);
    eeg_rotation_.push_back(random_rotation(srng, config.eeg_channels, config.session_drift));
    emg_rotation_.push_back(random_rotation(srng, config.emg_channels, config.session_drift));
  }
}

TrialRecording SyntheticDataset::load(std::size_t index) const {
  if (index >= manifest_.trials.size()) fail(ErrorKind::InvalidArgument, "trial index out of range");
  const TrialInfo& info = manifest_.trials[index].info;
  const auto path = label_to_path(info.label);
  const double rate = config_.rate;
  const auto n = static_cast<Eigen::Index>(std::llround(config_.trial_seconds * rate));
  const auto warm = static_cast<Eigen::Index>(std::llround(kWarmupSeconds * rate));

  auto rng = stream(config_.seed, kTrial, info.session, info.block, info.trial_index);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto white = [&](Eigen::Index len) {
    Eigen::RowVectorXd x(len);
    for (Eigen::Index i = 0; i < len; ++i) x[i] = normal(rng);
    return x;
  };

  // EEG: band-limited sources with class-dependent variance, mixed to channels.
  const double hand = path.s0 == Hand::Right ? 1.0 : -1.0;
  const double grasp = path.s1 == Movement::Grasp ? 1.0 : -1.0;
  const std::array<double, 3> design{hand, grasp, hand * grasp};
  Eigen::MatrixXd sources = Eigen::MatrixXd::Zero(kEegSources, n);
  for (int k = 0; k < kEegSources; ++k) {
    const auto& effect = kSourceEffects[static_cast<std::size_t>(k)];
    for (std::size_t b = 0; b < 2; ++b) {
      const auto& coef = b == 0 ? effect.alpha : effect.beta;
      double log_var = kLogVarJitter * normal(rng);
      for (std::size_t j = 0; j < 3; ++j) log_var += config_.separability_eeg * coef[j] * design[j];
      Eigen::RowVectorXd x = white(n + warm);
      sosfilt(band_filters_[b], x);
      sources.row(k) += kSourceAmplitude * std::exp(0.5 * log_var) * band_gain_[b] * x.tail(n);
    }
  }
  Eigen::MatrixXd eeg = eeg_mixing_ * sources;
  for (Eigen::Index c = 0; c < eeg.rows(); ++c) eeg.row(c) += kEegNoiseAmplitude * config_.noise_floor * white(n);
  eeg = eeg_rotation_[static_cast<std::size_t>(info.session - 1)] * eeg;

  // EMG: white carriers with per-channel envelopes set by synergy activations.
  Eigen::VectorXd activation = emg_templates_[static_cast<std::size_t>(info.label.index())];
  for (Eigen::Index k = 0; k < activation.size(); ++k) activation[k] *= std::exp(kActivationJitter * normal(rng));
  const Eigen::VectorXd envelope = emg_base_ * activation;
  Eigen::MatrixXd emg(config_.emg_channels, n);
  for (Eigen::Index c = 0; c < emg.rows(); ++c) {
    emg.row(c) = kEmgAmplitude * envelope[c] * white(n);
    emg.row(c) += kEmgNoiseAmplitude * config_.noise_floor * white(n);
  }
  emg = emg_rotation_[static_cast<std::size_t>(info.session - 1)] * emg;

  TrialRecording trial;
  trial.eeg = Recording{eeg.unaryExpr([](double x) { return quantize(x, kEegScale); }), rate, Modality::EEG};
  trial.emg = Recording{emg.unaryExpr([](double x) { return quantize(x, kEmgScale); }), rate, Modality::EMG};
  trial.info = info;
  return trial;
}

SyntheticDataset generate_synthetic(const SynthConfig& config) { return SyntheticDataset(config); }

DatasetManifest generate_synthetic(const SynthConfig& config, const std::filesystem::path& dir) {
  const SyntheticDataset data(config);
  write_dataset(data, dir);
  return data.manifest();
}

}  // namespace hbmi
