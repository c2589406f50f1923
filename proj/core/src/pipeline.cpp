#include "hbmi/pipeline.hpp"

#include "hbmi/errors.hpp"

#include <algorithm>
#include <cstring>
#include <map>

namespace hbmi {

namespace {

[[noreturn]] void fail(ErrorKind kind, const std::string& msg) { throw Error(kind, "pipeline", msg); }

class Fnv1a {
public:
  void add(const double* data, std::size_t n) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n * sizeof(double); ++i) {
      state_ ^= bytes[i];
      state_ *= 0x100000001b3ULL;
    }
  }
  std::uint64_t value() const { return state_; }

private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

bool uses_eeg(const ModeSpec& mode) { return mode.terms() & (kTermEeg0 | kTermEeg1); }
bool uses_emg(const ModeSpec& mode) { return mode.terms() & (kTermEmg1 | kTermEmg2 | kTermEmg3); }

// Feature vectors grouped per trial, keyed by likelihood model name. Sibling
// states (keys that differ only in the last component) are fit on the same
// number of trials: a density estimated from more trials scores held-out
// windows higher, which would otherwise pull uninformative windows towards
// the more frequent state.
class FeatureBins {
public:
  void add(const std::string& key, int trial, const Eigen::VectorXd& x) {
    auto& groups = bins_[key];
    if (groups.empty() || groups.back().first != trial) groups.emplace_back(trial, std::vector<Eigen::VectorXd>{});
    groups.back().second.push_back(x);
  }

  void fit_into(std::map<std::string, KdeModel>& out) const {
    std::map<std::string, std::size_t> min_trials;
    for (const auto& [key, groups] : bins_) {
      auto [it, fresh] = min_trials.emplace(parent_of(key), groups.size());
      if (!fresh) it->second = std::min(it->second, groups.size());
    }
    for (const auto& [key, groups] : bins_) {
      const std::size_t m = min_trials.at(parent_of(key));
      std::vector<const Eigen::VectorXd*> rows;
      for (std::size_t i = 0; i < m; ++i) {
        for (const auto& x : groups[i * groups.size() / m].second) rows.push_back(&x);
      }
      Eigen::MatrixXd pts(static_cast<Eigen::Index>(rows.size()), rows.front()->size());
      for (std::size_t i = 0; i < rows.size(); ++i) pts.row(static_cast<Eigen::Index>(i)) = rows[i]->transpose();
      out.emplace(key, kde_fit(pts, key));
    }
  }

private:
  static std::string parent_of(const std::string& key) { return key.substr(0, key.rfind('/')); }

  std::map<std::string, std::vector<std::pair<int, std::vector<Eigen::VectorXd>>>> bins_;
};

}  // namespace

PreprocessedTrial preprocess_trial(const TrialRecording& trial, const PipelineConfig& config) {
  trial.validate(config.trial_seconds);
  PreprocessedTrial out;
  out.info = trial.info;

  const Recording eeg = downsample(trial.eeg, config.eeg_target_rate);
  std::array<std::vector<Window>, 2> band_windows;
  for (std::size_t b = 0; b < 2; ++b) {
    const auto& band = config.eeg_bands[b];
    const Recording filtered = apply_filter(eeg, FilterSpec::bandpass(config.eeg_band_order, band.low, band.high));
    const Recording corrected = baseline_correct(filtered, config.baseline_seconds, config.trial_seconds);
    band_windows[b] = split_windows(corrected, config.window_seconds, trial.info.trial_index).windows;
  }

  Recording emg = apply_filter(trial.emg, FilterSpec::notch(config.emg_notch_hz, config.emg_notch_quality));
  emg = apply_filter(emg, FilterSpec::bandpass(config.emg_band_order, config.emg_band.low, config.emg_band.high));
  const auto emg_windows =
      split_windows(segment(emg, config.baseline_seconds, config.trial_seconds), config.window_seconds,
                    trial.info.trial_index)
          .windows;

  if (band_windows[0].size() != emg_windows.size()) {
    fail(ErrorKind::Validation, "EEG and EMG yield different window counts (" + std::to_string(band_windows[0].size()) +
                                    " vs " + std::to_string(emg_windows.size()) + ")");
  }
  out.windows.reserve(emg_windows.size());
  for (std::size_t w = 0; w < emg_windows.size(); ++w) {
    PreprocessedWindow pw;
    pw.eeg = {window_covariance(band_windows[0][w].samples), window_covariance(band_windows[1][w].samples)};
    pw.rms = window_rms(emg_windows[w]);
    Fnv1a h;
    for (const auto& c : pw.eeg) h.add(c.data(), static_cast<std::size_t>(c.size()));
    h.add(pw.rms.data(), static_cast<std::size_t>(pw.rms.size()));
    pw.hash = h.value();
    out.windows.push_back(std::move(pw));
  }
  return out;
}

std::vector<Hand> mode_hands(const ModeSpec& mode) {
  if (mode.mode == DecodeMode::Emg5) return {mode.emg_hand};
  return {Hand::Right, Hand::Left};
}

HierarchyModel fit_hierarchy(std::span<const PreprocessedTrial* const> train, const ModeSpec& mode,
                             const PipelineConfig& config, FitAudit* audit) {
  std::vector<const PreprocessedTrial*> trials;
  for (const auto* t : train) {
    if (mode.class_of(t->info.label) >= 0) trials.push_back(t);
  }
  if (trials.empty()) fail(ErrorKind::InsufficientData, "no training trials for mode " + std::string(to_string(mode.mode)));

  if (audit != nullptr) {
    for (const auto* t : trials) {
      audit->sessions.insert(t->info.session);
      for (const auto& w : t->windows) audit->window_hashes.insert(w.hash);
    }
    audit->n_trials += trials.size();
  }

  HierarchyModel model;
  FeatureBins bins;

  if (uses_eeg(mode)) {
    std::array<std::vector<BandCovariances>, 2> by_hand;
    std::array<std::array<std::vector<BandCovariances>, 2>, 2> by_hand_movement;
    for (const auto* t : trials) {
      const auto path = label_to_path(t->info.label);
      for (const auto& w : t->windows) {
        by_hand[static_cast<std::size_t>(path.s0)].push_back(w.eeg);
        by_hand_movement[static_cast<std::size_t>(path.s0)][static_cast<std::size_t>(path.s1)].push_back(w.eeg);
      }
    }
    model.csp.emplace(csp_node_id(0), fit_csp(by_hand[0], by_hand[1], csp_node_id(0), config.csp_filters,
                                              config.csp_shrinkage));
    for (const Hand h : {Hand::Right, Hand::Left}) {
      const auto& groups = by_hand_movement[static_cast<std::size_t>(h)];
      model.csp.emplace(csp_node_id(1, h), fit_csp(groups[0], groups[1], csp_node_id(1, h), config.csp_filters,
                                                   config.csp_shrinkage));
    }
    for (std::size_t i = 0; i < trials.size(); ++i) {
      const auto* t = trials[i];
      const int id = static_cast<int>(i);
      const auto path = label_to_path(t->info.label);
      const auto& eeg1 = model.csp.at(csp_node_id(1, path.s0));
      for (const auto& w : t->windows) {
        bins.add(eeg0_key(path.s0), id, extract_fbcsp(w.eeg, model.csp.at(csp_node_id(0))));
        bins.add(eeg1_key(path.s0, path.s1), id, extract_fbcsp(w.eeg, eeg1));
      }
    }
  }

  if (uses_emg(mode)) {
    for (const Hand h : mode_hands(mode)) {
      std::vector<const PreprocessedTrial*> arm;
      Eigen::Index n_windows = 0;
      for (const auto* t : trials) {
        if (t->info.label.hand != h) continue;
        arm.push_back(t);
        n_windows += static_cast<Eigen::Index>(t->windows.size());
      }
      if (arm.empty()) fail(ErrorKind::InsufficientData, "no " + std::string(to_string(h)) + "-hand training trials");
      const Eigen::Index channels = arm.front()->windows.front().rms.size();
      Eigen::MatrixXd v(channels, n_windows);
      Eigen::Index col = 0;
      for (const auto* t : arm)
        for (const auto& w : t->windows) v.col(col++) = w.rms;

      NmfOptions opts;
      opts.n_synergies = config.n_synergies;
      opts.max_iter = config.nmf_max_iter;
      opts.tol = config.nmf_tol;
      opts.seed = config.nmf_seed;
      const NmfModel& nmf = model.nmf[static_cast<std::size_t>(h)].emplace(nmf_fit(v, opts).model);

      for (std::size_t i = 0; i < arm.size(); ++i) {
        const auto* t = arm[i];
        const int id = static_cast<int>(i);
        const auto path = label_to_path(t->info.label);
        for (const auto& w : t->windows) {
          const Eigen::VectorXd act = nmf_transform(nmf, w.rms);
          bins.add(emg1_key(h, path.s1), id, act);
          if (path.s1 == Movement::Grasp) {
            bins.add(emg2_key(h, *path.s2), id, act);
            bins.add(emg3_key(h, *path.s3), id, act);
          }
        }
      }
    }
  }

  bins.fit_into(model.kde);
  return model;
}

WindowFeatures window_features(const HierarchyModel& model, const PreprocessedWindow& window, const ModeSpec& mode) {
  WindowFeatures f;
  if (uses_eeg(mode)) {
    f.eeg0 = extract_fbcsp(window.eeg, model.csp_model(csp_node_id(0)));
    for (const Hand h : {Hand::Right, Hand::Left}) {
      f.eeg1[static_cast<std::size_t>(h)] = extract_fbcsp(window.eeg, model.csp_model(csp_node_id(1, h)));
    }
  }
  if (uses_emg(mode)) {
    for (const Hand h : mode_hands(mode)) {
      f.emg[static_cast<std::size_t>(h)] = nmf_transform(model.nmf_model(h), window.rms);
    }
  }
  return f;
}

}  // namespace hbmi
