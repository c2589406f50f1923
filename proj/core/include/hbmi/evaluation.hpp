#pragma once

#include "hbmi/datasets.hpp"
#include "hbmi/decoder.hpp"
#include "hbmi/pipeline.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace hbmi {

struct EvalOptions {
  int folds = 5;
  int repetitions = 5;
  std::uint64_t seed = 1;  // fold shuffles
  PipelineConfig pipeline;
  int jobs = 1;

  void validate() const;
};

struct WindowDecision {
  TrialInfo info;
  int window = 0;
  int truth = 0;      // class index within the mode
  int predicted = 0;
  int repetition = 0;
  int fold = 0;
};

// One call into fit_hierarchy and what it consumed.
struct FitRecord {
  int repetition = 0;
  int fold = 0;
  std::set<int> sessions;
  std::size_t n_trials = 0;
  std::size_t n_windows = 0;
  std::size_t test_windows_in_training = 0;  // must be zero
};

struct AccuracyReport {
  std::string protocol;  // "within", "online", "context"
  ModeSpec mode;
  int session = 0;       // evaluated session
  std::vector<std::string> class_names;
  double accuracy = 0.0;
  std::vector<double> repetition_accuracy;
  Eigen::MatrixXi confusion;  // rows = true class, cols = predicted
  std::vector<double> recall;  // NaN for classes without windows
  std::size_t n_windows = 0;
  std::vector<WindowDecision> decisions;
  std::vector<FitRecord> fit_log;

  bool leakage_free() const;
};

// Accuracy, per-class recall and confusion from (predicted, true) pairs.
AccuracyReport compute_report(std::span<const std::pair<int, int>> decisions, int n_classes);

// Stratified k-fold assignment over trials for one repetition: fold id per
// trial, balanced per class.
std::vector<int> stratified_folds(std::span<const int> classes, int folds, std::uint64_t seed, int repetition);

// Repeated stratified k-fold CV inside one session. Trials are never split
// across train and test; every model is refit on the training folds.
AccuracyReport within_session_cv(std::span<const PreprocessedTrial> trials, int session, const ModeSpec& mode,
                                 const EvalOptions& options = {});

// Trains on every session before `test_session`, tests every window of it.
AccuracyReport online_eval(std::span<const PreprocessedTrial> trials, int test_session, const ModeSpec& mode,
                           const EvalOptions& options = {});

struct ContextInjection {
  int level = 0;
  double p = 0.5;
};

// One sweep row. Each injection favors the test window's true state at its
// level; with correct_prob < 1 the favored state is a random wrong sibling
// with probability 1 - correct_prob.
struct ContextConfig {
  std::string name;
  std::vector<ContextInjection> injections;
  double correct_prob = 1.0;
  std::uint64_t seed = 1;
};

// Rows p = 0.75, 0.70, 0.65, 0.60 at levels 0..3, one level per row.
std::vector<ContextConfig> standard_context_configs();

// Context prior for one window whose true label is `truth`.
ContextPrior context_prior_for(const ContextConfig& config, const GestureLabel& truth, std::uint64_t stream = 0);

struct ContextRow {
  ContextConfig config;
  AccuracyReport report;
  std::size_t newly_correct = 0;
  std::size_t newly_incorrect = 0;  // correct under the uniform prior, wrong here
  std::size_t changed = 0;
};

struct SweepReport {
  AccuracyReport baseline;  // uniform prior, identical to online_eval
  std::vector<ContextRow> rows;
};

// Online protocol for the 10-class decoder with per-window context priors.
SweepReport context_sweep(std::span<const PreprocessedTrial> trials, int test_session,
                          std::span<const ContextConfig> configs, const EvalOptions& options = {});

// Copy of the trials with labels shuffled within each session (chance calibration).
std::vector<PreprocessedTrial> permute_labels(std::span<const PreprocessedTrial> trials, std::uint64_t seed);

// Central 95% range of the observed success fraction of Binomial(n, p0).
std::pair<double, double> binomial_interval(double p0, std::size_t n);

// Report files.
std::string format_accuracy_table(std::span<const AccuracyReport> reports);
std::string format_repetitions_csv(const AccuracyReport& report);
std::string format_decision_log(const AccuracyReport& report);
std::string format_confusion_csv(const AccuracyReport& report);
std::string format_context_table(const SweepReport& sweep);

}  // namespace hbmi
