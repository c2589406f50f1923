#pragma once

#include "hbmi/hierarchy.hpp"
#include "hbmi/likelihoods.hpp"
#include "hbmi/spatial_filters.hpp"
#include "hbmi/synergies.hpp"

#include <Eigen/Core>

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hbmi {

// log(0) surrogate that keeps score arithmetic totally ordered.
inline constexpr double kLogZero = -1e300;

double safe_log(double p);

// Observed evidence for one 250 ms window. Level-1 EEG features and the EMG
// activations depend on the hand hypothesis (per-hand CSP and per-arm NMF),
// so they are kept per hand.
struct WindowFeatures {
  Eigen::VectorXd eeg0;
  std::array<Eigen::VectorXd, kNumHands> eeg1;
  std::array<Eigen::VectorXd, kNumHands> emg;
};

// Likelihood model keys, one per (modality, level, conditioning prefix, state):
//   eeg0/<hand>, eeg1/<hand>/<Rest|Grasp>, emg1/<hand>/<Rest|Grasp>,
//   emg2/<hand>/<Power|Precision>, emg3/<hand>/<gesture>
std::string eeg0_key(Hand hand);
std::string eeg1_key(Hand hand, Movement movement);
std::string emg1_key(Hand hand, Movement movement);
std::string emg2_key(Hand hand, GraspType type);
std::string emg3_key(Hand hand, Gesture gesture);

// CSP node ids: "eeg0" (Right vs Left) and "eeg1/<hand>" (Rest vs Grasp within a hand).
std::string csp_node_id(int level, Hand hand = Hand::Right);

struct HierarchyModel {
  std::map<std::string, CspModel> csp;
  std::array<std::optional<NmfModel>, kNumHands> nmf;
  std::map<std::string, KdeModel> kde;
  ContextPrior default_prior = ContextPrior::uniform();

  // Throws Error(ModelIncomplete) when the key has no model.
  const KdeModel& likelihood(const std::string& key) const;
  const CspModel& csp_model(const std::string& node) const;
  const NmfModel& nmf_model(Hand hand) const;
};

// Factors of the decision criterion. A mask selects which ones enter a score.
enum Term : unsigned {
  kTermEeg0 = 1u << 0,
  kTermEeg1 = 1u << 1,
  kTermEmg1 = 1u << 2,
  kTermEmg2 = 1u << 3,
  kTermEmg3 = 1u << 4,
  kTermPrior0 = 1u << 5,
  kTermPrior1 = 1u << 6,
  kTermPrior2 = 1u << 7,
  kTermPrior3 = 1u << 8,
};
inline constexpr unsigned kTermsLikelihood = kTermEeg0 | kTermEeg1 | kTermEmg1 | kTermEmg2 | kTermEmg3;
inline constexpr unsigned kTermsPrior = kTermPrior0 | kTermPrior1 | kTermPrior2 | kTermPrior3;
inline constexpr unsigned kTermsAll = kTermsLikelihood | kTermsPrior;

// KDE log-densities for one window, indexed by hand and state. Entries not
// requested by the mask are left NaN.
struct LogLikelihoods {
  std::array<double, 2> eeg0{};
  std::array<std::array<double, 2>, 2> eeg1{};   // [hand][movement]
  std::array<std::array<double, 2>, 2> emg1{};   // [hand][movement]
  std::array<std::array<double, 2>, 2> emg2{};   // [hand][grasp type]
  std::array<std::array<double, 4>, 2> emg3{};   // [hand][gesture - 1]
};

LogLikelihoods evaluate_likelihoods(const HierarchyModel& model, const WindowFeatures& features,
                                    unsigned terms = kTermsAll, std::span<const Hand> hands = {});

// Scores the path prefix up to `depth` (0..3). Rest paths stop at level 1:
// their level-2/3 factors are taken as 1.
double score_path(const LogLikelihoods& lk, const ContextPrior& prior, const StatePath& path, int depth = 3,
                  unsigned terms = kTermsAll);

// Log of the factorized criterion for one label.
double score_label(const HierarchyModel& model, const ContextPrior& prior, const WindowFeatures& features,
                   const GestureLabel& label, unsigned terms = kTermsAll);

struct DecodeResult {
  GestureLabel label;
  std::array<double, kNumLabels> scores{};
};

// argmax over the 10 labels; ties go to the lowest label index.
DecodeResult map_decode(const HierarchyModel& model, const ContextPrior& prior, const WindowFeatures& features);
DecodeResult map_decode(const LogLikelihoods& lk, const ContextPrior& prior);

struct ExhaustiveResult {
  GestureLabel label;
  std::array<double, kNumLabels> log_posterior{};  // -inf for zero-probability labels
};

// Reference decoder: enumerates every (s0, s1, s2, s3) assignment including
// structurally invalid ones and multiplies factors in the linear domain with
// explicit exponent tracking. Used to verify map_decode.
ExhaustiveResult exhaustive_decode(const HierarchyModel& model, const ContextPrior& prior,
                                   const WindowFeatures& features);

// Classifier modes of the evaluation tables.
enum class DecodeMode {
  Hybrid10,  // EEG + EMG, 10 labels
  Eeg4,      // EEG only, (hand x rest/grasp)
  Emg5,      // EMG only, five gestures of one hand
};

std::string_view to_string(DecodeMode mode);
DecodeMode parse_mode(std::string_view text);  // "hbmi10", "eeg4", "emg5"

struct ModeSpec {
  DecodeMode mode = DecodeMode::Hybrid10;
  Hand emg_hand = Hand::Right;

  int n_classes() const;
  std::vector<std::string> class_names() const;
  // Class of a label, or -1 when the label is outside this mode (other hand for Emg5).
  int class_of(const GestureLabel& label) const;
  unsigned terms() const;
};

struct ModeDecision {
  int predicted = 0;
  std::vector<double> scores;
};

ModeDecision decode(const HierarchyModel& model, const ContextPrior& prior, const WindowFeatures& features,
                    const ModeSpec& mode);
ModeDecision decode(const LogLikelihoods& lk, const ContextPrior& prior, const ModeSpec& mode);

// Optional trial-level aggregation; ties go to the lowest class index.
int majority_vote(std::span<const int> classes, int n_classes);

}  // namespace hbmi
