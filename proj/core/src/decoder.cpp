#include "hbmi/decoder.hpp"

#include "hbmi/errors.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace hbmi {

namespace {

[[noreturn]] void fail(ErrorKind kind, const std::string& msg) { throw Error(kind, "decoder", msg); }

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr std::array<Hand, 2> kBothHands{Hand::Right, Hand::Left};

std::size_t idx(Hand h) { return static_cast<std::size_t>(h); }
std::size_t idx(Movement m) { return static_cast<std::size_t>(m); }
std::size_t idx(GraspType t) { return static_cast<std::size_t>(t); }
std::size_t grasp_idx(Gesture g) { return static_cast<std::size_t>(g) - 1; }

double checked(double v, const char* what) {
  if (std::isnan(v)) fail(ErrorKind::ModelIncomplete, std::string("likelihood term ") + what + " was not evaluated");
  return v;
}

// Non-negative real stored as mantissa * 2^exponent so long products of
// densities neither underflow nor overflow.
struct ScaledProb {
  double mantissa = 0.0;  // 0 or in [0.5, 1)
  long exponent = 0;

  static ScaledProb from_linear(double p) {
    ScaledProb s;
    if (p <= 0.0) return s;
    int e = 0;
    s.mantissa = std::frexp(p, &e);
    s.exponent = e;
    return s;
  }

  static ScaledProb from_log(double log_value) {
    ScaledProb s;
    if (!(log_value > -std::numeric_limits<double>::infinity())) return s;
    const double whole = std::floor(log_value / std::numbers::ln2);
    const double frac = log_value - whole * std::numbers::ln2;
    int e = 0;
    s.mantissa = std::frexp(std::exp(frac), &e);
    s.exponent = static_cast<long>(whole) + e;
    return s;
  }

  bool zero() const { return mantissa == 0.0; }

  ScaledProb operator*(const ScaledProb& o) const {
    if (zero() || o.zero()) return {};
    int e = 0;
    ScaledProb s;
    s.mantissa = std::frexp(mantissa * o.mantissa, &e);
    s.exponent = exponent + o.exponent + e;
    return s;
  }

  ScaledProb operator+(const ScaledProb& o) const {
    if (zero()) return o;
    if (o.zero()) return *this;
    const ScaledProb& big = exponent >= o.exponent ? *this : o;
    const ScaledProb& small = exponent >= o.exponent ? o : *this;
    const long shift = small.exponent - big.exponent;
    const double sum = big.mantissa + (shift < -1100 ? 0.0 : std::ldexp(small.mantissa, static_cast<int>(shift)));
    int e = 0;
    ScaledProb s;
    s.mantissa = std::frexp(sum, &e);
    s.exponent = big.exponent + e;
    return s;
  }

  bool greater_than(const ScaledProb& o) const {
    if (zero()) return false;
    if (o.zero()) return true;
    if (exponent != o.exponent) return exponent > o.exponent;
    return mantissa > o.mantissa;
  }

  double log() const {
    if (zero()) return -std::numeric_limits<double>::infinity();
    return std::log(mantissa) + static_cast<double>(exponent) * std::numbers::ln2;
  }
};

}  // namespace

double safe_log(double p) { return p > 0.0 ? std::log(p) : kLogZero; }

std::string eeg0_key(Hand hand) { return "eeg0/" + std::string(to_string(hand)); }

std::string eeg1_key(Hand hand, Movement movement) {
  return "eeg1/" + std::string(to_string(hand)) + "/" + std::string(to_string(movement));
}

std::string emg1_key(Hand hand, Movement movement) {
  return "emg1/" + std::string(to_string(hand)) + "/" + std::string(to_string(movement));
}

std::string emg2_key(Hand hand, GraspType type) {
  return "emg2/" + std::string(to_string(hand)) + "/" + std::string(to_string(type));
}

std::string emg3_key(Hand hand, Gesture gesture) {
  return "emg3/" + std::string(to_string(hand)) + "/" + std::string(to_string(gesture));
}

std::string csp_node_id(int level, Hand hand) {
  if (level == 0) return "eeg0";
  if (level == 1) return "eeg1/" + std::string(to_string(hand));
  fail(ErrorKind::InvalidArgument, "EEG disjunctions exist only at levels 0 and 1");
}

const KdeModel& HierarchyModel::likelihood(const std::string& key) const {
  const auto it = kde.find(key);
  if (it == kde.end()) fail(ErrorKind::ModelIncomplete, "no likelihood model for state " + key);
  return it->second;
}

const CspModel& HierarchyModel::csp_model(const std::string& node) const {
  const auto it = csp.find(node);
  if (it == csp.end()) fail(ErrorKind::ModelIncomplete, "no CSP model for node " + node);
  return it->second;
}

const NmfModel& HierarchyModel::nmf_model(Hand hand) const {
  const auto& m = nmf[idx(hand)];
  if (!m) fail(ErrorKind::ModelIncomplete, "no synergy base for the " + std::string(to_string(hand)) + " arm");
  return *m;
}

LogLikelihoods evaluate_likelihoods(const HierarchyModel& model, const WindowFeatures& features, unsigned terms,
                                    std::span<const Hand> hands) {
  LogLikelihoods lk;
  lk.eeg0.fill(kNaN);
  for (auto* table : {&lk.eeg1, &lk.emg1, &lk.emg2}) {
    for (auto& row : *table) row.fill(kNaN);
  }
  for (auto& row : lk.emg3) row.fill(kNaN);

  if (hands.empty()) hands = kBothHands;
  for (const Hand h : hands) {
    const auto hi = idx(h);
    if (terms & kTermEeg0) lk.eeg0[hi] = model.likelihood(eeg0_key(h)).logpdf(features.eeg0);
    for (const Movement m : {Movement::Rest, Movement::Grasp}) {
      if (terms & kTermEeg1) lk.eeg1[hi][idx(m)] = model.likelihood(eeg1_key(h, m)).logpdf(features.eeg1[hi]);
      if (terms & kTermEmg1) lk.emg1[hi][idx(m)] = model.likelihood(emg1_key(h, m)).logpdf(features.emg[hi]);
    }
    if (terms & kTermEmg2) {
      for (const GraspType t : {GraspType::Power, GraspType::Precision}) {
        lk.emg2[hi][idx(t)] = model.likelihood(emg2_key(h, t)).logpdf(features.emg[hi]);
      }
    }
    if (terms & kTermEmg3) {
      for (const Gesture g : {Gesture::MediumWrap, Gesture::PowerSphere, Gesture::ParallelExtension, Gesture::PalmarPinch}) {
        lk.emg3[hi][grasp_idx(g)] = model.likelihood(emg3_key(h, g)).logpdf(features.emg[hi]);
      }
    }
  }
  return lk;
}

double score_path(const LogLikelihoods& lk, const ContextPrior& prior, const StatePath& path, int depth,
                  unsigned terms) {
  const auto h = idx(path.s0);
  double score = 0.0;
  if (terms & kTermPrior0) score += safe_log(prior.probability(0, std::nullopt, state_of(path.s0)));
  if (terms & kTermEeg0) score += checked(lk.eeg0[h], "eeg0");
  if (depth < 1) return score;

  const auto m = idx(path.s1);
  if (terms & kTermPrior1) score += safe_log(prior.probability(1, state_of(path.s0), state_of(path.s1)));
  if (terms & kTermEeg1) score += checked(lk.eeg1[h][m], "eeg1");
  if (terms & kTermEmg1) score += checked(lk.emg1[h][m], "emg1");
  if (depth < 2 || path.s1 == Movement::Rest) return score;

  if (!path.s2) fail(ErrorKind::InvalidArgument, "grasp path without a grasp type");
  if (terms & kTermPrior2) score += safe_log(prior.probability(2, State::Grasp, state_of(*path.s2)));
  if (terms & kTermEmg2) score += checked(lk.emg2[h][idx(*path.s2)], "emg2");
  if (depth < 3) return score;

  if (!path.s3 || grasp_type_of(*path.s3) != path.s2) fail(ErrorKind::InvalidArgument, "inconsistent grasp path");
  if (terms & kTermPrior3) score += safe_log(prior.probability(3, state_of(*path.s2), state_of(*path.s3)));
  if (terms & kTermEmg3) score += checked(lk.emg3[h][grasp_idx(*path.s3)], "emg3");
  return score;
}

double score_label(const HierarchyModel& model, const ContextPrior& prior, const WindowFeatures& features,
                   const GestureLabel& label, unsigned terms) {
  const std::array<Hand, 1> hand{label.hand};
  const StatePath path = label_to_path(label);
  unsigned needed = terms;
  if (path.s1 == Movement::Rest) needed &= ~(kTermEmg2 | kTermEmg3);
  return score_path(evaluate_likelihoods(model, features, needed, hand), prior, path, 3, terms);
}

DecodeResult map_decode(const LogLikelihoods& lk, const ContextPrior& prior) {
  DecodeResult out;
  int best = 0;
  for (const auto& label : all_labels()) {
    const int i = label.index();
    out.scores[static_cast<std::size_t>(i)] = score_path(lk, prior, label_to_path(label));
    if (out.scores[static_cast<std::size_t>(i)] > out.scores[static_cast<std::size_t>(best)]) best = i;
  }
  out.label = GestureLabel::from_index(best);
  return out;
}

DecodeResult map_decode(const HierarchyModel& model, const ContextPrior& prior, const WindowFeatures& features) {
  return map_decode(evaluate_likelihoods(model, features), prior);
}

ExhaustiveResult exhaustive_decode(const HierarchyModel& model, const ContextPrior& prior,
                                   const WindowFeatures& features) {
  auto density = [&](const std::string& key, const Eigen::VectorXd& x) {
    return ScaledProb::from_log(model.likelihood(key).logpdf(x));
  };
  auto transition = [&](int level, std::optional<State> parent, State child) {
    return ScaledProb::from_linear(prior.probability(level, parent, child));
  };

  std::array<ScaledProb, kNumLabels> joint{};
  const std::array<std::optional<GraspType>, 3> s2_values{std::nullopt, GraspType::Power, GraspType::Precision};
  const std::array<std::optional<Gesture>, 5> s3_values{std::nullopt, Gesture::MediumWrap, Gesture::PowerSphere,
                                                        Gesture::ParallelExtension, Gesture::PalmarPinch};

  for (const Hand s0 : kBothHands) {
    for (const Movement s1 : {Movement::Rest, Movement::Grasp}) {
      for (const auto& s2 : s2_values) {
        for (const auto& s3 : s3_values) {
          const StatePath path{s0, s1, s2, s3};
          // Structural zero: the deterministic label relation admits only valid paths.
          if (!path.valid()) continue;
          const auto h = idx(s0);
          ScaledProb p = transition(0, std::nullopt, state_of(s0));
          p = p * density(eeg0_key(s0), features.eeg0);
          p = p * transition(1, state_of(s0), state_of(s1));
          p = p * density(eeg1_key(s0, s1), features.eeg1[h]);
          p = p * density(emg1_key(s0, s1), features.emg[h]);
          if (s1 == Movement::Grasp) {
            p = p * transition(2, State::Grasp, state_of(*s2));
            p = p * density(emg2_key(s0, *s2), features.emg[h]);
            p = p * transition(3, state_of(*s2), state_of(*s3));
            p = p * density(emg3_key(s0, *s3), features.emg[h]);
          }
          const auto li = static_cast<std::size_t>(path_to_label(path).index());
          joint[li] = joint[li] + p;
        }
      }
    }
  }

  ExhaustiveResult out;
  ScaledProb total;
  std::size_t best = 0;
  for (std::size_t i = 0; i < joint.size(); ++i) {
    total = total + joint[i];
    if (joint[i].greater_than(joint[best])) best = i;
  }
  const double log_total = total.log();
  for (std::size_t i = 0; i < joint.size(); ++i) {
    out.log_posterior[i] = joint[i].zero() ? -std::numeric_limits<double>::infinity() : joint[i].log() - log_total;
  }
  out.label = GestureLabel::from_index(static_cast<int>(best));
  return out;
}

std::string_view to_string(DecodeMode mode) {
  switch (mode) {
    case DecodeMode::Hybrid10: return "hbmi10";
    case DecodeMode::Eeg4: return "eeg4";
    case DecodeMode::Emg5: return "emg5";
  }
  return "?";
}

DecodeMode parse_mode(std::string_view text) {
  if (text == "hbmi10") return DecodeMode::Hybrid10;
  if (text == "eeg4") return DecodeMode::Eeg4;
  if (text == "emg5") return DecodeMode::Emg5;
  fail(ErrorKind::Parse, "unknown decoding mode '" + std::string(text) + "' (expected hbmi10, eeg4 or emg5)");
}

int ModeSpec::n_classes() const {
  switch (mode) {
    case DecodeMode::Hybrid10: return kNumLabels;
    case DecodeMode::Eeg4: return 4;
    case DecodeMode::Emg5: return kNumGestures;
  }
  return 0;
}

std::vector<std::string> ModeSpec::class_names() const {
  std::vector<std::string> names;
  switch (mode) {
    case DecodeMode::Hybrid10:
      for (const auto& l : all_labels()) names.push_back(to_string(l));
      break;
    case DecodeMode::Eeg4:
      for (const Hand h : kBothHands)
        for (const Movement m : {Movement::Rest, Movement::Grasp})
          names.push_back(std::string(to_string(h)) + "-" + std::string(to_string(m)));
      break;
    case DecodeMode::Emg5:
      for (int g = 0; g < kNumGestures; ++g) names.push_back(to_string(GestureLabel{emg_hand, static_cast<Gesture>(g)}));
      break;
  }
  return names;
}

int ModeSpec::class_of(const GestureLabel& label) const {
  switch (mode) {
    case DecodeMode::Hybrid10: return label.index();
    case DecodeMode::Eeg4: return static_cast<int>(label.hand) * 2 + (label.gesture == Gesture::OpenPalm ? 0 : 1);
    case DecodeMode::Emg5: return label.hand == emg_hand ? static_cast<int>(label.gesture) : -1;
  }
  return -1;
}

unsigned ModeSpec::terms() const {
  switch (mode) {
    case DecodeMode::Hybrid10: return kTermsAll;
    case DecodeMode::Eeg4: return kTermEeg0 | kTermEeg1 | kTermPrior0 | kTermPrior1;
    case DecodeMode::Emg5: return kTermEmg1 | kTermEmg2 | kTermEmg3 | kTermPrior1 | kTermPrior2 | kTermPrior3;
  }
  return 0;
}

ModeDecision decode(const LogLikelihoods& lk, const ContextPrior& prior, const ModeSpec& mode) {
  ModeDecision out;
  switch (mode.mode) {
    case DecodeMode::Hybrid10: {
      const auto r = map_decode(lk, prior);
      out.predicted = r.label.index();
      out.scores.assign(r.scores.begin(), r.scores.end());
      return out;
    }
    case DecodeMode::Eeg4:
      for (const Hand h : kBothHands) {
        for (const Movement m : {Movement::Rest, Movement::Grasp}) {
          out.scores.push_back(score_path(lk, prior, StatePath{h, m, std::nullopt, std::nullopt}, 1, mode.terms()));
        }
      }
      break;
    case DecodeMode::Emg5:
      for (int g = 0; g < kNumGestures; ++g) {
        const auto path = label_to_path(GestureLabel{mode.emg_hand, static_cast<Gesture>(g)});
        out.scores.push_back(score_path(lk, prior, path, 3, mode.terms()));
      }
      break;
  }
  for (std::size_t i = 1; i < out.scores.size(); ++i) {
    if (out.scores[i] > out.scores[static_cast<std::size_t>(out.predicted)]) out.predicted = static_cast<int>(i);
  }
  return out;
}

ModeDecision decode(const HierarchyModel& model, const ContextPrior& prior, const WindowFeatures& features,
                    const ModeSpec& mode) {
  if (mode.mode == DecodeMode::Emg5) {
    const std::array<Hand, 1> hand{mode.emg_hand};
    return decode(evaluate_likelihoods(model, features, mode.terms(), hand), prior, mode);
  }
  return decode(evaluate_likelihoods(model, features, mode.terms()), prior, mode);
}

int majority_vote(std::span<const int> classes, int n_classes) {
  if (classes.empty() || n_classes < 1) fail(ErrorKind::InvalidArgument, "majority vote needs decisions");
  std::vector<int> counts(static_cast<std::size_t>(n_classes), 0);
  for (int c : classes) {
    if (c < 0 || c >= n_classes) fail(ErrorKind::InvalidArgument, "class index out of range");
    ++counts[static_cast<std::size_t>(c)];
  }
  int best = 0;
  for (int c = 1; c < n_classes; ++c)
    if (counts[static_cast<std::size_t>(c)] > counts[static_cast<std::size_t>(best)]) best = c;
  return best;
}

}  // namespace hbmi
