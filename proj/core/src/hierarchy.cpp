#include "hbmi/hierarchy.hpp"

#include "hbmi/errors.hpp"

#include <algorithm>
#include <cmath>

namespace hbmi {

namespace {

[[noreturn]] void fail(ErrorKind kind, const std::string& msg) { throw Error(kind, "decoder", msg); }

constexpr std::array<std::string_view, 10> kStateNames{
    "Right", "Left", "Rest", "Grasp", "Power", "Precision", "MediumWrap", "PowerSphere", "ParallelExtension", "PalmarPinch"};

}  // namespace

GestureLabel GestureLabel::from_index(int index) {
  if (index < 0 || index >= kNumLabels) fail(ErrorKind::InvalidArgument, "label index out of range");
  return GestureLabel{static_cast<Hand>(index / kNumGestures), static_cast<Gesture>(index % kNumGestures)};
}

const std::array<GestureLabel, kNumLabels>& all_labels() {
  static const auto labels = [] {
    std::array<GestureLabel, kNumLabels> out{};
    for (int i = 0; i < kNumLabels; ++i) out[static_cast<std::size_t>(i)] = GestureLabel::from_index(i);
    return out;
  }();
  return labels;
}

std::string_view to_string(Hand hand) { return hand == Hand::Right ? "Right" : "Left"; }

std::string_view to_string(Gesture gesture) {
  switch (gesture) {
    case Gesture::OpenPalm: return "OpenPalm";
    case Gesture::MediumWrap: return "MediumWrap";
    case Gesture::PowerSphere: return "PowerSphere";
    case Gesture::ParallelExtension: return "ParallelExtension";
    case Gesture::PalmarPinch: return "PalmarPinch";
  }
  return "?";
}

std::string_view to_string(Movement movement) { return movement == Movement::Rest ? "Rest" : "Grasp"; }

std::string_view to_string(GraspType type) { return type == GraspType::Power ? "Power" : "Precision"; }

std::string to_string(const GestureLabel& label) {
  return std::string(to_string(label.hand)) + "-" + std::string(to_string(label.gesture));
}

Hand parse_hand(std::string_view text) {
  if (text == "Right") return Hand::Right;
  if (text == "Left") return Hand::Left;
  fail(ErrorKind::Parse, "unknown hand '" + std::string(text) + "'");
}

GestureLabel parse_label(std::string_view text) {
  for (const auto& label : all_labels()) {
    if (to_string(label) == text) return label;
  }
  fail(ErrorKind::Parse, "unknown gesture label '" + std::string(text) + "'");
}

std::optional<GraspType> grasp_type_of(Gesture gesture) {
  switch (gesture) {
    case Gesture::OpenPalm: return std::nullopt;
    case Gesture::MediumWrap:
    case Gesture::PowerSphere: return GraspType::Power;
    case Gesture::ParallelExtension:
    case Gesture::PalmarPinch: return GraspType::Precision;
  }
  return std::nullopt;
}

bool StatePath::valid() const {
  if (s1 == Movement::Rest) return !s2 && !s3;
  if (!s2 || !s3) return false;
  return grasp_type_of(*s3) == s2;
}

StatePath label_to_path(const GestureLabel& label) {
  if (label.gesture == Gesture::OpenPalm) return StatePath{label.hand, Movement::Rest, std::nullopt, std::nullopt};
  return StatePath{label.hand, Movement::Grasp, grasp_type_of(label.gesture), label.gesture};
}

GestureLabel path_to_label(const StatePath& path) {
  if (!path.valid()) fail(ErrorKind::InvalidArgument, "state path is not part of the hierarchy");
  return GestureLabel{path.s0, path.s1 == Movement::Rest ? Gesture::OpenPalm : *path.s3};
}

int level_of(State state) {
  switch (state) {
    case State::Right:
    case State::Left: return 0;
    case State::Rest:
    case State::Grasp: return 1;
    case State::Power:
    case State::Precision: return 2;
    default: return 3;
  }
}

std::string_view to_string(State state) { return kStateNames[static_cast<std::size_t>(state)]; }

State parse_state(std::string_view text) {
  for (std::size_t i = 0; i < kStateNames.size(); ++i) {
    if (kStateNames[i] == text) return static_cast<State>(i);
  }
  fail(ErrorKind::Parse, "unknown hierarchy state '" + std::string(text) + "'");
}

State state_of(Hand hand) { return hand == Hand::Right ? State::Right : State::Left; }
State state_of(Movement movement) { return movement == Movement::Rest ? State::Rest : State::Grasp; }
State state_of(GraspType type) { return type == GraspType::Power ? State::Power : State::Precision; }

State state_of(Gesture gesture) {
  if (gesture == Gesture::OpenPalm) fail(ErrorKind::InvalidArgument, "OpenPalm has no level-3 state");
  return static_cast<State>(static_cast<int>(State::MediumWrap) + static_cast<int>(gesture) - 1);
}

std::optional<State> state_at(const StatePath& path, int level) {
  switch (level) {
    case 0: return state_of(path.s0);
    case 1: return state_of(path.s1);
    case 2: return path.s2 ? std::optional<State>(state_of(*path.s2)) : std::nullopt;
    case 3: return path.s3 ? std::optional<State>(state_of(*path.s3)) : std::nullopt;
    default: fail(ErrorKind::InvalidArgument, "hierarchy level must be 0..3");
  }
}

ContextPrior ContextPrior::uniform() {
  ContextPrior prior;
  auto add = [&](int level, std::optional<State> parent, std::vector<State> children) {
    const double share = 1.0 / static_cast<double>(children.size());
    std::vector<double> probs(children.size(), share);
    prior.levels_[static_cast<std::size_t>(level)].push_back(Row{parent, std::move(children), std::move(probs)});
  };
  add(0, std::nullopt, {State::Right, State::Left});
  add(1, State::Right, {State::Rest, State::Grasp});
  add(1, State::Left, {State::Rest, State::Grasp});
  add(2, State::Grasp, {State::Power, State::Precision});
  add(3, State::Power, {State::MediumWrap, State::PowerSphere});
  add(3, State::Precision, {State::ParallelExtension, State::PalmarPinch});
  return prior;
}

const std::vector<ContextPrior::Row>& ContextPrior::rows(int level) const {
  if (level < 0 || level >= kNumLevels) fail(ErrorKind::InvalidArgument, "hierarchy level must be 0..3");
  return levels_[static_cast<std::size_t>(level)];
}

ContextPrior::Row& ContextPrior::row_for(int level, std::optional<State> parent) {
  if (level < 0 || level >= kNumLevels) fail(ErrorKind::InvalidArgument, "hierarchy level must be 0..3");
  for (auto& row : levels_[static_cast<std::size_t>(level)]) {
    if (row.parent == parent) return row;
  }
  fail(ErrorKind::InvalidArgument, "no transition row for parent " +
                                       (parent ? std::string(to_string(*parent)) : std::string("<root>")) +
                                       " at level " + std::to_string(level));
}

ContextPrior ContextPrior::with_context(int level, double p, State favored) const {
  if (level < 0 || level >= kNumLevels) fail(ErrorKind::InvalidArgument, "hierarchy level must be 0..3");
  if (!(p >= 0.0 && p <= 1.0)) fail(ErrorKind::InvalidArgument, "context probability must lie in [0, 1]");
  if (level_of(favored) != level) {
    fail(ErrorKind::InvalidArgument, std::string(to_string(favored)) + " is not a level-" + std::to_string(level) +
                                         " state");
  }
  ContextPrior out = *this;
  for (auto& row : out.levels_[static_cast<std::size_t>(level)]) {
    const auto it = std::find(row.children.begin(), row.children.end(), favored);
    if (it == row.children.end()) continue;
    const double rest = row.children.size() > 1 ? (1.0 - p) / static_cast<double>(row.children.size() - 1) : 0.0;
    for (std::size_t i = 0; i < row.children.size(); ++i) row.probs[i] = row.children[i] == favored ? p : rest;
  }
  return out;
}

double ContextPrior::probability(int level, std::optional<State> parent, State child) const {
  for (const auto& row : rows(level)) {
    if (row.parent != parent) continue;
    for (std::size_t i = 0; i < row.children.size(); ++i) {
      if (row.children[i] == child) return row.probs[i];
    }
  }
  fail(ErrorKind::InvalidArgument, "transition to " + std::string(to_string(child)) + " not defined at level " +
                                       std::to_string(level));
}

void ContextPrior::set_row(int level, std::optional<State> parent, const std::vector<double>& probs) {
  Row& row = row_for(level, parent);
  if (probs.size() != row.children.size()) fail(ErrorKind::Validation, "transition row has wrong arity");
  row.probs = probs;
  validate();
}

void ContextPrior::validate() const {
  for (int level = 0; level < kNumLevels; ++level) {
    for (const auto& row : levels_[static_cast<std::size_t>(level)]) {
      double sum = 0.0;
      for (double p : row.probs) {
        if (!(p >= 0.0 && p <= 1.0)) fail(ErrorKind::Validation, "transition probability outside [0, 1]");
        sum += p;
      }
      if (std::abs(sum - 1.0) > 1e-12) {
        fail(ErrorKind::Validation, "transition row at level " + std::to_string(level) + " sums to " +
                                        std::to_string(sum));
      }
    }
  }
}

bool operator==(const ContextPrior& a, const ContextPrior& b) {
  for (int level = 0; level < kNumLevels; ++level) {
    const auto& ra = a.levels_[static_cast<std::size_t>(level)];
    const auto& rb = b.levels_[static_cast<std::size_t>(level)];
    if (ra.size() != rb.size()) return false;
    for (std::size_t i = 0; i < ra.size(); ++i) {
      if (ra[i].parent != rb[i].parent || ra[i].children != rb[i].children || ra[i].probs != rb[i].probs) return false;
    }
  }
  return true;
}

ContextPrior uniform_prior() { return ContextPrior::uniform(); }

ContextPrior inject_context(int level, double p, State favored) {
  return ContextPrior::uniform().with_context(level, p, favored);
}

}  // namespace hbmi
