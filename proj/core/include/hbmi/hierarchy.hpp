#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hbmi {

// Gesture taxonomy: hand -> rest/grasp -> power/precision -> grasp type.
// Enumerator order is the documented tie-break order for decoding.

enum class Hand : int { Right = 0, Left = 1 };
enum class Gesture : int { OpenPalm = 0, MediumWrap, PowerSphere, ParallelExtension, PalmarPinch };
enum class Movement : int { Rest = 0, Grasp = 1 };
enum class GraspType : int { Power = 0, Precision = 1 };

inline constexpr int kNumHands = 2;
inline constexpr int kNumGestures = 5;
inline constexpr int kNumLabels = kNumHands * kNumGestures;
inline constexpr int kNumLevels = 4;

struct GestureLabel {
  Hand hand = Hand::Right;
  Gesture gesture = Gesture::OpenPalm;

  constexpr int index() const { return static_cast<int>(hand) * kNumGestures + static_cast<int>(gesture); }
  static GestureLabel from_index(int index);

  friend constexpr bool operator==(const GestureLabel&, const GestureLabel&) = default;
};

const std::array<GestureLabel, kNumLabels>& all_labels();

std::string_view to_string(Hand hand);
std::string_view to_string(Gesture gesture);
std::string_view to_string(Movement movement);
std::string_view to_string(GraspType type);
std::string to_string(const GestureLabel& label);  // e.g. "Right-MediumWrap"
GestureLabel parse_label(std::string_view text);
Hand parse_hand(std::string_view text);

struct StatePath {
  Hand s0 = Hand::Right;
  Movement s1 = Movement::Rest;
  std::optional<GraspType> s2;
  std::optional<Gesture> s3;

  bool valid() const;
  friend bool operator==(const StatePath&, const StatePath&) = default;
};

StatePath label_to_path(const GestureLabel& label);
GestureLabel path_to_label(const StatePath& path);  // throws on invalid paths

// Grasp type a gesture belongs to; nullopt for OpenPalm.
std::optional<GraspType> grasp_type_of(Gesture gesture);

// Any node value of the hierarchy, used to address context tables.
enum class State : int {
  Right = 0,
  Left,
  Rest,
  Grasp,
  Power,
  Precision,
  MediumWrap,
  PowerSphere,
  ParallelExtension,
  PalmarPinch,
};

int level_of(State state);
std::string_view to_string(State state);
State parse_state(std::string_view text);
State state_of(Hand hand);
State state_of(Movement movement);
State state_of(GraspType type);
State state_of(Gesture gesture);  // not defined for OpenPalm

// Value of `path` at `level`, or nullopt where the path terminates (rest paths at levels 2 and 3).
std::optional<State> state_at(const StatePath& path, int level);

// Context-conditioned transition tables P(S(i) | S(i-1), C) for the four levels.
class ContextPrior {
public:
  struct Row {
    std::optional<State> parent;  // nullopt at level 0
    std::vector<State> children;
    std::vector<double> probs;
  };

  // Every row uniform over its children.
  static ContextPrior uniform();

  // Copy with `favored` set to p in every row that contains it; siblings share 1 - p.
  ContextPrior with_context(int level, double p, State favored) const;

  // Throws Error(InvalidArgument) when (parent, child) is not a table entry.
  double probability(int level, std::optional<State> parent, State child) const;

  const std::vector<Row>& rows(int level) const;

  // Replaces the probabilities of one row (deserialization); validated.
  void set_row(int level, std::optional<State> parent, const std::vector<double>& probs);

  // Each row sums to 1 within 1e-12 and entries lie in [0, 1].
  void validate() const;

  friend bool operator==(const ContextPrior& a, const ContextPrior& b);

private:
  Row& row_for(int level, std::optional<State> parent);
  std::array<std::vector<Row>, kNumLevels> levels_;
};

ContextPrior uniform_prior();
ContextPrior inject_context(int level, double p, State favored);

}  // namespace hbmi
