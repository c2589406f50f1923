#pragma once

#include "hbmi/hierarchy.hpp"
#include "hbmi/signals.hpp"

namespace hbmi {

struct TrialInfo {
  GestureLabel label;
  int session = 1;      // 1-based recording day
  int block = 1;        // 1-based block within the session
  int trial_index = 0;  // 0-based position inside the block
};

// One cued trial with both modalities covering the same duration.
struct TrialRecording {
  Recording eeg;
  Recording emg;
  TrialInfo info;

  // Both modalities must hold `seconds` of data at their rate (+/- 1 sample).
  void validate(double seconds = 5.0) const;
};

}  // namespace hbmi
