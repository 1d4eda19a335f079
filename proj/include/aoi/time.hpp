#pragma once

#include <cstdint>

namespace aoi {

// Simulation clock value.
//
// Continuous-mode times are plain nonnegative seconds. Discrete-mode times are
// exact slot multiples: the integer slot index is authoritative and the seconds
// value is derived once as slot * slot_len. Slot indices are never recovered by
// floating division inside the library; they travel with the value.
struct TimePoint {
  static constexpr std::int64_t no_slot = -1;

  double seconds = 0.0;
  std::int64_t slot = no_slot;

  static TimePoint continuous(double s) { return TimePoint{s, no_slot}; }
  static TimePoint slotted(std::int64_t k, double slot_len) {
    return TimePoint{static_cast<double>(k) * slot_len, k};
  }

  bool is_slotted() const { return slot != no_slot; }

  friend bool operator==(const TimePoint& a, const TimePoint& b) {
    return a.seconds == b.seconds && a.slot == b.slot;
  }
  friend bool operator<(const TimePoint& a, const TimePoint& b) {
    return a.seconds < b.seconds;
  }
};

}  // namespace aoi
