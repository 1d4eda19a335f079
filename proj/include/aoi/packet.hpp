#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "aoi/time.hpp"

namespace aoi {

using PacketId = std::int64_t;
constexpr PacketId no_packet = -1;

enum class AttemptOutcome { success, error, preempted };

// One transmission attempt of a packet on a server. `end`/`outcome` stay unset
// for an attempt still in flight when the run is truncated at the horizon.
struct Attempt {
  TimePoint start;
  std::optional<TimePoint> end;
  int server = -1;
  AttemptOutcome outcome = AttemptOutcome::preempted;
};

// Full life of one packet. Flows are 0-based indices; seq is the 1-based
// synchronized generation index, so packet (flow n, seq i) of every flow
// shares s_gen and a_arr. Ordering invariant:
//   s_gen <= a_arr <= v_first_start <= d_deliver,
// with at most one attempt ending in success (whose end is d_deliver). Attempt
// intervals of one packet never overlap, except under replication where the
// same packet legitimately rides several servers at once.
struct PacketRecord {
  int flow = 0;
  std::int64_t seq = 0;
  TimePoint s_gen;
  TimePoint a_arr;
  std::vector<Attempt> attempts;
  std::optional<TimePoint> v_first_start;
  std::optional<TimePoint> d_deliver;
};

enum class EventKind { arrival, service_start, preemption, delivery_success, delivery_error };

// Log rank for simultaneous events: deliveries, then preemptions, then
// starts, then arrivals, with packet id as the secondary key. This is a log
// convention only; semantically, arrivals at an instant are visible to the
// assignment made at that same instant.
inline int event_kind_priority(EventKind k) {
  switch (k) {
    case EventKind::delivery_success: return 0;
    case EventKind::delivery_error: return 1;
    case EventKind::preemption: return 2;
    case EventKind::service_start: return 3;
    case EventKind::arrival: return 4;
  }
  return 5;
}

inline const char* event_kind_name(EventKind k) {
  switch (k) {
    case EventKind::arrival: return "arrival";
    case EventKind::service_start: return "service_start";
    case EventKind::preemption: return "preemption";
    case EventKind::delivery_success: return "delivery_success";
    case EventKind::delivery_error: return "delivery_error";
  }
  return "?";
}

struct Event {
  TimePoint t;
  EventKind kind = EventKind::arrival;
  int flow = 0;
  std::int64_t seq = 0;  // generation index of the packet involved
  int server = -1;       // -1 for arrivals

  PacketId packet_of(int n_flows) const {
    return (seq - 1) * static_cast<std::int64_t>(n_flows) + flow;
  }
};

struct Trace {
  std::vector<Event> events;
};

}  // namespace aoi
