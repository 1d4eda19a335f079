#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "aoi/config.hpp"
#include "aoi/packet.hpp"

namespace aoi {

// Piecewise-linear unit-slope process: between update instants the value grows
// at rate 1, and an update at time t with a packet generated at g replaces the
// value by min(current, t - g). The min makes a stale update a no-op, which is
// exactly how an out-of-order delivery behaves.
class AgeTracker {
 public:
  explicit AgeTracker(double initial = 0.0) : base_(initial) {}

  double value(double t) const { return base_ + (t - knot_); }

  // Returns true when the update actually lowered the value.
  bool update(double t, double gen) {
    const double fresh = t - gen;
    const double cur = value(t);
    knot_ = t;
    base_ = std::min(cur, fresh);
    return fresh < cur;
  }

 private:
  double knot_ = 0.0;
  double base_ = 0.0;
};

// Recorded breakpoints of one unit-slope process: value(t) = base[i] + (t -
// knot[i]) for the last i with knot[i] <= t. knot[0] is always 0. `horizon`
// is the time span the series was built over; integrators refuse to mix
// series built over different spans.
struct AgeSeries {
  std::vector<double> knot{0.0};
  std::vector<double> base{0.0};
  double horizon = 0.0;

  double value(double t) const {
    auto it = std::upper_bound(knot.begin(), knot.end(), t);
    const auto i = static_cast<std::size_t>(it - knot.begin()) - 1;
    return base[i] + (t - knot[i]);
  }

  void record(double t, double v) {
    if (t < knot.back()) throw std::invalid_argument("AgeSeries: non-monotone record");
    if (t == knot.back()) {
      base.back() = v;
      return;
    }
    knot.push_back(t);
    base.push_back(v);
  }
};

struct FlowSeries {
  AgeSeries delta;  // age: drops at delivery instants
  AgeSeries xi;     // served age: drops when a packet first reaches a server
};

// Rebuilds every flow's age and served-age processes from a trace. Packet
// records must be dense, indexed by Event::packet_of. Deliveries update the
// age; service starts update the served age (re-starts of one packet are
// harmless no-ops under the min rule).
inline std::vector<FlowSeries> build_flow_series(const ScenarioConfig& cfg, const Trace& trace,
                                                 const std::vector<PacketRecord>& packets) {
  std::vector<FlowSeries> out(static_cast<std::size_t>(cfg.n_flows));
  for (int n = 0; n < cfg.n_flows; ++n) {
    out[static_cast<std::size_t>(n)].delta.base[0] = cfg.initial_age_of(n);
    out[static_cast<std::size_t>(n)].xi.base[0] = cfg.initial_age_of(n);
    out[static_cast<std::size_t>(n)].delta.horizon = cfg.horizon;
    out[static_cast<std::size_t>(n)].xi.horizon = cfg.horizon;
  }
  std::vector<AgeTracker> delta, xi;
  for (int n = 0; n < cfg.n_flows; ++n) {
    delta.emplace_back(cfg.initial_age_of(n));
    xi.emplace_back(cfg.initial_age_of(n));
  }

  for (const Event& ev : trace.events) {
    if (ev.kind != EventKind::delivery_success && ev.kind != EventKind::service_start) continue;
    const auto& pkt = packets.at(static_cast<std::size_t>(ev.packet_of(cfg.n_flows)));
    const auto f = static_cast<std::size_t>(ev.flow);
    const double t = ev.t.seconds;
    if (ev.kind == EventKind::delivery_success) {
      delta[f].update(t, pkt.s_gen.seconds);
      out[f].delta.record(t, delta[f].value(t));
    } else {
      xi[f].update(t, pkt.s_gen.seconds);
      out[f].xi.record(t, xi[f].value(t));
    }
  }
  return out;
}

// The age-side (or served-side) pointers of a series set, in flow order.
inline std::vector<const AgeSeries*> series_view(const std::vector<FlowSeries>& flows,
                                                 bool served = false) {
  std::vector<const AgeSeries*> out;
  out.reserve(flows.size());
  for (const auto& f : flows) out.push_back(served ? &f.xi : &f.delta);
  return out;
}

// Integer age matrix for a slotted run: ages[k][n] is flow n's age at slot
// boundary k, counted in slots, for k = 0..horizon_slots. Computed in integer
// arithmetic from slot indices so slot-for-slot comparisons are exact. With
// `served` set, service starts drive the process instead of deliveries.
inline std::vector<std::vector<std::int64_t>> slotted_age_matrix(
    const ScenarioConfig& cfg, const Trace& trace, const std::vector<PacketRecord>& packets,
    bool served = false) {
  if (cfg.mode != Mode::discrete)
    throw std::invalid_argument("slotted_age_matrix: continuous traces have no slot grid");
  const auto K = cfg.horizon_slots();
  const auto n_flows = static_cast<std::size_t>(cfg.n_flows);

  // newest[n] = largest generation slot that has reached the goal (or a
  // server) so far; age at slot k is k - newest[n].
  std::vector<std::int64_t> newest(n_flows);
  for (int n = 0; n < cfg.n_flows; ++n)
    newest[static_cast<std::size_t>(n)] =
        -static_cast<std::int64_t>(cfg.initial_age_of(n) / cfg.slot + 0.5);

  const EventKind driving = served ? EventKind::service_start : EventKind::delivery_success;
  std::vector<std::vector<std::int64_t>> ages(static_cast<std::size_t>(K + 1),
                                              std::vector<std::int64_t>(n_flows));
  std::size_t next_ev = 0;
  for (std::int64_t k = 0; k <= K; ++k) {
    // Apply all events at slot boundaries <= k. Trace order already resolves
    // same-instant deliveries before starts where it matters.
    while (next_ev < trace.events.size() && trace.events[next_ev].t.slot <= k) {
      const Event& ev = trace.events[next_ev++];
      if (ev.kind != driving) continue;
      const auto& pkt = packets.at(static_cast<std::size_t>(ev.packet_of(cfg.n_flows)));
      auto& cur = newest[static_cast<std::size_t>(ev.flow)];
      cur = std::max(cur, pkt.s_gen.slot);
    }
    for (std::size_t n = 0; n < n_flows; ++n) ages[static_cast<std::size_t>(k)][n] = k - newest[n];
  }
  return ages;
}

}  // namespace aoi
