#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "aoi/age_process.hpp"
#include "aoi/engine.hpp"
#include "aoi/penalty.hpp"

namespace aoi {

namespace detail {

// Largest generation time among batches arrived by t (the "floor" process:
// no flow can be younger than t minus this).
inline double floor_gen_at(const ArrivalSequence& arr, double t) {
  double w = -1e300;
  for (const Batch& b : arr.batches)
    if (b.a_arr <= t) w = std::max(w, b.s_gen);
  return w;
}

inline bool same_arrivals(const ArrivalSequence& a, const ArrivalSequence& b) {
  if (a.batches.size() != b.batches.size()) return false;
  for (std::size_t i = 0; i < a.batches.size(); ++i) {
    if (a.batches[i].s_gen != b.batches[i].s_gen) return false;
    if (a.batches[i].a_arr != b.batches[i].a_arr) return false;
    if (a.batches[i].s_slot != b.batches[i].s_slot) return false;
    if (a.batches[i].a_slot != b.batches[i].a_slot) return false;
  }
  return true;
}

}  // namespace detail

// Replays a trace through an independent state machine and reports every
// violated structural rule: event ordering, packet lifecycle, server
// occupancy, one-server-per-flow, served-age below age, work conservation,
// and agreement of the replayed ages with the engine's final values.
inline ValidationReport validate_run(const RunResult& run) {
  ValidationReport rep;
  const auto& cfg = run.cfg;
  const auto& spec = cfg.policy_spec;
  const auto n_flows = static_cast<std::size_t>(cfg.n_flows);
  const auto n_servers = static_cast<std::size_t>(cfg.n_servers);

  std::vector<char> arrived(run.packets.size(), 0), delivered(run.packets.size(), 0);
  std::vector<int> copies(run.packets.size(), 0);
  std::vector<int> serving(n_flows, 0);
  std::vector<PacketId> on_server(n_servers, no_packet);
  std::vector<AgeTracker> delta, xi;
  for (int n = 0; n < cfg.n_flows; ++n) {
    delta.emplace_back(cfg.initial_age_of(n));
    xi.emplace_back(cfg.initial_age_of(n));
  }

  auto schedulable_exists = [&]() {
    for (std::size_t id = 0; id < run.packets.size(); ++id) {
      if (!arrived[id] || delivered[id]) continue;
      const auto f = static_cast<std::size_t>(run.packets[id].flow);
      if (spec.replication) return true;  // the one-target policy piles on regardless
      if (copies[id] > 0) continue;
      if (spec.exclusive && serving[f] > 0) continue;
      return true;
    }
    return false;
  };

  double prev_t = 0.0;
  std::size_t i = 0;
  const auto& ev = run.trace.events;
  while (i < ev.size()) {
    const double t = ev[i].t.seconds;
    if (t < prev_t) rep.fail("event times go backward at t=" + std::to_string(t));
    std::size_t j = i;
    for (; j < ev.size() && ev[j].t.seconds == t; ++j) {}
    // Log order within one instant: kind rank, then packet id, then server.
    for (std::size_t k = i + 1; k < j; ++k) {
      const int p0 = event_kind_priority(ev[k - 1].kind);
      const int p1 = event_kind_priority(ev[k].kind);
      const PacketId i0 = ev[k - 1].packet_of(cfg.n_flows);
      const PacketId i1 = ev[k].packet_of(cfg.n_flows);
      if (p1 < p0 || (p1 == p0 && (i1 < i0 || (i1 == i0 && ev[k].server < ev[k - 1].server))))
        rep.fail(std::string("same-instant log order violated: ") + event_kind_name(ev[k].kind) +
                 " out of rank at t=" + std::to_string(t));
    }
    // Arrivals at an instant are visible to the starts logged at that instant,
    // so they are applied first regardless of their position in the log.
    for (std::size_t k = i; k < j; ++k) {
      const Event& e = ev[k];
      if (e.kind != EventKind::arrival) continue;
      const auto id = static_cast<std::size_t>(e.packet_of(cfg.n_flows));
      if (id >= run.packets.size()) {
        rep.fail("event references unknown packet");
        continue;
      }
      if (arrived[id]) rep.fail("duplicate arrival of one packet");
      arrived[id] = 1;
    }
    for (std::size_t k = i; k < j; ++k) {
      const Event& e = ev[k];
      if (e.kind == EventKind::arrival) continue;
      const auto id = static_cast<std::size_t>(e.packet_of(cfg.n_flows));
      if (id >= run.packets.size()) {
        rep.fail("event references unknown packet");
        continue;
      }
      const auto f = static_cast<std::size_t>(e.flow);
      const auto s = e.server;
      switch (e.kind) {
        case EventKind::arrival:
          break;
        case EventKind::service_start: {
          if (!arrived[id]) rep.fail("service start before arrival");
          if (delivered[id]) rep.fail("service start after delivery");
          if (s < 0 || static_cast<std::size_t>(s) >= n_servers || on_server[static_cast<std::size_t>(s)] != no_packet)
            rep.fail("service start on a busy or invalid server");
          if (serving[f] > 0 && !spec.replication)
            rep.fail("two servers on one flow without replication at t=" + std::to_string(t));
          if (spec.replication && serving[f] > 0 && copies[id] == 0)
            rep.fail("replication must duplicate one packet, not split a flow");
          ++copies[id];
          ++serving[f];
          on_server[static_cast<std::size_t>(s)] = static_cast<PacketId>(id);
          xi[f].update(t, run.packets[id].s_gen.seconds);
          break;
        }
        case EventKind::preemption:
        case EventKind::delivery_error:
        case EventKind::delivery_success: {
          if (s < 0 || static_cast<std::size_t>(s) >= n_servers ||
              on_server[static_cast<std::size_t>(s)] != static_cast<PacketId>(id)) {
            rep.fail("completion on a server not serving that packet");
            break;
          }
          on_server[static_cast<std::size_t>(s)] = no_packet;
          --copies[id];
          --serving[f];
          if (e.kind == EventKind::delivery_success) {
            if (delivered[id]) rep.fail("second success for one packet");
            delivered[id] = 1;
            delta[f].update(t, run.packets[id].s_gen.seconds);
          }
          break;
        }
      }
    }
    // State is constant until the next event, so violations are visible here.
    // Nothing may start at the final boundary, so idleness there is legal.
    bool idle = false;
    for (auto p : on_server) idle = idle || p == no_packet;
    if (spec.work_conserving && idle && t < run.final_time && schedulable_exists())
      rep.fail("idle server with schedulable work at t=" + std::to_string(t));
    for (std::size_t f = 0; f < n_flows; ++f)
      if (xi[f].value(t) > delta[f].value(t) + 1e-12)
        rep.fail("served age exceeds age at t=" + std::to_string(t));
    prev_t = t;
    i = j;
  }

  for (std::size_t f = 0; f < n_flows; ++f) {
    if (delta[f].value(run.final_time) != run.final_age[f])
      rep.fail("replayed age disagrees with engine final age");
    if (xi[f].value(run.final_time) != run.final_asi[f])
      rep.fail("replayed served age disagrees with engine final value");
  }
  for (const auto& snap : run.snapshots) {
    const auto series = run_series(run);
    for (std::size_t f = 0; f < n_flows; ++f) {
      if (series[f].delta.value(snap.t) != snap.age[f] || series[f].xi.value(snap.t) != snap.asi[f]) {
        rep.fail("snapshot not reproducible from the trace");
        break;
      }
    }
    break;  // one snapshot suffices to exercise the replay identity cheaply
  }
  return rep;
}

struct DominanceReport {
  bool holds = true;
  std::int64_t epochs_checked = 0;
  double first_time = 0.0;
  int first_index = -1;
  double lhs = 0.0, rhs = 0.0;
};

namespace detail {

inline void check_sorted_pair(DominanceReport& rep, std::vector<double> a, std::vector<double> b,
                              double t, double tol) {
  std::sort(a.begin(), a.end(), std::greater<>());
  std::sort(b.begin(), b.end(), std::greater<>());
  ++rep.epochs_checked;
  if (!rep.holds) return;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] > b[i] + tol) {
      rep.holds = false;
      rep.first_time = t;
      rep.first_index = static_cast<int>(i);
      rep.lhs = a[i];
      rep.rhs = b[i];
      return;
    }
  }
}

inline std::vector<double> epoch_times(const RunResult& a, const RunResult& b) {
  std::vector<double> ts{0.0, a.final_time};
  for (const auto& e : a.trace.events) ts.push_back(e.t.seconds);
  for (const auto& e : b.trace.events) ts.push_back(e.t.seconds);
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
  return ts;
}

}  // namespace detail

// Sorted elementwise age comparison at every epoch of either trace. The runs
// must share one arrival realization (that is what makes the comparison a
// sample-path statement); tolerance is zero in discrete mode, where ages are
// compared as exact slot counts, and 1e-9 in continuous mode.
inline DominanceReport sorted_dominance_check(const RunResult& a, const RunResult& b) {
  if (!detail::same_arrivals(a.arrivals, b.arrivals))
    throw std::invalid_argument("sorted_dominance_check: traces are not coupled (arrival logs differ)");
  if (a.cfg.n_flows != b.cfg.n_flows || a.cfg.mode != b.cfg.mode)
    throw std::invalid_argument("sorted_dominance_check: incomparable configs");

  DominanceReport rep;
  if (a.cfg.mode == Mode::discrete) {
    const auto ma = slotted_age_matrix(a.cfg, a.trace, a.packets);
    const auto mb = slotted_age_matrix(b.cfg, b.trace, b.packets);
    for (std::size_t k = 0; k < ma.size(); ++k) {
      std::vector<double> va(ma[k].begin(), ma[k].end()), vb(mb[k].begin(), mb[k].end());
      detail::check_sorted_pair(rep, std::move(va), std::move(vb),
                                static_cast<double>(k) * a.cfg.slot, 0.0);
    }
    return rep;
  }

  const auto sa = run_series(a);
  const auto sb = run_series(b);
  for (double t : detail::epoch_times(a, b)) {
    std::vector<double> va, vb;
    for (int n = 0; n < a.cfg.n_flows; ++n) {
      va.push_back(sa[static_cast<std::size_t>(n)].delta.value(t));
      vb.push_back(sb[static_cast<std::size_t>(n)].delta.value(t));
    }
    detail::check_sorted_pair(rep, std::move(va), std::move(vb), t, 1e-9);
  }
  return rep;
}

struct AsiDominanceReport {
  DominanceReport base;
  std::int64_t empty_queue_epochs = 0;  // diagnostic; dominance is still required there
};

// Sorted served-age of the serve-freshest scheduler against sorted age of a
// baseline sharing the same arrivals.
inline AsiDominanceReport asi_dominance_check(const RunResult& p, const RunResult& b) {
  if (p.cfg.policy_spec.flow != FlowDiscipline::masif || p.cfg.policy_spec.preemptive)
    throw std::invalid_argument("asi_dominance_check: first trace must come from np-masif-lgfs");
  if (!detail::same_arrivals(p.arrivals, b.arrivals))
    throw std::invalid_argument("asi_dominance_check: traces are not coupled (arrival logs differ)");

  AsiDominanceReport rep;
  const auto sp = run_series(p);
  const auto sb = run_series(b);

  // Undelivered-packet count of the first run over time, for the diagnostic.
  std::vector<double> arr_times, del_times;
  for (const auto& pk : p.packets) {
    arr_times.push_back(pk.a_arr.seconds);
    if (pk.d_deliver) del_times.push_back(pk.d_deliver->seconds);
  }
  std::sort(arr_times.begin(), arr_times.end());
  std::sort(del_times.begin(), del_times.end());
  auto undelivered_at = [&](double t) {
    const auto in = std::upper_bound(arr_times.begin(), arr_times.end(), t) - arr_times.begin();
    const auto out = std::upper_bound(del_times.begin(), del_times.end(), t) - del_times.begin();
    return in - out;
  };

  for (double t : detail::epoch_times(p, b)) {
    std::vector<double> vp, vb;
    for (int n = 0; n < p.cfg.n_flows; ++n) {
      vp.push_back(sp[static_cast<std::size_t>(n)].xi.value(t));
      vb.push_back(sb[static_cast<std::size_t>(n)].delta.value(t));
    }
    if (undelivered_at(t) == 0) ++rep.empty_queue_epochs;
    detail::check_sorted_pair(rep.base, std::move(vp), std::move(vb), t, 1e-9);
  }
  return rep;
}

struct OrderReport {
  bool holds_within_ci = true;
  double worst_excess = 0.0;  // max over grid of ccdfX - ccdfY - band
  double worst_point = 0.0;
  std::size_t grid_checked = 0;
};

// Pointwise empirical CCDF comparison: X should be stochastically no larger
// than Y. A grid point counts as a violation only when X's exceedance
// probability sits above Y's by more than the two-sample 95% binomial band.
inline OrderReport empirical_stochastic_order(std::span<const double> x, std::span<const double> y,
                                              std::span<const double> grid) {
  if (x.size() < 30 || y.size() < 30)
    throw std::invalid_argument("empirical_stochastic_order: need at least 30 samples per side");
  OrderReport rep;
  const double nx = static_cast<double>(x.size()), ny = static_cast<double>(y.size());
  for (double g : grid) {
    double cx = 0.0, cy = 0.0;
    for (double v : x) cx += v > g ? 1.0 : 0.0;
    for (double v : y) cy += v > g ? 1.0 : 0.0;
    const double px = cx / nx, py = cy / ny;
    const double band = 1.96 * std::sqrt(px * (1.0 - px) / nx + py * (1.0 - py) / ny);
    const double excess = px - py - band;
    ++rep.grid_checked;
    if (excess > rep.worst_excess) {
      rep.worst_excess = excess;
      rep.worst_point = g;
    }
    if (excess > 0.0) rep.holds_within_ci = false;
  }
  return rep;
}

// One-sample Kolmogorov-Smirnov distance against an analytic CDF.
template <class Cdf>
double ks_statistic(std::vector<double> samples, Cdf&& cdf) {
  if (samples.empty()) throw std::invalid_argument("ks_statistic: no samples");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    d = std::max(d, std::abs(f - static_cast<double>(i) / n));
    d = std::max(d, std::abs(static_cast<double>(i + 1) / n - f));
  }
  return d;
}

// Asymptotic KS critical value at the 1% level.
inline double ks_critical_1pct(std::size_t n) {
  return 1.62762 / std::sqrt(static_cast<double>(n));
}

struct WorkEfficiencyReport {
  bool holds = true;
  std::int64_t intervals_checked = 0;
  std::int64_t intervals_binding = 0;  // intervals where the queue premise held
  double first_violation_start = 0.0;
  double first_violation_end = 0.0;
};

// For every completed service interval [tau, nu] of the second run during
// which the first run's queue held schedulable work throughout, the first run
// must start some service within [tau, nu]. Both runs must be non-preemptive
// and share arrivals.
inline WorkEfficiencyReport weak_work_efficiency_check(const RunResult& one, const RunResult& two) {
  if (one.cfg.policy_spec.preemptive || two.cfg.policy_spec.preemptive)
    throw std::invalid_argument("weak_work_efficiency_check: non-preemptive traces only");
  for (const auto& e : one.trace.events)
    if (e.kind == EventKind::preemption)
      throw std::invalid_argument("weak_work_efficiency_check: first trace contains preemptions");
  if (!detail::same_arrivals(one.arrivals, two.arrivals))
    throw std::invalid_argument("weak_work_efficiency_check: different arrival realizations");

  // Step function of "first run has schedulable work": recompute the queue
  // state of run one at its event boundaries.
  struct Step {
    double t;
    bool schedulable;
  };
  std::vector<Step> steps;
  {
    const auto& cfg = one.cfg;
    const auto n_flows = static_cast<std::size_t>(cfg.n_flows);
    std::vector<int> copies(one.packets.size(), 0);
    std::vector<char> delivered(one.packets.size(), 0);
    std::vector<int> serving(n_flows, 0);
    const auto& spec = cfg.policy_spec;
    std::vector<char> arrived(one.packets.size(), 0);
    auto schedulable_now = [&]() {
      for (std::size_t id = 0; id < one.packets.size(); ++id) {
        if (!arrived[id] || delivered[id] || copies[id] > 0) continue;
        const auto f = static_cast<std::size_t>(one.packets[id].flow);
        if (spec.exclusive && serving[f] > 0) continue;
        return true;
      }
      return false;
    };
    steps.push_back({0.0, false});
    for (const auto& e : one.trace.events) {
      const auto id = static_cast<std::size_t>(e.packet_of(cfg.n_flows));
      const auto f = static_cast<std::size_t>(e.flow);
      switch (e.kind) {
        case EventKind::arrival: arrived[id] = 1; break;
        case EventKind::service_start: ++copies[id]; ++serving[f]; break;
        case EventKind::delivery_success: delivered[id] = 1; --copies[id]; --serving[f]; break;
        case EventKind::delivery_error: --copies[id]; --serving[f]; break;
        case EventKind::preemption: --copies[id]; --serving[f]; break;
      }
      steps.push_back({e.t.seconds, schedulable_now()});
    }
  }
  auto schedulable_throughout = [&](double tau, double nu) {
    // the premise: schedulable at every instant of [tau, nu]
    for (std::size_t s = 0; s < steps.size(); ++s) {
      const double seg_start = steps[s].t;
      const double seg_end = s + 1 < steps.size() ? steps[s + 1].t : 1e300;
      if (seg_end <= tau || seg_start >= nu) {
        if (seg_start >= nu) break;
        continue;
      }
      if (!steps[s].schedulable) return false;
    }
    return true;
  };

  std::vector<double> starts_one;
  for (const auto& e : one.trace.events)
    if (e.kind == EventKind::service_start) starts_one.push_back(e.t.seconds);
  std::sort(starts_one.begin(), starts_one.end());

  WorkEfficiencyReport rep;
  for (const auto& pk : two.packets) {
    for (const auto& att : pk.attempts) {
      if (!att.end) continue;
      const double tau = att.start.seconds, nu = att.end->seconds;
      ++rep.intervals_checked;
      if (!schedulable_throughout(tau, nu)) continue;
      ++rep.intervals_binding;
      const auto it = std::lower_bound(starts_one.begin(), starts_one.end(), tau);
      const bool ok = it != starts_one.end() && *it <= nu;
      if (!ok && rep.holds) {
        rep.holds = false;
        rep.first_violation_start = tau;
        rep.first_violation_end = nu;
      }
    }
  }
  return rep;
}

struct GapReport {
  double lower = 0.0, upper = 0.0;
  double ci_lower = 0.0, ci_upper = 0.0;
  double gap = 0.0, bound = 0.0;
  bool holds = false;
};

// Certificate that the serve-freshest scheduler sits within one mean service
// time of the best achievable time-average mean age: its served-age process
// lower-bounds every policy's age process, so
//   upper (its own age average) - lower (its served-age average) >= its
//   distance from the optimum, and the certificate asserts that distance is
//   at most E[service] up to the confidence slack.
inline GapReport gap_certificate(const ScenarioConfig& base, int R) {
  if (base.error_prob != 0.0)
    throw std::invalid_argument("gap_certificate: requires q = 0 (error-free service)");
  if (base.mode != Mode::continuous)
    throw std::invalid_argument("gap_certificate: continuous mode only");
  const double grid[] = {0.0, 0.1, 0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 5.0};
  const auto nbu = nbu_check(base.service_dist, grid);
  if (!nbu.is_nbu)
    throw std::invalid_argument("gap_certificate: service law failed the new-better-than-used check");

  ScenarioConfig cfg = base;
  cfg.policy_spec = parse_policy("np-masif-lgfs");
  const auto upper = replicate(cfg, PenaltySpec::avg(), R, base.seed, /*served=*/false);
  const auto lower = replicate(cfg, PenaltySpec::avg(), R, base.seed, /*served=*/true);

  GapReport rep;
  rep.lower = lower.mean;
  rep.upper = upper.mean;
  rep.ci_lower = lower.ci95;
  rep.ci_upper = upper.ci95;
  rep.gap = upper.mean - lower.mean;
  rep.bound = base.service_dist.mean();
  rep.holds = rep.gap <= rep.bound + rep.ci_lower + rep.ci_upper;
  return rep;
}

struct FloorReport {
  bool holds = true;
  std::int64_t events_checked = 0;
  double first_time = 0.0;
  double got = 0.0, expected = 0.0;
};

// Every successful delivery of the preemptive serve-freshest scheduler leaves
// the delivered flow at the floor age t - max{s_gen : a_arr <= t}: fresh
// deliveries land exactly there, and drain deliveries come from flows already
// on the floor.
inline FloorReport delivery_floor_check(const RunResult& run) {
  const auto& spec = run.cfg.policy_spec;
  if (!(spec.preemptive && spec.flow == FlowDiscipline::maf))
    throw std::invalid_argument("delivery_floor_check: trace must come from the preemptive maf-lgfs family");
  FloorReport rep;
  const auto series = run_series(run);
  for (const auto& e : run.trace.events) {
    if (e.kind != EventKind::delivery_success) continue;
    const double t = e.t.seconds;
    const double w = detail::floor_gen_at(run.arrivals, t);
    const double got = series[static_cast<std::size_t>(e.flow)].delta.value(t);
    ++rep.events_checked;
    if (std::abs(got - (t - w)) > 1e-9 && rep.holds) {
      rep.holds = false;
      rep.first_time = t;
      rep.got = got;
      rep.expected = t - w;
    }
  }
  return rep;
}

// Every service start of the non-preemptive serve-freshest-by-served-age
// scheduler leaves the started flow at the floor served age t - W(t).
inline FloorReport start_floor_check(const RunResult& run) {
  const auto& spec = run.cfg.policy_spec;
  if (spec.flow != FlowDiscipline::masif || spec.preemptive)
    throw std::invalid_argument("start_floor_check: trace must come from np-masif-lgfs");
  FloorReport rep;
  const auto series = run_series(run);
  for (const auto& e : run.trace.events) {
    if (e.kind != EventKind::service_start) continue;
    const double t = e.t.seconds;
    const double w = detail::floor_gen_at(run.arrivals, t);
    const double got = series[static_cast<std::size_t>(e.flow)].xi.value(t);
    ++rep.events_checked;
    if (std::abs(got - (t - w)) > 1e-9 && rep.holds) {
      rep.holds = false;
      rep.first_time = t;
      rep.got = got;
      rep.expected = t - w;
    }
  }
  return rep;
}

}  // namespace aoi
