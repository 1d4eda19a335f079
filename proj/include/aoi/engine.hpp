#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <queue>
#include <set>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "aoi/age_process.hpp"
#include "aoi/arrivals.hpp"
#include "aoi/config.hpp"
#include "aoi/packet.hpp"
#include "aoi/penalty.hpp"
#include "aoi/policy.hpp"
#include "aoi/random.hpp"

namespace aoi {

struct RunOptions {
  bool record_trace = true;
  bool snapshots_at_events = false;
  std::int64_t max_events = 100000000;  // divergence guard
  // Deliberate-idling knob for work-efficiency foils: cap on busy servers.
  int serve_cap = 0;
  // Discrete-mode override: bits[k][server] = 1 forces an error for the
  // service started at slot k on that server. Replaces the stream draw, which
  // is how schedule comparisons stay variance-free.
  const std::vector<std::vector<std::uint8_t>>* forced_error_bits = nullptr;
};

struct Snapshot {
  double t = 0.0;
  std::vector<double> age;
  std::vector<double> asi;
};

struct RunResult {
  ScenarioConfig cfg;
  ArrivalSequence arrivals;
  Trace trace;
  std::vector<PacketRecord> packets;  // dense, indexed by Event::packet_of
  std::vector<Snapshot> snapshots;
  double final_time = 0.0;
  std::int64_t n_events = 0;
  std::vector<double> final_age;
  std::vector<double> final_asi;
};

inline std::vector<FlowSeries> run_series(const RunResult& run) {
  return build_flow_series(run.cfg, run.trace, run.packets);
}

// Shared completion calendar of one rank lane: epoch times with the error bit
// spent at each epoch.
struct LaneEpochs {
  std::vector<double> time;
  std::vector<std::uint8_t> error;
};

struct CoupledRunResult {
  std::vector<RunResult> runs;
  std::vector<LaneEpochs> lanes;
  // used[policy][lane][epoch] = 1 when that policy completed a service there.
  std::vector<std::vector<std::vector<std::uint8_t>>> used;
  // Epochs whose usage differs across policies; at these instants the busy
  // counts diverged, the one regime the shared-calendar argument leans on.
  std::int64_t asymmetric_epochs = 0;
};

// The arrival realization is a pure function of the config (seed included),
// so traces can be reloaded without storing the batches.
inline ArrivalSequence arrivals_for(const ScenarioConfig& cfg) {
  RandomStreams streams(cfg.seed, cfg.n_servers);
  if (cfg.mode == Mode::discrete)
    return gen_synchronized_arrivals_slotted(cfg.arrival_spec, cfg.horizon_slots(), cfg.slot,
                                             streams.arrivals());
  return gen_synchronized_arrivals(cfg.arrival_spec, cfg.horizon, streams.arrivals());
}

// One packet per (batch, flow); batch b carries sequence number b + 1.
inline std::vector<PacketRecord> packets_for(const ScenarioConfig& cfg,
                                             const ArrivalSequence& arrivals) {
  std::vector<PacketRecord> packets;
  packets.reserve(arrivals.batches.size() * static_cast<std::size_t>(cfg.n_flows));
  for (std::size_t b = 0; b < arrivals.batches.size(); ++b) {
    const Batch& batch = arrivals.batches[b];
    for (int n = 0; n < cfg.n_flows; ++n) {
      PacketRecord pkt;
      pkt.flow = n;
      pkt.seq = static_cast<std::int64_t>(b) + 1;
      pkt.s_gen = batch.s_slot >= 0 ? TimePoint::slotted(batch.s_slot, cfg.slot)
                                    : TimePoint::continuous(batch.s_gen);
      pkt.a_arr = batch.a_slot >= 0 ? TimePoint::slotted(batch.a_slot, cfg.slot)
                                    : TimePoint::continuous(batch.a_arr);
      packets.push_back(std::move(pkt));
    }
  }
  return packets;
}

namespace detail {

struct PacketKey {
  double primary;  // gen (descending walk) or arr (ascending walk)
  std::int64_t seq;
  friend bool operator<(const PacketKey& a, const PacketKey& b) {
    if (a.primary != b.primary) return a.primary < b.primary;
    return a.seq < b.seq;
  }
};

struct FlowQueues {
  std::set<PacketKey> unserved_by_gen;  // arrived, undelivered, no copy in flight
  std::set<PacketKey> unserved_by_arr;
  std::set<PacketKey> undelivered_by_gen;  // arrived, undelivered (may be in flight)
};

struct BusyService {
  PacketId packet = no_packet;
  int flow = -1;
  double start = 0.0;
};

// State common to both simulation loops.
class SimCore {
 public:
  SimCore(const ScenarioConfig& cfg, const RunOptions& opt)
      : cfg_(cfg), opt_(opt), streams_(cfg.seed, cfg.n_servers), policy_rng_(streams_.policy_stream(0)) {
    const auto rep = validate_scenario(cfg);
    if (!rep.ok) throw std::invalid_argument("invalid scenario: " + rep.joined());
    queues_.resize(static_cast<std::size_t>(cfg.n_flows));
    busy_.resize(static_cast<std::size_t>(cfg.n_servers));
    copies_.clear();
    for (int n = 0; n < cfg.n_flows; ++n) {
      delta_.emplace_back(cfg.initial_age_of(n));
      xi_.emplace_back(cfg.initial_age_of(n));
    }
  }

  void use_policy_stream(int run_index) { policy_rng_ = streams_.policy_stream(run_index); }

  RunResult&& take_result() {
    flush_pending();
    result_.cfg = cfg_;
    result_.final_time = cfg_.horizon;
    for (int n = 0; n < cfg_.n_flows; ++n) {
      result_.final_age.push_back(delta_[static_cast<std::size_t>(n)].value(cfg_.horizon));
      result_.final_asi.push_back(xi_[static_cast<std::size_t>(n)].value(cfg_.horizon));
    }
    result_.arrivals = std::move(arrivals_);
    result_.packets = std::move(packets_);
    return std::move(result_);
  }

 protected:
  void make_packets() {
    packets_ = packets_for(cfg_, arrivals_);
    copies_.assign(packets_.size(), 0);
    // Arrival processing order: by arrival time, then generation order.
    arrival_order_.resize(arrivals_.batches.size());
    for (std::size_t b = 0; b < arrival_order_.size(); ++b) arrival_order_[b] = b;
    std::stable_sort(arrival_order_.begin(), arrival_order_.end(), [&](std::size_t x, std::size_t y) {
      return arrivals_.batches[x].a_arr < arrivals_.batches[y].a_arr;
    });
  }

  PacketId packet_id(int flow, std::int64_t seq) const {
    return (seq - 1) * static_cast<std::int64_t>(cfg_.n_flows) + flow;
  }

  PacketRef make_ref(PacketId id) const {
    const auto& p = packets_[static_cast<std::size_t>(id)];
    return PacketRef{id, p.flow, p.seq, p.s_gen.seconds, p.a_arr.seconds};
  }

  void emit(TimePoint t, EventKind kind, int flow, std::int64_t seq, int server) {
    ++result_.n_events;
    if (result_.n_events > opt_.max_events)
      throw std::runtime_error("event cap exceeded: divergent configuration");
    if (!opt_.record_trace) return;
    if (!pending_.empty() && pending_.front().t.seconds != t.seconds) flush_pending();
    pending_.push_back(Event{t, kind, flow, seq, server});
  }

  // Log convention: simultaneous events are appended in (kind rank, packet id,
  // server) order, independent of the order the simulation produced them.
  void flush_pending() {
    std::stable_sort(pending_.begin(), pending_.end(), [&](const Event& a, const Event& b) {
      const int pa = event_kind_priority(a.kind);
      const int pb = event_kind_priority(b.kind);
      if (pa != pb) return pa < pb;
      const PacketId ia = packet_id(a.flow, a.seq);
      const PacketId ib = packet_id(b.flow, b.seq);
      if (ia != ib) return ia < ib;
      return a.server < b.server;
    });
    for (auto& e : pending_) result_.trace.events.push_back(e);
    pending_.clear();
  }

  void snapshot(double t) {
    if (!opt_.snapshots_at_events) return;
    Snapshot s;
    s.t = t;
    for (int n = 0; n < cfg_.n_flows; ++n) {
      s.age.push_back(delta_[static_cast<std::size_t>(n)].value(t));
      s.asi.push_back(xi_[static_cast<std::size_t>(n)].value(t));
    }
    result_.snapshots.push_back(std::move(s));
  }

  // Moves one arrived batch-packet of a flow into the schedulable queues.
  void admit(PacketId id) {
    const auto& p = packets_[static_cast<std::size_t>(id)];
    auto& q = queues_[static_cast<std::size_t>(p.flow)];
    q.unserved_by_gen.insert(PacketKey{p.s_gen.seconds, p.seq});
    q.unserved_by_arr.insert(PacketKey{p.a_arr.seconds, p.seq});
    q.undelivered_by_gen.insert(PacketKey{p.s_gen.seconds, p.seq});
  }

  void remove_unserved(PacketId id) {
    const auto& p = packets_[static_cast<std::size_t>(id)];
    auto& q = queues_[static_cast<std::size_t>(p.flow)];
    q.unserved_by_gen.erase(PacketKey{p.s_gen.seconds, p.seq});
    q.unserved_by_arr.erase(PacketKey{p.a_arr.seconds, p.seq});
  }

  void requeue_unserved(PacketId id) {
    const auto& p = packets_[static_cast<std::size_t>(id)];
    auto& q = queues_[static_cast<std::size_t>(p.flow)];
    q.unserved_by_gen.insert(PacketKey{p.s_gen.seconds, p.seq});
    q.unserved_by_arr.insert(PacketKey{p.a_arr.seconds, p.seq});
  }

  void remove_undelivered(PacketId id) {
    const auto& p = packets_[static_cast<std::size_t>(id)];
    queues_[static_cast<std::size_t>(p.flow)].undelivered_by_gen.erase(
        PacketKey{p.s_gen.seconds, p.seq});
  }

  PolicyInput build_input(double now) const {
    PolicyInput in;
    in.now = now;
    in.n_servers = cfg_.n_servers;
    for (int n = 0; n < cfg_.n_flows; ++n) {
      in.age.push_back(delta_[static_cast<std::size_t>(n)].value(now));
      in.asi.push_back(xi_[static_cast<std::size_t>(n)].value(now));
      in.in_service.push_back(0);
    }
    for (int k = 0; k < cfg_.n_servers; ++k) {
      const auto& b = busy_[static_cast<std::size_t>(k)];
      if (b) {
        in.busy_flow.push_back(b->flow);
        in.busy_packet.push_back(make_ref(b->packet));
        ++in.in_service[static_cast<std::size_t>(b->flow)];
      } else {
        in.busy_flow.push_back(-1);
        in.busy_packet.emplace_back();
      }
    }
    const std::size_t depth = static_cast<std::size_t>(cfg_.n_servers);
    for (int n = 0; n < cfg_.n_flows; ++n) {
      const auto& q = queues_[static_cast<std::size_t>(n)];
      CandidateList c;
      for (auto it = q.unserved_by_gen.rbegin(); it != q.unserved_by_gen.rend(); ++it) {
        if (c.lgfs.size() >= depth) break;
        c.lgfs.push_back(make_ref(packet_id(n, it->seq)));
      }
      for (auto it = q.unserved_by_arr.begin(); it != q.unserved_by_arr.end(); ++it) {
        if (c.fcfs.size() >= depth) break;
        c.fcfs.push_back(make_ref(packet_id(n, it->seq)));
      }
      if (!q.undelivered_by_gen.empty())
        c.freshest_undelivered = make_ref(packet_id(n, q.undelivered_by_gen.rbegin()->seq));
      in.cand.push_back(std::move(c));
    }
    return in;
  }

  // Applies a scheduling decision at time t: ends preempted attempts, starts
  // new ones, updates served-age trackers. Returns the started services.
  std::vector<int> apply_assignment(const Assignment& entries, TimePoint t) {
    std::vector<int> started;
    for (const auto& e : entries) {
      if (e.preempts) {
        auto& b = busy_[static_cast<std::size_t>(e.server)];
        auto& victim = packets_[static_cast<std::size_t>(e.preempts->id)];
        auto& att = victim.attempts[last_attempt_on(victim, e.server)];
        att.end = t;
        att.outcome = AttemptOutcome::preempted;
        emit(t, EventKind::preemption, victim.flow, victim.seq, e.server);
        if (--copies_[static_cast<std::size_t>(e.preempts->id)] == 0)
          requeue_unserved(e.preempts->id);
        b.reset();
      }
    }
    for (const auto& e : entries) {
      auto& pkt = packets_[static_cast<std::size_t>(e.packet.id)];
      if (copies_[static_cast<std::size_t>(e.packet.id)]++ == 0) remove_unserved(e.packet.id);
      pkt.attempts.push_back(Attempt{t, std::nullopt, e.server, AttemptOutcome::preempted});
      if (!pkt.v_first_start) pkt.v_first_start = t;
      busy_[static_cast<std::size_t>(e.server)] = BusyService{e.packet.id, pkt.flow, t.seconds};
      xi_[static_cast<std::size_t>(pkt.flow)].update(t.seconds, pkt.s_gen.seconds);
      emit(t, EventKind::service_start, pkt.flow, pkt.seq, e.server);
      started.push_back(e.server);
    }
    return started;
  }

  // Resolves the completion of the attempt on one server. Success delivers,
  // cancels replication siblings and frees their servers; error returns the
  // packet to the queue. Returns true on success.
  bool complete(int server, bool is_error, TimePoint t) {
    auto& b = busy_[static_cast<std::size_t>(server)];
    const PacketId id = b->packet;
    auto& pkt = packets_[static_cast<std::size_t>(id)];
    auto& att = pkt.attempts[last_attempt_on(pkt, server)];
    att.end = t;
    att.outcome = is_error ? AttemptOutcome::error : AttemptOutcome::success;
    b.reset();
    --copies_[static_cast<std::size_t>(id)];
    if (is_error) {
      emit(t, EventKind::delivery_error, pkt.flow, pkt.seq, server);
      if (copies_[static_cast<std::size_t>(id)] == 0) requeue_unserved(id);
      return false;
    }
    pkt.d_deliver = t;
    remove_undelivered(id);
    delta_[static_cast<std::size_t>(pkt.flow)].update(t.seconds, pkt.s_gen.seconds);
    emit(t, EventKind::delivery_success, pkt.flow, pkt.seq, server);
    // First success wins: surviving copies of the same packet are cancelled.
    for (int k = 0; k < cfg_.n_servers; ++k) {
      auto& other = busy_[static_cast<std::size_t>(k)];
      if (!other || other->packet != id) continue;
      auto& copy = packets_[static_cast<std::size_t>(id)];
      auto& copy_att = copy.attempts[last_attempt_on(copy, k)];
      copy_att.end = t;
      copy_att.outcome = AttemptOutcome::preempted;
      emit(t, EventKind::preemption, copy.flow, copy.seq, k);
      other.reset();
      --copies_[static_cast<std::size_t>(id)];
    }
    return true;
  }

  static std::size_t last_attempt_on(const PacketRecord& pkt, int server) {
    for (std::size_t i = pkt.attempts.size(); i-- > 0;)
      if (pkt.attempts[i].server == server && !pkt.attempts[i].end) return i;
    throw std::logic_error("no open attempt on server");
  }

  ScenarioConfig cfg_;
  RunOptions opt_;
  RandomStreams streams_;
  Rng policy_rng_;
  ArrivalSequence arrivals_;
  std::vector<std::size_t> arrival_order_;
  std::vector<PacketRecord> packets_;
  std::vector<int> copies_;
  std::vector<FlowQueues> queues_;
  std::vector<std::optional<BusyService>> busy_;
  std::vector<AgeTracker> delta_, xi_;
  std::vector<Event> pending_;
  RunResult result_;
};

// Busy services ranked by served flow's age (descending), then flow id, then
// server id. Between events every age grows at slope 1, so the rank order is
// a function of the event history only.
inline std::vector<int> ranked_busy_servers(const std::vector<std::optional<BusyService>>& busy,
                                            const std::vector<AgeTracker>& delta, double now) {
  std::vector<int> servers;
  for (std::size_t k = 0; k < busy.size(); ++k)
    if (busy[k]) servers.push_back(static_cast<int>(k));
  std::stable_sort(servers.begin(), servers.end(), [&](int a, int b) {
    const auto& sa = *busy[static_cast<std::size_t>(a)];
    const auto& sb = *busy[static_cast<std::size_t>(b)];
    const double aa = delta[static_cast<std::size_t>(sa.flow)].value(now);
    const double ab = delta[static_cast<std::size_t>(sb.flow)].value(now);
    if (aa != ab) return aa > ab;
    if (sa.flow != sb.flow) return sa.flow < sb.flow;
    return a < b;
  });
  return servers;
}

class ContinuousSim : public SimCore {
 public:
  ContinuousSim(const ScenarioConfig& cfg, const RunOptions& opt) : SimCore(cfg, opt) {
    if (cfg.mode != Mode::continuous)
      throw std::invalid_argument("ContinuousSim: config is not continuous");
    if (opt.forced_error_bits)
      throw std::invalid_argument("forced error bits are a discrete-mode device");
    arrivals_ = gen_synchronized_arrivals(cfg.arrival_spec, cfg.horizon, streams_.arrivals());
    make_packets();
  }

  // Uncoupled run: per-server service streams, error bits drawn at completion.
  void run() {
    std::priority_queue<HeapItem, std::vector<HeapItem>, std::greater<>> heap;
    std::vector<std::uint64_t> token(static_cast<std::size_t>(cfg_.n_servers), 0);

    auto schedule_completions = [&](const std::vector<int>& started, double now) {
      for (int k : started) {
        const double dur = cfg_.service_dist.sample(streams_.service(k));
        heap.push(HeapItem{now + dur, k, ++token[static_cast<std::size_t>(k)]});
      }
    };

    std::size_t next_arr = 0;
    double now = 0.0;
    process_arrivals_at(next_arr, 0.0);
    auto entries = assign(cfg_.policy_spec, build_input(0.0), &policy_rng_, opt_.serve_cap);
    schedule_completions(apply_assignment(entries, TimePoint::continuous(0.0)), 0.0);
    snapshot(0.0);

    while (true) {
      // Skip heap entries orphaned by preemption or replication cancels.
      while (!heap.empty()) {
        const auto& top = heap.top();
        const auto& b = busy_[static_cast<std::size_t>(top.server)];
        if (b && token[static_cast<std::size_t>(top.server)] == top.token) break;
        heap.pop();
      }
      const double t_comp = heap.empty() ? infinite_time : heap.top().t;
      const double t_arr = next_arr < arrival_order_.size()
                               ? arrivals_.batches[arrival_order_[next_arr]].a_arr
                               : infinite_time;
      const double t_next = std::min(t_comp, t_arr);
      if (t_next > cfg_.horizon || t_next == infinite_time) break;
      now = t_next;

      if (t_comp <= t_arr) {
        const int server = heap.top().server;
        heap.pop();
        complete(server, streams_.error_bits().bernoulli(cfg_.error_prob),
                 TimePoint::continuous(now));
      }
      // Arrivals landing at this instant are visible to the assignment below,
      // even when a completion shares the instant.
      process_arrivals_at(next_arr, now);
      auto more = assign(cfg_.policy_spec, build_input(now), &policy_rng_, opt_.serve_cap);
      schedule_completions(apply_assignment(more, TimePoint::continuous(now)), now);
      snapshot(now);
    }
  }

  // Coupled run: completions come from the shared per-rank epoch calendar.
  // The rank-j busy service (by served-flow age) completes at lane j's next
  // epoch with that epoch's error bit. A rank's residual time is always a
  // fresh exponential by memorylessness, so each policy's marginal law is the
  // same as in an uncoupled run.
  void run_on_lanes(const std::vector<LaneEpochs>& lanes, std::vector<std::vector<std::uint8_t>>& used) {
    used.assign(lanes.size(), {});
    for (std::size_t j = 0; j < lanes.size(); ++j) used[j].assign(lanes[j].time.size(), 0);
    std::vector<std::size_t> idx(lanes.size(), 0);

    std::size_t next_arr = 0;
    process_arrivals_at(next_arr, 0.0);
    auto entries = assign(cfg_.policy_spec, build_input(0.0), &policy_rng_, opt_.serve_cap);
    apply_assignment(entries, TimePoint::continuous(0.0));
    snapshot(0.0);

    double now = 0.0;
    while (true) {
      const auto ranked = ranked_busy_servers(busy_, delta_, now);
      double t_comp = infinite_time;
      std::size_t lane = 0;
      for (std::size_t j = 0; j < ranked.size() && j < lanes.size(); ++j) {
        if (idx[j] >= lanes[j].time.size()) continue;
        if (lanes[j].time[idx[j]] < t_comp) {
          t_comp = lanes[j].time[idx[j]];
          lane = j;
        }
      }
      const double t_arr = next_arr < arrival_order_.size()
                               ? arrivals_.batches[arrival_order_[next_arr]].a_arr
                               : infinite_time;
      const double t_next = std::min(t_comp, t_arr);
      if (t_next > cfg_.horizon || t_next == infinite_time) break;
      now = t_next;
      // Idle-rank epochs strictly before now pass unused.
      for (std::size_t j = 0; j < lanes.size(); ++j)
        while (idx[j] < lanes[j].time.size() && lanes[j].time[idx[j]] < now) ++idx[j];

      if (t_comp <= t_arr) {
        used[lane][idx[lane]] = 1;
        const bool err = lanes[lane].error[idx[lane]] != 0;
        ++idx[lane];
        complete(ranked[lane], err, TimePoint::continuous(now));
      }
      // Arrivals landing at this instant are visible to the assignment below,
      // even when a completion shares the instant.
      process_arrivals_at(next_arr, now);
      auto more = assign(cfg_.policy_spec, build_input(now), &policy_rng_, opt_.serve_cap);
      apply_assignment(more, TimePoint::continuous(now));
      snapshot(now);
    }
    for (std::size_t j = 0; j < lanes.size(); ++j)
      while (idx[j] < lanes[j].time.size() && lanes[j].time[idx[j]] <= cfg_.horizon) ++idx[j];
  }

 private:
  static constexpr double infinite_time = 1e300;

  struct HeapItem {
    double t;
    int server;
    std::uint64_t token;
    friend bool operator>(const HeapItem& a, const HeapItem& b) {
      if (a.t != b.t) return a.t > b.t;
      return a.server > b.server;
    }
  };

  void process_arrivals_at(std::size_t& next_arr, double now) {
    while (next_arr < arrival_order_.size()) {
      const std::size_t b = arrival_order_[next_arr];
      if (arrivals_.batches[b].a_arr > now) break;
      for (int n = 0; n < cfg_.n_flows; ++n) {
        const PacketId id = packet_id(n, static_cast<std::int64_t>(b) + 1);
        admit(id);
        emit(TimePoint::continuous(arrivals_.batches[b].a_arr), EventKind::arrival, n,
             static_cast<std::int64_t>(b) + 1, -1);
      }
      ++next_arr;
    }
  }
};

class DiscreteSim : public SimCore {
 public:
  DiscreteSim(const ScenarioConfig& cfg, const RunOptions& opt) : SimCore(cfg, opt) {
    if (cfg.mode != Mode::discrete) throw std::invalid_argument("DiscreteSim: config is not discrete");
    arrivals_ = gen_synchronized_arrivals_slotted(cfg.arrival_spec, cfg.horizon_slots(), cfg.slot,
                                                  streams_.arrivals());
    make_packets();
    if (opt.forced_error_bits) {
      const auto& bits = *opt.forced_error_bits;
      if (bits.size() != static_cast<std::size_t>(cfg.horizon_slots()))
        throw std::invalid_argument("forced_error_bits must have one row per slot");
      for (const auto& row : bits)
        if (row.size() != static_cast<std::size_t>(cfg.n_servers))
          throw std::invalid_argument("forced_error_bits rows must have one bit per server");
    }
  }

  // shared_bits, when given, couples errors by (start slot, age rank); used
  // gets one mark per coupled completion.
  void run(const std::vector<std::vector<std::uint8_t>>* shared_bits = nullptr,
           std::vector<std::vector<std::uint8_t>>* used = nullptr) {
    const auto K = cfg_.horizon_slots();
    if (used) used->assign(static_cast<std::size_t>(cfg_.n_servers),
                           std::vector<std::uint8_t>(static_cast<std::size_t>(K), 0));
    std::size_t next_arr = 0;
    std::vector<int> start_rank(static_cast<std::size_t>(cfg_.n_servers), -1);

    for (std::int64_t k = 0; k <= K; ++k) {
      const TimePoint t = TimePoint::slotted(k, cfg_.slot);
      // Completions of the services started at k-1.
      if (k > 0) {
        for (int server = 0; server < cfg_.n_servers; ++server) {
          if (!busy_[static_cast<std::size_t>(server)]) continue;
          bool err;
          if (shared_bits) {
            const auto rank = static_cast<std::size_t>(start_rank[static_cast<std::size_t>(server)]);
            err = (*shared_bits)[static_cast<std::size_t>(k - 1)][rank] != 0;
            (*used)[rank][static_cast<std::size_t>(k - 1)] = 1;
          } else if (opt_.forced_error_bits) {
            err = (*opt_.forced_error_bits)[static_cast<std::size_t>(k - 1)]
                                           [static_cast<std::size_t>(server)] != 0;
          } else {
            err = streams_.error_bits().bernoulli(cfg_.error_prob);
          }
          complete(server, err, t);
        }
      }
      // Arrivals landing at this boundary.
      while (next_arr < arrival_order_.size()) {
        const std::size_t b = arrival_order_[next_arr];
        if (arrivals_.batches[b].a_slot > k) break;
        for (int n = 0; n < cfg_.n_flows; ++n) {
          admit(packet_id(n, static_cast<std::int64_t>(b) + 1));
          emit(TimePoint::slotted(arrivals_.batches[b].a_slot, cfg_.slot), EventKind::arrival, n,
               static_cast<std::int64_t>(b) + 1, -1);
        }
        ++next_arr;
      }
      // Assignment for the slot (k, k+1]; nothing may start at the horizon.
      if (k < K) {
        auto entries = assign(cfg_.policy_spec, build_input(t.seconds), &policy_rng_, opt_.serve_cap);
        apply_assignment(entries, t);
        const auto ranked = ranked_busy_servers(busy_, delta_, t.seconds);
        for (std::size_t r = 0; r < ranked.size(); ++r)
          start_rank[static_cast<std::size_t>(ranked[r])] = static_cast<int>(r);
      }
      snapshot(t.seconds);
    }
  }
};

}  // namespace detail

inline RunResult run_continuous(const ScenarioConfig& cfg, const RunOptions& opt = {}) {
  detail::ContinuousSim sim(cfg, opt);
  sim.run();
  return sim.take_result();
}

inline RunResult run_discrete(const ScenarioConfig& cfg, const RunOptions& opt = {}) {
  detail::DiscreteSim sim(cfg, opt);
  sim.run();
  return sim.take_result();
}

inline RunResult run_scenario(const ScenarioConfig& cfg, const RunOptions& opt = {}) {
  return cfg.mode == Mode::discrete ? run_discrete(cfg, opt) : run_continuous(cfg, opt);
}

// Runs every policy against one shared randomness realization: identical
// arrivals, and completion epochs plus error bits shared through the rank
// calendar. Comparisons made this way are variance-free in the sense that a
// policy ordering claim can be checked sample path by sample path.
//
// The calendar is indexed by busy rank, not by physical server id: the age
// ordering argument needs the k-th freshest comparison to see the same error
// bit on both sides, and a policy is free to park that service on any server.
// Physical-server bit sharing provably breaks the sorted comparison (one
// policy can spend a success on its oldest flow while the other wastes it on
// a young one), so the rank keying is load-bearing, not cosmetic.
inline CoupledRunResult run_coupled(const ScenarioConfig& base,
                                    const std::vector<PolicySpec>& policies,
                                    const RunOptions& opt = {}) {
  if (policies.empty()) throw std::invalid_argument("run_coupled: no policies");
  if (opt.serve_cap > 0)
    throw std::invalid_argument("run_coupled: coupled comparisons require work-conserving policies");
  for (const auto& p : policies)
    if (!p.work_conserving)
      throw std::invalid_argument("run_coupled: policy " + p.name + " is not work-conserving");
  if (base.mode == Mode::continuous && base.service_dist.kind != DistKind::exponential)
    throw std::invalid_argument(
        "run_coupled: continuous coupling needs exponential service; the shared-calendar "
        "construction relies on memorylessness");

  CoupledRunResult out;
  RandomStreams streams(base.seed, base.n_servers);

  if (base.mode == Mode::continuous) {
    // Pre-draw each rank's completion calendar and error bits.
    for (int j = 0; j < base.n_servers; ++j) {
      LaneEpochs lane;
      Rng& src = streams.service(j);
      double t = 0.0;
      while (true) {
        t += src.exponential(base.service_dist.rate);
        if (t > base.horizon) break;
        lane.time.push_back(t);
        lane.error.push_back(streams.error_bits().bernoulli(base.error_prob) ? 1 : 0);
      }
      out.lanes.push_back(std::move(lane));
    }
  } else {
    const auto K = base.horizon_slots();
    for (int j = 0; j < base.n_servers; ++j) {
      LaneEpochs lane;
      for (std::int64_t k = 0; k < K; ++k) {
        lane.time.push_back(static_cast<double>(k + 1) * base.slot);
        lane.error.push_back(0);
      }
      out.lanes.push_back(std::move(lane));
    }
    // Bits drawn slot-major so the table is policy-independent.
    for (std::int64_t k = 0; k < K; ++k)
      for (int j = 0; j < base.n_servers; ++j)
        out.lanes[static_cast<std::size_t>(j)].error[static_cast<std::size_t>(k)] =
            streams.error_bits().bernoulli(base.error_prob) ? 1 : 0;
  }

  std::vector<std::vector<std::uint8_t>> slot_bits;
  if (base.mode == Mode::discrete) {
    const auto K = base.horizon_slots();
    slot_bits.assign(static_cast<std::size_t>(K),
                     std::vector<std::uint8_t>(static_cast<std::size_t>(base.n_servers), 0));
    for (std::int64_t k = 0; k < K; ++k)
      for (int j = 0; j < base.n_servers; ++j)
        slot_bits[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)] =
            out.lanes[static_cast<std::size_t>(j)].error[static_cast<std::size_t>(k)];
  }

  for (std::size_t i = 0; i < policies.size(); ++i) {
    ScenarioConfig cfg = base;
    cfg.policy_spec = policies[i];
    // The comparison class is one-server-per-flow; multi-serve baselines are
    // clamped onto it here so the sorted comparison is well defined.
    if (!cfg.policy_spec.replication) cfg.policy_spec.exclusive = true;
    std::vector<std::vector<std::uint8_t>> used;
    if (base.mode == Mode::continuous) {
      detail::ContinuousSim sim(cfg, opt);
      sim.use_policy_stream(static_cast<int>(i));
      sim.run_on_lanes(out.lanes, used);
      out.runs.push_back(sim.take_result());
    } else {
      detail::DiscreteSim sim(cfg, opt);
      sim.use_policy_stream(static_cast<int>(i));
      sim.run(&slot_bits, &used);
      out.runs.push_back(sim.take_result());
    }
    out.used.push_back(std::move(used));
  }

  for (std::size_t j = 0; j < out.lanes.size(); ++j)
    for (std::size_t e = 0; e < out.lanes[j].time.size(); ++e) {
      bool any = false, all = true;
      for (const auto& u : out.used) {
        const bool b = u[j][e] != 0;
        any = any || b;
        all = all && b;
      }
      if (any && !all) ++out.asymmetric_epochs;
    }
  return out;
}

struct RunStatistics {
  std::vector<double> per_rep;
  double mean = 0.0;
  double ci95 = 0.0;
  bool insufficient_replications = false;
};

inline int bench_threads() {
  if (const char* env = std::getenv("AOI_BENCH_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// R independent runs seeded base_seed+1 .. base_seed+R; reduces to the mean
// time-average penalty with a normal-approximation 95% half-width. Results
// are keyed by replication index, so the thread count cannot change them.
inline RunStatistics replicate(const ScenarioConfig& cfg, const PenaltySchedule& schedule, int R,
                               std::uint64_t base_seed, bool served = false) {
  if (R < 1) throw std::invalid_argument("replicate: R must be at least 1");
  RunStatistics stats;
  stats.per_rep.assign(static_cast<std::size_t>(R), 0.0);

  std::atomic<int> next{0};
  auto worker = [&]() {
    while (true) {
      const int r = next.fetch_add(1);
      if (r >= R) return;
      ScenarioConfig c = cfg;
      c.seed = base_seed + 1 + static_cast<std::uint64_t>(r);
      const RunResult run = run_scenario(c);
      const auto series = run_series(run);
      stats.per_rep[static_cast<std::size_t>(r)] =
          time_average_penalty(series_view(series, served), schedule, c.horizon);
    }
  };
  const int n_threads = std::min(bench_threads(), R);
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  double sum = 0.0;
  for (double v : stats.per_rep) sum += v;
  stats.mean = sum / R;
  // Identical replications have zero spread; summation rounding must not
  // manufacture a spurious half-width.
  bool all_equal = true;
  for (double v : stats.per_rep) all_equal = all_equal && v == stats.per_rep.front();
  if (all_equal) stats.mean = stats.per_rep.front();
  if (R == 1) {
    stats.insufficient_replications = true;
    return stats;
  }
  if (all_equal) {
    stats.ci95 = 0.0;
    return stats;
  }
  double ss = 0.0;
  for (double v : stats.per_rep) ss += (v - stats.mean) * (v - stats.mean);
  const double sd = std::sqrt(ss / (R - 1));
  stats.ci95 = 1.96 * sd / std::sqrt(static_cast<double>(R));
  return stats;
}

inline RunStatistics replicate(const ScenarioConfig& cfg, const PenaltySpec& spec, int R,
                               std::uint64_t base_seed, bool served = false) {
  return replicate(cfg, PenaltySchedule::constant(spec), R, base_seed, served);
}

}  // namespace aoi
