#pragma once

#include <algorithm>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "aoi/config.hpp"
#include "aoi/packet.hpp"
#include "aoi/random.hpp"

namespace aoi {

// Lightweight packet handle the scheduler works with.
struct PacketRef {
  PacketId id = no_packet;
  int flow = 0;
  std::int64_t seq = 0;
  double gen = 0.0;
  double arr = 0.0;
};

// Per-flow scheduling candidates, best-first. `lgfs` is ordered by
// (gen desc, seq desc), `fcfs` by (arr asc, seq asc); both hold only packets
// that are arrived, undelivered and not on a server, and only as many heads as
// one assignment round can consume. `freshest_undelivered` additionally looks
// through packets currently on a server, which is what a preemptive scheduler
// compares against.
struct CandidateList {
  std::vector<PacketRef> lgfs;
  std::vector<PacketRef> fcfs;
  std::optional<PacketRef> freshest_undelivered;
};

// Scheduler-facing snapshot of one instant. Ages and served-ages are in
// seconds; busy_flow[k] is -1 for an idle server.
struct PolicyInput {
  double now = 0.0;
  int n_servers = 1;
  std::vector<double> age;
  std::vector<double> asi;
  std::vector<int> in_service;  // number of servers currently on each flow
  std::vector<CandidateList> cand;
  std::vector<std::optional<PacketRef>> busy_packet;
  std::vector<int> busy_flow;
};

struct AssignmentEntry {
  int server = -1;
  PacketRef packet;
  std::optional<PacketRef> preempts;
};
using Assignment = std::vector<AssignmentEntry>;

// Argmax flow pick for one server. Eligibility is provided by the caller
// (candidate available, not excluded); MAF ranks by age, MASIF by served age,
// RAND draws uniformly. Value ties break toward the lowest flow id.
inline int select_flow(FlowDiscipline d, std::span<const double> age, std::span<const double> asi,
                       std::span<const char> eligible, Rng* rng) {
  const int n = static_cast<int>(eligible.size());
  if (d == FlowDiscipline::rnd) {
    int count = 0;
    for (int f = 0; f < n; ++f) count += eligible[f] ? 1 : 0;
    if (count == 0) return -1;
    if (rng == nullptr) throw std::invalid_argument("select_flow: RAND needs a policy stream");
    auto pick = static_cast<int>(rng->below(static_cast<std::uint64_t>(count)));
    for (int f = 0; f < n; ++f) {
      if (!eligible[f]) continue;
      if (pick-- == 0) return f;
    }
    return -1;
  }

  std::span<const double> key = d == FlowDiscipline::maf ? age : asi;
  int best = -1;
  for (int f = 0; f < n; ++f) {
    if (!eligible[f]) continue;
    if (best < 0 || key[f] > key[best]) best = f;
  }
  return best;
}

// Packet pick within a flow; `taken` heads were already claimed this round.
inline std::optional<PacketRef> select_packet(PacketDiscipline d, const CandidateList& cand,
                                              std::size_t taken = 0) {
  const auto& list = d == PacketDiscipline::lgfs ? cand.lgfs : cand.fcfs;
  if (taken >= list.size()) return std::nullopt;
  return list[taken];
}

namespace detail {

inline std::vector<int> idle_servers(const PolicyInput& in) {
  std::vector<int> idle;
  for (int k = 0; k < in.n_servers; ++k)
    if (in.busy_flow[static_cast<std::size_t>(k)] < 0) idle.push_back(k);
  return idle;
}

}  // namespace detail

// Fills idle servers one at a time: pick a flow by the discipline, give it its
// best packet, repeat. A MASIF pick immediately lowers that flow's served age
// in the working copy, so the next pick already sees the drop. An exclusive
// policy never lands two servers on one flow; a non-exclusive MAF keeps
// re-picking the argmax flow while it still has queued packets, which is the
// usual multi-packet behaviour of that baseline. `serve_cap` (0 = none) is a
// deliberate idling knob used to construct non-work-conserving foils in tests.
inline Assignment assign_nonpreemptive(const PolicySpec& spec, const PolicyInput& in, Rng* rng,
                                       int serve_cap = 0) {
  const int n = static_cast<int>(in.age.size());
  Assignment out;
  std::vector<double> asi = in.asi;
  std::vector<std::size_t> taken(static_cast<std::size_t>(n), 0);
  std::vector<char> excluded(static_cast<std::size_t>(n), 0);
  int busy = 0;
  for (int f = 0; f < n; ++f) busy += in.in_service[static_cast<std::size_t>(f)];
  if (spec.exclusive)
    for (int f = 0; f < n; ++f) excluded[static_cast<std::size_t>(f)] = in.in_service[static_cast<std::size_t>(f)] > 0;

  std::vector<char> eligible(static_cast<std::size_t>(n), 0);
  for (int server : detail::idle_servers(in)) {
    if (serve_cap > 0 && busy + static_cast<int>(out.size()) >= serve_cap) break;
    for (int f = 0; f < n; ++f) {
      const auto& list = spec.packet == PacketDiscipline::lgfs ? in.cand[static_cast<std::size_t>(f)].lgfs
                                                               : in.cand[static_cast<std::size_t>(f)].fcfs;
      eligible[static_cast<std::size_t>(f)] =
          !excluded[static_cast<std::size_t>(f)] && taken[static_cast<std::size_t>(f)] < list.size();
    }
    const int f = select_flow(spec.flow, in.age, asi, eligible, rng);
    if (f < 0) break;
    auto pkt = select_packet(spec.packet, in.cand[static_cast<std::size_t>(f)], taken[static_cast<std::size_t>(f)]);
    if (!pkt) break;  // unreachable: eligibility implied a head
    out.push_back(AssignmentEntry{server, *pkt, std::nullopt});
    ++taken[static_cast<std::size_t>(f)];
    if (spec.exclusive) excluded[static_cast<std::size_t>(f)] = 1;
    asi[static_cast<std::size_t>(f)] = std::min(asi[static_cast<std::size_t>(f)], in.now - pkt->gen);
  }
  return out;
}

// Preemptive max-age-first, freshest-packet scheduler. Builds the target set:
// walk flows by decreasing age (ties toward the lowest id) and claim each
// flow's freshest undelivered packet until the servers run out. Flows whose
// freshest packet was already delivered sit at the minimum age, so they sort
// last and soak up leftover servers with their queued stale packets. Servers
// already on a target packet stay put; everything else is preempted and the
// unmatched targets start on freed servers in rank order.
inline Assignment assign_preemptive_maf_lgfs(const PolicyInput& in) {
  const int n = static_cast<int>(in.age.size());
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int f = 0; f < n; ++f) order[static_cast<std::size_t>(f)] = f;
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return in.age[static_cast<std::size_t>(a)] > in.age[static_cast<std::size_t>(b)]; });

  std::vector<PacketRef> targets;
  for (int f : order) {
    if (static_cast<int>(targets.size()) >= in.n_servers) break;
    const auto& fresh = in.cand[static_cast<std::size_t>(f)].freshest_undelivered;
    if (fresh) targets.push_back(*fresh);
  }

  std::vector<char> matched(targets.size(), 0);
  std::vector<int> free_servers;
  std::vector<std::optional<PacketRef>> displaced(static_cast<std::size_t>(in.n_servers));
  for (int k = 0; k < in.n_servers; ++k) {
    const auto& cur = in.busy_packet[static_cast<std::size_t>(k)];
    bool keeps = false;
    if (cur) {
      for (std::size_t i = 0; i < targets.size(); ++i) {
        if (!matched[i] && targets[i].id == cur->id) {
          matched[i] = 1;
          keeps = true;
          break;
        }
      }
    }
    if (!keeps) {
      free_servers.push_back(k);
      displaced[static_cast<std::size_t>(free_servers.size() - 1)] = cur;
    }
  }

  Assignment out;
  std::size_t next_free = 0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (matched[i]) continue;
    if (next_free >= free_servers.size()) break;  // unreachable under the counting above
    const int server = free_servers[next_free];
    out.push_back(AssignmentEntry{server, targets[i], displaced[next_free]});
    ++next_free;
  }
  return out;
}

// Replication scheduler: one packet, every server. The flow with the maximum
// age contributes its freshest undelivered packet; copies run on all servers
// and the first success cancels the rest. A fresher generation supersedes the
// whole copy set at the next decision instant.
inline Assignment assign_replication(const PolicyInput& in) {
  const int n = static_cast<int>(in.age.size());
  int best = -1;
  for (int f = 0; f < n; ++f) {
    if (!in.cand[static_cast<std::size_t>(f)].freshest_undelivered) continue;
    if (best < 0 || in.age[static_cast<std::size_t>(f)] > in.age[static_cast<std::size_t>(best)]) best = f;
  }
  Assignment out;
  if (best < 0) return out;
  const PacketRef target = *in.cand[static_cast<std::size_t>(best)].freshest_undelivered;
  for (int k = 0; k < in.n_servers; ++k) {
    const auto& cur = in.busy_packet[static_cast<std::size_t>(k)];
    if (cur && cur->id == target.id) continue;
    out.push_back(AssignmentEntry{k, target, cur});
  }
  return out;
}

// Entry point the engines call at every decision instant.
inline Assignment assign(const PolicySpec& spec, const PolicyInput& in, Rng* rng,
                         int serve_cap = 0) {
  if (spec.replication) return assign_replication(in);
  if (spec.preemptive) return assign_preemptive_maf_lgfs(in);
  return assign_nonpreemptive(spec, in, rng, serve_cap);
}

}  // namespace aoi
