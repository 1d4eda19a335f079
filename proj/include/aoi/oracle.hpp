#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "aoi/arrivals.hpp"
#include "aoi/config.hpp"
#include "aoi/penalty.hpp"
#include "aoi/random.hpp"

namespace aoi {

struct OracleReport {
  double optimal_value = 0.0;
  double dt_maf_lgfs_value = 0.0;
  bool match = false;
  std::int64_t states_expanded = 0;
};

namespace detail {

// Exhaustive backward induction over every causal non-preemptive schedule of
// a tiny slotted instance. The objective is the expected sum over slot
// boundaries k = 0..K-1 of penalty(age vector at k). Since every service
// lasts exactly one slot, the full state is (slot, per-flow delivered set);
// expectations branch over the error bits of the packets chosen in that slot,
// which is the same arithmetic shape the slot-frozen scheduler value uses, so
// an optimal scheduler matches it bit for bit.
class OracleDP {
 public:
  OracleDP(const ScenarioConfig& cfg, const PenaltySpec& spec)
      : cfg_(cfg), spec_(spec), K_(cfg.horizon_slots()) {
    const auto rep = validate_scenario(cfg);
    if (!rep.ok) throw std::invalid_argument("oracle: invalid scenario: " + rep.joined());
    if (cfg.mode != Mode::discrete) throw std::invalid_argument("oracle: discrete mode only");
    if (cfg.n_flows > 3 || cfg.n_servers > 2 || K_ > 8)
      throw std::invalid_argument("oracle: instance too large (needs N<=3, M<=2, <=8 slots)");
    if (cfg.error_prob != 0.0 && cfg.error_prob != 0.5)
      throw std::invalid_argument("oracle: q must be 0 or 0.5 so realizations enumerate exactly");

    RandomStreams streams(cfg.seed, cfg.n_servers);
    arrivals_ = gen_synchronized_arrivals_slotted(cfg.arrival_spec, K_, cfg.slot, streams.arrivals());
    B_ = static_cast<int>(arrivals_.batches.size());
    if (B_ > 10 || B_ * cfg.n_flows > 30)
      throw std::invalid_argument("oracle: instance too large (packet count)");
    for (int n = 0; n < cfg.n_flows; ++n)
      init_u_.push_back(-static_cast<std::int64_t>(cfg.initial_age_of(n) / cfg.slot + 0.5));
  }

  const ArrivalSequence& arrivals() const { return arrivals_; }

  OracleReport solve() {
    OracleReport rep;
    const std::vector<std::uint32_t> none(static_cast<std::size_t>(cfg_.n_flows), 0);
    rep.optimal_value = best(0, none);
    rep.dt_maf_lgfs_value = policy_value(0, none);
    rep.match = rep.optimal_value == rep.dt_maf_lgfs_value;
    rep.states_expanded = static_cast<std::int64_t>(best_memo_.size());
    return rep;
  }

  // The frozen scheduler's action at a state, exposed for cross-checks: the
  // (flow, batch) picks, ordered by server.
  std::vector<std::pair<int, int>> policy_action(std::int64_t k,
                                                 const std::vector<std::uint32_t>& delivered) const {
    std::vector<std::pair<int, int>> picks;
    std::vector<char> taken(static_cast<std::size_t>(cfg_.n_flows), 0);
    for (int s = 0; s < cfg_.n_servers; ++s) {
      int best_flow = -1;
      std::int64_t best_age = -1;
      for (int n = 0; n < cfg_.n_flows; ++n) {
        if (taken[static_cast<std::size_t>(n)]) continue;
        if (freshest_candidate(k, delivered[static_cast<std::size_t>(n)]) < 0) continue;
        const std::int64_t age = k - u_of(n, delivered[static_cast<std::size_t>(n)]);
        if (age > best_age) {
          best_age = age;
          best_flow = n;
        }
      }
      if (best_flow < 0) break;
      taken[static_cast<std::size_t>(best_flow)] = 1;
      picks.emplace_back(best_flow,
                         freshest_candidate(k, delivered[static_cast<std::size_t>(best_flow)]));
    }
    return picks;
  }

 private:
  std::int64_t u_of(int flow, std::uint32_t delivered) const {
    std::int64_t u = init_u_[static_cast<std::size_t>(flow)];
    for (int b = 0; b < B_; ++b)
      if (delivered & (1u << b)) u = std::max(u, arrivals_.batches[static_cast<std::size_t>(b)].s_slot);
    return u;
  }

  // Largest-generation arrived undelivered batch, or -1.
  int freshest_candidate(std::int64_t k, std::uint32_t delivered) const {
    int best = -1;
    for (int b = 0; b < B_; ++b) {
      if (delivered & (1u << b)) continue;
      const auto& batch = arrivals_.batches[static_cast<std::size_t>(b)];
      if (batch.a_slot > k) continue;
      if (best < 0 || batch.s_slot > arrivals_.batches[static_cast<std::size_t>(best)].s_slot ||
          (batch.s_slot == arrivals_.batches[static_cast<std::size_t>(best)].s_slot && b > best))
        best = b;
    }
    return best;
  }

  double stage_penalty(std::int64_t k, const std::vector<std::uint32_t>& delivered) const {
    std::vector<double> ages;
    for (int n = 0; n < cfg_.n_flows; ++n)
      ages.push_back(static_cast<double>(k - u_of(n, delivered[static_cast<std::size_t>(n)])) *
                     cfg_.slot);
    return evaluate_penalty(spec_, ages);
  }

  std::uint64_t key_of(std::int64_t k, const std::vector<std::uint32_t>& delivered) const {
    std::uint64_t key = static_cast<std::uint64_t>(k);
    for (int n = 0; n < cfg_.n_flows; ++n)
      key = (key << 10) | delivered[static_cast<std::size_t>(n)];
    return key;
  }

  // Expected remaining objective of one action branch. `child` evaluates the
  // successor state; both the optimum and the frozen scheduler pass through
  // here, so their branch arithmetic is identical.
  template <class Child>
  double branch(std::int64_t k, const std::vector<std::uint32_t>& delivered,
                const std::vector<std::pair<int, int>>& picks, Child&& child) const {
    if (picks.empty() || cfg_.error_prob == 0.0) {
      auto next = delivered;
      for (const auto& [flow, b] : picks) next[static_cast<std::size_t>(flow)] |= 1u << b;
      return child(k + 1, next);
    }
    const auto outcomes = 1u << picks.size();
    double sum = 0.0;
    for (std::uint32_t bits = 0; bits < outcomes; ++bits) {
      auto next = delivered;
      for (std::size_t i = 0; i < picks.size(); ++i)
        if (!(bits & (1u << i)))  // bit 0 = success
          next[static_cast<std::size_t>(picks[i].first)] |= 1u << picks[i].second;
      sum += child(k + 1, next);
    }
    return sum / static_cast<double>(outcomes);
  }

  // Enumerates every per-flow choice (one candidate batch or none), at most
  // one server per flow, at most M picks total, idling included.
  void enumerate_actions(std::int64_t k, const std::vector<std::uint32_t>& delivered, int flow,
                         std::vector<std::pair<int, int>>& picks,
                         const std::function<void()>& visit) const {
    if (static_cast<int>(picks.size()) == cfg_.n_servers || flow == cfg_.n_flows) {
      visit();
      return;
    }
    enumerate_actions(k, delivered, flow + 1, picks, visit);  // flow unserved
    for (int b = 0; b < B_; ++b) {
      if (delivered[static_cast<std::size_t>(flow)] & (1u << b)) continue;
      if (arrivals_.batches[static_cast<std::size_t>(b)].a_slot > k) continue;
      picks.emplace_back(flow, b);
      enumerate_actions(k, delivered, flow + 1, picks, visit);
      picks.pop_back();
    }
  }

  double best(std::int64_t k, const std::vector<std::uint32_t>& delivered) {
    if (k >= K_) return 0.0;
    const auto key = key_of(k, delivered);
    if (const auto it = best_memo_.find(key); it != best_memo_.end()) return it->second;
    const double now = stage_penalty(k, delivered);
    double lowest = 1e300;
    std::vector<std::pair<int, int>> picks;
    enumerate_actions(k, delivered, 0, picks, [&]() {
      const double v = branch(k, delivered, picks,
                              [&](std::int64_t kk, const std::vector<std::uint32_t>& d) {
                                return best(kk, d);
                              });
      lowest = std::min(lowest, v);
    });
    const double value = now + lowest;
    best_memo_.emplace(key, value);
    return value;
  }

  double policy_value(std::int64_t k, const std::vector<std::uint32_t>& delivered) {
    if (k >= K_) return 0.0;
    const auto key = key_of(k, delivered);
    if (const auto it = dt_memo_.find(key); it != dt_memo_.end()) return it->second;
    const double now = stage_penalty(k, delivered);
    const auto picks = policy_action(k, delivered);
    const double value =
        now + branch(k, delivered, picks,
                     [&](std::int64_t kk, const std::vector<std::uint32_t>& d) {
                       return policy_value(kk, d);
                     });
    dt_memo_.emplace(key, value);
    return value;
  }

  ScenarioConfig cfg_;
  PenaltySpec spec_;
  std::int64_t K_;
  ArrivalSequence arrivals_;
  int B_ = 0;
  std::vector<std::int64_t> init_u_;
  std::unordered_map<std::uint64_t, double> best_memo_, dt_memo_;
};

}  // namespace detail

// Brute-force optimality certificate for the slotted max-age-first scheduler
// on a small instance: enumerates every causal non-preemptive schedule,
// branching on the coupled error realizations, and reports whether the
// scheduler attains the exact minimum expected penalty sum.
inline OracleReport discrete_optimality_oracle(const ScenarioConfig& cfg, const PenaltySpec& spec) {
  detail::OracleDP dp(cfg, spec);
  return dp.solve();
}

// The slot-frozen objective the oracle optimizes, evaluated on an arbitrary
// engine run: sum over k = 0..K-1 of penalty(age vector at slot k).
inline double slot_penalty_sum(const ScenarioConfig& cfg, const PenaltySpec& spec,
                               const std::vector<std::vector<std::int64_t>>& age_matrix) {
  double total = 0.0;
  for (std::int64_t k = 0; k + 1 < static_cast<std::int64_t>(age_matrix.size()); ++k) {
    std::vector<double> ages;
    for (auto a : age_matrix[static_cast<std::size_t>(k)])
      ages.push_back(static_cast<double>(a) * cfg.slot);
    total += evaluate_penalty(spec, ages);
  }
  return total;
}

}  // namespace aoi
