#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "aoi/config.hpp"
#include "aoi/random.hpp"

namespace aoi {

// One synchronized generation event: every flow gets a packet stamped with the
// same generation time s_gen and the same arrival time a_arr. Slot fields are
// set in discrete mode, TimePoint::no_slot otherwise.
struct Batch {
  double s_gen = 0.0;
  double a_arr = 0.0;
  std::int64_t s_slot = -1;
  std::int64_t a_slot = -1;
};

// Batches ordered by generation time; arrival times need not be monotone.
struct ArrivalSequence {
  std::vector<Batch> batches;
};

namespace detail {

inline double draw_delay(const ArrivalSpec& spec, Rng& rng) {
  switch (spec.delay_model) {
    case DelayModel::none: return 0.0;
    case DelayModel::two_point:
      return rng.bernoulli(0.5) ? spec.resolved_delay_high() : spec.delay_low;
  }
  throw std::logic_error("unreachable delay model");
}

}  // namespace detail

// Draws the synchronized generation/arrival sequence on [0, horizon]. All
// generation gaps and delay choices come from the single arrivals stream, in
// generation order, so the sequence replays bit-exactly from the seed. A zero
// horizon yields no generations (aside from requested priming batches at 0).
inline ArrivalSequence gen_synchronized_arrivals(const ArrivalSpec& spec, double horizon,
                                                 Rng& rng) {
  if (spec.model == ArrivalModel::poisson && spec.gen_rate <= 0.0)
    throw std::invalid_argument("gen_synchronized_arrivals: gen_rate must be positive");
  if (spec.model == ArrivalModel::periodic && spec.period <= 0.0)
    throw std::invalid_argument("gen_synchronized_arrivals: period must be positive");
  if (horizon < 0.0) throw std::invalid_argument("gen_synchronized_arrivals: negative horizon");

  ArrivalSequence seq;
  for (int i = 0; i < spec.initial_batches; ++i) seq.batches.push_back(Batch{0.0, 0.0, -1, -1});

  if (horizon == 0.0) return seq;

  if (spec.model == ArrivalModel::poisson) {
    double t = rng.exponential(spec.gen_rate);
    while (t <= horizon) {
      Batch b;
      b.s_gen = t;
      b.a_arr = t + detail::draw_delay(spec, rng);
      seq.batches.push_back(b);
      t += rng.exponential(spec.gen_rate);
    }
  } else {
    for (double t = 0.0; t <= horizon; t += spec.period) {
      Batch b;
      b.s_gen = t;
      b.a_arr = t + detail::draw_delay(spec, rng);
      seq.batches.push_back(b);
    }
  }
  return seq;
}

// Discrete-mode variant: one Bernoulli coin per slot decides whether a batch
// is generated at that slot boundary, with success probability gen_rate * slot
// (clamped to 1). Delays are quantized to whole slots by rounding.
inline ArrivalSequence gen_synchronized_arrivals_slotted(const ArrivalSpec& spec,
                                                         std::int64_t horizon_slots, double slot,
                                                         Rng& rng) {
  if (spec.gen_rate <= 0.0)
    throw std::invalid_argument("gen_synchronized_arrivals_slotted: gen_rate must be positive");
  if (slot <= 0.0) throw std::invalid_argument("gen_synchronized_arrivals_slotted: bad slot");

  ArrivalSequence seq;
  auto push = [&](std::int64_t gen_slot, std::int64_t arr_slot) {
    Batch b;
    b.s_slot = gen_slot;
    b.a_slot = arr_slot;
    b.s_gen = static_cast<double>(gen_slot) * slot;
    b.a_arr = static_cast<double>(arr_slot) * slot;
    seq.batches.push_back(b);
  };

  for (int i = 0; i < spec.initial_batches; ++i) push(0, 0);

  const double p = std::min(1.0, spec.gen_rate * slot);
  for (std::int64_t k = 1; k <= horizon_slots; ++k) {
    if (!rng.bernoulli(p)) continue;
    const double delay = detail::draw_delay(spec, rng);
    const auto delay_slots = static_cast<std::int64_t>(delay / slot + 0.5);
    push(k, k + delay_slots);
  }
  return seq;
}

}  // namespace aoi
