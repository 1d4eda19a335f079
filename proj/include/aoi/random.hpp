#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

namespace aoi {

// splitmix64: seed scrambler used to derive substream seeds from (master, tag)
// pairs. Distinct tags give decorrelated streams.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// One substream. Transforms are hand-rolled on top of mt19937_64 so that the
// draw sequence is identical on every platform (the standard pins the engine
// output but not the library distributions).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() {
    ++draws_;
    return eng_();
  }

  // Uniform on [0, 1) with 53 random mantissa bits.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Inverse-CDF exponential; log1p keeps precision near u = 0.
  double exponential(double rate) {
    if (rate <= 0.0) throw std::invalid_argument("exponential rate must be positive");
    return -std::log1p(-uniform01()) / rate;
  }

  bool bernoulli(double p) { return uniform01() < p; }

  // Unbiased draw from {0, .., n-1} by rejection.
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("below(0)");
    const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
    const std::uint64_t limit = max - max % n;
    std::uint64_t v = next_u64();
    while (v >= limit) v = next_u64();
    return v % n;
  }

  // Number of raw engine draws consumed so far. Lets tests assert that a
  // stream's consumption depends only on the event schedule.
  std::uint64_t draw_count() const { return draws_; }

 private:
  std::mt19937_64 eng_;
  std::uint64_t draws_ = 0;
};

// Named substreams for one run, all derived from a single master seed.
// Substreams never interleave: arrivals, error bits, per-server service draws
// and policy randomization each consume their own generator, so any one of
// them replays bit-exactly regardless of what the others were used for.
class RandomStreams {
 public:
  RandomStreams(std::uint64_t master_seed, int n_servers)
      : master_seed_(master_seed),
        arrivals_(derive(1)),
        error_bits_(derive(2)),
        policy_(derive(3)) {
    service_.reserve(static_cast<std::size_t>(n_servers));
    for (int k = 0; k < n_servers; ++k) service_.emplace_back(derive(16 + static_cast<std::uint64_t>(k)));
  }

  std::uint64_t master_seed() const { return master_seed_; }

  Rng& arrivals() { return arrivals_; }
  Rng& error_bits() { return error_bits_; }
  Rng& policy() { return policy_; }
  Rng& service(int server) { return service_.at(static_cast<std::size_t>(server)); }
  int n_service_streams() const { return static_cast<int>(service_.size()); }

  // Extra policy substream for the i-th run of a coupled comparison. Keeps
  // randomized policies decorrelated from each other and from the shared
  // arrival/service/error draws.
  Rng policy_stream(int run_index) const {
    return Rng(derive(1024 + static_cast<std::uint64_t>(run_index)));
  }

 private:
  std::uint64_t derive(std::uint64_t tag) const {
    return splitmix64(master_seed_ ^ splitmix64(tag));
  }

  std::uint64_t master_seed_;
  Rng arrivals_;
  Rng error_bits_;
  Rng policy_;
  std::vector<Rng> service_;
};

}  // namespace aoi
