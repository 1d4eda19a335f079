#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>

#include "aoi/random.hpp"

namespace aoi {

enum class DistKind { exponential, shifted_exponential, deterministic };

// Service-time law. ccdf() is the analytic survival function used by the
// new-better-than-used check and by goodness-of-fit tests.
struct ServiceDist {
  DistKind kind = DistKind::exponential;
  double rate = 1.0;   // exponential tail rate
  double shift = 0.0;  // shifted_exponential only
  double value = 1.0;  // deterministic only

  static ServiceDist exponential(double rate) {
    if (rate <= 0.0) throw std::invalid_argument("service dist: rate must be positive");
    ServiceDist d;
    d.kind = DistKind::exponential;
    d.rate = rate;
    return d;
  }

  static ServiceDist shifted_exponential(double shift, double rate) {
    if (rate <= 0.0) throw std::invalid_argument("service dist: rate must be positive");
    if (shift < 0.0) throw std::invalid_argument("service dist: shift must be nonnegative");
    ServiceDist d;
    d.kind = DistKind::shifted_exponential;
    d.shift = shift;
    d.rate = rate;
    return d;
  }

  static ServiceDist deterministic(double value) {
    if (value <= 0.0) throw std::invalid_argument("service dist: value must be positive");
    ServiceDist d;
    d.kind = DistKind::deterministic;
    d.value = value;
    return d;
  }

  double sample(Rng& rng) const {
    switch (kind) {
      case DistKind::exponential: return rng.exponential(rate);
      case DistKind::shifted_exponential: return shift + rng.exponential(rate);
      case DistKind::deterministic: return value;
    }
    throw std::logic_error("unreachable dist kind");
  }

  double mean() const {
    switch (kind) {
      case DistKind::exponential: return 1.0 / rate;
      case DistKind::shifted_exponential: return shift + 1.0 / rate;
      case DistKind::deterministic: return value;
    }
    throw std::logic_error("unreachable dist kind");
  }

  // P[X > x].
  double ccdf(double x) const {
    if (x < 0.0) return 1.0;
    switch (kind) {
      case DistKind::exponential: return std::exp(-rate * x);
      case DistKind::shifted_exponential:
        return x < shift ? 1.0 : std::exp(-rate * (x - shift));
      case DistKind::deterministic: return x < value ? 1.0 : 0.0;
    }
    throw std::logic_error("unreachable dist kind");
  }

  std::string describe() const {
    switch (kind) {
      case DistKind::exponential: return "exponential{rate=" + std::to_string(rate) + "}";
      case DistKind::shifted_exponential:
        return "shifted_exponential{shift=" + std::to_string(shift) +
               ",rate=" + std::to_string(rate) + "}";
      case DistKind::deterministic: return "deterministic{value=" + std::to_string(value) + "}";
    }
    return "?";
  }
};

struct NbuReport {
  bool is_nbu = true;
  double worst_slack = 0.0;  // max over the grid of ccdf(a+b) - ccdf(a)*ccdf(b)
  double worst_a = 0.0;
  double worst_b = 0.0;
};

// Checks the new-better-than-used property ccdf(a+b) <= ccdf(a)*ccdf(b) over
// all grid pairs, with a small tolerance for floating evaluation of the
// analytic survival functions.
inline NbuReport nbu_check(const ServiceDist& dist, std::span<const double> grid,
                           double tol = 1e-12) {
  NbuReport rep;
  rep.worst_slack = -std::numeric_limits<double>::infinity();
  for (double a : grid) {
    if (a < 0.0) throw std::invalid_argument("nbu_check: grid values must be nonnegative");
    for (double b : grid) {
      const double slack = dist.ccdf(a + b) - dist.ccdf(a) * dist.ccdf(b);
      if (slack > rep.worst_slack) {
        rep.worst_slack = slack;
        rep.worst_a = a;
        rep.worst_b = b;
      }
    }
  }
  if (grid.empty()) rep.worst_slack = 0.0;
  rep.is_nbu = rep.worst_slack <= tol;
  return rep;
}

}  // namespace aoi
