#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "aoi/age_process.hpp"

namespace aoi {

// Non-decreasing tabulated function with linear interpolation between knots
// and constant continuation outside them (which preserves monotonicity).
struct MonotoneTable {
  std::vector<double> x;
  std::vector<double> y;

  static MonotoneTable make(std::vector<double> xs, std::vector<double> ys) {
    if (xs.size() != ys.size() || xs.size() < 2)
      throw std::invalid_argument("MonotoneTable: need matching x/y with at least two knots");
    for (std::size_t i = 1; i < xs.size(); ++i) {
      if (!(xs[i] > xs[i - 1])) throw std::invalid_argument("MonotoneTable: x must increase");
      if (ys[i] < ys[i - 1]) throw std::invalid_argument("MonotoneTable: y must be non-decreasing");
    }
    return MonotoneTable{std::move(xs), std::move(ys)};
  }

  double operator()(double v) const {
    if (v <= x.front()) return y.front();
    if (v >= x.back()) return y.back();
    const auto it = std::upper_bound(x.begin(), x.end(), v);
    const auto i = static_cast<std::size_t>(it - x.begin());
    const double w = (v - x[i - 1]) / (x[i] - x[i - 1]);
    return y[i - 1] + w * (y[i] - y[i - 1]);
  }
};

enum class PenaltyKind { avg, max, ms, lnorm, sum_table };

// Symmetric non-decreasing penalty of the age vector: mean, maximum, mean
// square, l-norm (l >= 1), or a sum of one identical tabulated per-flow term.
struct PenaltySpec {
  PenaltyKind kind = PenaltyKind::avg;
  double l = 2.0;
  MonotoneTable g;

  static PenaltySpec avg() { return PenaltySpec{PenaltyKind::avg, 2.0, {}}; }
  static PenaltySpec max() { return PenaltySpec{PenaltyKind::max, 2.0, {}}; }
  static PenaltySpec ms() { return PenaltySpec{PenaltyKind::ms, 2.0, {}}; }
  static PenaltySpec lnorm(double l) {
    if (l < 1.0) throw std::invalid_argument("lnorm penalty needs l >= 1");
    return PenaltySpec{PenaltyKind::lnorm, l, {}};
  }
  static PenaltySpec sum_of(MonotoneTable table) {
    return PenaltySpec{PenaltyKind::sum_table, 2.0, std::move(table)};
  }

  const char* name() const {
    switch (kind) {
      case PenaltyKind::avg: return "avg";
      case PenaltyKind::max: return "max";
      case PenaltyKind::ms: return "ms";
      case PenaltyKind::lnorm: return "lnorm";
      case PenaltyKind::sum_table: return "sum";
    }
    return "?";
  }
};

// Time-dependent penalty: spec[i] applies on [start[i], start[i+1]).
struct PenaltySchedule {
  std::vector<double> start;
  std::vector<PenaltySpec> spec;

  static PenaltySchedule constant(PenaltySpec s) { return PenaltySchedule{{0.0}, {std::move(s)}}; }

  static PenaltySchedule make(std::vector<double> starts, std::vector<PenaltySpec> specs) {
    if (starts.size() != specs.size() || starts.empty())
      throw std::invalid_argument("PenaltySchedule: need matching starts/specs");
    if (starts.front() != 0.0) throw std::invalid_argument("PenaltySchedule: must start at 0");
    for (std::size_t i = 1; i < starts.size(); ++i)
      if (!(starts[i] > starts[i - 1]))
        throw std::invalid_argument("PenaltySchedule: starts must increase");
    return PenaltySchedule{std::move(starts), std::move(specs)};
  }

  const PenaltySpec& at(double t) const {
    auto it = std::upper_bound(start.begin(), start.end(), t);
    return spec[static_cast<std::size_t>(it - start.begin()) - 1];
  }
};

inline double evaluate_penalty(const PenaltySpec& spec, std::span<const double> ages) {
  if (ages.empty()) throw std::invalid_argument("evaluate_penalty: empty age vector");
  for (double a : ages)
    if (a < 0.0) throw std::invalid_argument("evaluate_penalty: ages must be nonnegative");
  const auto n = static_cast<double>(ages.size());
  switch (spec.kind) {
    case PenaltyKind::avg: {
      double s = 0.0;
      for (double a : ages) s += a;
      return s / n;
    }
    case PenaltyKind::max: {
      double m = ages[0];
      for (double a : ages) m = std::max(m, a);
      return m;
    }
    case PenaltyKind::ms: {
      double s = 0.0;
      for (double a : ages) s += a * a;
      return s / n;
    }
    case PenaltyKind::lnorm: {
      if (spec.l < 1.0) throw std::invalid_argument("evaluate_penalty: l < 1");
      double s = 0.0;
      for (double a : ages) s += std::pow(a, spec.l);
      return std::pow(s, 1.0 / spec.l);
    }
    case PenaltyKind::sum_table: {
      if (spec.g.x.empty()) throw std::invalid_argument("evaluate_penalty: missing table");
      double s = 0.0;
      for (double a : ages) s += spec.g(a);
      return s;
    }
  }
  throw std::logic_error("unreachable penalty kind");
}

namespace detail {

// Adaptive Simpson with relative tolerance; exact for polynomials up to cubic.
template <class F>
double simpson_step(F&& f, double a, double fa, double b, double fb, double m, double fm,
                    double whole, double tol, int depth) {
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return simpson_step(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1) +
         simpson_step(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1);
}

template <class F>
double adaptive_simpson(F&& f, double a, double b, double rel_tol) {
  if (b <= a) return 0.0;
  const double fa = f(a), fb = f(b), m = 0.5 * (a + b), fm = f(m);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  const double tol = std::max(std::abs(whole), 1e-300) * rel_tol;
  return simpson_step(f, a, fa, b, fb, m, fm, whole, tol, 48);
}

// Exact integral of one segment [a, b) where every flow's age is c_n + t.
// Every flow shares slope 1, so avg and max stay linear across the segment
// and ms is a quadratic with a closed-form antiderivative.
inline double segment_integral(const PenaltySpec& spec, std::span<const double> c, double a,
                               double b) {
  const auto n = static_cast<double>(c.size());
  switch (spec.kind) {
    case PenaltyKind::avg: {
      double s = 0.0;
      for (double cn : c) s += cn;
      const double mid = 0.5 * (a + b);
      return (s / n + mid) * (b - a);
    }
    case PenaltyKind::max: {
      double m = c[0];
      for (double cn : c) m = std::max(m, cn);
      const double mid = 0.5 * (a + b);
      return (m + mid) * (b - a);
    }
    case PenaltyKind::ms: {
      double s = 0.0;
      for (double cn : c) {
        const double hi = cn + b, lo = cn + a;
        s += (hi * hi * hi - lo * lo * lo) / 3.0;
      }
      return s / n;
    }
    case PenaltyKind::lnorm: {
      auto f = [&](double t) {
        double s = 0.0;
        for (double cn : c) s += std::pow(cn + t, spec.l);
        return std::pow(s, 1.0 / spec.l);
      };
      return adaptive_simpson(f, a, b, 1e-9);
    }
    case PenaltyKind::sum_table: {
      // Cut at every table knot crossing so each piece is linear in t, where
      // the trapezoid rule is exact.
      std::vector<double> cuts{a, b};
      for (double cn : c)
        for (double xk : spec.g.x) {
          const double t = xk - cn;
          if (t > a && t < b) cuts.push_back(t);
        }
      std::sort(cuts.begin(), cuts.end());
      double total = 0.0;
      auto value = [&](double t) {
        double s = 0.0;
        for (double cn : c) s += spec.g(cn + t);
        return s;
      };
      for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
        total += 0.5 * (value(cuts[i]) + value(cuts[i + 1])) * (cuts[i + 1] - cuts[i]);
      return total;
    }
  }
  throw std::logic_error("unreachable penalty kind");
}

}  // namespace detail

// (1/T) * integral over [0, T] of penalty(age vector at t). Exact per linear
// segment for avg, max, ms and tabulated sums; adaptive quadrature at
// relative tolerance 1e-9 for general l-norms. Flows must share the horizon
// they were built over, and T must equal it.
inline double time_average_penalty(const std::vector<const AgeSeries*>& flows,
                                   const PenaltySchedule& schedule, double horizon) {
  if (flows.empty()) throw std::invalid_argument("time_average_penalty: no flows");
  if (horizon <= 0.0) throw std::invalid_argument("time_average_penalty: horizon must be positive");
  for (const AgeSeries* s : flows)
    if (s->horizon != horizon)
      throw std::invalid_argument("time_average_penalty: series built over a different horizon");

  // Pooled breakpoints: every flow's knots, plus schedule switches, plus T.
  std::vector<double> cuts{0.0, horizon};
  for (const AgeSeries* s : flows)
    for (double k : s->knot)
      if (k > 0.0 && k < horizon) cuts.push_back(k);
  for (double t : schedule.start)
    if (t > 0.0 && t < horizon) cuts.push_back(t);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  const auto n = flows.size();
  std::vector<std::size_t> cursor(n, 0);
  std::vector<double> c(n);
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double a = cuts[i], b = cuts[i + 1];
    for (std::size_t f = 0; f < n; ++f) {
      const auto& s = *flows[f];
      auto& cur = cursor[f];
      while (cur + 1 < s.knot.size() && s.knot[cur + 1] <= a) ++cur;
      c[f] = s.base[cur] - s.knot[cur];  // age at t is c[f] + t on this segment
    }
    total += detail::segment_integral(schedule.at(a), c, a, b);
  }
  return total / horizon;
}

inline double time_average_penalty(const std::vector<const AgeSeries*>& flows,
                                   const PenaltySpec& spec, double horizon) {
  return time_average_penalty(flows, PenaltySchedule::constant(spec), horizon);
}

}  // namespace aoi
