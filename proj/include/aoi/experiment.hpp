#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "aoi/config.hpp"
#include "aoi/engine.hpp"
#include "aoi/io.hpp"
#include "aoi/penalty.hpp"

namespace aoi {

// start:stop:step sweep, inclusive of stop up to half a step of float slack.
struct SweepSpec {
  double start = 0.0;
  double stop = 0.0;
  double step = 1.0;

  static SweepSpec parse(const std::string& text) {
    SweepSpec s;
    const auto c1 = text.find(':');
    const auto c2 = c1 == std::string::npos ? std::string::npos : text.find(':', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos)
      throw std::invalid_argument("sweep must be start:stop:step, got: " + text);
    s.start = std::stod(text.substr(0, c1));
    s.stop = std::stod(text.substr(c1 + 1, c2 - c1 - 1));
    s.step = std::stod(text.substr(c2 + 1));
    if (s.step <= 0.0) throw std::invalid_argument("sweep step must be positive");
    if (s.stop < s.start) throw std::invalid_argument("sweep stop must be at least start");
    return s;
  }

  std::vector<double> points() const {
    std::vector<double> out;
    for (int i = 0;; ++i) {
      const double v = start + step * i;
      if (v > stop + step * 0.5) break;
      out.push_back(v);
    }
    return out;
  }
};

// One figure-style experiment: a base scenario swept over utilization for a
// list of policies. Utilization rho maps to the batch generation rate via
// lambda = rho * M / N (each batch is N packets served by M servers).
struct ExperimentPlan {
  std::string name;
  ScenarioConfig base;
  PenaltySpec penalty = PenaltySpec::avg();
  std::vector<std::string> policies;
  SweepSpec rho{0.2, 1.4, 0.2};
  int reps = 200;
  // Adds a served-age series for this policy: the same time-average penalty
  // evaluated on the served-information age, the run's own lower bound.
  std::string served_series_policy;
};

inline double lambda_of(double rho, int n_servers, int n_flows) {
  return rho * static_cast<double>(n_servers) / static_cast<double>(n_flows);
}

// Three flows racing for one error-free exponential server, scored by the
// time-average of the maximum age.
inline ExperimentPlan plan_fig4() {
  ExperimentPlan plan;
  plan.name = "fig4";
  plan.base.n_flows = 3;
  plan.base.n_servers = 1;
  plan.base.error_prob = 0.0;
  plan.base.mode = Mode::continuous;
  plan.base.service_dist = ServiceDist::exponential(1.0);
  plan.base.horizon = 10000.0;
  plan.base.seed = 7;
  plan.penalty = PenaltySpec::max();
  plan.policies = {"p-maf-lgfs", "p-maf-fcfs", "rand-lgfs", "rand-fcfs"};
  plan.rho = SweepSpec{0.2, 1.4, 0.2};
  return plan;
}

// Fifty flows on three servers with shifted-exponential service (mean one),
// scored by the time-average of the average age, plus the served-age lower
// bound for the non-preemptive serve-freshest-by-served-age policy.
inline ExperimentPlan plan_fig5() {
  ExperimentPlan plan;
  plan.name = "fig5";
  plan.base.n_flows = 50;
  plan.base.n_servers = 3;
  plan.base.error_prob = 0.0;
  plan.base.mode = Mode::continuous;
  plan.base.service_dist = ServiceDist::shifted_exponential(1.0 / 3.0, 3.0 / 2.0);
  plan.base.horizon = 10000.0;
  plan.base.seed = 7;
  plan.penalty = PenaltySpec::avg();
  plan.policies = {"np-masif-lgfs", "np-maf-lgfs", "np-maf-fcfs", "rand-lgfs", "rand-fcfs"};
  plan.rho = SweepSpec{0.2, 1.4, 0.2};
  plan.served_series_policy = "np-masif-lgfs";
  return plan;
}

inline ExperimentPlan plan_by_name(const std::string& name) {
  if (name == "fig4") return plan_fig4();
  if (name == "fig5") return plan_fig5();
  throw std::invalid_argument("unknown preset: " + name + " (expected fig4 or fig5)");
}

struct ExperimentOverrides {
  std::optional<SweepSpec> rho;
  std::optional<int> reps;
  std::optional<std::uint64_t> seed;
  std::optional<double> horizon;
  std::vector<std::string> policies;
};

inline ExperimentPlan apply_overrides(ExperimentPlan plan, const ExperimentOverrides& ov) {
  if (ov.rho) plan.rho = *ov.rho;
  if (ov.reps) plan.reps = *ov.reps;
  if (ov.seed) plan.base.seed = *ov.seed;
  if (ov.horizon) plan.base.horizon = *ov.horizon;
  if (!ov.policies.empty()) plan.policies = ov.policies;
  return plan;
}

inline ScenarioConfig scenario_at(const ExperimentPlan& plan, const std::string& policy,
                                  double rho) {
  ScenarioConfig cfg = plan.base;
  cfg.arrival_spec.gen_rate = lambda_of(rho, cfg.n_servers, cfg.n_flows);
  cfg.policy_spec = parse_policy(policy);
  return cfg;
}

// Rows in (policy, rho) order. Every policy at a given replication index sees
// the same seed, hence the same arrival realization: the curves differ only
// through scheduling, which is what makes pointwise comparisons meaningful.
inline std::vector<ExperimentRow> run_experiment(const ExperimentPlan& plan) {
  std::vector<ExperimentRow> rows;
  const auto rhos = plan.rho.points();
  const std::string metric = std::string("p_") + plan.penalty.name();
  for (const std::string& policy : plan.policies) {
    for (double rho : rhos) {
      const ScenarioConfig cfg = scenario_at(plan, policy, rho);
      const auto stats = replicate(cfg, plan.penalty, plan.reps, cfg.seed);
      rows.push_back(ExperimentRow{policy, rho, cfg.arrival_spec.gen_rate, cfg.seed, plan.reps,
                                   metric, stats.mean, stats.ci95});
      if (policy == plan.served_series_policy) {
        const auto lower = replicate(cfg, plan.penalty, plan.reps, cfg.seed, /*served=*/true);
        rows.push_back(ExperimentRow{policy, rho, cfg.arrival_spec.gen_rate, cfg.seed, plan.reps,
                                     metric + "_served", lower.mean, lower.ci95});
      }
    }
  }
  return rows;
}

// Resolved description of the run, echoed next to the CSV so the output
// carries its own provenance.
inline Json plan_provenance(const ExperimentPlan& plan) {
  Json j;
  j["preset"] = plan.name;
  j["penalty"] = std::string("p_") + plan.penalty.name();
  j["policies"] = plan.policies;
  j["rho"] = plan.rho.points();
  j["replications"] = plan.reps;
  if (!plan.served_series_policy.empty()) j["served_series_policy"] = plan.served_series_policy;
  j["base"] = config_to_json(plan.base);
  return j;
}

}  // namespace aoi
