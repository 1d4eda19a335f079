#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "aoi/dist.hpp"

namespace aoi {

enum class Mode { continuous, discrete };

enum class ArrivalModel { poisson, periodic };
enum class DelayModel { none, two_point };

// Synchronized generation process shared by every flow. Generations follow
// the chosen model; each generation's network delay (arrival minus generation)
// is drawn independently, so arrivals may be out of order.
struct ArrivalSpec {
  ArrivalModel model = ArrivalModel::poisson;
  double gen_rate = 1.0;  // poisson intensity, generations per second
  double period = 1.0;    // periodic model spacing

  DelayModel delay_model = DelayModel::two_point;
  double delay_low = 0.0;
  // two_point high value; negative means "use 4 / gen_rate".
  double delay_high = -1.0;

  // Extra synchronized generations stamped at time zero before the process
  // starts, used to prime a backlog for high-load verification runs.
  int initial_batches = 0;

  double resolved_delay_high() const {
    return delay_high < 0.0 ? 4.0 / gen_rate : delay_high;
  }
};

enum class FlowDiscipline { maf, masif, rnd };
enum class PacketDiscipline { lgfs, fcfs };

// How a scheduler picks work. `exclusive` is the one-server-per-flow rule:
// every preset keeps it on, since the scheduler class under comparison never
// puts two servers on one flow (replication instead duplicates a single
// packet across servers). Coupled verification runs re-assert it for every
// participant.
struct PolicySpec {
  std::string name;  // canonical preset name, used in reports and CSV
  FlowDiscipline flow = FlowDiscipline::maf;
  PacketDiscipline packet = PacketDiscipline::lgfs;
  bool preemptive = false;
  bool replication = false;
  bool exclusive = true;
  bool work_conserving = true;
};

// Parses preset names like "p-maf-lgfs", "np-masif-lgfs", "dt-maf-lgfs",
// "p-maf-lgfs-r", "rand-fcfs", "np-maf-fcfs". Prefix p-/np-/dt- selects
// preemption (LGFS only: preempting in favor of an older packet is useless, so
// FCFS presets always run non-preemptive, and "p-maf-fcfs" is accepted as an
// alias). Suffix -r selects replication.
inline PolicySpec parse_policy(const std::string& name) {
  std::string rest = name;
  bool preempt_prefix = false;
  if (rest.rfind("np-", 0) == 0) {
    rest = rest.substr(3);
  } else if (rest.rfind("dt-", 0) == 0) {
    rest = rest.substr(3);
  } else if (rest.rfind("p-", 0) == 0) {
    preempt_prefix = true;
    rest = rest.substr(2);
  }

  PolicySpec spec;
  spec.name = name;

  bool replication = false;
  if (rest.size() > 2 && rest.rfind("-r") == rest.size() - 2) {
    replication = true;
    rest = rest.substr(0, rest.size() - 2);
  }

  const auto dash = rest.find('-');
  if (dash == std::string::npos) throw std::invalid_argument("unknown policy: " + name);
  const std::string flow = rest.substr(0, dash);
  const std::string packet = rest.substr(dash + 1);

  if (flow == "maf") {
    spec.flow = FlowDiscipline::maf;
  } else if (flow == "masif") {
    spec.flow = FlowDiscipline::masif;
  } else if (flow == "rand") {
    spec.flow = FlowDiscipline::rnd;
  } else {
    throw std::invalid_argument("unknown flow discipline in policy: " + name);
  }

  if (packet == "lgfs") {
    spec.packet = PacketDiscipline::lgfs;
  } else if (packet == "fcfs") {
    spec.packet = PacketDiscipline::fcfs;
  } else {
    throw std::invalid_argument("unknown packet discipline in policy: " + name);
  }

  spec.replication = replication;
  spec.preemptive = preempt_prefix && spec.packet == PacketDiscipline::lgfs;

  // One-server-per-flow holds for every preset: piling a second server onto
  // a flow's older packets is never part of the compared scheduler class.
  spec.exclusive = true;
  return spec;
}

struct ScenarioConfig {
  int n_flows = 1;
  int n_servers = 1;
  double error_prob = 0.0;  // transmission error probability q, realized at completion
  Mode mode = Mode::continuous;
  double slot = 1.0;  // discrete slot length T_s
  ServiceDist service_dist = ServiceDist::exponential(1.0);
  ArrivalSpec arrival_spec;
  double horizon = 10000.0;
  std::uint64_t seed = 1;
  PolicySpec policy_spec = parse_policy("p-maf-lgfs");
  // Age offsets at time zero; empty means all zero.
  std::vector<double> initial_age;

  double initial_age_of(int flow) const {
    if (initial_age.empty()) return 0.0;
    return initial_age.at(static_cast<std::size_t>(flow));
  }

  std::int64_t horizon_slots() const { return static_cast<std::int64_t>(horizon / slot + 0.5); }
};

struct ValidationReport {
  bool ok = true;
  std::vector<std::string> problems;

  void fail(std::string msg) {
    ok = false;
    problems.push_back(std::move(msg));
  }

  std::string joined() const {
    std::string out;
    for (const auto& p : problems) {
      if (!out.empty()) out += "; ";
      out += p;
    }
    return out;
  }
};

inline ValidationReport validate_scenario(const ScenarioConfig& cfg) {
  ValidationReport rep;
  if (cfg.n_flows < 1) rep.fail("n_flows must be at least 1");
  if (cfg.n_servers < 1) rep.fail("n_servers must be at least 1");
  if (cfg.error_prob < 0.0 || cfg.error_prob >= 1.0)
    rep.fail("error_prob must lie in [0, 1); q = 1 would never deliver");
  if (cfg.horizon < 0.0) rep.fail("horizon must be nonnegative");

  if (cfg.arrival_spec.model == ArrivalModel::poisson && cfg.arrival_spec.gen_rate <= 0.0)
    rep.fail("arrival_spec.gen_rate must be positive");
  if (cfg.arrival_spec.model == ArrivalModel::periodic && cfg.arrival_spec.period <= 0.0)
    rep.fail("arrival_spec.period must be positive");
  if (cfg.arrival_spec.initial_batches < 0) rep.fail("arrival_spec.initial_batches must be nonnegative");
  if (cfg.arrival_spec.delay_model == DelayModel::two_point && cfg.arrival_spec.delay_low < 0.0)
    rep.fail("arrival_spec.delay_low must be nonnegative");

  if (!cfg.initial_age.empty() && cfg.initial_age.size() != static_cast<std::size_t>(cfg.n_flows))
    rep.fail("initial_age must have one entry per flow");
  for (double a : cfg.initial_age)
    if (a < 0.0) rep.fail("initial_age entries must be nonnegative");

  if (cfg.mode == Mode::discrete) {
    if (cfg.slot <= 0.0) rep.fail("slot must be positive in discrete mode");
    if (cfg.service_dist.kind != DistKind::deterministic || cfg.service_dist.value != cfg.slot)
      rep.fail("discrete mode requires service_dist = deterministic{slot}; an exponential "
               "service cannot be slotted");
    if (cfg.policy_spec.preemptive) rep.fail("discrete mode runs non-preemptive policies only");
    if (cfg.policy_spec.replication) rep.fail("replication is continuous-mode only");
    for (double a : cfg.initial_age) {
      const auto k = static_cast<std::int64_t>(a / cfg.slot + 0.5);
      if (static_cast<double>(k) * cfg.slot != a)
        rep.fail("discrete initial_age entries must be exact slot multiples");
    }
  }

  if (cfg.policy_spec.replication && cfg.service_dist.kind != DistKind::exponential)
    rep.fail("replication requires exponential service; duplicate copies of one packet are "
             "only a faster single server under a memoryless law");

  return rep;
}

}  // namespace aoi
