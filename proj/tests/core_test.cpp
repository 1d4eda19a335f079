#include <catch2/catch_amalgamated.hpp>

#include "aoi/config.hpp"
#include "aoi/packet.hpp"
#include "aoi/time.hpp"

using namespace aoi;

TEST_CASE("slotted time points carry exact slot indices") {
  const auto t = TimePoint::slotted(7, 0.5);
  CHECK(t.seconds == 3.5);
  CHECK(t.slot == 7);
  CHECK(t.is_slotted());

  const auto c = TimePoint::continuous(3.5);
  CHECK(c.seconds == 3.5);
  CHECK_FALSE(c.is_slotted());
  CHECK(c.slot == TimePoint::no_slot);

  CHECK(TimePoint::slotted(0, 1.0) == TimePoint::slotted(0, 2.0));
  CHECK(TimePoint::continuous(1.0) < TimePoint::continuous(2.0));
}

TEST_CASE("policy names parse to the advertised disciplines") {
  const auto p = parse_policy("p-maf-lgfs");
  CHECK(p.flow == FlowDiscipline::maf);
  CHECK(p.packet == PacketDiscipline::lgfs);
  CHECK(p.preemptive);
  CHECK_FALSE(p.replication);
  CHECK(p.exclusive);
  CHECK(p.work_conserving);

  const auto pr = parse_policy("p-maf-lgfs-r");
  CHECK(pr.replication);
  CHECK(pr.preemptive);
  CHECK(pr.exclusive);

  const auto masif = parse_policy("np-masif-lgfs");
  CHECK(masif.flow == FlowDiscipline::masif);
  CHECK(masif.packet == PacketDiscipline::lgfs);
  CHECK_FALSE(masif.preemptive);
  CHECK(masif.exclusive);

  const auto dt = parse_policy("dt-maf-lgfs");
  CHECK(dt.flow == FlowDiscipline::maf);
  CHECK_FALSE(dt.preemptive);
  CHECK(dt.exclusive);

  // FCFS never preempts: preempting in favor of an older packet cannot help,
  // so the p- prefix is accepted as an alias of the non-preemptive policy.
  const auto alias = parse_policy("p-maf-fcfs");
  CHECK(alias.packet == PacketDiscipline::fcfs);
  CHECK_FALSE(alias.preemptive);
  CHECK(alias.name == "p-maf-fcfs");
  const auto plain = parse_policy("maf-fcfs");
  CHECK(plain.flow == alias.flow);
  CHECK(plain.packet == alias.packet);
  CHECK(plain.preemptive == alias.preemptive);
  CHECK(plain.exclusive == alias.exclusive);

  for (const char* name : {"np-maf-lgfs", "np-maf-fcfs", "rand-lgfs", "rand-fcfs"}) {
    const auto b = parse_policy(name);
    CHECK_FALSE(b.preemptive);
    CHECK_FALSE(b.replication);
    CHECK(b.exclusive);  // never two servers on one flow without replication
    CHECK(b.work_conserving);
  }
  CHECK(parse_policy("rand-lgfs").flow == FlowDiscipline::rnd);
  CHECK(parse_policy("rand-fcfs").packet == PacketDiscipline::fcfs);

  CHECK_THROWS_AS(parse_policy("bogus"), std::invalid_argument);
  CHECK_THROWS_AS(parse_policy("maf"), std::invalid_argument);
  CHECK_THROWS_AS(parse_policy("newest-first"), std::invalid_argument);
}

TEST_CASE("scenario validation accepts the canonical setups") {
  ScenarioConfig cfg;
  cfg.n_flows = 3;
  cfg.n_servers = 1;
  cfg.error_prob = 0.0;
  cfg.service_dist = ServiceDist::exponential(1.0);
  CHECK(validate_scenario(cfg).ok);

  SECTION("q = 1 never delivers and is rejected") {
    cfg.error_prob = 1.0;
    CHECK_FALSE(validate_scenario(cfg).ok);
  }
  SECTION("negative q rejected") {
    cfg.error_prob = -0.1;
    CHECK_FALSE(validate_scenario(cfg).ok);
  }
  SECTION("discrete mode requires a slot-long deterministic service") {
    cfg.mode = Mode::discrete;
    cfg.slot = 1.0;
    cfg.policy_spec = parse_policy("dt-maf-lgfs");
    CHECK_FALSE(validate_scenario(cfg).ok);  // exponential cannot be slotted
    cfg.service_dist = ServiceDist::deterministic(1.0);
    CHECK(validate_scenario(cfg).ok);
    cfg.service_dist = ServiceDist::deterministic(0.5);
    CHECK_FALSE(validate_scenario(cfg).ok);  // value must equal the slot
  }
  SECTION("discrete mode rejects preemptive policies") {
    cfg.mode = Mode::discrete;
    cfg.service_dist = ServiceDist::deterministic(1.0);
    cfg.policy_spec = parse_policy("p-maf-lgfs");
    CHECK_FALSE(validate_scenario(cfg).ok);
  }
  SECTION("discrete initial ages must sit on the slot grid") {
    cfg.mode = Mode::discrete;
    cfg.service_dist = ServiceDist::deterministic(1.0);
    cfg.policy_spec = parse_policy("dt-maf-lgfs");
    cfg.initial_age = {1.0, 2.0, 0.5};
    CHECK_FALSE(validate_scenario(cfg).ok);
    cfg.initial_age = {1.0, 2.0, 3.0};
    CHECK(validate_scenario(cfg).ok);
  }
  SECTION("replication needs memoryless service") {
    cfg.policy_spec = parse_policy("p-maf-lgfs-r");
    CHECK(validate_scenario(cfg).ok);
    cfg.service_dist = ServiceDist::deterministic(1.0);
    CHECK_FALSE(validate_scenario(cfg).ok);
  }
  SECTION("initial_age length must match the flow count") {
    cfg.initial_age = {1.0};
    CHECK_FALSE(validate_scenario(cfg).ok);
    cfg.initial_age = {1.0, 2.0, 3.0};
    CHECK(validate_scenario(cfg).ok);
    cfg.initial_age = {1.0, -2.0, 3.0};
    CHECK_FALSE(validate_scenario(cfg).ok);
  }
  SECTION("zero horizon is a legal degenerate run") {
    cfg.horizon = 0.0;
    CHECK(validate_scenario(cfg).ok);
    cfg.horizon = -1.0;
    CHECK_FALSE(validate_scenario(cfg).ok);
  }
}

TEST_CASE("simultaneous events rank deliveries before starts before arrivals") {
  CHECK(event_kind_priority(EventKind::delivery_success) <
        event_kind_priority(EventKind::delivery_error));
  CHECK(event_kind_priority(EventKind::delivery_error) <
        event_kind_priority(EventKind::preemption));
  CHECK(event_kind_priority(EventKind::preemption) <
        event_kind_priority(EventKind::service_start));
  CHECK(event_kind_priority(EventKind::service_start) <
        event_kind_priority(EventKind::arrival));
}

TEST_CASE("packet ids are dense in (generation index, flow)") {
  Event e;
  e.flow = 2;
  e.seq = 1;
  CHECK(e.packet_of(3) == 2);  // first batch occupies ids 0..n_flows-1
  e.seq = 4;
  e.flow = 0;
  CHECK(e.packet_of(3) == 9);
  e.flow = 1;
  CHECK(e.packet_of(3) == 10);
}

TEST_CASE("config helpers: per-flow initial age and slot count") {
  ScenarioConfig cfg;
  cfg.n_flows = 2;
  CHECK(cfg.initial_age_of(0) == 0.0);  // empty list means all zero
  cfg.initial_age = {4.0, 7.0};
  CHECK(cfg.initial_age_of(0) == 4.0);
  CHECK(cfg.initial_age_of(1) == 7.0);

  cfg.horizon = 10.0;
  cfg.slot = 1.0;
  CHECK(cfg.horizon_slots() == 10);
  cfg.slot = 0.25;
  CHECK(cfg.horizon_slots() == 40);
}

TEST_CASE("event kind names round through the printable labels") {
  CHECK(std::string(event_kind_name(EventKind::arrival)) == "arrival");
  CHECK(std::string(event_kind_name(EventKind::service_start)) == "service_start");
  CHECK(std::string(event_kind_name(EventKind::preemption)) == "preemption");
  CHECK(std::string(event_kind_name(EventKind::delivery_success)) == "delivery_success");
  CHECK(std::string(event_kind_name(EventKind::delivery_error)) == "delivery_error");
}
