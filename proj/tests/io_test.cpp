#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "aoi/engine.hpp"
#include "aoi/io.hpp"

using namespace aoi;

namespace {

std::filesystem::path tmp_dir() {
  const auto dir = std::filesystem::path("io_test_tmp");
  std::filesystem::create_directories(dir);
  return dir;
}

ScenarioConfig odd_config() {
  ScenarioConfig cfg;
  cfg.n_flows = 3;
  cfg.n_servers = 2;
  cfg.error_prob = 0.3;
  cfg.service_dist = ServiceDist::shifted_exponential(1.0 / 3.0, 1.5);
  cfg.arrival_spec.model = ArrivalModel::poisson;
  cfg.arrival_spec.gen_rate = 0.7;
  cfg.arrival_spec.delay_model = DelayModel::two_point;
  cfg.arrival_spec.delay_low = 0.25;
  cfg.arrival_spec.delay_high = -1.0;
  cfg.arrival_spec.initial_batches = 2;
  cfg.horizon = 1234.5678901234567;
  cfg.seed = 123456789012345ULL;
  cfg.policy_spec = parse_policy("p-maf-lgfs-r");
  cfg.initial_age = {0.1, 0.2, 0.3};
  return cfg;
}

bool same_config(const ScenarioConfig& a, const ScenarioConfig& b) {
  return a.n_flows == b.n_flows && a.n_servers == b.n_servers && a.error_prob == b.error_prob &&
         a.mode == b.mode && a.slot == b.slot && a.service_dist.kind == b.service_dist.kind &&
         a.service_dist.rate == b.service_dist.rate &&
         a.service_dist.shift == b.service_dist.shift &&
         a.service_dist.value == b.service_dist.value &&
         a.arrival_spec.model == b.arrival_spec.model &&
         a.arrival_spec.gen_rate == b.arrival_spec.gen_rate &&
         a.arrival_spec.period == b.arrival_spec.period &&
         a.arrival_spec.delay_model == b.arrival_spec.delay_model &&
         a.arrival_spec.delay_low == b.arrival_spec.delay_low &&
         a.arrival_spec.delay_high == b.arrival_spec.delay_high &&
         a.arrival_spec.initial_batches == b.arrival_spec.initial_batches &&
         a.horizon == b.horizon && a.seed == b.seed && a.policy_spec.name == b.policy_spec.name &&
         a.policy_spec.flow == b.policy_spec.flow && a.policy_spec.packet == b.policy_spec.packet &&
         a.policy_spec.preemptive == b.policy_spec.preemptive &&
         a.policy_spec.replication == b.policy_spec.replication &&
         a.policy_spec.exclusive == b.policy_spec.exclusive &&
         a.policy_spec.work_conserving == b.policy_spec.work_conserving &&
         a.initial_age == b.initial_age;
}

}  // namespace

TEST_CASE("full-precision doubles survive a text round trip") {
  for (double v : {0.1, 1.0 / 3.0, 1234.5678901234567, 1e300, 5e-324, 0.0}) {
    const auto s = fmt_full(v);
    CHECK(std::strtod(s.c_str(), nullptr) == v);
  }
  CHECK(fmt_g10(0.2) == "0.2");
  CHECK(fmt_g10(1.0 / 3.0) == "0.3333333333");
}

TEST_CASE("service specifications serialize with a type tag") {
  const auto j = dist_to_json(ServiceDist::exponential(1.5));
  CHECK(j.at("type") == "exponential");
  CHECK(j.at("rate") == 1.5);
  const auto d = dist_from_json(j);
  CHECK(d.kind == DistKind::exponential);
  CHECK(d.rate == 1.5);

  const auto s = dist_from_json(dist_to_json(ServiceDist::shifted_exponential(0.25, 2.0)));
  CHECK(s.kind == DistKind::shifted_exponential);
  CHECK(s.shift == 0.25);
  CHECK(s.rate == 2.0);

  const auto det = dist_from_json(dist_to_json(ServiceDist::deterministic(1.0)));
  CHECK(det.kind == DistKind::deterministic);
  CHECK(det.value == 1.0);

  CHECK_THROWS_AS(dist_from_json(Json{{"type", "uniform"}, {"rate", 1.0}}),
                  std::invalid_argument);
}

TEST_CASE("scenario configurations round trip bit for bit") {
  const auto cfg = odd_config();
  const auto j = config_to_json(cfg);

  // Exactly the contracted field set, nothing extra.
  const std::vector<std::string> keys{"n_flows",      "n_servers", "error_prob", "mode",
                                      "slot",         "service_dist", "arrival_spec",
                                      "horizon",      "seed",      "policy_spec", "initial_age"};
  CHECK(j.size() == keys.size());
  for (const auto& k : keys) CHECK(j.contains(k));

  const auto back = config_from_json(Json::parse(j.dump()));
  CHECK(same_config(cfg, back));

  SECTION("discrete setups keep their slot grid") {
    ScenarioConfig d;
    d.n_flows = 2;
    d.mode = Mode::discrete;
    d.slot = 0.5;
    d.service_dist = ServiceDist::deterministic(0.5);
    d.policy_spec = parse_policy("dt-maf-lgfs");
    d.initial_age = {1.0, 1.5};
    const auto b = config_from_json(Json::parse(config_to_json(d).dump()));
    CHECK(same_config(d, b));
  }
  SECTION("a policy may be given as a bare preset name") {
    auto jj = config_to_json(cfg);
    jj["policy_spec"] = "np-masif-lgfs";
    const auto b = config_from_json(jj);
    CHECK(b.policy_spec.flow == FlowDiscipline::masif);
    CHECK(b.policy_spec.exclusive);
  }
  SECTION("missing fields are rejected") {
    auto jj = config_to_json(cfg);
    jj.erase("seed");
    CHECK_THROWS(config_from_json(jj));
  }
  SECTION("file save and load") {
    const auto path = (tmp_dir() / "config.json").string();
    save_config(cfg, path);
    const auto b = load_config(path);
    CHECK(same_config(cfg, b));
    CHECK_THROWS_AS(load_config((tmp_dir() / "missing.json").string()), std::runtime_error);
    const auto bad = (tmp_dir() / "bad.json").string();
    std::ofstream(bad) << "{not json";
    CHECK_THROWS_AS(load_config(bad), std::invalid_argument);
  }
}

TEST_CASE("trace formats reload into the exact same age processes") {
  ScenarioConfig cfg;
  cfg.n_flows = 3;
  cfg.n_servers = 2;
  cfg.error_prob = 0.3;
  cfg.service_dist = ServiceDist::exponential(0.5);
  cfg.arrival_spec.gen_rate = 0.4;
  cfg.arrival_spec.delay_model = DelayModel::two_point;
  cfg.arrival_spec.delay_low = 0.0;
  cfg.arrival_spec.delay_high = -1.0;
  cfg.horizon = 100.0;
  cfg.seed = 77;
  cfg.policy_spec = parse_policy("p-maf-lgfs-r");

  const auto run = run_scenario(cfg);
  REQUIRE(run.trace.events.size() > 10);
  const auto reference = run_series(run);

  for (const auto format : {TraceFormat::csv, TraceFormat::jsonl}) {
    const auto path =
        (tmp_dir() / (format == TraceFormat::csv ? "trace.csv" : "trace.jsonl")).string();
    emit_trace(run, path, format);
    const auto loaded = load_trace(path, format, cfg);

    REQUIRE(loaded.trace.events.size() == run.trace.events.size());
    for (std::size_t i = 0; i < loaded.trace.events.size(); ++i) {
      REQUIRE(loaded.trace.events[i].t.seconds == run.trace.events[i].t.seconds);
      REQUIRE(loaded.trace.events[i].kind == run.trace.events[i].kind);
      REQUIRE(loaded.trace.events[i].flow == run.trace.events[i].flow);
      REQUIRE(loaded.trace.events[i].seq == run.trace.events[i].seq);
      REQUIRE(loaded.trace.events[i].server == run.trace.events[i].server);
    }
    const auto series = series_of(loaded);
    REQUIRE(series.size() == reference.size());
    for (std::size_t n = 0; n < series.size(); ++n) {
      REQUIRE(series[n].delta.knot == reference[n].delta.knot);
      REQUIRE(series[n].delta.base == reference[n].delta.base);
      REQUIRE(series[n].xi.knot == reference[n].xi.knot);
      REQUIRE(series[n].xi.base == reference[n].xi.base);
    }
  }

  SECTION("slotted traces reconstruct exact slot indices") {
    ScenarioConfig d;
    d.n_flows = 2;
    d.n_servers = 1;
    d.mode = Mode::discrete;
    d.slot = 0.5;
    d.error_prob = 0.3;
    d.service_dist = ServiceDist::deterministic(0.5);
    d.policy_spec = parse_policy("dt-maf-lgfs");
    d.arrival_spec.gen_rate = 0.8;
    d.arrival_spec.delay_model = DelayModel::none;
    d.arrival_spec.initial_batches = 1;
    d.horizon = 40.0;
    d.seed = 13;
    const auto drun = run_scenario(d);
    REQUIRE(!drun.trace.events.empty());
    const auto path = (tmp_dir() / "trace_d.csv").string();
    emit_trace(drun, path, TraceFormat::csv);
    const auto loaded = load_trace(path, TraceFormat::csv, d);
    for (std::size_t i = 0; i < loaded.trace.events.size(); ++i) {
      REQUIRE(loaded.trace.events[i].t.slot == drun.trace.events[i].t.slot);
      REQUIRE(loaded.trace.events[i].t.seconds == drun.trace.events[i].t.seconds);
    }
  }
  SECTION("stamp cross-checks catch a mismatched config") {
    const auto path = (tmp_dir() / "trace.jsonl").string();
    emit_trace(run, path, TraceFormat::jsonl);
    ScenarioConfig other = cfg;
    other.seed = cfg.seed + 1;  // different arrival realization
    CHECK_THROWS_AS(load_trace(path, TraceFormat::jsonl, other), std::invalid_argument);
  }
  SECTION("a corrupted header is rejected") {
    const auto path = (tmp_dir() / "corrupt.csv").string();
    std::ofstream(path) << "time,kind,flow\n";
    CHECK_THROWS_AS(load_trace(path, TraceFormat::csv, cfg), std::invalid_argument);
    CHECK_THROWS_AS(load_trace((tmp_dir() / "nope.csv").string(), TraceFormat::csv, cfg),
                    std::runtime_error);
  }
}

TEST_CASE("an event-free run emits a header-only csv") {
  ScenarioConfig cfg;
  cfg.n_flows = 1;
  cfg.arrival_spec.gen_rate = 1e-12;
  cfg.arrival_spec.delay_model = DelayModel::none;
  cfg.horizon = 5.0;
  const auto run = run_scenario(cfg);
  REQUIRE(run.trace.events.empty());
  std::ostringstream os;
  emit_trace_csv(run, os);
  CHECK(os.str() == "time,kind,flow,packet_seq,server\n");
}

TEST_CASE("experiment rows print as frozen decimal text") {
  std::vector<ExperimentRow> rows(1);
  rows[0].policy = "x";
  rows[0].rho = 0.2;
  rows[0].lambda = 1.0 / 15.0;
  rows[0].seed = 7;
  rows[0].replications = 3;
  rows[0].metric = "p_max";
  rows[0].mean = 1.0 / 3.0;
  rows[0].ci95 = 0.125;
  CHECK(experiment_csv_string(rows) ==
        "policy,rho,lambda,seed,replications,metric,mean,ci95\n"
        "x,0.2,0.06666666667,7,3,p_max,0.3333333333,0.125\n");

  const auto path = (tmp_dir() / "rows.csv").string();
  write_experiment_csv(rows, path);
  std::ifstream is(path);
  std::stringstream buf;
  buf << is.rdbuf();
  CHECK(buf.str() == experiment_csv_string(rows));
}

TEST_CASE("trace format names parse and reject unknowns") {
  CHECK(parse_trace_format("csv") == TraceFormat::csv);
  CHECK(parse_trace_format("jsonl") == TraceFormat::jsonl);
  CHECK_THROWS_AS(parse_trace_format("yaml"), std::invalid_argument);
}

TEST_CASE("coupled runs share one arrival realization in their exported traces") {
  ScenarioConfig base;
  base.n_flows = 2;
  base.n_servers = 2;
  base.error_prob = 0.2;
  base.service_dist = ServiceDist::exponential(1.0);
  base.arrival_spec.gen_rate = 1.2;
  base.arrival_spec.delay_model = DelayModel::none;
  base.arrival_spec.initial_batches = 2;
  base.horizon = 30.0;
  base.seed = 5;

  const auto coupled =
      run_coupled(base, {parse_policy("p-maf-lgfs"), parse_policy("rand-lgfs")});
  std::vector<std::string> arrival_lines[2];
  for (int i = 0; i < 2; ++i) {
    const auto path = (tmp_dir() / ("coupled" + std::to_string(i) + ".csv")).string();
    emit_trace(coupled.runs[static_cast<std::size_t>(i)], path, TraceFormat::csv);
    std::ifstream is(path);
    std::string line;
    while (std::getline(is, line))
      if (line.find(",arrival,") != std::string::npos)
        arrival_lines[i].push_back(line);
  }
  REQUIRE(!arrival_lines[0].empty());
  CHECK(arrival_lines[0] == arrival_lines[1]);
}
