#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "aoi/age_process.hpp"
#include "aoi/config.hpp"
#include "aoi/engine.hpp"
#include "json.hpp"

namespace aoi {

namespace detail {

inline std::string fmt_double(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

}  // namespace detail

// %.17g keeps every double bit; used wherever a value must reload exactly.
inline std::string fmt_full(double v) { return detail::fmt_double("%.17g", v); }
inline std::string fmt_g10(double v) { return detail::fmt_double("%.10g", v); }

using Json = nlohmann::json;

inline Json dist_to_json(const ServiceDist& d) {
  Json j;
  switch (d.kind) {
    case DistKind::exponential:
      j["type"] = "exponential";
      j["rate"] = d.rate;
      break;
    case DistKind::shifted_exponential:
      j["type"] = "shifted_exponential";
      j["shift"] = d.shift;
      j["rate"] = d.rate;
      break;
    case DistKind::deterministic:
      j["type"] = "deterministic";
      j["value"] = d.value;
      break;
  }
  return j;
}

inline ServiceDist dist_from_json(const Json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "exponential") return ServiceDist::exponential(j.at("rate").get<double>());
  if (type == "shifted_exponential")
    return ServiceDist::shifted_exponential(j.at("shift").get<double>(), j.at("rate").get<double>());
  if (type == "deterministic") return ServiceDist::deterministic(j.at("value").get<double>());
  throw std::invalid_argument("unknown service_dist type: " + type);
}

inline Json arrival_to_json(const ArrivalSpec& a) {
  Json j;
  j["model"] = a.model == ArrivalModel::poisson ? "poisson" : "periodic";
  j["gen_rate"] = a.gen_rate;
  j["period"] = a.period;
  j["delay_model"] = a.delay_model == DelayModel::two_point ? "two_point" : "none";
  j["delay_low"] = a.delay_low;
  j["delay_high"] = a.delay_high;
  j["initial_batches"] = a.initial_batches;
  return j;
}

inline ArrivalSpec arrival_from_json(const Json& j) {
  ArrivalSpec a;
  const std::string model = j.value("model", std::string("poisson"));
  if (model == "poisson") {
    a.model = ArrivalModel::poisson;
  } else if (model == "periodic") {
    a.model = ArrivalModel::periodic;
  } else {
    throw std::invalid_argument("unknown arrival model: " + model);
  }
  a.gen_rate = j.value("gen_rate", a.gen_rate);
  a.period = j.value("period", a.period);
  const std::string delay = j.value("delay_model", std::string("two_point"));
  if (delay == "two_point") {
    a.delay_model = DelayModel::two_point;
  } else if (delay == "none") {
    a.delay_model = DelayModel::none;
  } else {
    throw std::invalid_argument("unknown delay model: " + delay);
  }
  a.delay_low = j.value("delay_low", a.delay_low);
  a.delay_high = j.value("delay_high", a.delay_high);
  a.initial_batches = j.value("initial_batches", a.initial_batches);
  return a;
}

inline const char* flow_discipline_name(FlowDiscipline f) {
  switch (f) {
    case FlowDiscipline::maf: return "maf";
    case FlowDiscipline::masif: return "masif";
    case FlowDiscipline::rnd: return "rand";
  }
  return "?";
}

inline Json policy_to_json(const PolicySpec& p) {
  Json j;
  j["name"] = p.name;
  j["flow_discipline"] = flow_discipline_name(p.flow);
  j["packet_discipline"] = p.packet == PacketDiscipline::lgfs ? "lgfs" : "fcfs";
  j["preemptive"] = p.preemptive;
  j["replication"] = p.replication;
  j["exclusive"] = p.exclusive;
  j["work_conserving"] = p.work_conserving;
  return j;
}

// Accepts either a preset name string or the expanded object; the object's
// boolean fields override the preset defaults when present.
inline PolicySpec policy_from_json(const Json& j) {
  if (j.is_string()) return parse_policy(j.get<std::string>());
  PolicySpec p = parse_policy(j.at("name").get<std::string>());
  if (j.contains("preemptive")) p.preemptive = j.at("preemptive").get<bool>();
  if (j.contains("replication")) p.replication = j.at("replication").get<bool>();
  if (j.contains("exclusive")) p.exclusive = j.at("exclusive").get<bool>();
  if (j.contains("work_conserving")) p.work_conserving = j.at("work_conserving").get<bool>();
  return p;
}

inline Json config_to_json(const ScenarioConfig& cfg) {
  Json j;
  j["n_flows"] = cfg.n_flows;
  j["n_servers"] = cfg.n_servers;
  j["error_prob"] = cfg.error_prob;
  j["mode"] = cfg.mode == Mode::continuous ? "continuous" : "discrete";
  j["slot"] = cfg.slot;
  j["service_dist"] = dist_to_json(cfg.service_dist);
  j["arrival_spec"] = arrival_to_json(cfg.arrival_spec);
  j["horizon"] = cfg.horizon;
  j["seed"] = cfg.seed;
  j["policy_spec"] = policy_to_json(cfg.policy_spec);
  j["initial_age"] = cfg.initial_age;
  return j;
}

inline ScenarioConfig config_from_json(const Json& j) {
  // Every schema field is required; a silently defaulted field (the seed
  // above all) would let two tools read different experiments from one file.
  for (const char* key : {"n_flows", "n_servers", "error_prob", "mode", "service_dist",
                          "arrival_spec", "horizon", "seed", "policy_spec", "initial_age"})
    if (!j.contains(key)) throw std::invalid_argument(std::string("config missing field: ") + key);
  ScenarioConfig cfg;
  cfg.n_flows = j.at("n_flows").get<int>();
  cfg.n_servers = j.at("n_servers").get<int>();
  j.at("error_prob").get_to(cfg.error_prob);
  const std::string mode = j.at("mode").get<std::string>();
  if (mode == "continuous") {
    cfg.mode = Mode::continuous;
  } else if (mode == "discrete") {
    cfg.mode = Mode::discrete;
  } else {
    throw std::invalid_argument("unknown mode: " + mode);
  }
  if (cfg.mode == Mode::discrete && !j.contains("slot"))
    throw std::invalid_argument("config missing field: slot");
  if (j.contains("slot")) j.at("slot").get_to(cfg.slot);
  cfg.service_dist = dist_from_json(j.at("service_dist"));
  cfg.arrival_spec = arrival_from_json(j.at("arrival_spec"));
  j.at("horizon").get_to(cfg.horizon);
  j.at("seed").get_to(cfg.seed);
  cfg.policy_spec = policy_from_json(j.at("policy_spec"));
  j.at("initial_age").get_to(cfg.initial_age);
  return cfg;
}

inline std::string config_to_string(const ScenarioConfig& cfg) {
  return config_to_json(cfg).dump(2) + "\n";
}

inline void save_config(const ScenarioConfig& cfg, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os << config_to_string(cfg);
  if (!os) throw std::runtime_error("write failed: " + path);
}

inline ScenarioConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config: " + path);
  Json j;
  try {
    is >> j;
  } catch (const std::exception& e) {
    throw std::invalid_argument(std::string("config parse error in ") + path + ": " + e.what());
  }
  return config_from_json(j);
}

enum class TraceFormat { csv, jsonl };

inline TraceFormat parse_trace_format(const std::string& s) {
  if (s == "csv") return TraceFormat::csv;
  if (s == "jsonl") return TraceFormat::jsonl;
  throw std::invalid_argument("unknown trace format: " + s + " (expected csv or jsonl)");
}

inline void emit_trace_csv(const RunResult& run, std::ostream& os) {
  os << "time,kind,flow,packet_seq,server\n";
  for (const Event& e : run.trace.events) {
    os << fmt_full(e.t.seconds) << ',' << event_kind_name(e.kind) << ',' << e.flow << ','
       << e.seq << ',' << e.server << '\n';
  }
}

// One self-contained object per line: generation and arrival stamps ride
// along so the age path can be reconstructed without the config.
inline void emit_trace_jsonl(const RunResult& run, std::ostream& os) {
  for (const Event& e : run.trace.events) {
    const auto id = static_cast<std::size_t>(e.packet_of(run.cfg.n_flows));
    const PacketRecord& pkt = run.packets.at(id);
    Json j;
    j["time"] = e.t.seconds;
    if (e.t.is_slotted()) j["slot_index"] = e.t.slot;
    j["kind"] = event_kind_name(e.kind);
    j["flow"] = e.flow;
    j["packet_seq"] = e.seq;
    j["server"] = e.server;
    j["s_gen"] = pkt.s_gen.seconds;
    j["a_arr"] = pkt.a_arr.seconds;
    os << j.dump() << '\n';
  }
}

inline void emit_trace(const RunResult& run, const std::string& path, TraceFormat format) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  if (format == TraceFormat::csv) {
    emit_trace_csv(run, os);
  } else {
    emit_trace_jsonl(run, os);
  }
  if (!os) throw std::runtime_error("write failed: " + path);
}

// A reloaded trace plus the packet table regenerated from the config seed;
// enough to rebuild the age processes exactly.
struct LoadedTrace {
  ScenarioConfig cfg;
  ArrivalSequence arrivals;
  std::vector<PacketRecord> packets;
  Trace trace;
};

namespace detail {

inline EventKind event_kind_of(const std::string& name) {
  if (name == "arrival") return EventKind::arrival;
  if (name == "service_start") return EventKind::service_start;
  if (name == "preemption") return EventKind::preemption;
  if (name == "delivery_success") return EventKind::delivery_success;
  if (name == "delivery_error") return EventKind::delivery_error;
  throw std::invalid_argument("unknown event kind: " + name);
}

inline TimePoint event_time(const ScenarioConfig& cfg, double seconds) {
  if (cfg.mode == Mode::discrete)
    return TimePoint::slotted(std::llround(seconds / cfg.slot), cfg.slot);
  return TimePoint::continuous(seconds);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

}  // namespace detail

inline LoadedTrace load_trace(const std::string& path, TraceFormat format,
                              const ScenarioConfig& cfg) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open trace: " + path);

  LoadedTrace out;
  out.cfg = cfg;
  out.arrivals = arrivals_for(cfg);
  out.packets = packets_for(cfg, out.arrivals);

  std::string line;
  if (format == TraceFormat::csv) {
    if (!std::getline(is, line) || line != "time,kind,flow,packet_seq,server")
      throw std::invalid_argument("trace csv header mismatch in " + path);
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      const auto f = detail::split_csv_line(line);
      if (f.size() != 5) throw std::invalid_argument("trace csv row needs 5 fields: " + line);
      Event e;
      e.t = detail::event_time(cfg, std::strtod(f[0].c_str(), nullptr));
      e.kind = detail::event_kind_of(f[1]);
      e.flow = std::stoi(f[2]);
      e.seq = std::stoll(f[3]);
      e.server = std::stoi(f[4]);
      out.trace.events.push_back(e);
    }
  } else {
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      const Json j = Json::parse(line);
      Event e;
      e.t = detail::event_time(cfg, j.at("time").get<double>());
      e.kind = detail::event_kind_of(j.at("kind").get<std::string>());
      e.flow = j.at("flow").get<int>();
      e.seq = j.at("packet_seq").get<std::int64_t>();
      e.server = j.at("server").get<int>();
      const auto id = static_cast<std::size_t>(e.packet_of(cfg.n_flows));
      if (id >= out.packets.size())
        throw std::invalid_argument("trace event references a packet outside the config horizon");
      if (j.at("s_gen").get<double>() != out.packets[id].s_gen.seconds ||
          j.at("a_arr").get<double>() != out.packets[id].a_arr.seconds)
        throw std::invalid_argument("trace stamps disagree with the config's arrival realization");
      out.trace.events.push_back(e);
    }
  }

  for (const Event& e : out.trace.events) {
    const auto id = e.packet_of(cfg.n_flows);
    if (id < 0 || static_cast<std::size_t>(id) >= out.packets.size())
      throw std::invalid_argument("trace event references a packet outside the config horizon");
  }
  return out;
}

inline std::vector<FlowSeries> series_of(const LoadedTrace& loaded) {
  return build_flow_series(loaded.cfg, loaded.trace, loaded.packets);
}

// One sweep-point statistic. Rows print with %.10g, so repeated runs with the
// same seed emit byte-identical files.
struct ExperimentRow {
  std::string policy;
  double rho = 0.0;
  double lambda = 0.0;
  std::uint64_t seed = 0;
  int replications = 0;
  std::string metric;
  double mean = 0.0;
  double ci95 = 0.0;
};

inline void write_experiment_csv(const std::vector<ExperimentRow>& rows, std::ostream& os) {
  os << "policy,rho,lambda,seed,replications,metric,mean,ci95\n";
  for (const ExperimentRow& r : rows) {
    os << r.policy << ',' << fmt_g10(r.rho) << ',' << fmt_g10(r.lambda) << ',' << r.seed << ','
       << r.replications << ',' << r.metric << ',' << fmt_g10(r.mean) << ',' << fmt_g10(r.ci95)
       << '\n';
  }
}

inline void write_experiment_csv(const std::vector<ExperimentRow>& rows, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  write_experiment_csv(rows, os);
  if (!os) throw std::runtime_error("write failed: " + path);
}

inline std::string experiment_csv_string(const std::vector<ExperimentRow>& rows) {
  std::ostringstream os;
  write_experiment_csv(rows, os);
  return os.str();
}

}  // namespace aoi
