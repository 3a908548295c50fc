#include <algorithm>

#include "nocguard/binary_io.hpp"
#include "nocguard/error.hpp"
#include "nocguard/simulator.hpp"

namespace nocguard {

namespace {
constexpr char kTraceMagic[4] = {'N', 'G', 'T', 'R'};
constexpr std::uint32_t kTraceVersion = 1;

void write_ids(ByteWriter& w, const std::vector<NodeId>& ids) {
  w.u32(static_cast<std::uint32_t>(ids.size()));
  for (NodeId id : ids) w.u32(id);
}

std::vector<NodeId> read_ids(ByteReader& r) {
  std::vector<NodeId> ids(r.u32());
  for (auto& id : ids) id = r.u32();
  return ids;
}
}  // namespace

std::vector<std::uint8_t> serialize_trace(const TraceSet& trace) {
  ByteWriter w;
  w.raw({kTraceMagic, 4});
  w.u32(kTraceVersion);
  w.u8(static_cast<std::uint8_t>(trace.kind));
  w.u32(trace.dim);
  w.u64(trace.topology_digest);
  const auto n = static_cast<std::uint32_t>(trace.nodes.size());
  w.u32(n);
  w.u64(trace.duration);
  w.u64(trace.window_start);

  // Label block.
  const auto labels = trace.node_labels();
  w.u8(trace.attack ? 1 : 0);
  if (trace.attack) {
    write_ids(w, trace.attack->mips);
    write_ids(w, trace.attack->vips);
    w.f64(trace.attack->pir);
    w.u64(trace.attack->start_cycle);
  }
  w.bytes(labels);

  const auto& st = trace.stats;
  w.u64(st.starved_flits);
  w.u64(st.injected_flits);
  w.u64(st.ejected_flits);
  w.u64(st.in_flight_flits);
  for (std::uint32_t i = 0; i < n; ++i) {
    w.u64(i < st.injected_per_node.size() ? st.injected_per_node[i] : 0);
    w.u64(i < st.ejected_per_node.size() ? st.ejected_per_node[i] : 0);
  }

  for (const auto& node : trace.nodes) {
    w.u32(static_cast<std::uint32_t>(node.iifd.size()));
    w.bytes(node.iifd);
    w.u32(static_cast<std::uint32_t>(node.oifd.size()));
    w.bytes(node.oifd);
  }
  const std::uint64_t digest = digest64(w.buffer());
  w.u64(digest);
  return w.take();
}

TraceSet deserialize_trace(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, ErrorCode::Io);
  if (r.raw(4) != std::string_view(kTraceMagic, 4)) throw Error(ErrorCode::Io, "not a trace file (bad magic)");
  if (const auto v = r.u32(); v != kTraceVersion)
    throw Error(ErrorCode::UnsupportedVersion, "trace version " + std::to_string(v));
  if (bytes.size() < 16) throw Error(ErrorCode::Io, "trace is truncated");
  {
    ByteReader tail(bytes.subspan(bytes.size() - 8), ErrorCode::Io);
    if (tail.u64() != digest64(bytes.first(bytes.size() - 8))) throw Error(ErrorCode::Io, "trace digest mismatch");
  }
  TraceSet t;
  t.kind = static_cast<TopologyKind>(r.u8());
  t.dim = r.u32();
  t.topology_digest = r.u64();
  const std::uint32_t n = r.u32();
  t.duration = r.u64();
  t.window_start = r.u64();
  if (r.u8()) {
    AttackConfig a;
    a.mips = read_ids(r);
    a.vips = read_ids(r);
    a.pir = r.f64();
    a.start_cycle = r.u64();
    t.attack = std::move(a);
  }
  r.bytes(n);  // labels are derived from the attack block

  auto& st = t.stats;
  st.starved_flits = r.u64();
  st.injected_flits = r.u64();
  st.ejected_flits = r.u64();
  st.in_flight_flits = r.u64();
  st.injected_per_node.resize(n);
  st.ejected_per_node.resize(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    st.injected_per_node[i] = r.u64();
    st.ejected_per_node[i] = r.u64();
  }
  t.nodes.resize(n);
  for (auto& node : t.nodes) {
    auto in = r.bytes(r.u32());
    node.iifd.assign(in.begin(), in.end());
    auto out = r.bytes(r.u32());
    node.oifd.assign(out.begin(), out.end());
  }
  r.u64();
  if (r.remaining() != 0) throw Error(ErrorCode::Io, "trailing bytes after trace");
  return t;
}

void save_trace(const TraceSet& trace, const std::string& path) { write_file(path, serialize_trace(trace)); }

TraceSet load_trace(const std::string& path) { return deserialize_trace(read_file(path)); }

namespace {
std::string policy_name(DestinationPolicy p) {
  switch (p) {
    case DestinationPolicy::NearestMc: return "nearest-mc";
    case DestinationPolicy::RandomMc: return "random-mc";
    case DestinationPolicy::UniformRandom: return "uniform-random";
    case DestinationPolicy::Hotspot: return "hotspot";
    case DestinationPolicy::Mixed: return "mixed";
  }
  return "uniform-random";
}

DestinationPolicy policy_from_name(const std::string& s) {
  for (auto p : {DestinationPolicy::NearestMc, DestinationPolicy::RandomMc, DestinationPolicy::UniformRandom,
                 DestinationPolicy::Hotspot, DestinationPolicy::Mixed})
    if (policy_name(p) == s) return p;
  throw Error(ErrorCode::InvalidConfig, "unknown destination policy '" + s + "'");
}
}  // namespace

nlohmann::json to_json(const SimConfig& cfg) {
  nlohmann::json benign = {{"name", cfg.benign.name},
                           {"per_node_rate", cfg.benign.per_node_rate},
                           {"destination_policy", policy_name(cfg.benign.policy)},
                           {"hotspot_share", cfg.benign.hotspot_share},
                           {"on_to_off", cfg.benign.on_to_off},
                           {"off_to_on", cfg.benign.off_to_on},
                           {"off_scale", cfg.benign.off_scale},
                           {"rate_spread", cfg.benign.rate_spread}};
  if (cfg.benign.hotspot) benign["hotspot"] = *cfg.benign.hotspot;
  nlohmann::json j = {{"topology", {{"kind", to_string(cfg.topology.kind())}, {"n", cfg.topology.dim()}}},
                      {"mc_nodes", cfg.topology.mc_nodes()},
                      {"duration", cfg.duration},
                      {"warmup", cfg.warmup},
                      {"drain_cycles", cfg.drain_cycles},
                      {"benign", benign},
                      {"buffer_depth", cfg.buffer_depth},
                      {"seed", cfg.seed},
                      {"starvation_threshold", cfg.starvation_threshold},
                      {"service_latency", cfg.service_latency},
                      {"service_queue_depth", cfg.service_queue_depth},
                      {"response_backlog_limit", cfg.response_backlog_limit},
                      {"request_flits", cfg.request_flits},
                      {"response_flits", cfg.response_flits}};
  if (cfg.attack)
    j["attack"] = {{"mips", cfg.attack->mips},
                   {"vips", cfg.attack->vips},
                   {"pir", cfg.attack->pir},
                   {"start_cycle", cfg.attack->start_cycle}};
  return j;
}

SimConfig sim_config_from_json(const nlohmann::json& j) {
  try {
    SimConfig cfg;
    cfg.topology = topology_from_json(j.at("topology"));
    cfg.duration = j.value("duration", cfg.duration);
    cfg.warmup = j.value("warmup", cfg.warmup);
    cfg.drain_cycles = j.value("drain_cycles", cfg.drain_cycles);
    cfg.buffer_depth = j.value("buffer_depth", cfg.buffer_depth);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.starvation_threshold = j.value("starvation_threshold", cfg.starvation_threshold);
    cfg.service_latency = j.value("service_latency", cfg.service_latency);
    cfg.service_queue_depth = j.value("service_queue_depth", cfg.service_queue_depth);
    cfg.response_backlog_limit = j.value("response_backlog_limit", cfg.response_backlog_limit);
    cfg.request_flits = j.value("request_flits", cfg.request_flits);
    cfg.response_flits = j.value("response_flits", cfg.response_flits);
    if (j.contains("benign")) {
      const auto& b = j.at("benign");
      cfg.benign = benign_profile(b.is_string() ? b.get<std::string>() : b.value("name", std::string("uniform-low")));
      if (b.is_object()) {
        cfg.benign.per_node_rate = b.value("per_node_rate", cfg.benign.per_node_rate);
        if (b.contains("destination_policy"))
          cfg.benign.policy = policy_from_name(b.at("destination_policy").get<std::string>());
        cfg.benign.hotspot_share = b.value("hotspot_share", cfg.benign.hotspot_share);
        cfg.benign.on_to_off = b.value("on_to_off", cfg.benign.on_to_off);
        cfg.benign.off_to_on = b.value("off_to_on", cfg.benign.off_to_on);
        cfg.benign.off_scale = b.value("off_scale", cfg.benign.off_scale);
        cfg.benign.rate_spread = b.value("rate_spread", cfg.benign.rate_spread);
        if (b.contains("hotspot")) cfg.benign.hotspot = b.at("hotspot").get<NodeId>();
      }
    }
    if (j.contains("attack") && !j.at("attack").is_null()) {
      const auto& a = j.at("attack");
      AttackConfig ac;
      ac.mips = a.at("mips").get<std::vector<NodeId>>();
      ac.vips = a.at("vips").get<std::vector<NodeId>>();
      ac.pir = a.value("pir", ac.pir);
      ac.start_cycle = a.value("start_cycle", ac.start_cycle);
      cfg.attack = std::move(ac);
    }
    validate(cfg);
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("simulation config: ") + e.what());
  }
}

}  // namespace nocguard
