#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nocguard/topology.hpp"

namespace nocguard {

enum class DestinationPolicy : std::uint8_t { NearestMc, RandomMc, UniformRandom, Hotspot, Mixed };

/// Synthetic stand-in for an application's memory traffic. Per-node rates are
/// scaled by a multiplier drawn from the scenario seed (the "mapping").
struct BenignProfile {
  std::string name = "uniform-low";
  double per_node_rate = 0.004;  // request packets per cycle while active
  DestinationPolicy policy = DestinationPolicy::UniformRandom;
  std::optional<NodeId> hotspot;  // drawn per seed when empty
  double hotspot_share = 0.5;
  // Application-wide phases: a two-state chain shared by every node, given as
  // per-cycle transition probabilities. Off-phase rate is per_node_rate * off_scale.
  double on_to_off = 0.0;
  double off_to_on = 0.0;
  double off_scale = 1.0;
  double rate_spread = 0.5;  // multiplier in [1 - spread, 1 + spread]
};

const std::vector<std::string>& benign_profile_names();
BenignProfile benign_profile(const std::string& name);

struct AttackConfig {
  std::vector<NodeId> mips;
  std::vector<NodeId> vips;
  double pir = 0.05;
  std::uint64_t start_cycle = 0;
};

struct SimConfig {
  Topology topology;
  std::uint64_t duration = 4000;  // observation window, cycles
  std::uint64_t warmup = 0;       // unobserved cycles before the first window
  std::uint64_t drain_cycles = 0;  // generation stops, network keeps running
  BenignProfile benign;
  std::optional<AttackConfig> attack;
  std::uint32_t buffer_depth = 4;
  std::uint64_t seed = 1;
  std::uint32_t starvation_threshold = 20;
  std::uint32_t service_latency = 8;
  std::uint32_t service_queue_depth = 16;
  std::uint32_t response_backlog_limit = 8;
  std::uint32_t request_flits = 1;
  std::uint32_t response_flits = 5;
  bool record_events = false;
};

/// Throws InvalidConfig / InvalidScenario / InvalidRate.
void validate(const SimConfig& cfg);

struct StarvationStats {
  std::uint64_t starved_flits = 0;
  std::uint64_t injected_flits = 0;
  std::uint64_t ejected_flits = 0;
  std::uint64_t in_flight_flits = 0;  // at the end of the recorded span
  std::vector<std::uint64_t> injected_per_node;
  std::vector<std::uint64_t> ejected_per_node;

  bool operator==(const StarvationStats&) const = default;
};

struct NodeTrace {
  std::vector<std::uint8_t> iifd;  // inter-flit delays of flits delivered to the local IP
  std::vector<std::uint8_t> oifd;  // inter-flit delays of flits leaving the local IP

  bool operator==(const NodeTrace&) const = default;
};

struct TraceSet {
  TopologyKind kind = TopologyKind::Mesh2D;
  std::uint32_t dim = 0;
  std::uint64_t topology_digest = 0;
  std::uint64_t window_start = 0;
  std::uint64_t duration = 0;
  std::optional<AttackConfig> attack;
  std::vector<NodeTrace> nodes;
  StarvationStats stats;  // cumulative from cycle 0 to the end of the window

  std::size_t node_count() const noexcept { return nodes.size(); }
  std::vector<std::uint8_t> node_labels() const;
};

inline constexpr std::uint8_t kDelaySaturation = 255;

enum class PacketKind : std::uint8_t { Request, Response, Data };

/// Per-node cycle stamps for every recorded flit, for audits.
struct EventLog {
  std::vector<std::vector<std::uint64_t>> inbound;
  std::vector<std::vector<std::uint64_t>> outbound;
};

/// Flit-level wormhole mesh. Single threaded; one instance per scenario.
class Simulator {
 public:
  explicit Simulator(SimConfig cfg);
  ~Simulator();
  Simulator(Simulator&&) noexcept;
  Simulator& operator=(Simulator&&) noexcept;

  void step();
  void run(std::uint64_t cycles);
  std::uint64_t cycle() const noexcept;

  /// Queue a packet at `src`'s network interface at the current cycle.
  void inject_packet(NodeId src, NodeId dst, std::uint32_t flits, PacketKind kind = PacketKind::Data);
  void set_generation(bool enabled) noexcept;

  /// Start recording delays from the current cycle.
  void begin_window();
  /// Close the current window and return its traces.
  TraceSet end_window();

  std::uint64_t injected() const noexcept;
  std::uint64_t ejected() const noexcept;
  std::uint64_t starved() const noexcept;
  /// Flits currently in router buffers or on links, counted by scanning.
  std::uint64_t count_in_flight() const;
  /// Flits queued in network interfaces that have not entered a router.
  std::uint64_t count_queued() const;

  const EventLog& events() const noexcept;
  const SimConfig& config() const noexcept;

 private:
  struct State;
  std::unique_ptr<State> s_;
};

/// Warm up, record one window of `duration` cycles (plus any drain tail).
TraceSet run_scenario(const SimConfig& cfg);

/// Warm up, then record `count` back-to-back windows of `duration` cycles.
std::vector<TraceSet> run_windows(const SimConfig& cfg, std::size_t count);

/// (loaded - baseline) / baseline over starved flit counts.
double starvation_increase(const StarvationStats& baseline, const StarvationStats& loaded);

struct ConservationReport {
  std::uint64_t injected = 0;
  std::uint64_t ejected = 0;
  std::uint64_t in_flight = 0;
  bool holds = false;
  std::vector<std::uint64_t> injected_per_node;
  std::vector<std::uint64_t> ejected_per_node;
};

ConservationReport flit_conservation_report(const TraceSet& trace);

std::vector<std::uint8_t> serialize_trace(const TraceSet& trace);
TraceSet deserialize_trace(std::span<const std::uint8_t> bytes);
void save_trace(const TraceSet& trace, const std::string& path);
TraceSet load_trace(const std::string& path);

nlohmann::json to_json(const SimConfig& cfg);
/// Parses a simulation config. Topology is given as {"kind","n"}; the benign
/// profile by name with optional overrides.
SimConfig sim_config_from_json(const nlohmann::json& j);

}  // namespace nocguard
