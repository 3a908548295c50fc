#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nocguard/kernels.hpp"
#include "nocguard/simulator.hpp"
#include "nocguard/topology.hpp"

namespace nocguard {

inline constexpr double kDelayNormalization = 1.0 / 255.0;

/// Adjacency shared by every graph drawn from one topology.
struct GraphStructure {
  Topology topology;
  BinaryMatrix adjacency;
  kernels::Neighbors neighbors;
};

std::shared_ptr<const GraphStructure> make_structure(const Topology& t);

enum class ScenarioKind : std::uint8_t { Normal = 0, Attack = 1 };

struct SpatioTemporalGraph {
  std::shared_ptr<const GraphStructure> structure;
  std::uint32_t length = 0;
  std::vector<float> x;  // [N, 2, length]: channel 0 inbound, channel 1 outbound
  std::vector<std::uint8_t> labels;
  std::uint8_t graph_label = 0;

  // Where the graph came from.
  std::string profile;
  std::uint32_t mapping = 0;
  ScenarioKind kind = ScenarioKind::Normal;
  std::optional<AttackConfig> attack;

  std::size_t node_count() const noexcept { return labels.size(); }
};

/// First `l` delays per direction and node, right-padded with 255. Layout [N, 2, l].
std::vector<std::uint8_t> window_delays(const TraceSet& trace, std::size_t l);
/// window_delays scaled into [0,1].
std::vector<float> window_trace(const TraceSet& trace, std::size_t l);

/// Throws Shape when `windows` or `labels` do not match the topology.
SpatioTemporalGraph build_graph(std::vector<float> windows, std::size_t l,
                                std::shared_ptr<const GraphStructure> structure, std::vector<std::uint8_t> labels);

/// Graph from one simulated window; labels follow the trace's attack block.
SpatioTemporalGraph graph_from_trace(const TraceSet& trace, std::size_t l,
                                     std::shared_ptr<const GraphStructure> structure = nullptr);

struct ClassWeights {
  double benign = 1.0;
  double malicious = 1.0;
};

/// w_c = total / (2 count_c). Throws DegenerateClass when a class is absent.
ClassWeights class_weights(std::size_t benign_nodes, std::size_t malicious_nodes);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Stratified by label. Train size is floor(fraction * total); per-class quotas
/// use largest remainders. Throws Stratification when either side would be empty.
Split split_dataset(const std::vector<std::uint8_t>& graph_labels, double train_fraction, std::uint64_t seed);

struct DatasetConfig {
  SimConfig sim;  // topology, duration, warmup and router constants; benign/attack/seed are filled per scenario
  std::vector<std::string> profiles = benign_profile_names();
  std::uint32_t mappings_per_profile = 8;
  std::uint32_t n_mips = 3;
  double pir = 0.05;
  std::uint32_t length = 400;
  std::uint64_t attack_start = 500;  // cycle; before the first observed window
  std::uint64_t seed = 1;
  double train_fraction = 0.9;
};

DatasetConfig default_dataset_config(const Topology& t);
nlohmann::json to_json(const DatasetConfig& cfg);
DatasetConfig dataset_config_from_json(const nlohmann::json& j);

struct Dataset {
  std::shared_ptr<const GraphStructure> structure;
  std::uint32_t length = 0;
  double normalization = kDelayNormalization;
  std::vector<SpatioTemporalGraph> graphs;
  Split split;
  ClassWeights weights;
  std::uint64_t split_seed = 0;
  double train_fraction = 0.9;
  std::string generator;  // JSON of the producing config, may be empty

  std::vector<std::uint8_t> graph_labels() const;
};

inline constexpr std::uint32_t kTracesPerMapping = 6;  // 2 normal + 4 attack

/// Class weights from the node labels of the listed graphs.
ClassWeights class_weights(const Dataset& d, const std::vector<std::size_t>& graphs);

/// Runs every (profile, mapping) job, in parallel when OpenMP threads are available.
Dataset generate_dataset(const DatasetConfig& cfg);

/// Graph order within one (profile, mapping) job.
std::vector<SpatioTemporalGraph> generate_mapping(const DatasetConfig& cfg, std::size_t profile_index,
                                                  std::uint32_t mapping,
                                                  const std::shared_ptr<const GraphStructure>& structure);

std::vector<std::uint8_t> serialize_dataset(const Dataset& d);
Dataset deserialize_dataset(std::span<const std::uint8_t> bytes);
void save_dataset(const Dataset& d, const std::string& path);
Dataset load_dataset(const std::string& path);

}  // namespace nocguard
