#include "nocguard/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>

#include "nocguard/binary_io.hpp"
#include "nocguard/error.hpp"
#include "nocguard/rng.hpp"

namespace nocguard {

std::shared_ptr<const GraphStructure> make_structure(const Topology& t) {
  auto s = std::make_shared<GraphStructure>();
  s->topology = t;
  s->adjacency = adjacency_matrix(t);
  s->neighbors = kernels::neighbors_from_adjacency(s->adjacency);
  return s;
}

std::vector<std::uint8_t> window_delays(const TraceSet& trace, std::size_t l) {
  const std::size_t n = trace.nodes.size();
  std::vector<std::uint8_t> out(n * 2 * l, kDelaySaturation);
  for (std::size_t j = 0; j < n; ++j) {
    const auto& nt = trace.nodes[j];
    const std::vector<std::uint8_t>* dirs[2] = {&nt.iifd, &nt.oifd};
    for (std::size_t c = 0; c < 2; ++c) {
      const auto& d = *dirs[c];
      std::copy_n(d.begin(), std::min(l, d.size()), out.begin() + static_cast<std::ptrdiff_t>((j * 2 + c) * l));
    }
  }
  return out;
}

std::vector<float> window_trace(const TraceSet& trace, std::size_t l) {
  const auto raw = window_delays(trace, l);
  std::vector<float> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = static_cast<float>(raw[i] * kDelayNormalization);
  return out;
}

SpatioTemporalGraph build_graph(std::vector<float> windows, std::size_t l,
                                std::shared_ptr<const GraphStructure> structure, std::vector<std::uint8_t> labels) {
  if (!structure) throw Error(ErrorCode::Shape, "graph needs a topology");
  const std::size_t n = structure->topology.node_count();
  if (l == 0) throw Error(ErrorCode::Length, "window length must be >= 1");
  if (windows.size() != n * 2 * l)
    throw Error(ErrorCode::Shape, "expected " + std::to_string(n) + "x2x" + std::to_string(l) + " window values, got " +
                                      std::to_string(windows.size()));
  if (labels.size() != n)
    throw Error(ErrorCode::Shape, "expected " + std::to_string(n) + " node labels, got " + std::to_string(labels.size()));
  SpatioTemporalGraph g;
  g.structure = std::move(structure);
  g.length = static_cast<std::uint32_t>(l);
  g.x = std::move(windows);
  g.labels = std::move(labels);
  g.graph_label = std::any_of(g.labels.begin(), g.labels.end(), [](auto v) { return v != 0; }) ? 1 : 0;
  return g;
}

SpatioTemporalGraph graph_from_trace(const TraceSet& trace, std::size_t l,
                                     std::shared_ptr<const GraphStructure> structure) {
  if (!structure) structure = make_structure(build_topology(trace.kind, trace.dim));
  if (structure->topology.digest() != trace.topology_digest)
    throw Error(ErrorCode::Shape, "trace was recorded on a different topology");
  auto g = build_graph(window_trace(trace, l), l, std::move(structure), trace.node_labels());
  g.attack = trace.attack;
  g.kind = trace.attack ? ScenarioKind::Attack : ScenarioKind::Normal;
  return g;
}

ClassWeights class_weights(std::size_t benign_nodes, std::size_t malicious_nodes) {
  if (benign_nodes == 0 || malicious_nodes == 0)
    throw Error(ErrorCode::DegenerateClass, "class weights need both benign and malicious nodes (got " +
                                                std::to_string(benign_nodes) + " / " +
                                                std::to_string(malicious_nodes) + ")");
  const double total = static_cast<double>(benign_nodes + malicious_nodes);
  return {total / (2.0 * static_cast<double>(benign_nodes)), total / (2.0 * static_cast<double>(malicious_nodes))};
}

ClassWeights class_weights(const Dataset& d, const std::vector<std::size_t>& graphs) {
  std::size_t benign = 0, malicious = 0;
  for (auto gi : graphs)
    for (auto v : d.graphs.at(gi).labels) (v ? malicious : benign) += 1;
  return class_weights(benign, malicious);
}

Split split_dataset(const std::vector<std::uint8_t>& graph_labels, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw Error(ErrorCode::InvalidConfig, "train fraction must lie in (0,1)");
  const std::size_t total = graph_labels.size();
  const auto train_size = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(total)));
  if (train_size == 0 || train_size == total)
    throw Error(ErrorCode::Stratification, std::to_string(total) + " graphs cannot be split at fraction " +
                                               std::to_string(train_fraction));
  std::vector<std::size_t> by_class[2];
  for (std::size_t i = 0; i < total; ++i) by_class[graph_labels[i] ? 1 : 0].push_back(i);

  // Floor of each class quota, then hand out the shortfall by largest remainder
  // (ties go to the lower label).
  std::size_t quota[2];
  double remainder[2];
  for (int c = 0; c < 2; ++c) {
    const double exact = train_fraction * static_cast<double>(by_class[c].size());
    quota[c] = static_cast<std::size_t>(std::floor(exact));
    remainder[c] = exact - std::floor(exact);
  }
  for (std::size_t missing = train_size - (quota[0] + quota[1]); missing > 0; --missing) {
    int pick = remainder[1] > remainder[0] ? 1 : 0;
    if (quota[pick] >= by_class[pick].size()) pick = 1 - pick;
    ++quota[pick];
    remainder[pick] = -1.0;
  }

  Rng rng(seed);
  Split s;
  for (int c = 0; c < 2; ++c) {
    auto idx = by_class[c];
    rng.shuffle(idx.begin(), idx.end());
    s.train.insert(s.train.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(quota[c]));
    s.test.insert(s.test.end(), idx.begin() + static_cast<std::ptrdiff_t>(quota[c]), idx.end());
  }
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

std::vector<std::uint8_t> Dataset::graph_labels() const {
  std::vector<std::uint8_t> out;
  out.reserve(graphs.size());
  for (const auto& g : graphs) out.push_back(g.graph_label);
  return out;
}

DatasetConfig default_dataset_config(const Topology& t) {
  DatasetConfig cfg;
  cfg.sim.topology = t;
  cfg.sim.duration = 4000;
  cfg.sim.warmup = 1000;
  return cfg;
}

namespace {

std::uint64_t mapping_seed(const DatasetConfig& cfg, std::size_t profile_index, std::uint32_t mapping) {
  return hash_combine(hash_combine(cfg.seed, profile_index + 1), mapping + 1);
}

std::vector<NodeId> draw_mips(const Topology& t, std::uint32_t count, Rng& rng) {
  std::vector<NodeId> cores;
  for (NodeId id = 0; id < t.node_count(); ++id)
    if (!t.is_mc(id)) cores.push_back(id);
  rng.shuffle(cores.begin(), cores.end());
  cores.resize(count);
  std::sort(cores.begin(), cores.end());
  return cores;
}

void check_config(const DatasetConfig& cfg) {
  const auto& t = cfg.sim.topology;
  if (cfg.profiles.empty()) throw Error(ErrorCode::InvalidConfig, "dataset needs at least one profile");
  if (cfg.mappings_per_profile == 0) throw Error(ErrorCode::InvalidConfig, "mappings_per_profile must be >= 1");
  if (cfg.length == 0) throw Error(ErrorCode::Length, "window length must be >= 1");
  if (cfg.n_mips == 0) throw Error(ErrorCode::InvalidConfig, "n_mips must be >= 1");
  if (cfg.n_mips + t.mc_nodes().size() >= t.node_count())
    throw Error(ErrorCode::CannotPlaceMips, std::to_string(cfg.n_mips) + " MIPs do not fit beside " +
                                                std::to_string(t.mc_nodes().size()) + " memory controllers in " +
                                                std::to_string(t.node_count()) + " nodes");
  if (!(cfg.pir >= 0.0 && cfg.pir <= 1.0)) throw Error(ErrorCode::InvalidRate, "pir must lie in [0,1]");
  for (const auto& p : cfg.profiles) benign_profile(p);
}

}  // namespace

std::vector<SpatioTemporalGraph> generate_mapping(const DatasetConfig& cfg, std::size_t profile_index,
                                                  std::uint32_t mapping,
                                                  const std::shared_ptr<const GraphStructure>& structure) {
  const auto& t = cfg.sim.topology;
  const std::uint64_t seed = mapping_seed(cfg, profile_index, mapping);
  SimConfig sim = cfg.sim;
  sim.benign = benign_profile(cfg.profiles.at(profile_index));
  sim.seed = seed;
  sim.attack.reset();
  sim.drain_cycles = 0;

  std::vector<SpatioTemporalGraph> out;
  out.reserve(kTracesPerMapping);
  auto tag = [&](SpatioTemporalGraph g, ScenarioKind kind) {
    g.profile = sim.benign.name;
    g.mapping = mapping;
    g.kind = kind;
    out.push_back(std::move(g));
  };

  // One clean run cut into two consecutive windows.
  for (auto& w : run_windows(sim, 2)) tag(graph_from_trace(w, cfg.length, structure), ScenarioKind::Normal);

  Rng rng(hash_combine(seed, 0xA77AC4ull));
  const auto mips = draw_mips(t, cfg.n_mips, rng);
  const auto& mcs = t.mc_nodes();
  for (int a = 0; a < 4; ++a) {
    AttackConfig ac;
    ac.mips = mips;
    ac.pir = cfg.pir;
    ac.start_cycle = cfg.attack_start;
    std::vector<NodeId> pool = mcs;
    rng.shuffle(pool.begin(), pool.end());
    ac.vips.assign(pool.begin(), pool.begin() + (a < 3 ? 1 : 2));
    std::sort(ac.vips.begin(), ac.vips.end());
    sim.attack = ac;
    tag(graph_from_trace(run_scenario(sim), cfg.length, structure), ScenarioKind::Attack);
  }
  return out;
}

Dataset generate_dataset(const DatasetConfig& cfg) {
  check_config(cfg);
  validate(cfg.sim);
  Dataset d;
  d.structure = make_structure(cfg.sim.topology);
  d.length = cfg.length;
  d.train_fraction = cfg.train_fraction;
  d.split_seed = hash_combine(cfg.seed, 0x5B117ull);
  d.generator = to_json(cfg).dump();

  const std::size_t jobs = cfg.profiles.size() * cfg.mappings_per_profile;
  std::vector<std::vector<SpatioTemporalGraph>> results(jobs);
  std::vector<std::exception_ptr> errors(jobs);
#pragma omp parallel for schedule(dynamic)
  for (std::size_t j = 0; j < jobs; ++j) {
    try {
      results[j] = generate_mapping(cfg, j / cfg.mappings_per_profile,
                                    static_cast<std::uint32_t>(j % cfg.mappings_per_profile), d.structure);
    } catch (...) {
      errors[j] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  for (auto& r : results)
    for (auto& g : r) d.graphs.push_back(std::move(g));

  d.split = split_dataset(d.graph_labels(), cfg.train_fraction, d.split_seed);
  d.weights = class_weights(d, d.split.train);
  return d;
}

nlohmann::json to_json(const DatasetConfig& cfg) {
  return {{"sim", to_json(cfg.sim)},
          {"profiles", cfg.profiles},
          {"mappings_per_profile", cfg.mappings_per_profile},
          {"n_mips", cfg.n_mips},
          {"pir", cfg.pir},
          {"length", cfg.length},
          {"attack_start", cfg.attack_start},
          {"seed", cfg.seed},
          {"train_fraction", cfg.train_fraction}};
}

DatasetConfig dataset_config_from_json(const nlohmann::json& j) {
  try {
    DatasetConfig cfg;
    // Accept either a full "sim" block or a bare topology.
    if (j.contains("sim")) {
      cfg.sim = sim_config_from_json(j.at("sim"));
    } else {
      cfg = default_dataset_config(topology_from_json(j.at("topology")));
      cfg.sim.duration = j.value("duration", cfg.sim.duration);
      cfg.sim.warmup = j.value("warmup", cfg.sim.warmup);
    }
    if (j.contains("profiles")) cfg.profiles = j.at("profiles").get<std::vector<std::string>>();
    cfg.mappings_per_profile = j.value("mappings_per_profile", cfg.mappings_per_profile);
    cfg.n_mips = j.value("n_mips", cfg.n_mips);
    cfg.pir = j.value("pir", cfg.pir);
    cfg.length = j.value("length", cfg.length);
    cfg.attack_start = j.value("attack_start", cfg.attack_start);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.train_fraction = j.value("train_fraction", cfg.train_fraction);
    check_config(cfg);
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("dataset config: ") + e.what());
  }
}

namespace {
constexpr char kDatasetMagic[4] = {'N', 'G', 'D', 'S'};
constexpr std::uint32_t kDatasetVersion = 1;

void write_ids(ByteWriter& w, const std::vector<NodeId>& ids) {
  w.u32(static_cast<std::uint32_t>(ids.size()));
  for (auto v : ids) w.u32(v);
}
std::vector<NodeId> read_ids(ByteReader& r) {
  std::vector<NodeId> ids(r.u32());
  for (auto& v : ids) v = r.u32();
  return ids;
}
void write_indices(ByteWriter& w, const std::vector<std::size_t>& idx) {
  w.u32(static_cast<std::uint32_t>(idx.size()));
  for (auto v : idx) w.u32(static_cast<std::uint32_t>(v));
}
std::vector<std::size_t> read_indices(ByteReader& r, std::size_t limit) {
  std::vector<std::size_t> idx(r.u32());
  for (auto& v : idx) {
    v = r.u32();
    if (v >= limit) throw Error(ErrorCode::Io, "split index out of range");
  }
  return idx;
}
}  // namespace

std::vector<std::uint8_t> serialize_dataset(const Dataset& d) {
  if (!d.structure) throw Error(ErrorCode::Shape, "dataset has no topology");
  const auto& t = d.structure->topology;
  ByteWriter w;
  w.raw({kDatasetMagic, 4});
  w.u32(kDatasetVersion);
  w.u8(static_cast<std::uint8_t>(t.kind()));
  w.u32(t.dim());
  w.u64(t.digest());
  w.u32(static_cast<std::uint32_t>(t.node_count()));
  w.u32(d.length);
  w.f64(d.normalization);
  w.f64(d.weights.benign);
  w.f64(d.weights.malicious);
  w.u64(d.split_seed);
  w.f64(d.train_fraction);
  w.string32(d.generator);
  w.u32(static_cast<std::uint32_t>(d.graphs.size()));
  for (const auto& g : d.graphs) {
    w.string32(g.profile);
    w.u32(g.mapping);
    w.u8(static_cast<std::uint8_t>(g.kind));
    w.u8(g.attack ? 1 : 0);
    if (g.attack) {
      write_ids(w, g.attack->mips);
      write_ids(w, g.attack->vips);
      w.f64(g.attack->pir);
      w.u64(g.attack->start_cycle);
    }
    w.u8(g.graph_label);
    w.bytes(g.labels);
    for (float v : g.x) w.f32(v);
  }
  write_indices(w, d.split.train);
  write_indices(w, d.split.test);
  const std::uint64_t digest = digest64(w.buffer());
  w.u64(digest);
  return w.take();
}

Dataset deserialize_dataset(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8) throw Error(ErrorCode::Io, "dataset file is truncated");
  ByteReader r(bytes, ErrorCode::Io);
  if (r.raw(4) != std::string_view(kDatasetMagic, 4)) throw Error(ErrorCode::Io, "not a dataset file (bad magic)");
  if (const auto v = r.u32(); v != kDatasetVersion)
    throw Error(ErrorCode::UnsupportedVersion, "dataset version " + std::to_string(v));
  {
    ByteReader tail(bytes.subspan(bytes.size() - 8), ErrorCode::Io);
    if (tail.u64() != digest64(bytes.first(bytes.size() - 8)))
      throw Error(ErrorCode::Io, "dataset digest mismatch (corrupt or truncated file)");
  }
  Dataset d;
  const auto kind = static_cast<TopologyKind>(r.u8());
  const auto dim = r.u32();
  const auto digest = r.u64();
  d.structure = make_structure(build_topology(kind, dim));
  if (d.structure->topology.digest() != digest) throw Error(ErrorCode::Io, "dataset topology digest mismatch");
  const std::size_t n = r.u32();
  if (n != d.structure->topology.node_count()) throw Error(ErrorCode::Io, "dataset node count mismatch");
  d.length = r.u32();
  d.normalization = r.f64();
  d.weights.benign = r.f64();
  d.weights.malicious = r.f64();
  d.split_seed = r.u64();
  d.train_fraction = r.f64();
  d.generator = r.string32();
  const std::size_t count = r.u32();
  d.graphs.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    SpatioTemporalGraph g;
    g.structure = d.structure;
    g.length = d.length;
    g.profile = r.string32();
    g.mapping = r.u32();
    g.kind = static_cast<ScenarioKind>(r.u8());
    if (r.u8()) {
      AttackConfig a;
      a.mips = read_ids(r);
      a.vips = read_ids(r);
      a.pir = r.f64();
      a.start_cycle = r.u64();
      g.attack = std::move(a);
    }
    g.graph_label = r.u8();
    auto lb = r.bytes(n);
    g.labels.assign(lb.begin(), lb.end());
    g.x.resize(n * 2 * d.length);
    for (auto& v : g.x) v = r.f32();
    d.graphs.push_back(std::move(g));
  }
  d.split.train = read_indices(r, count);
  d.split.test = read_indices(r, count);
  r.u64();
  if (r.remaining() != 0) throw Error(ErrorCode::Io, "trailing bytes after dataset");
  return d;
}

void save_dataset(const Dataset& d, const std::string& path) { write_file(path, serialize_dataset(d)); }

Dataset load_dataset(const std::string& path) { return deserialize_dataset(read_file(path)); }

}  // namespace nocguard
