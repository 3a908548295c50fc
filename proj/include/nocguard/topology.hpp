#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace nocguard {

using NodeId = std::uint32_t;

enum class TopologyKind : std::uint8_t { Mesh2D = 0, Mesh3D = 1 };

std::string to_string(TopologyKind kind);
TopologyKind topology_kind_from_string(const std::string& s);

struct Coord {
  std::uint32_t x = 0, y = 0, z = 0;
  bool operator==(const Coord&) const = default;
};

// Router ports. Up/Down exist only in 3D meshes.
enum class Port : std::uint8_t { Local = 0, East, West, North, South, Up, Down };
inline constexpr std::size_t kMaxPorts = 7;

using Edge = std::pair<NodeId, NodeId>;

/// Square 0/1 matrix in row-major order.
struct BinaryMatrix {
  std::size_t n = 0;
  std::vector<std::uint8_t> data;

  std::uint8_t operator()(std::size_t i, std::size_t j) const { return data[i * n + j]; }
  std::uint8_t& operator()(std::size_t i, std::size_t j) { return data[i * n + j]; }
  bool operator==(const BinaryMatrix&) const = default;
};

/// Immutable 2D or 3D mesh. Node ids are x + y*n (+ z*n*n).
class Topology {
 public:
  Topology() = default;

  TopologyKind kind() const noexcept { return kind_; }
  std::uint32_t dim() const noexcept { return n_; }
  std::size_t node_count() const noexcept { return node_count_; }
  std::size_t port_count() const noexcept { return kind_ == TopologyKind::Mesh3D ? 7 : 5; }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  const std::vector<NodeId>& mc_nodes() const noexcept { return mc_nodes_; }
  const std::vector<NodeId>& neighbors(NodeId id) const { return neighbors_.at(id); }

  bool is_mc(NodeId id) const noexcept;
  Coord coord(NodeId id) const noexcept;
  NodeId id(Coord c) const noexcept { return c.x + c.y * n_ + c.z * n_ * n_; }
  bool contains(NodeId id) const noexcept { return id < node_count_; }

  /// Neighbor reached through `port`, or node_count() when the port leads off-mesh.
  NodeId neighbor_via(NodeId id, Port port) const noexcept;

  /// Output port for the next XY(Z) hop from `current` toward `dst`; Local when arrived.
  Port next_port(NodeId current, NodeId dst) const noexcept;

  std::uint32_t manhattan(NodeId a, NodeId b) const noexcept;

  /// Digest of the canonical JSON form.
  std::uint64_t digest() const;

  bool operator==(const Topology& other) const noexcept {
    return kind_ == other.kind_ && n_ == other.n_;
  }

 private:
  friend Topology build_mesh_2d(std::uint32_t n);
  friend Topology build_mesh_3d(std::uint32_t n);
  static Topology make(TopologyKind kind, std::uint32_t n);

  TopologyKind kind_ = TopologyKind::Mesh2D;
  std::uint32_t n_ = 0;
  std::size_t node_count_ = 0;
  std::vector<Edge> edges_;
  std::vector<NodeId> mc_nodes_;
  std::vector<std::vector<NodeId>> neighbors_;
};

/// Sorted edge list of an n-ary mesh. Valid for n >= 1, including meshes too small
/// to host memory controllers.
std::vector<Edge> mesh_edges(TopologyKind kind, std::uint32_t n);

Topology build_mesh_2d(std::uint32_t n);
Topology build_mesh_3d(std::uint32_t n);
Topology build_topology(TopologyKind kind, std::uint32_t n);

BinaryMatrix adjacency_matrix(const Topology& t);

/// Dimension-ordered route, source and destination inclusive.
std::vector<NodeId> route(const Topology& t, NodeId src, NodeId dst);

nlohmann::json to_json(const Topology& t);
Topology topology_from_json(const nlohmann::json& j);

}  // namespace nocguard
