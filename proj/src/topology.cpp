#include "nocguard/topology.hpp"

#include <algorithm>
#include <set>

#include "nocguard/binary_io.hpp"
#include "nocguard/error.hpp"

namespace nocguard {

std::string to_string(TopologyKind kind) {
  return kind == TopologyKind::Mesh3D ? "mesh3d" : "mesh2d";
}

TopologyKind topology_kind_from_string(const std::string& s) {
  if (s == "mesh2d") return TopologyKind::Mesh2D;
  if (s == "mesh3d") return TopologyKind::Mesh3D;
  throw Error(ErrorCode::InvalidConfig, "unknown topology kind '" + s + "'");
}

bool Topology::is_mc(NodeId id) const noexcept {
  return std::find(mc_nodes_.begin(), mc_nodes_.end(), id) != mc_nodes_.end();
}

Coord Topology::coord(NodeId id) const noexcept {
  Coord c;
  c.x = id % n_;
  c.y = (id / n_) % n_;
  c.z = kind_ == TopologyKind::Mesh3D ? id / (n_ * n_) : 0;
  return c;
}

NodeId Topology::neighbor_via(NodeId id, Port port) const noexcept {
  const auto none = static_cast<NodeId>(node_count_);
  Coord c = coord(id);
  const bool three_d = kind_ == TopologyKind::Mesh3D;
  switch (port) {
    case Port::East:
      if (c.x + 1 >= n_) return none;
      ++c.x;
      break;
    case Port::West:
      if (c.x == 0) return none;
      --c.x;
      break;
    case Port::North:
      if (c.y + 1 >= n_) return none;
      ++c.y;
      break;
    case Port::South:
      if (c.y == 0) return none;
      --c.y;
      break;
    case Port::Up:
      if (!three_d || c.z + 1 >= n_) return none;
      ++c.z;
      break;
    case Port::Down:
      if (!three_d || c.z == 0) return none;
      --c.z;
      break;
    case Port::Local:
      return id;
  }
  return this->id(c);
}

Port Topology::next_port(NodeId current, NodeId dst) const noexcept {
  const Coord a = coord(current);
  const Coord b = coord(dst);
  if (b.x > a.x) return Port::East;
  if (b.x < a.x) return Port::West;
  if (b.y > a.y) return Port::North;
  if (b.y < a.y) return Port::South;
  if (b.z > a.z) return Port::Up;
  if (b.z < a.z) return Port::Down;
  return Port::Local;
}

std::uint32_t Topology::manhattan(NodeId a, NodeId b) const noexcept {
  const Coord p = coord(a);
  const Coord q = coord(b);
  auto d = [](std::uint32_t u, std::uint32_t v) { return u > v ? u - v : v - u; };
  return d(p.x, q.x) + d(p.y, q.y) + d(p.z, q.z);
}

std::uint64_t Topology::digest() const { return digest64(to_json(*this).dump()); }

std::vector<Edge> mesh_edges(TopologyKind kind, std::uint32_t n) {
  if (n == 0) throw Error(ErrorCode::InvalidDimension, "mesh dimension must be >= 1");
  const std::uint32_t layers = kind == TopologyKind::Mesh3D ? n : 1;
  std::vector<Edge> edges;
  auto id = [n](std::uint32_t x, std::uint32_t y, std::uint32_t z) { return x + y * n + z * n * n; };
  for (std::uint32_t z = 0; z < layers; ++z)
    for (std::uint32_t y = 0; y < n; ++y)
      for (std::uint32_t x = 0; x < n; ++x) {
        const NodeId here = id(x, y, z);
        if (x + 1 < n) edges.emplace_back(here, id(x + 1, y, z));
        if (y + 1 < n) edges.emplace_back(here, id(x, y + 1, z));
        if (z + 1 < layers) edges.emplace_back(here, id(x, y, z + 1));
      }
  std::sort(edges.begin(), edges.end());
  return edges;
}

Topology Topology::make(TopologyKind kind, std::uint32_t n) {
  Topology t;
  t.edges_ = mesh_edges(kind, n);
  t.kind_ = kind;
  t.n_ = n;
  t.node_count_ = kind == TopologyKind::Mesh3D ? std::size_t{n} * n * n : std::size_t{n} * n;
  t.neighbors_.assign(t.node_count_, {});
  for (auto [a, b] : t.edges_) {
    t.neighbors_[a].push_back(b);
    t.neighbors_[b].push_back(a);
  }
  for (auto& nb : t.neighbors_) std::sort(nb.begin(), nb.end());

  if (kind == TopologyKind::Mesh2D) {
    t.mc_nodes_ = {0, n - 1, n * (n - 1), n * n - 1};
  } else {
    const std::uint32_t m = n - 1;
    t.mc_nodes_ = {t.id({0, 0, 0}), t.id({m, m, 0}), t.id({m, 0, m}), t.id({0, m, m})};
  }
  std::set<NodeId> distinct(t.mc_nodes_.begin(), t.mc_nodes_.end());
  if (distinct.size() != 4)
    throw Error(ErrorCode::McPlacement,
                "a " + to_string(kind) + " of dimension " + std::to_string(n) +
                    " cannot host four distinct memory controllers");
  return t;
}

Topology build_mesh_2d(std::uint32_t n) { return Topology::make(TopologyKind::Mesh2D, n); }
Topology build_mesh_3d(std::uint32_t n) { return Topology::make(TopologyKind::Mesh3D, n); }

Topology build_topology(TopologyKind kind, std::uint32_t n) {
  return kind == TopologyKind::Mesh3D ? build_mesh_3d(n) : build_mesh_2d(n);
}

BinaryMatrix adjacency_matrix(const Topology& t) {
  BinaryMatrix a;
  a.n = t.node_count();
  a.data.assign(a.n * a.n, 0);
  for (auto [u, v] : t.edges()) {
    a(u, v) = 1;
    a(v, u) = 1;
  }
  return a;
}

std::vector<NodeId> route(const Topology& t, NodeId src, NodeId dst) {
  if (!t.contains(src) || !t.contains(dst))
    throw Error(ErrorCode::InvalidNode, "route endpoints must be < " + std::to_string(t.node_count()));
  std::vector<NodeId> hops{src};
  NodeId cur = src;
  for (Port p = t.next_port(cur, dst); p != Port::Local; p = t.next_port(cur, dst)) {
    cur = t.neighbor_via(cur, p);
    hops.push_back(cur);
  }
  return hops;
}

nlohmann::json to_json(const Topology& t) {
  nlohmann::json edges = nlohmann::json::array();
  for (auto [a, b] : t.edges()) edges.push_back({a, b});
  return {{"kind", to_string(t.kind())},
          {"n", t.dim()},
          {"N", t.node_count()},
          {"edges", std::move(edges)},
          {"mc_nodes", t.mc_nodes()}};
}

Topology topology_from_json(const nlohmann::json& j) {
  try {
    auto t = build_topology(topology_kind_from_string(j.at("kind").get<std::string>()),
                            j.at("n").get<std::uint32_t>());
    if (j.contains("N") && j.at("N").get<std::size_t>() != t.node_count())
      throw Error(ErrorCode::InvalidConfig, "topology N does not match kind/n");
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("topology json: ") + e.what());
  }
}

}  // namespace nocguard
