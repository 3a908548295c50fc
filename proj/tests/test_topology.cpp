#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <set>

#include "nocguard/topology.hpp"
#include "support.hpp"

using namespace nocguard;

namespace {

// Brute-force oracle: every pair of coordinates at unit L1 distance.
std::set<Edge> enumerate_edges(TopologyKind kind, std::uint32_t n) {
  const std::uint32_t nz = kind == TopologyKind::Mesh3D ? n : 1;
  std::vector<std::array<int, 3>> coords;
  for (std::uint32_t z = 0; z < nz; ++z)
    for (std::uint32_t y = 0; y < n; ++y)
      for (std::uint32_t x = 0; x < n; ++x) coords.push_back({int(x), int(y), int(z)});
  std::set<Edge> out;
  for (std::size_t a = 0; a < coords.size(); ++a)
    for (std::size_t b = a + 1; b < coords.size(); ++b) {
      int d = 0;
      for (int k = 0; k < 3; ++k) d += std::abs(coords[a][k] - coords[b][k]);
      if (d == 1) {
        auto id = [n](const std::array<int, 3>& c) { return NodeId(c[0] + c[1] * n + c[2] * n * n); };
        out.insert({std::min(id(coords[a]), id(coords[b])), std::max(id(coords[a]), id(coords[b]))});
      }
    }
  return out;
}

}  // namespace

TEST_SUITE("topology") {
  TEST_CASE("smallest 2d mesh") {
    const auto t = build_mesh_2d(2);
    CHECK(t.node_count() == 4);
    CHECK(t.edges() == std::vector<Edge>{{0, 1}, {0, 2}, {1, 3}, {2, 3}});
    const auto a = adjacency_matrix(t);
    for (std::size_t i = 0; i < 4; ++i) {
      int row = 0;
      for (std::size_t j = 0; j < 4; ++j) row += a(i, j);
      CHECK(row == 2);
    }
  }

  TEST_CASE("8x8 mesh census against enumeration") {
    const auto t = build_mesh_2d(8);
    CHECK(t.node_count() == 64);
    const auto oracle = enumerate_edges(TopologyKind::Mesh2D, 8);
    CHECK(oracle.size() == 112);
    CHECK(std::set<Edge>(t.edges().begin(), t.edges().end()) == oracle);
    CHECK(t.mc_nodes() == std::vector<NodeId>{0, 7, 56, 63});

    const auto a = adjacency_matrix(t);
    for (NodeId i = 0; i < 64; ++i) {
      const auto c = t.coord(i);
      const int border = (c.x == 0 || c.x == 7) + (c.y == 0 || c.y == 7);
      int row = 0;
      for (std::size_t j = 0; j < 64; ++j) row += a(i, j);
      CHECK(row == 4 - border);
    }
  }

  TEST_CASE("3d mesh census and memory controllers") {
    const auto t = build_mesh_3d(4);
    CHECK(t.node_count() == 64);
    const auto oracle = enumerate_edges(TopologyKind::Mesh3D, 4);
    CHECK(oracle.size() == 144);
    CHECK(std::set<Edge>(t.edges().begin(), t.edges().end()) == oracle);
    auto mcs = t.mc_nodes();
    std::sort(mcs.begin(), mcs.end());
    CHECK(mcs == std::vector<NodeId>{0, 15, 51, 60});
  }

  TEST_CASE("closed-form edge counts for n in 1..8") {
    for (std::uint32_t n = 1; n <= 8; ++n) {
      CHECK(mesh_edges(TopologyKind::Mesh2D, n).size() == 2 * n * (n - 1));
      CHECK(mesh_edges(TopologyKind::Mesh3D, n).size() == 3 * n * n * (n - 1));
      CHECK(enumerate_edges(TopologyKind::Mesh2D, n).size() == 2 * n * (n - 1));
    }
  }

  TEST_CASE("degenerate dimensions") {
    CHECK_ERROR(InvalidDimension, build_mesh_2d(0));
    CHECK_ERROR(InvalidDimension, build_mesh_3d(0));
    CHECK_ERROR(McPlacement, build_mesh_3d(1));
    CHECK(mesh_edges(TopologyKind::Mesh3D, 1).empty());
  }

  TEST_CASE("adjacency symmetric with empty diagonal") {
    for (auto t : {build_mesh_2d(2), build_mesh_2d(5), build_mesh_2d(8), build_mesh_3d(2), build_mesh_3d(4)}) {
      const auto a = adjacency_matrix(t);
      for (std::size_t i = 0; i < a.n; ++i) {
        CHECK(a(i, i) == 0);
        for (std::size_t j = 0; j < a.n; ++j) CHECK(a(i, j) == a(j, i));
      }
    }
  }

  TEST_CASE("route examples") {
    const auto t4 = build_mesh_2d(4);
    CHECK(route(t4, 0, 6) == std::vector<NodeId>{0, 1, 2, 6});
    CHECK(route(t4, 9, 9) == std::vector<NodeId>{9});
    CHECK(route(build_mesh_3d(4), 0, 21) == std::vector<NodeId>{0, 1, 5, 21});
    CHECK_ERROR(InvalidNode, route(t4, 0, 16));
    CHECK_ERROR(InvalidNode, route(t4, 99, 0));
  }

  TEST_CASE("routes are minimal, adjacent, dimension ordered and repeatable") {
    std::vector<Topology> ts;
    for (std::uint32_t n = 2; n <= 8; ++n) ts.push_back(build_mesh_2d(n));
    ts.push_back(build_mesh_3d(3));
    ts.push_back(build_mesh_3d(4));
    for (const auto& t : ts) {
      const auto a = adjacency_matrix(t);
      for (NodeId s = 0; s < t.node_count(); ++s)
        for (NodeId d = 0; d < t.node_count(); ++d) {
          const auto r = route(t, s, d);
          REQUIRE(r.front() == s);
          REQUIRE(r.back() == d);
          REQUIRE(r.size() - 1 == t.manhattan(s, d));
          int stage = 0;  // 0 = x, 1 = y, 2 = z; never moves backwards
          for (std::size_t h = 1; h < r.size(); ++h) {
            REQUIRE(a(r[h - 1], r[h]) == 1);
            const auto p = t.coord(r[h - 1]), q = t.coord(r[h]);
            const int axis = p.x != q.x ? 0 : p.y != q.y ? 1 : 2;
            REQUIRE(axis >= stage);
            stage = axis;
          }
          if ((s * 31 + d) % 97 == 0) REQUIRE(route(t, s, d) == r);
        }
    }
  }

  TEST_CASE("json round trip") {
    for (auto t : {build_mesh_2d(8), build_mesh_3d(4)}) {
      const auto j = to_json(t);
      CHECK(j.at("N") == t.node_count());
      CHECK(j.at("edges").size() == t.edges().size());
      const auto back = topology_from_json(j);
      CHECK(back == t);
      CHECK(back.digest() == t.digest());
    }
    CHECK(build_mesh_2d(8).digest() != build_mesh_3d(4).digest());
  }
}
