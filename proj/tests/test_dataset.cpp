#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <set>

#include "nocguard/dataset.hpp"
#include "nocguard/rng.hpp"
#include "support.hpp"

using namespace nocguard;

namespace {

DatasetConfig small_config(std::uint64_t seed = 5) {
  auto cfg = default_dataset_config(build_mesh_2d(4));
  cfg.sim.duration = 600;
  cfg.sim.warmup = 200;
  cfg.length = 60;
  cfg.profiles = {"uniform-high", "nearest-mc"};
  cfg.mappings_per_profile = 3;
  cfg.n_mips = 2;
  cfg.attack_start = 100;
  cfg.seed = seed;
  return cfg;
}

TraceSet synthetic_trace(const Topology& t, std::size_t in_len, std::size_t out_len) {
  TraceSet tr;
  tr.kind = t.kind();
  tr.dim = t.dim();
  tr.topology_digest = t.digest();
  tr.nodes.resize(t.node_count());
  tr.nodes[1].iifd.assign(in_len, 7);
  tr.nodes[1].oifd.assign(out_len, 3);
  return tr;
}

}  // namespace

TEST_SUITE("dataset") {
  TEST_CASE("window truncation and padding") {
    const auto t = build_mesh_2d(2);
    const auto d = window_delays(synthetic_trace(t, 950, 83), 400);
    REQUIRE(d.size() == 4 * 2 * 400);
    const auto* in = &d[(1 * 2 + 0) * 400];
    const auto* out = &d[(1 * 2 + 1) * 400];
    CHECK(std::all_of(in, in + 400, [](auto v) { return v == 7; }));
    CHECK(std::all_of(out, out + 83, [](auto v) { return v == 3; }));
    CHECK(std::all_of(out + 83, out + 400, [](auto v) { return v == 255; }));

    const auto x = window_trace(synthetic_trace(t, 950, 83), 400);
    for (std::size_t i = 0; i < 800; ++i) CHECK(x[i] == 1.0f);  // idle node 0
    CHECK(x[(1 * 2 + 0) * 400] == doctest::Approx(7.0 / 255.0));
    CHECK(std::all_of(x.begin(), x.end(), [](float v) { return v >= 0.0f && v <= 1.0f; }));
  }

  TEST_CASE("graph shapes and adjacency") {
    const auto s4 = make_structure(build_mesh_2d(2));
    const auto g = build_graph(std::vector<float>(4 * 2 * 400, 0.5f), 400, s4, {0, 1, 0, 0});
    CHECK(g.x.size() == 4 * 2 * 400);
    CHECK(g.graph_label == 1);
    CHECK_ERROR(Shape, build_graph(std::vector<float>(3 * 2 * 400), 400, s4, {0, 0, 0, 0}));
    CHECK_ERROR(Shape, build_graph(std::vector<float>(4 * 2 * 400), 400, s4, {0, 0, 0}));

    const auto s3 = make_structure(build_mesh_3d(4));
    CHECK(std::accumulate(s3->adjacency.data.begin(), s3->adjacency.data.end(), 0) == 288);
    CHECK(s3->neighbors.index.size() == 288);
  }

  TEST_CASE("relabeling nodes gives an isomorphic graph") {
    const auto t = build_mesh_2d(3);
    const auto a = adjacency_matrix(t);
    Rng rng(3);
    std::vector<std::size_t> p(9);
    std::iota(p.begin(), p.end(), 0);
    rng.shuffle(p.begin(), p.end());
    BinaryMatrix pa{9, std::vector<std::uint8_t>(81)};
    for (std::size_t i = 0; i < 9; ++i)
      for (std::size_t j = 0; j < 9; ++j) pa(p[i], p[j]) = a(i, j);
    // Degree multiset and edge count are relabeling invariants.
    auto degrees = [](const BinaryMatrix& m) {
      std::multiset<int> d;
      for (std::size_t i = 0; i < m.n; ++i) {
        int s = 0;
        for (std::size_t j = 0; j < m.n; ++j) s += m(i, j);
        d.insert(s);
      }
      return d;
    };
    CHECK(degrees(pa) == degrees(a));
    for (std::size_t i = 0; i < 9; ++i)
      for (std::size_t j = 0; j < 9; ++j) CHECK(pa(p[i], p[j]) == a(i, j));
    CHECK_NOTHROW(kernels::neighbors_from_adjacency(pa));
  }

  TEST_CASE("class weights") {
    auto w = class_weights(32, 32);
    CHECK(w.benign == 1.0);
    CHECK(w.malicious == 1.0);
    w = class_weights(61, 3);
    CHECK(w.malicious == doctest::Approx(64.0 / 6.0));
    CHECK(w.benign == doctest::Approx(64.0 / 122.0));
    CHECK(w.benign * 61 == doctest::Approx(32.0));
    CHECK(w.malicious * 3 == doctest::Approx(32.0));
    // 4 graphs of 64 nodes, two of them attacks with 3 MIPs each.
    w = class_weights(256 - 6, 6);
    CHECK(w.malicious == doctest::Approx(256.0 / 12.0));
    CHECK(w.benign == doctest::Approx(256.0 / 500.0));
    CHECK_ERROR(DegenerateClass, class_weights(10, 0));
    CHECK_ERROR(DegenerateClass, class_weights(0, 10));
  }

  TEST_CASE("stratified split sizes") {
    std::vector<std::uint8_t> labels(2688);
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = i % 3 != 0;
    auto s = split_dataset(labels, 0.9, 1);
    CHECK(s.train.size() == 2419);
    CHECK(s.test.size() == 269);

    labels = {0, 0, 0, 0, 1, 1, 1, 1, 1, 1};
    s = split_dataset(labels, 0.9, 7);
    CHECK(s.train.size() == 9);
    CHECK(s.test.size() == 1);
    const auto in_train = [&](std::uint8_t c) {
      return std::any_of(s.train.begin(), s.train.end(), [&](auto i) { return labels[i] == c; });
    };
    CHECK(in_train(0));
    CHECK(in_train(1));

    s = split_dataset({0, 1}, 0.5, 3);
    CHECK(s.train.size() == 1);
    CHECK(s.test.size() == 1);

    CHECK_ERROR(Stratification, split_dataset({0}, 0.9, 1));
    CHECK_ERROR(Stratification, split_dataset({0, 1, 1}, 0.1, 1));
    CHECK_ERROR(InvalidConfig, split_dataset({0, 1}, 1.0, 1));
  }

  TEST_CASE("split is a seeded partition preserving class ratio") {
    std::vector<std::uint8_t> labels(300);
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = i % 3 != 0;
    const auto a = split_dataset(labels, 0.9, 11), b = split_dataset(labels, 0.9, 11);
    CHECK(a.train == b.train);
    CHECK(a.test == b.test);
    std::vector<std::size_t> all = a.train;
    all.insert(all.end(), a.test.begin(), a.test.end());
    std::sort(all.begin(), all.end());
    std::vector<std::size_t> expect(300);
    std::iota(expect.begin(), expect.end(), 0);
    CHECK(all == expect);
    const auto attacks = std::count_if(a.test.begin(), a.test.end(), [&](auto i) { return labels[i] == 1; });
    CHECK(attacks == 20);
    CHECK(split_dataset(labels, 0.9, 12).test != a.test);
  }

  TEST_CASE("generated dataset follows the collection protocol") {
    const auto cfg = small_config();
    const auto d = generate_dataset(cfg);
    REQUIRE(d.graphs.size() == 2 * 3 * 6);
    for (std::size_t m = 0; m < d.graphs.size(); m += 6) {
      int normal = 0, attack = 0;
      for (std::size_t k = m; k < m + 6; ++k) {
        const auto& g = d.graphs[k];
        (g.kind == ScenarioKind::Normal ? normal : attack)++;
        const auto marked = std::accumulate(g.labels.begin(), g.labels.end(), 0);
        CHECK(g.graph_label == (marked > 0));
        if (g.kind == ScenarioKind::Attack) {
          CHECK(marked == 2);
          REQUIRE(g.attack.has_value());
          CHECK(g.attack->mips == d.graphs[m + 2].attack->mips);
          for (auto v : g.attack->vips) CHECK(g.structure->topology.is_mc(v));
        } else {
          CHECK(marked == 0);
        }
        CHECK(std::all_of(g.x.begin(), g.x.end(), [](float v) { return v >= 0.0f && v <= 1.0f; }));
      }
      CHECK(normal == 2);
      CHECK(attack == 4);
      CHECK(d.graphs[m + 5].attack->vips.size() == 2);
      CHECK(d.graphs[m + 2].attack->vips.size() == 1);
    }
    // MIPs are redrawn per mapping.
    std::set<std::vector<NodeId>> mip_sets;
    for (std::size_t m = 0; m < d.graphs.size(); m += 6) mip_sets.insert(d.graphs[m + 2].attack->mips);
    CHECK(mip_sets.size() > 1);

    std::size_t benign = 0, malicious = 0;
    for (auto i : d.split.train)
      for (auto l : d.graphs[i].labels) (l ? malicious : benign)++;
    CHECK(d.weights.benign * benign == doctest::Approx(d.weights.malicious * malicious));
    CHECK(d.weights.benign * benign == doctest::Approx((benign + malicious) / 2.0));
  }

  TEST_CASE("regeneration is byte identical and round trips") {
    const auto a = serialize_dataset(generate_dataset(small_config(9)));
    const auto b = serialize_dataset(generate_dataset(small_config(9)));
    CHECK(a == b);
    CHECK(std::string(a.begin(), a.begin() + 4) == "NGDS");
    CHECK(serialize_dataset(deserialize_dataset(a)) == a);
    CHECK(serialize_dataset(generate_dataset(small_config(10))) != a);

    auto bad = a;
    bad[bad.size() / 3] ^= 1;
    CHECK_ERROR(Io, deserialize_dataset(bad));
  }

  TEST_CASE("benign workload is identical until the attack starts") {
    auto c = small_config().sim;
    c.benign = benign_profile("mixed");
    c.seed = 77;
    c.record_events = true;
    c.warmup = 0;
    c.duration = 400;
    auto events_of = [](SimConfig cfg) {
      Simulator sim(cfg);
      sim.begin_window();
      sim.run(cfg.duration);
      return sim.events();
    };
    const auto clean = events_of(c);
    c.attack = AttackConfig{{5, 6}, {0}, 0.2, 150};
    const auto attacked = events_of(c);
    for (NodeId j = 0; j < 16; ++j) {
      auto prefix = [](const std::vector<std::uint64_t>& v) {
        return std::vector<std::uint64_t>(v.begin(), std::find_if(v.begin(), v.end(), [](auto t) { return t >= 150; }));
      };
      CHECK(prefix(clean.outbound[j]) == prefix(attacked.outbound[j]));
      CHECK(prefix(clean.inbound[j]) == prefix(attacked.inbound[j]));
    }
  }

  TEST_CASE("mip placement limits") {
    auto cfg = small_config();
    cfg.sim.topology = build_mesh_2d(3);
    cfg.n_mips = 5;
    CHECK_ERROR(CannotPlaceMips, generate_dataset(cfg));
    cfg.sim.topology = build_mesh_2d(2);  // every node is a corner
    cfg.n_mips = 1;
    CHECK_ERROR(CannotPlaceMips, generate_dataset(cfg));
  }

  TEST_CASE("config json round trip") {
    const auto cfg = small_config(21);
    const auto back = dataset_config_from_json(to_json(cfg));
    CHECK(to_json(back) == to_json(cfg));
    const auto bare = dataset_config_from_json({{"topology", {{"kind", "mesh3d"}, {"n", 4}}}, {"n_mips", 2}});
    CHECK(bare.sim.topology == build_mesh_3d(4));
    CHECK(bare.n_mips == 2);
    CHECK(bare.profiles.size() == 7);
  }
}
