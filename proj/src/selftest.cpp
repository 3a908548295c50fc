#include "nocguard/selftest.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <sstream>

#include "nocguard/dataset.hpp"
#include "nocguard/inference.hpp"
#include "nocguard/model.hpp"
#include "nocguard/simulator.hpp"

namespace nocguard {

namespace {

Tensor<double> uniform(Shape s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<double> t(std::move(s));
  for (auto& v : t.data) v = lo + (hi - lo) * rng.uniform();
  return t;
}

std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) { return lo + rng.next() % (hi - lo + 1); }

Var square_sum(Tape<double>& t, Var v) { return t.sum(t.square(v)); }

kernels::Neighbors random_neighbors(std::size_t n, Rng& rng) {
  BinaryMatrix a{n, std::vector<std::uint8_t>(n * n)};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) a(i, j) = a(j, i) = rng.uniform() < 0.5;
  return kernels::neighbors_from_adjacency(a);
}

struct Case {
  NamedTensors inputs;
  LossBuilder loss;
};

// One random instance of a layer; keeps any graph structure alive in the closure.
Case make_case(const std::string& layer, Rng& rng) {
  if (layer == "conv1d") {
    const std::size_t b = pick(rng, 1, 3), ci = pick(rng, 1, 3), co = pick(rng, 1, 4), k = pick(rng, 1, 5),
                      s = pick(rng, 1, 3), l = k + pick(rng, 0, 12);
    return {{{"x", uniform({b, ci, l}, rng)}, {"w", uniform({co, ci, k}, rng)}, {"b", uniform({co}, rng)}},
            [s](Tape<double>& t, const std::vector<Var>& v) { return square_sum(t, t.conv1d(v[0], v[1], v[2], s)); }};
  }
  if (layer == "avg_pool1d") {
    const std::size_t k = pick(rng, 1, 5), s = pick(rng, 1, 3), l = k + pick(rng, 0, 12);
    return {{{"x", uniform({pick(rng, 1, 3), pick(rng, 1, 3), l}, rng)}},
            [k, s](Tape<double>& t, const std::vector<Var>& v) { return square_sum(t, t.avg_pool1d(v[0], k, s)); }};
  }
  if (layer == "relu") {
    return {{{"x", uniform({pick(rng, 1, 4), pick(rng, 1, 9)}, rng)}},
            [](Tape<double>& t, const std::vector<Var>& v) { return square_sum(t, t.relu(v[0])); }};
  }
  if (layer == "dropout") {
    const double rate = 0.1 + 0.7 * rng.uniform();
    const std::uint64_t key = rng.next();
    return {{{"x", uniform({pick(rng, 1, 4), pick(rng, 2, 9)}, rng)}},
            [rate, key](Tape<double>& t, const std::vector<Var>& v) {
              Rng r(key);  // same mask on every probe
              return square_sum(t, t.dropout(v[0], rate, true, r));
            }};
  }
  if (layer == "linear") {
    const std::size_t m = pick(rng, 1, 5), i = pick(rng, 1, 7), o = pick(rng, 1, 6);
    return {{{"x", uniform({m, i}, rng)}, {"w", uniform({i, o}, rng)}, {"b", uniform({o}, rng)}},
            [](Tape<double>& t, const std::vector<Var>& v) { return square_sum(t, t.linear(v[0], v[1], v[2])); }};
  }
  if (layer == "graph_conv") {
    const std::size_t n = pick(rng, 1, 6), fi = pick(rng, 1, 5), fo = pick(rng, 1, 5);
    auto nb = std::make_shared<kernels::Neighbors>(random_neighbors(n, rng));
    return {{{"x", uniform({n, fi}, rng)},
             {"w1", uniform({fi, fo}, rng)},
             {"w2", uniform({fi, fo}, rng)},
             {"b", uniform({fo}, rng)}},
            [nb](Tape<double>& t, const std::vector<Var>& v) {
              return square_sum(t, t.graph_conv(v[0], *nb, v[1], v[2], v[3]));
            }};
  }
  if (layer == "sigmoid") {
    return {{{"x", uniform({pick(rng, 1, 9)}, rng, -4.0, 4.0)}},
            [](Tape<double>& t, const std::vector<Var>& v) { return square_sum(t, t.sigmoid(v[0])); }};
  }
  if (layer == "weighted_bce") {
    const std::size_t n = pick(rng, 1, 9);
    std::vector<std::uint8_t> y(n);
    for (auto& b : y) b = rng.uniform() < 0.5;
    const double w0 = 0.2 + 2.0 * rng.uniform(), w1 = 0.2 + 20.0 * rng.uniform();
    // Probabilities stay well inside the clamp so the loss is smooth.
    return {{{"p", uniform({n}, rng, 0.05, 0.95)}},
            [y, w0, w1](Tape<double>& t, const std::vector<Var>& v) { return t.weighted_bce(v[0], y, w0, w1); }};
  }
  if (layer == "model") {
    auto m = std::make_shared<Model<double>>(build_model<double>(ModelConfig{}, rng.next()));
    const std::size_t n = 4;
    auto nb = std::make_shared<kernels::Neighbors>(random_neighbors(n, rng));
    std::vector<std::uint8_t> y(n);
    for (auto& b : y) b = rng.uniform() < 0.5;
    const std::uint64_t key = rng.next();
    NamedTensors in{{"x", uniform({n, m->config.input_channels, m->config.length}, rng, 0.0, 1.0)}};
    for (const auto& [name, p] : m->params) in.emplace_back(name, p);
    return {std::move(in), [m, nb, y, key](Tape<double>& t, const std::vector<Var>& v) {
              Rng r(key);
              const std::vector<Var> params(v.begin() + 1, v.end());
              const Var s = forward(t, *m, params, v[0], *nb, true, &r);
              return t.weighted_bce(s, y, 1.0, 3.0);
            }};
  }
  throw Error(ErrorCode::InvalidConfig, "no gradient check for layer '" + layer + "'");
}

}  // namespace

const std::vector<std::string>& gradcheck_layers() {
  static const std::vector<std::string> names{"conv1d",     "avg_pool1d", "relu",         "dropout", "linear",
                                              "graph_conv", "sigmoid",    "weighted_bce", "model"};
  return names;
}

LayerGradcheck gradcheck_layer(const std::string& layer, std::size_t trials, std::uint64_t seed,
                               const std::string& fault_op, double fault_factor) {
  LayerGradcheck r;
  r.layer = layer;
  Rng rng(hash_combine(seed, digest64(layer)));
  for (std::size_t k = 0; k < trials; ++k) {
    const Case c = make_case(layer, rng);
    GradcheckOptions opt;
    opt.seed = rng.next();
    opt.fault_op = fault_op;
    opt.fault_factor = fault_factor;
    // The assembled model has many tensors; two coordinates each keep it quick.
    if (layer == "model") opt.coords_per_tensor = 2;
    const auto rep = gradcheck(c.loss, c.inputs, opt);
    ++r.trials;
    r.checked += rep.checked;
    if (rep.max_rel_error >= r.max_rel_error) {
      r.max_rel_error = rep.max_rel_error;
      r.worst = std::to_string(k) + "/" + rep.worst_tensor;
    }
    r.passed = r.passed && rep.passed;
  }
  return r;
}

double graphconv_oracle_error(std::size_t max_nodes, std::uint64_t seed) {
  Rng rng(seed);
  double worst = 0.0;
  for (std::size_t n = 1; n <= max_nodes; ++n) {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << pairs.size()); ++mask) {
      BinaryMatrix a{n, std::vector<std::uint8_t>(n * n)};
      for (std::size_t e = 0; e < pairs.size(); ++e)
        if (mask >> e & 1) a(pairs[e].first, pairs[e].second) = a(pairs[e].second, pairs[e].first) = 1;
      const std::size_t fi = pick(rng, 1, 4), fo = pick(rng, 1, 3);
      const auto x = uniform({n, fi}, rng), w1 = uniform({fi, fo}, rng), w2 = uniform({fi, fo}, rng),
                 b = uniform({fo}, rng);
      Tape<double> t;
      const auto nb = kernels::neighbors_from_adjacency(a);
      const Var y = t.graph_conv(t.constant(x), nb, t.constant(w1), t.constant(w2), t.constant(b));
      const auto& yv = t.value(y);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t o = 0; o < fo; ++o) {
          double dense = b[o];
          for (std::size_t f = 0; f < fi; ++f) {
            dense += x[i * fi + f] * w1[f * fo + o];
            double ax = 0.0;
            for (std::size_t j = 0; j < n; ++j) ax += a(i, j) * x[j * fi + f];
            dense += ax * w2[f * fo + o];
          }
          worst = std::max(worst, std::abs(dense - yv[i * fo + o]));
        }
    }
  }
  return worst;
}

std::size_t alg1_failures(std::size_t vectors, std::uint64_t seed) {
  Rng rng(seed);
  std::size_t failures = 0;
  for (std::size_t k = 0; k < vectors; ++k) {
    const std::size_t n = pick(rng, 1, 128);
    // Sparse vectors too, so the all-zero case comes up often.
    const double density = k % 2 ? rng.uniform() : rng.uniform() * 4.0 / static_cast<double>(n);
    std::vector<double> scores(n);
    bool any = false;
    for (auto& s : scores) {
      const bool b = rng.uniform() < density;
      s = b ? 0.5 + 0.5 * rng.uniform() : 0.4999 * rng.uniform();
      any = any || b;
    }
    const auto r = decide(scores, 0.5);
    bool manual_or = false;
    for (auto b : r.n_pred) manual_or = manual_or || b;
    if ((r.g_pred != 0) != manual_or || manual_or != any) ++failures;
  }
  return failures;
}

std::vector<SelfTestCheck> run_self_test(const SelfTestOptions& opt) {
  std::vector<SelfTestCheck> out;
  auto fmt = [](double v) {
    std::ostringstream s;
    s.precision(3);
    s << std::scientific << v;
    return s.str();
  };
  for (const auto& layer : gradcheck_layers()) {
    const auto r = gradcheck_layer(layer, layer == "model" ? std::min<std::size_t>(opt.trials, 5) : opt.trials,
                                   opt.seed, opt.fault_op, opt.fault_factor);
    out.push_back({"gradcheck " + layer, r.passed,
                   "trials " + std::to_string(r.trials) + ", max rel error " + fmt(r.max_rel_error) +
                       (r.worst.empty() ? "" : " at " + r.worst)});
  }
  const double gc = graphconv_oracle_error(6, opt.seed);
  out.push_back({"graph_conv dense oracle", gc <= 1e-12, "max abs error " + fmt(gc)});
  const auto alg1 = alg1_failures(10000, opt.seed);
  out.push_back({"detection is OR of localization", alg1 == 0, std::to_string(alg1) + " failures in 10000"});

  SimConfig sim;
  sim.topology = build_mesh_2d(4);
  sim.duration = 1500;
  sim.warmup = 200;
  sim.benign = benign_profile("mixed");
  sim.attack = AttackConfig{{5, 10}, {0}, 0.05, 0};
  sim.seed = opt.seed;
  const auto first = serialize_trace(run_scenario(sim));
  bool same = true;
  for (int k = 0; k < 2; ++k) same = same && serialize_trace(run_scenario(sim)) == first;
  out.push_back({"simulator determinism", same, "3 runs, " + std::to_string(first.size()) + " bytes"});

  Simulator s(sim);
  bool conserved = true;
  for (int c = 0; c < 2000 && conserved; ++c) {
    s.step();
    conserved = s.injected() == s.ejected() + s.count_in_flight();
  }
  out.push_back({"flit conservation", conserved,
                 std::to_string(s.injected()) + " injected, " + std::to_string(s.ejected()) + " ejected"});
  return out;
}

}  // namespace nocguard
