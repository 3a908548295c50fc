#include <doctest.h>

#include <cmath>
#include <numeric>

#include "nocguard/autodiff.hpp"
#include "nocguard/selftest.hpp"
#include "support.hpp"

using namespace nocguard;

namespace {

Tensor<double> t1(std::vector<double> v) {
  const std::size_t n = v.size();
  return Tensor<double>({n}, std::move(v));
}

kernels::Neighbors path3() {
  return kernels::neighbors_from_adjacency(BinaryMatrix{3, {0, 1, 0, 1, 0, 1, 0, 1, 0}});
}

}  // namespace

TEST_SUITE("autodiff") {
  TEST_CASE("conv examples") {
    Tape<double> t;
    const Var x = t.constant(Tensor<double>({1, 1, 4}, {1, 2, 3, 4}));
    const Var y = t.conv1d(x, t.constant(Tensor<double>({1, 1, 2}, {1, 1})), t.constant(t1({0})), 1);
    CHECK(t.value(y).values() == std::vector<double>{3, 5, 7});
    CHECK(t.value(y).shape == Shape{1, 1, 3});
    const Var id = t.conv1d(x, t.constant(Tensor<double>({1, 1, 1}, {1})), t.constant(t1({0})), 1);
    CHECK(t.value(id).data == t.value(x).data);
    const Var big = t.constant(Tensor<double>({1, 1, 400}));
    const Var yb = t.conv1d(big, t.constant(Tensor<double>({1, 1, 5})), t.constant(t1({0})), 1);
    CHECK(t.value(yb).dim(2) == 396);
    CHECK_ERROR(Length, t.conv1d(x, t.constant(Tensor<double>({1, 1, 5})), t.constant(t1({0})), 1));
  }

  TEST_CASE("pool examples") {
    Tape<double> t;
    const Var x = t.constant(Tensor<double>({1, 1, 4}, {1, 2, 3, 4}));
    CHECK(t.value(t.avg_pool1d(x, 2, 2)).values() == std::vector<double>{1.5, 3.5});
    const Var c = t.constant(Tensor<double>({2, 3, 11}, 5.0));
    for (double v : t.value(t.avg_pool1d(c, 5, 2)).data) CHECK(v == doctest::Approx(5.0));
    CHECK(t.value(t.avg_pool1d(t.constant(Tensor<double>({1, 1, 383})), 5, 2)).dim(2) == 190);
    CHECK_ERROR(Length, t.avg_pool1d(x, 5, 1));
  }

  TEST_CASE("graph_conv examples") {
    Tape<double> t;
    const auto nb = path3();
    const Var x = t.constant(Tensor<double>({3, 1}, {1, 2, 3}));
    const Var one = t.constant(Tensor<double>({1, 1}, {1}));
    const Var y = t.graph_conv(x, nb, one, one, t.constant(t1({0})));
    CHECK(t.value(y).values() == std::vector<double>{3, 6, 5});
    const Var zero = t.constant(Tensor<double>({1, 1}, {0}));
    const Var local = t.graph_conv(x, nb, t.constant(Tensor<double>({1, 1}, {2})), zero, t.constant(t1({1})));
    CHECK(t.value(local).values() == std::vector<double>{3, 5, 7});
    CHECK_ERROR(Adjacency, kernels::neighbors_from_adjacency(BinaryMatrix{2, {0, 1, 0, 0}}));
    CHECK_ERROR(Shape, t.graph_conv(t.constant(Tensor<double>({2, 1})), nb, one, one, t.constant(t1({0}))));
  }

  TEST_CASE("graph_conv equals the dense formula on every small graph") {
    CHECK(graphconv_oracle_error(6, 3) <= 1e-12);
  }

  TEST_CASE("graph_conv is permutation equivariant") {
    Rng rng(8);
    const std::size_t n = 6, f = 3, o = 2;
    BinaryMatrix a{n, std::vector<std::uint8_t>(n * n)};
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) a(i, j) = a(j, i) = rng.uniform() < 0.5;
    Tensor<double> x({n, f}), w1({f, o}), w2({f, o}), b({o});
    for (auto* tt : {&x, &w1, &w2, &b})
      for (auto& v : tt->data) v = rng.uniform(-1, 1);
    for (int trial = 0; trial < 10; ++trial) {
      std::vector<std::size_t> p(n);
      std::iota(p.begin(), p.end(), 0);
      rng.shuffle(p.begin(), p.end());
      BinaryMatrix pa{n, std::vector<std::uint8_t>(n * n)};
      Tensor<double> px({n, f});
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) pa(p[i], p[j]) = a(i, j);
        for (std::size_t c = 0; c < f; ++c) px[p[i] * f + c] = x[i * f + c];
      }
      Tape<double> t;
      const auto y = t.value(t.graph_conv(t.constant(x), kernels::neighbors_from_adjacency(a), t.constant(w1),
                                          t.constant(w2), t.constant(b)));
      const auto py = t.value(t.graph_conv(t.constant(px), kernels::neighbors_from_adjacency(pa), t.constant(w1),
                                           t.constant(w2), t.constant(b)));
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < o; ++c) CHECK(py[p[i] * o + c] == doctest::Approx(y[i * o + c]).epsilon(1e-14));
    }
  }

  TEST_CASE("dropout semantics") {
    Tape<double> t;
    Rng rng(1);
    const Var x = t.constant(Tensor<double>({4}, {1, -2, 3, 4}));
    CHECK(t.value(t.dropout(x, 0.0, true, rng)).data == t.value(x).data);
    CHECK(t.value(t.dropout(x, 0.5, false, rng)).data == t.value(x).data);
    CHECK_ERROR(InvalidRate, t.dropout(x, 1.0, true, rng));
    CHECK_ERROR(InvalidRate, t.dropout(x, -0.1, false, rng));

    const Var ones = t.constant(Tensor<double>({100000}, 1.0));
    const auto& d = t.value(t.dropout(ones, 0.5, true, rng));
    double mean = 0.0;
    std::size_t kept = 0;
    for (double v : d.data) {
      mean += v;
      kept += v != 0.0;
      CHECK((v == 0.0 || v == 2.0));
    }
    mean /= static_cast<double>(d.size());
    CHECK(mean == doctest::Approx(1.0).epsilon(0.02));
    CHECK(kept > 49000);
    CHECK(kept < 51000);
  }

  TEST_CASE("linear, sigmoid and bce examples") {
    Tape<double> t;
    const Var x = t.constant(Tensor<double>({1, 2}, {1, 2}));
    const Var y = t.linear(x, t.constant(Tensor<double>({2, 2}, {1, 0, 0, 2})), t.constant(t1({1, -1})));
    CHECK(t.value(y).values() == std::vector<double>{2, 3});
    const Var id = t.linear(x, t.constant(Tensor<double>({2, 2}, {1, 0, 0, 1})), t.constant(t1({0, 0})));
    CHECK(t.value(id).data == t.value(x).data);
    CHECK_ERROR(Shape, t.linear(x, t.constant(Tensor<double>({3, 2})), t.constant(t1({0, 0}))));

    CHECK(t.value(t.sigmoid(t.constant(t1({0})))).data[0] == 0.5);
    for (double v : t.value(t.sigmoid(t.constant(t1({-30, -1, 1, 30})))).data) {
      CHECK(v > 0.0);
      CHECK(v <= 1.0);
    }

    const Var half = t.constant(t1({0.5}));
    CHECK(t.value(t.weighted_bce(half, {1}, 1, 1))[0] == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(t.value(t.weighted_bce(t.constant(t1({1 - 1e-9})), {1}, 1, 1))[0] < 1e-6);
    const Var p = t.constant(t1({0.2, 0.7, 0.9}));
    const std::vector<std::uint8_t> lab{0, 1, 0};
    const double base = t.value(t.weighted_bce(p, lab, 1.5, 4.0))[0];
    CHECK(t.value(t.weighted_bce(p, lab, 3.0, 8.0))[0] == doctest::Approx(2 * base).epsilon(1e-14));
    const double plain = -(std::log(0.8) + std::log(0.7) + std::log(0.1)) / 3.0;
    CHECK(t.value(t.weighted_bce(p, lab, 1.0, 1.0))[0] == doctest::Approx(plain).epsilon(1e-14));
    CHECK_ERROR(Shape, t.weighted_bce(p, {0, 1}, 1, 1));
  }

  TEST_CASE("non-finite values are rejected") {
    Tape<double> t;
    CHECK_ERROR(NonFinite, t.constant(t1({1, std::nan("")})));
    CHECK_ERROR(NonFinite, t.parameter(t1({INFINITY})));
  }

  TEST_CASE("backward basics") {
    Tape<double> t;
    const Var x = t.parameter(t1({3}));
    t.backward(t.sum(t.square(x)));
    CHECK(t.grad(x)[0] == 6.0);

    Tape<double> z;
    const Var w = z.parameter(Tensor<double>({2, 2}, {1, 2, 3, 4}));
    const Var y = z.linear(z.constant(Tensor<double>({1, 2}, {5, 6})), w, z.parameter(t1({0, 0})));
    z.backward(z.sum(y), 0.0);
    for (double g : z.grad(w).data) CHECK(g == 0.0);

    Tape<double> d;
    const Var c = d.constant(t1({1, 2}));
    CHECK_ERROR(NoGradient, d.backward(d.sum(d.square(c))));
  }

  TEST_CASE("every layer passes finite differences") {
    for (const auto& layer : gradcheck_layers()) {
      if (layer == "model") continue;  // covered by the model suite
      const auto r = gradcheck_layer(layer, 50, 17);
      INFO(layer << " worst " << r.worst);
      CHECK(r.passed);
      CHECK(r.max_rel_error < 1e-4);
      CHECK(r.trials == 50);
    }
  }

  TEST_CASE("a corrupted gradient is caught and named") {
    const auto r = gradcheck_layer("relu", 3, 17, "relu", 0.5);
    CHECK_FALSE(r.passed);
    CHECK(r.max_rel_error > 0.1);
    CHECK(gradcheck_layer("linear", 3, 17, "relu", 0.5).passed);
  }
}
