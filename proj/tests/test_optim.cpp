#include <doctest.h>

#include <cmath>

#include "nocguard/optim.hpp"

using namespace nocguard;

TEST_SUITE("optim") {
  TEST_CASE("zero gradient leaves parameters alone") {
    Tensor<double> p({3}, std::vector<double>{1, -2, 3});
    const Tensor<double> g({3});
    Adam<double> adam({&p}, AdamConfig{});
    for (int i = 0; i < 10; ++i) adam.step({&p}, {&g});
    CHECK(p.values() == std::vector<double>{1, -2, 3});
    CHECK(adam.steps() == 10);
  }

  TEST_CASE("first step moves by about lr against the gradient") {
    for (double gv : {1.0, -3.0, 1e-3, 250.0}) {
      Tensor<double> p({1}, std::vector<double>{0.25});
      const Tensor<double> g({1}, std::vector<double>{gv});
      Adam<double> adam({&p}, AdamConfig{});
      adam.step({&p}, {&g});
      const double expect = 0.25 - 5e-4 * gv / (std::abs(gv) + 1e-8);
      CHECK(p[0] == doctest::Approx(expect).epsilon(1e-12));
    }
  }

  TEST_CASE("matches a hand-rolled Adam over several steps") {
    Tensor<float> p({2}, std::vector<float>{0.5f, -1.0f});
    Adam<float> adam({&p}, AdamConfig{0.01, 0.9, 0.999, 1e-8});
    double ref[2] = {0.5, -1.0}, m[2] = {}, v[2] = {};
    for (int t = 1; t <= 5; ++t) {
      const Tensor<float> g({2}, std::vector<float>{static_cast<float>(t), -0.5f});
      adam.step({&p}, {&g});
      for (int i = 0; i < 2; ++i) {
        const double gi = g[i];
        m[i] = 0.9 * m[i] + 0.1 * gi;
        v[i] = 0.999 * v[i] + 0.001 * gi * gi;
        ref[i] -= 0.01 * (m[i] / (1 - std::pow(0.9, t))) / (std::sqrt(v[i] / (1 - std::pow(0.999, t))) + 1e-8);
      }
    }
    CHECK(p[0] == doctest::Approx(ref[0]).epsilon(1e-6));
    CHECK(p[1] == doctest::Approx(ref[1]).epsilon(1e-6));
  }

  TEST_CASE("minimizes x squared") {
    Tensor<double> x({1}, std::vector<double>{1.0});
    Adam<double> adam({&x}, AdamConfig{0.05});
    for (int i = 0; i < 200; ++i) {
      const Tensor<double> g({1}, std::vector<double>{2 * x[0]});
      adam.step({&x}, {&g});
    }
    CHECK(std::abs(x[0]) < 0.1);
  }

  TEST_CASE("shape mismatch") {
    Tensor<double> p({2});
    const Tensor<double> g({3});
    Adam<double> adam({&p}, AdamConfig{});
    CHECK_THROWS_AS(adam.step({&p}, {&g}), Error);
  }

  TEST_CASE("decreasing losses never reduce or stop") {
    PlateauMonitor mon;
    double lr = 5e-4;
    for (int e = 0; e < 300; ++e) {
      const auto d = mon.observe(1.0 - e * 1e-3, lr);
      CHECK(d.improved);
      CHECK_FALSE(d.stop);
    }
    CHECK(lr == 5e-4);
  }

  TEST_CASE("fifteen flat epochs drop the rate once") {
    PlateauMonitor mon;
    double lr = 5e-4;
    mon.observe(0.5, lr);
    for (int e = 1; e <= 14; ++e) CHECK_FALSE(mon.observe(0.5, lr).lr_reduced);
    CHECK(mon.observe(0.5, lr).lr_reduced);
    CHECK(lr == doctest::Approx(5e-5).epsilon(1e-12));
    // Improvement below the tolerance counts as flat.
    for (int e = 0; e < 14; ++e) mon.observe(0.5 - 5e-7, lr);
    CHECK(lr == doctest::Approx(5e-5).epsilon(1e-12));
  }

  TEST_CASE("sixty flat epochs stop training") {
    PlateauMonitor mon;
    double lr = 5e-4;
    mon.observe(0.5, lr);
    int stopped_at = 0;
    for (int e = 1; e <= 100 && !stopped_at; ++e)
      if (mon.observe(0.6, lr).stop) stopped_at = e;
    CHECK(stopped_at == 60);
    CHECK(lr == doctest::Approx(5e-4 * 1e-4).epsilon(1e-9));  // four drops at 15, 30, 45, 60
  }

  TEST_CASE("improvement resets both counters") {
    PlateauMonitor mon;
    double lr = 1.0;
    mon.observe(1.0, lr);
    for (int e = 0; e < 14; ++e) mon.observe(1.0, lr);
    CHECK(mon.observe(0.9, lr).improved);
    CHECK(mon.epochs_since_best() == 0);
    for (int e = 0; e < 14; ++e) CHECK_FALSE(mon.observe(0.95, lr).lr_reduced);
    CHECK(lr == 1.0);
  }
}
