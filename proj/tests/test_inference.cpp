#include <doctest.h>

#include "nocguard/inference.hpp"
#include "nocguard/selftest.hpp"
#include "support.hpp"

using namespace nocguard;

namespace {

PredictionResult flags(std::vector<std::uint8_t> b) {
  std::vector<double> s;
  for (auto v : b) s.push_back(v ? 0.9 : 0.1);
  return decide(s);
}

}  // namespace

TEST_SUITE("inference") {
  TEST_CASE("graph decision follows node decisions") {
    CHECK(flags({0, 0, 0, 0}).g_pred == 0);
    CHECK(flags({0, 0, 1, 0}).g_pred == 1);
    CHECK(flags({1, 1, 1, 1}).g_pred == 1);
    const auto r = decide({0.5, 0.49999, 0.7});
    CHECK(r.n_pred == std::vector<std::uint8_t>{1, 0, 1});
    CHECK(r.n_scores == std::vector<double>{0.5, 0.49999, 0.7});
    CHECK(alg1_failures(10000, 99) == 0);
  }

  TEST_CASE("raising the threshold never adds detections") {
    Rng rng(4);
    for (int k = 0; k < 500; ++k) {
      std::vector<double> s(64);
      for (auto& v : s) v = rng.uniform();
      std::size_t prev = 65;
      std::uint8_t prev_g = 1;
      for (double th = 0.0; th <= 1.0; th += 0.05) {
        const auto r = decide(s, th);
        const auto count = static_cast<std::size_t>(std::count(r.n_pred.begin(), r.n_pred.end(), 1));
        CHECK(count <= prev);
        CHECK(r.g_pred <= prev_g);
        prev = count;
        prev_g = r.g_pred;
      }
    }
  }

  TEST_CASE("localization arithmetic") {
    std::vector<std::uint8_t> truth(64), pred(64);
    truth[3] = truth[17] = truth[40] = 1;
    pred[3] = pred[17] = pred[40] = pred[60] = 1;
    const auto m = localization_metrics({flags(pred)}, {truth});
    CHECK(m.precision == doctest::Approx(0.75));
    CHECK(m.recall == 1.0);
    CHECK(m.accuracy == doctest::Approx(63.0 / 64.0));
    CHECK(m.f1 == doctest::Approx(6.0 / 7.0));
    CHECK(m.counts == Confusion{3, 60, 1, 0});

    const auto perfect = localization_metrics({flags(truth)}, {truth});
    CHECK(perfect.accuracy == 1.0);
    CHECK(perfect.precision == 1.0);
    CHECK(perfect.recall == 1.0);
    CHECK(perfect.f1 == 1.0);

    const std::vector<std::uint8_t> none(8);
    const auto quiet = localization_metrics({flags(none)}, {none});
    CHECK(quiet.precision == 1.0);
    CHECK(quiet.recall == 1.0);
    std::vector<std::uint8_t> one(8);
    one[2] = 1;
    const auto missed = localization_metrics({flags(none)}, {one});
    CHECK(missed.precision == 0.0);
    CHECK(missed.recall == 0.0);
    CHECK(missed.f1 == 0.0);
  }

  TEST_CASE("detection arithmetic") {
    const std::vector<std::uint8_t> truth{1, 1, 1, 0, 0, 0};
    std::vector<PredictionResult> p{flags({1, 0}), flags({0, 1}), flags({0, 0}),
                                    flags({0, 0}), flags({0, 0}), flags({0, 0})};
    const auto m = detection_metrics(p, truth);
    CHECK(m.accuracy == doctest::Approx(5.0 / 6.0));
    CHECK(m.recall == doctest::Approx(2.0 / 3.0));
    CHECK(m.precision == 1.0);
    CHECK(m.f1 == doctest::Approx(0.8));

    std::vector<PredictionResult> all(6, flags({1}));
    const auto sat = detection_metrics(all, truth);
    CHECK(sat.recall == 1.0);
    CHECK(sat.precision == 0.5);
    CHECK(sat.accuracy == 0.5);

    std::vector<PredictionResult> right{flags({1}), flags({1}), flags({1}), flags({0}), flags({0}), flags({0})};
    const auto ok = detection_metrics(right, truth);
    CHECK(ok.accuracy == 1.0);
    CHECK(ok.f1 == 1.0);
  }

  TEST_CASE("metric identities on random confusions") {
    Rng rng(6);
    for (int k = 0; k < 2000; ++k) {
      const Confusion c{rng.next() % 50, rng.next() % 50, rng.next() % 50, rng.next() % 50};
      const auto m = metrics_from_confusion("x", c);
      for (double v : {m.accuracy, m.precision, m.recall, m.f1}) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
      }
      const double total = static_cast<double>(c.tp + c.tn + c.fp + c.fn);
      if (total > 0) CHECK(m.accuracy == doctest::Approx(static_cast<double>(c.tp + c.tn) / total));
      if (m.precision + m.recall > 0)
        CHECK(m.f1 == doctest::Approx(2 * m.precision * m.recall / (m.precision + m.recall)));
    }
  }

  TEST_CASE("misaligned inputs") {
    CHECK_ERROR(Alignment, localization_metrics({flags({0, 1})}, {}));
    CHECK_ERROR(Alignment, localization_metrics({flags({0, 1})}, {{0, 1, 0}}));
    CHECK_ERROR(Alignment, detection_metrics({flags({0})}, {0, 1}));
  }

  TEST_CASE("model scores drive both tasks") {
    const auto m = build_model<float>(ModelConfig{}, 3);
    const auto s = make_structure(build_mesh_2d(4));
    Rng rng(2);
    std::vector<float> x(16 * 800);
    for (auto& v : x) v = static_cast<float>(rng.uniform());
    const auto g = build_graph(x, 400, s, std::vector<std::uint8_t>(16));
    const auto r = detect_and_localize(m, g, 0.5);
    CHECK(r.n_scores == predict(m, g));
    // Threshold 0 flags everything, just above the top score flags nothing.
    CHECK(detect_and_localize(m, g, 0.0).g_pred == 1);
    const double top = *std::max_element(r.n_scores.begin(), r.n_scores.end());
    CHECK(detect_and_localize(m, g, std::nextafter(top, 2.0)).g_pred == 0);

    const auto bad = build_graph(x, 400, make_structure(build_mesh_2d(4)), std::vector<std::uint8_t>(16));
    auto wrong_len = bad;
    wrong_len.length = 200;
    CHECK_ERROR(Inference, detect_and_localize(m, wrong_len));
  }
}
