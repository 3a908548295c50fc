#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nocguard/model.hpp"

namespace nocguard {

struct PredictionResult {
  std::vector<double> n_scores;
  std::vector<std::uint8_t> n_pred;
  std::uint8_t g_pred = 0;
};

/// Node decisions by threshold; the graph is flagged when any node is.
PredictionResult decide(std::vector<double> scores, double threshold = 0.5);

template <class T>
PredictionResult detect_and_localize(const Model<T>& m, const SpatioTemporalGraph& g, double threshold = 0.5) {
  return decide(predict(m, g), threshold);
}

struct Confusion {
  std::uint64_t tp = 0, tn = 0, fp = 0, fn = 0;
  bool operator==(const Confusion&) const = default;
};

struct MetricsReport {
  std::string task;
  double accuracy = 0.0, precision = 0.0, recall = 0.0, f1 = 0.0;
  Confusion counts;
};

/// Precision (recall) is 1 when nothing was predicted (present) and nothing was
/// there to find, 0 when positives existed but none were predicted.
MetricsReport metrics_from_confusion(std::string task, const Confusion& c);

/// Node-level confusion over every node of every graph. Throws Alignment on length mismatch.
MetricsReport localization_metrics(const std::vector<PredictionResult>& preds,
                                   const std::vector<std::vector<std::uint8_t>>& truths);
/// Graph-level confusion. Throws Alignment on length mismatch.
MetricsReport detection_metrics(const std::vector<PredictionResult>& preds, const std::vector<std::uint8_t>& truths);

nlohmann::json to_json(const MetricsReport& r);
nlohmann::json to_json(const PredictionResult& p);

struct Evaluation {
  MetricsReport detection;
  MetricsReport localization;
  std::vector<std::size_t> graphs;
  std::vector<PredictionResult> predictions;
};

template <class T>
Evaluation evaluate(const Model<T>& m, const Dataset& d, const std::vector<std::size_t>& graphs,
                    double threshold = 0.5);

nlohmann::json to_json(const Evaluation& e, const Dataset& d);

}  // namespace nocguard
