#include "nocguard/inference.hpp"

#include <exception>

#include "nocguard/error.hpp"

namespace nocguard {

PredictionResult decide(std::vector<double> scores, double threshold) {
  PredictionResult r;
  r.n_pred.reserve(scores.size());
  for (double s : scores) {
    const std::uint8_t b = s >= threshold ? 1 : 0;
    r.n_pred.push_back(b);
    r.g_pred |= b;
  }
  r.n_scores = std::move(scores);
  return r;
}

MetricsReport metrics_from_confusion(std::string task, const Confusion& c) {
  MetricsReport r;
  r.task = std::move(task);
  r.counts = c;
  const auto tp = static_cast<double>(c.tp), tn = static_cast<double>(c.tn);
  const auto fp = static_cast<double>(c.fp), fn = static_cast<double>(c.fn);
  const double total = tp + tn + fp + fn;
  r.accuracy = total > 0 ? (tp + tn) / total : 1.0;
  const bool positives_exist = c.tp + c.fn > 0;
  r.precision = c.tp + c.fp > 0 ? tp / (tp + fp) : (positives_exist ? 0.0 : 1.0);
  r.recall = positives_exist ? tp / (tp + fn) : 1.0;
  r.f1 = r.precision + r.recall > 0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
  return r;
}

namespace {
void tally(Confusion& c, bool pred, bool truth) {
  if (pred && truth) ++c.tp;
  else if (pred) ++c.fp;
  else if (truth) ++c.fn;
  else ++c.tn;
}
}  // namespace

MetricsReport localization_metrics(const std::vector<PredictionResult>& preds,
                                   const std::vector<std::vector<std::uint8_t>>& truths) {
  if (preds.size() != truths.size())
    throw Error(ErrorCode::Alignment, std::to_string(preds.size()) + " predictions for " +
                                          std::to_string(truths.size()) + " graphs");
  Confusion c;
  for (std::size_t g = 0; g < preds.size(); ++g) {
    if (preds[g].n_pred.size() != truths[g].size())
      throw Error(ErrorCode::Alignment, "graph " + std::to_string(g) + ": " + std::to_string(preds[g].n_pred.size()) +
                                            " node predictions for " + std::to_string(truths[g].size()) + " labels");
    for (std::size_t i = 0; i < truths[g].size(); ++i) tally(c, preds[g].n_pred[i] != 0, truths[g][i] != 0);
  }
  return metrics_from_confusion("localization", c);
}

MetricsReport detection_metrics(const std::vector<PredictionResult>& preds, const std::vector<std::uint8_t>& truths) {
  if (preds.size() != truths.size())
    throw Error(ErrorCode::Alignment, std::to_string(preds.size()) + " predictions for " +
                                          std::to_string(truths.size()) + " graph labels");
  Confusion c;
  for (std::size_t g = 0; g < preds.size(); ++g) tally(c, preds[g].g_pred != 0, truths[g] != 0);
  return metrics_from_confusion("detection", c);
}

nlohmann::json to_json(const MetricsReport& r) {
  return {{"task", r.task},
          {"accuracy", r.accuracy},
          {"precision", r.precision},
          {"recall", r.recall},
          {"f1", r.f1},
          {"tp", r.counts.tp},
          {"tn", r.counts.tn},
          {"fp", r.counts.fp},
          {"fn", r.counts.fn}};
}

nlohmann::json to_json(const PredictionResult& p) {
  return {{"n_scores", p.n_scores}, {"n_pred", p.n_pred}, {"g_pred", p.g_pred}};
}

template <class T>
Evaluation evaluate(const Model<T>& m, const Dataset& d, const std::vector<std::size_t>& graphs, double threshold) {
  Evaluation e;
  e.graphs = graphs;
  e.predictions.resize(graphs.size());
  std::vector<std::exception_ptr> errors(graphs.size());
  // Eval-mode forward passes only read the model, so graphs run concurrently.
#pragma omp parallel for schedule(dynamic)
  for (std::size_t k = 0; k < graphs.size(); ++k) {
    try {
      e.predictions[k] = detect_and_localize(m, d.graphs.at(graphs[k]), threshold);
    } catch (...) {
      errors[k] = std::current_exception();
    }
  }
  for (auto& err : errors)
    if (err) std::rethrow_exception(err);
  std::vector<std::vector<std::uint8_t>> node_truth;
  std::vector<std::uint8_t> graph_truth;
  for (auto gi : graphs) {
    node_truth.push_back(d.graphs[gi].labels);
    graph_truth.push_back(d.graphs[gi].graph_label);
  }
  e.localization = localization_metrics(e.predictions, node_truth);
  e.detection = detection_metrics(e.predictions, graph_truth);
  return e;
}

nlohmann::json to_json(const Evaluation& e, const Dataset& d) {
  nlohmann::json per_graph = nlohmann::json::array();
  for (std::size_t k = 0; k < e.graphs.size(); ++k) {
    const auto& g = d.graphs[e.graphs[k]];
    auto j = to_json(e.predictions[k]);
    j["graph"] = e.graphs[k];
    j["profile"] = g.profile;
    j["mapping"] = g.mapping;
    j["graph_label"] = g.graph_label;
    per_graph.push_back(std::move(j));
  }
  return {{"detection", to_json(e.detection)}, {"localization", to_json(e.localization)}, {"predictions", per_graph}};
}

template Evaluation evaluate<float>(const Model<float>&, const Dataset&, const std::vector<std::size_t>&, double);
template Evaluation evaluate<double>(const Model<double>&, const Dataset&, const std::vector<std::size_t>&, double);

}  // namespace nocguard
