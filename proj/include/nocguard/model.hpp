#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "nocguard/autodiff.hpp"
#include "nocguard/dataset.hpp"
#include "nocguard/optim.hpp"

namespace nocguard {

struct ModelConfig {
  std::uint32_t input_channels = 2;
  std::uint32_t length = 400;
  std::vector<std::uint32_t> conv_channels{16, 16, 32, 32};
  std::vector<std::uint32_t> conv_kernels{5, 10, 10, 10};
  std::vector<std::uint32_t> conv_strides{1, 1, 1, 2};
  std::vector<std::uint32_t> pool_kernels{5, 5, 5, 5};
  std::vector<std::uint32_t> pool_strides{1, 2, 2, 2};
  double conv_dropout = 0.3;
  std::vector<std::uint32_t> graph_widths{256, 256};
  std::vector<std::uint32_t> fc_widths{400, 133, 44, 1};
  double fc_dropout = 0.5;
  std::uint32_t fc_dropout_after = 2;  // 1-based FC layer index
  // When false a checkpoint only accepts graphs from the topology it was trained on.
  bool node_agnostic = false;

  bool operator==(const ModelConfig&) const = default;
};

/// Length after every conv and pool, starting with the input length.
std::vector<std::size_t> temporal_lengths(const ModelConfig& cfg);
/// Per-node width handed to the first GraphConv (channels * final length).
std::size_t flattened_width(const ModelConfig& cfg);
/// Throws InvalidConfig (or Length when the temporal stack runs out of samples).
void validate(const ModelConfig& cfg);

nlohmann::json to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);

struct ModelMetadata {
  std::string topology_kind;  // empty until trained
  std::uint32_t topology_dim = 0;
  std::uint64_t topology_digest = 0;
  std::uint64_t dataset_digest = 0;
  std::uint64_t seed = 0;
  std::uint32_t epochs_run = 0;
  double best_val_loss = 0.0;

  bool operator==(const ModelMetadata&) const = default;
};

template <class T>
struct Model {
  ModelConfig config;
  std::vector<std::pair<std::string, Tensor<T>>> params;
  ModelMetadata meta;

  Tensor<T>& param(const std::string& name);
  const Tensor<T>& param(const std::string& name) const;
  std::size_t parameter_count() const;
};

template <class T>
const char* dtype_name() noexcept {
  return sizeof(T) == 8 ? "f64" : "f32";
}

/// Uniform(-sqrt(1/fan_in), +sqrt(1/fan_in)) weights and biases.
template <class T>
Model<T> build_model(const ModelConfig& cfg, std::uint64_t seed);

/// Records the forward pass. `params` are the model parameters already placed
/// on the tape (same order as Model::params); returns node scores [N].
template <class T>
Var forward(Tape<T>& tape, const Model<T>& m, const std::vector<Var>& params, Var x,
            const kernels::Neighbors& adjacency, bool train, Rng* rng);

/// Throws Inference when the graph does not fit the model.
template <class T>
void check_compatible(const Model<T>& m, const SpatioTemporalGraph& g);

/// Eval-mode scores, clamped into the open interval (0,1).
template <class T>
std::vector<double> predict(const Model<T>& m, const SpatioTemporalGraph& g);

struct TrainConfig {
  std::uint32_t batch_size = 64;
  double lr = 5e-4;
  std::uint32_t plateau_patience = 15;
  std::uint32_t early_stop_patience = 60;
  double lr_factor = 0.1;
  double tolerance = 1e-6;
  std::uint32_t max_epochs = 150;
  double val_fraction = 0.1;
  std::uint64_t seed = 1;

  bool operator==(const TrainConfig&) const = default;
};

nlohmann::json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

struct EpochRecord {
  std::uint32_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
  double val_node_accuracy = 0.0;
  double val_graph_accuracy = 0.0;
  double seconds = 0.0;

  bool operator==(const EpochRecord& o) const {
    return epoch == o.epoch && train_loss == o.train_loss && val_loss == o.val_loss && lr == o.lr &&
           val_node_accuracy == o.val_node_accuracy && val_graph_accuracy == o.val_graph_accuracy;
  }
};

struct TrainResult {
  std::vector<EpochRecord> history;
  std::uint32_t best_epoch = 0;
  double best_val_loss = 0.0;
  bool early_stopped = false;
  std::vector<std::size_t> fit_graphs;
  std::vector<std::size_t> val_graphs;
};

std::string history_csv(const TrainResult& r);

/// Class-weighted BCE over node labels with Adam, plateau schedule and early
/// stopping on a stratified validation carve-out of the training split. The best
/// validation parameters are restored before returning.
template <class T>
TrainResult train(Model<T>& m, const Dataset& data, const TrainConfig& tc,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

/// Either precision, as stored in a checkpoint.
using AnyModel = std::variant<Model<float>, Model<double>>;

template <class T>
std::vector<std::uint8_t> serialize_checkpoint(const Model<T>& m);
AnyModel deserialize_checkpoint(std::span<const std::uint8_t> bytes);
template <class T>
void save_checkpoint(const Model<T>& m, const std::string& path);
AnyModel load_checkpoint(const std::string& path);

template <class To, class From>
Model<To> model_cast(const Model<From>& m);

}  // namespace nocguard
