#pragma once

#include <functional>
#include <string>
#include <vector>

#include "nocguard/inference.hpp"
#include "nocguard/model.hpp"

namespace nocguard {

enum class ExperimentKind { Baseline2D, MipSweep, PirSweep, Mesh3D };

std::string to_string(ExperimentKind k);
ExperimentKind experiment_kind_from_string(const std::string& s);

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::Baseline2D;
  DatasetConfig dataset;  // training data; sweeps vary n_mips or pir on top of it
  ModelConfig model;
  TrainConfig train;
  std::vector<std::uint32_t> mips{1, 2, 3, 4, 5};
  std::vector<double> pirs{0.3, 0.4, 0.5, 0.6, 0.7};
  std::uint64_t seed = 1;
  std::string out_dir;     // artifacts go here
  std::string model_path;  // sweeps: reuse this checkpoint instead of training
  bool f64 = false;
};

/// Defaults of each named experiment: 8x8 mesh except mesh3d (4x4x4).
ExperimentConfig default_experiment(ExperimentKind kind);
nlohmann::json to_json(const ExperimentConfig& cfg);
/// Starts from default_experiment(name) and applies overrides. Throws InvalidConfig.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);

struct ExperimentPoint {
  std::string parameter;  // "n_mips", "pir" or empty for single-point runs
  double value = 0.0;
  std::size_t graphs = 0;
  MetricsReport detection;
  MetricsReport localization;
};

struct ExperimentResult {
  ExperimentKind kind = ExperimentKind::Baseline2D;
  std::vector<ExperimentPoint> points;
  TrainResult training;  // empty when a checkpoint was reused
  std::vector<std::string> artifacts;
};

using Logger = std::function<void(const std::string&)>;

/// Single-point experiments generate, train and evaluate on the held-out split.
/// Sweeps train once on `dataset` (or load `model_path`) and evaluate that model
/// on a freshly seeded dataset per grid point. Writes CSV, JSON and manifest.json
/// into out_dir; failures name the stage that broke.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const Logger& log = {});

std::string points_csv(const ExperimentResult& r);

/// JSON manifest: config digest, seeds, library version, artifact list.
nlohmann::json make_manifest(const std::string& command, const nlohmann::json& config,
                             const std::vector<std::string>& artifacts);

inline constexpr const char* kVersion = "1.0.0";

}  // namespace nocguard
