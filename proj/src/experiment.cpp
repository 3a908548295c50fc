#include "nocguard/experiment.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <optional>

#include "nocguard/binary_io.hpp"

namespace nocguard {

namespace fs = std::filesystem;

std::string to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::Baseline2D: return "baseline2d";
    case ExperimentKind::MipSweep: return "mip_sweep";
    case ExperimentKind::PirSweep: return "pir_sweep";
    case ExperimentKind::Mesh3D: return "mesh3d";
  }
  return "?";
}

ExperimentKind experiment_kind_from_string(const std::string& s) {
  for (auto k : {ExperimentKind::Baseline2D, ExperimentKind::MipSweep, ExperimentKind::PirSweep, ExperimentKind::Mesh3D})
    if (to_string(k) == s) return k;
  throw Error(ErrorCode::InvalidConfig, "unknown experiment '" + s + "' (baseline2d, mip_sweep, pir_sweep, mesh3d)");
}

ExperimentConfig default_experiment(ExperimentKind kind) {
  ExperimentConfig c;
  c.kind = kind;
  c.dataset = default_dataset_config(kind == ExperimentKind::Mesh3D ? build_mesh_3d(4) : build_mesh_2d(8));
  c.model.length = c.dataset.length;
  return c;
}

nlohmann::json to_json(const ExperimentConfig& c) {
  return {{"experiment", to_string(c.kind)}, {"dataset", to_json(c.dataset)}, {"model", to_json(c.model)},
          {"train", to_json(c.train)},       {"mips", c.mips},                  {"pirs", c.pirs},
          {"seed", c.seed},                  {"out_dir", c.out_dir},            {"model_path", c.model_path},
          {"f64", c.f64}};
}

ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  try {
    auto c = default_experiment(experiment_kind_from_string(j.at("experiment").get<std::string>()));
    if (j.contains("dataset")) c.dataset = dataset_config_from_json(j.at("dataset"));
    if (j.contains("model")) c.model = model_config_from_json(j.at("model"));
    if (j.contains("train")) c.train = train_config_from_json(j.at("train"));
    c.mips = j.value("mips", c.mips);
    c.pirs = j.value("pirs", c.pirs);
    c.seed = j.value("seed", c.seed);
    c.out_dir = j.value("out_dir", c.out_dir);
    c.model_path = j.value("model_path", c.model_path);
    c.f64 = j.value("f64", c.f64);
    if (c.kind == ExperimentKind::MipSweep && c.mips.empty())
      throw Error(ErrorCode::InvalidConfig, "mip_sweep needs a non-empty mips grid");
    if (c.kind == ExperimentKind::PirSweep && c.pirs.empty())
      throw Error(ErrorCode::InvalidConfig, "pir_sweep needs a non-empty pirs grid");
    if (!c.model_path.empty() && !fs::exists(c.model_path))
      throw Error(ErrorCode::InvalidConfig, "model_path '" + c.model_path + "' does not exist");
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("experiment config: ") + e.what());
  }
}

nlohmann::json make_manifest(const std::string& command, const nlohmann::json& config,
                             const std::vector<std::string>& artifacts) {
  const auto dumped = config.dump();
  nlohmann::json seeds = nlohmann::json::object();
  // Collect every "seed" field so reruns can be matched at a glance.
  std::function<void(const nlohmann::json&, const std::string&)> walk = [&](const nlohmann::json& j,
                                                                           const std::string& path) {
    if (!j.is_object()) return;
    for (const auto& [k, v] : j.items()) {
      if (k == "seed") seeds[path.empty() ? "seed" : path + ".seed"] = v;
      walk(v, path.empty() ? k : path + "." + k);
    }
  };
  walk(config, "");
  char digest[17];
  std::snprintf(digest, sizeof digest, "%016llx", static_cast<unsigned long long>(digest64(dumped)));
  return {{"command", command},
          {"config", config},
          {"config_digest", digest},
          {"seeds", seeds},
          {"versions", {{"nocguard", kVersion}, {"json", "nlohmann " + std::to_string(NLOHMANN_JSON_VERSION_MAJOR) +
                                                             "." + std::to_string(NLOHMANN_JSON_VERSION_MINOR)}}},
          {"artifacts", artifacts},
          // Only field that changes between identical runs.
          {"metadata", {{"created_unix", std::chrono::duration_cast<std::chrono::seconds>(
                                             std::chrono::system_clock::now().time_since_epoch())
                                             .count()}}}};
}

std::string points_csv(const ExperimentResult& r) {
  std::string out = "parameter,value,graphs,detection_acc,detection_precision,detection_recall,detection_f1,"
                    "localization_acc,localization_precision,localization_recall,localization_f1\n";
  char line[512];
  for (const auto& p : r.points) {
    std::snprintf(line, sizeof line, "%s,%.6g,%zu,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n",
                  p.parameter.empty() ? "none" : p.parameter.c_str(), p.value, p.graphs, p.detection.accuracy,
                  p.detection.precision, p.detection.recall, p.detection.f1, p.localization.accuracy,
                  p.localization.precision, p.localization.recall, p.localization.f1);
    out += line;
  }
  return out;
}

namespace {

template <class F>
auto stage(const std::string& name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    throw Error(e.code(), "stage '" + name + "': " + e.what());
  }
}

struct Runner {
  const ExperimentConfig& cfg;
  const Logger& log;
  fs::path dir;
  ExperimentResult result;

  void note(const std::string& s) const {
    if (log) log(s);
  }

  std::string artifact(const std::string& name) {
    result.artifacts.push_back(name);
    return (dir / name).string();
  }

  Dataset make_dataset(const DatasetConfig& dc, const std::string& name) {
    return stage("dataset " + name, [&] {
      const auto t0 = std::chrono::steady_clock::now();
      auto d = generate_dataset(dc);
      save_dataset(d, artifact(name));
      note("dataset " + name + ": " + std::to_string(d.graphs.size()) + " graphs in " +
           std::to_string(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()) + " s");
      return d;
    });
  }

  template <class T>
  Model<T> fit(const Dataset& d) {
    return stage("train", [&] {
      auto m = build_model<T>(cfg.model, cfg.seed);
      result.training = train(m, d, cfg.train, [&](const EpochRecord& e) {
        char line[160];
        std::snprintf(line, sizeof line, "epoch %u train %.5f val %.5f lr %.2g node %.4f graph %.4f (%.1f s)",
                      e.epoch, e.train_loss, e.val_loss, e.lr, e.val_node_accuracy, e.val_graph_accuracy, e.seconds);
        note(line);
      });
      write_text_file(artifact("history.csv"), history_csv(result.training));
      save_checkpoint(m, artifact("model.ngck"));
      return m;
    });
  }

  template <class T>
  ExperimentPoint measure(const Model<T>& m, const Dataset& d, const std::vector<std::size_t>& graphs,
                          const std::string& parameter, double value, const std::string& report) {
    return stage("eval " + report, [&] {
      const auto e = evaluate(m, d, graphs);
      write_text_file(artifact(report), to_json(e, d).dump(2));
      ExperimentPoint p{parameter, value, graphs.size(), e.detection, e.localization};
      char line[200];
      std::snprintf(line, sizeof line, "%s%s%.4g: detection %.4f localization %.4f over %zu graphs",
                    parameter.c_str(), parameter.empty() ? "" : "=", parameter.empty() ? 0.0 : value,
                    e.detection.accuracy, e.localization.accuracy, graphs.size());
      note(line);
      return p;
    });
  }

  template <class T>
  Model<T> trained_or_loaded(const Dataset* d) {
    if (cfg.model_path.empty()) return fit<T>(*d);
    return stage("load model", [&] {
      auto any = load_checkpoint(cfg.model_path);
      return std::visit([](auto& m) { return model_cast<T>(m); }, any);
    });
  }

  template <class T>
  void run() {
    const bool sweep = cfg.kind == ExperimentKind::MipSweep || cfg.kind == ExperimentKind::PirSweep;
    if (!sweep) {
      const auto d = make_dataset(cfg.dataset, "dataset.ngds");
      const auto m = fit<T>(d);
      result.points.push_back(measure(m, d, d.split.test, "", 0.0, "report.json"));
      return;
    }
    std::optional<Dataset> base;
    if (cfg.model_path.empty()) base = make_dataset(cfg.dataset, "train_dataset.ngds");
    const auto m = trained_or_loaded<T>(base ? &*base : nullptr);
    base.reset();
    const bool mips = cfg.kind == ExperimentKind::MipSweep;
    const std::size_t points = mips ? cfg.mips.size() : cfg.pirs.size();
    for (std::size_t k = 0; k < points; ++k) {
      DatasetConfig dc = cfg.dataset;
      // A fresh seed per point keeps every evaluated graph unseen during training.
      dc.seed = hash_combine(cfg.dataset.seed, 0x5EE9ull + k);
      std::string tag;
      double value;
      if (mips) {
        dc.n_mips = cfg.mips[k];
        value = dc.n_mips;
        tag = "nm" + std::to_string(dc.n_mips);
      } else {
        dc.pir = cfg.pirs[k];
        value = dc.pir;
        char buf[32];
        std::snprintf(buf, sizeof buf, "pir%.3g", dc.pir);
        tag = buf;
      }
      const auto d = make_dataset(dc, "eval_" + tag + ".ngds");
      std::vector<std::size_t> all(d.graphs.size());
      std::iota(all.begin(), all.end(), std::size_t{0});
      result.points.push_back(measure(m, d, all, mips ? "n_mips" : "pir", value, "report_" + tag + ".json"));
    }
  }
};

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg, const Logger& log) {
  if (cfg.out_dir.empty()) throw Error(ErrorCode::InvalidConfig, "experiment needs an output directory");
  if (cfg.model.length != cfg.dataset.length)
    throw Error(ErrorCode::InvalidConfig, "model length " + std::to_string(cfg.model.length) +
                                              " differs from dataset window " + std::to_string(cfg.dataset.length));
  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create " + cfg.out_dir + ": " + ec.message());
  Runner r{cfg, log, cfg.out_dir, {}};
  r.result.kind = cfg.kind;
  if (cfg.f64)
    r.run<double>();
  else
    r.run<float>();

  const std::string csv = cfg.kind == ExperimentKind::MipSweep   ? "mip_sweep.csv"
                          : cfg.kind == ExperimentKind::PirSweep ? "pir_sweep.csv"
                                                                 : "metrics.csv";
  write_text_file(r.artifact(csv), points_csv(r.result));
  nlohmann::json summary = {{"experiment", to_string(cfg.kind)}, {"points", nlohmann::json::array()}};
  for (const auto& p : r.result.points)
    summary["points"].push_back({{"parameter", p.parameter},
                                 {"value", p.value},
                                 {"graphs", p.graphs},
                                 {"detection", to_json(p.detection)},
                                 {"localization", to_json(p.localization)}});
  if (!r.result.training.history.empty())
    summary["training"] = {{"epochs", r.result.training.history.size()},
                           {"best_epoch", r.result.training.best_epoch},
                           {"best_val_loss", r.result.training.best_val_loss},
                           {"early_stopped", r.result.training.early_stopped}};
  write_text_file(r.artifact("summary.json"), summary.dump(2));
  auto artifacts = r.result.artifacts;
  artifacts.push_back("manifest.json");
  write_text_file((r.dir / "manifest.json").string(),
                  make_manifest("experiment " + to_string(cfg.kind), to_json(cfg), artifacts).dump(2));
  r.result.artifacts = std::move(artifacts);
  return r.result;
}

}  // namespace nocguard
