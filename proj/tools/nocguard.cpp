#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <numeric>
#include <optional>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "nocguard/experiment.hpp"
#include "nocguard/selftest.hpp"

using namespace nocguard;
namespace fs = std::filesystem;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitValidation = 4;
constexpr int kExitSelfTest = 1;

struct Globals {
  std::optional<std::uint64_t> seed;
  int threads = 0;
  bool f64 = false;
};

std::string data_dir() {
  const char* env = std::getenv("NOCGUARD_DATA_DIR");
  return env && *env ? env : "nocguard-data";
}

// Unset outputs land in the data directory.
std::string resolve_out(const std::string& given, const std::string& fallback) {
  if (!given.empty()) return given;
  fs::create_directories(data_dir());
  return (fs::path(data_dir()) / fallback).string();
}

nlohmann::json read_json(const std::string& path) {
  const auto bytes = read_file(path);
  try {
    return nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, path + ": " + e.what());
  }
}

void write_manifest(const std::string& out, const std::string& command, const nlohmann::json& config) {
  const auto name = fs::path(out).filename().string();
  write_text_file(out + ".manifest.json", make_manifest(command, config, {name}).dump(2));
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-")
    std::cout << text << "\n";
  else
    write_text_file(path, text);
}

int cmd_topo(const std::string& kind, std::uint32_t n, const std::string& out) {
  const auto t = build_topology(topology_kind_from_string(kind), n);
  auto j = to_json(t);
  j["node_count"] = t.node_count();
  j["edge_count"] = t.edges().size();
  j["mc_nodes"] = t.mc_nodes();
  emit(out, j.dump(2));
  return 0;
}

int cmd_simulate(const Globals& g, const std::string& config, const std::string& out_arg, const std::string& report) {
  auto cfg = sim_config_from_json(read_json(config));
  if (g.seed) cfg.seed = *g.seed;
  const auto out = resolve_out(out_arg, "trace.ngtr");
  const auto trace = run_scenario(cfg);
  save_trace(trace, out);
  const auto cons = flit_conservation_report(trace);
  nlohmann::json j = {{"trace", out},
                      {"cycles", trace.duration},
                      {"starved_flits", trace.stats.starved_flits},
                      {"injected_flits", cons.injected},
                      {"ejected_flits", cons.ejected},
                      {"in_flight_flits", cons.in_flight},
                      {"conservation_holds", cons.holds}};
  emit(report, j.dump(2));
  write_manifest(out, "simulate", to_json(cfg));
  return 0;
}

int cmd_gen_dataset(const Globals& g, const std::string& config, const std::string& out_arg) {
  auto cfg = dataset_config_from_json(read_json(config));
  if (g.seed) cfg.seed = *g.seed;
  const auto out = resolve_out(out_arg, "dataset.ngds");
  const auto d = generate_dataset(cfg);
  save_dataset(d, out);
  std::printf("%zu graphs (%zu train, %zu test), class weights %.4f / %.4f -> %s\n", d.graphs.size(),
              d.split.train.size(), d.split.test.size(), d.weights.benign, d.weights.malicious, out.c_str());
  write_manifest(out, "gen-dataset", to_json(cfg));
  return 0;
}

template <class T>
int train_as(const Dataset& d, const ModelConfig& mc, const TrainConfig& tc, const std::string& out,
             const std::string& history) {
  auto m = build_model<T>(mc, tc.seed);
  const auto r = train(m, d, tc, [](const EpochRecord& e) {
    std::printf("epoch %u train %.5f val %.5f lr %.2g node %.4f graph %.4f (%.1f s)\n", e.epoch, e.train_loss,
                e.val_loss, e.lr, e.val_node_accuracy, e.val_graph_accuracy, e.seconds);
    std::fflush(stdout);
  });
  save_checkpoint(m, out);
  if (!history.empty()) write_text_file(history, history_csv(r));
  std::printf("best epoch %u, val loss %.5f%s -> %s\n", r.best_epoch, r.best_val_loss,
              r.early_stopped ? " (early stop)" : "", out.c_str());
  return 0;
}

int cmd_train(const Globals& g, const std::string& data, const std::string& config, const std::string& model_config,
              const std::string& out_arg, const std::string& history) {
  const auto d = load_dataset(data);
  TrainConfig tc;
  if (!config.empty()) tc = train_config_from_json(read_json(config));
  if (g.seed) tc.seed = *g.seed;
  ModelConfig mc;
  mc.length = d.length;
  if (!model_config.empty()) mc = model_config_from_json(read_json(model_config));
  const auto out = resolve_out(out_arg, "model.ngck");
  g.f64 ? train_as<double>(d, mc, tc, out, history) : train_as<float>(d, mc, tc, out, history);
  write_manifest(out, "train",
                 {{"data", data}, {"train", to_json(tc)}, {"model", to_json(mc)}, {"f64", g.f64}});
  return 0;
}

int cmd_eval(const std::string& model, const std::string& data, const std::string& split, const std::string& report,
             double threshold) {
  const auto d = load_dataset(data);
  std::vector<std::size_t> graphs;
  if (split == "test")
    graphs = d.split.test;
  else if (split == "train")
    graphs = d.split.train;
  else if (split == "all") {
    graphs.resize(d.graphs.size());
    std::iota(graphs.begin(), graphs.end(), std::size_t{0});
  } else {
    throw Error(ErrorCode::InvalidConfig, "split must be test, train or all");
  }
  const auto any = load_checkpoint(model);
  const auto e = std::visit([&](const auto& m) { return evaluate(m, d, graphs, threshold); }, any);
  std::printf("detection accuracy %.4f (P %.4f R %.4f F1 %.4f)\n", e.detection.accuracy, e.detection.precision,
              e.detection.recall, e.detection.f1);
  std::printf("localization accuracy %.4f (P %.4f R %.4f F1 %.4f)\n", e.localization.accuracy,
              e.localization.precision, e.localization.recall, e.localization.f1);
  if (!report.empty()) {
    write_text_file(report, to_json(e, d).dump(2));
    write_manifest(report, "eval", {{"model", model}, {"data", data}, {"split", split}, {"threshold", threshold}});
  }
  return 0;
}

int cmd_infer(const std::string& model, const std::string& trace_path, const std::string& out, double threshold) {
  const auto trace = load_trace(trace_path);
  const auto any = load_checkpoint(model);
  const auto r = std::visit(
      [&](const auto& m) {
        const auto s = make_structure(build_topology(trace.kind, trace.dim));
        return detect_and_localize(m, graph_from_trace(trace, m.config.length, s), threshold);
      },
      any);
  emit(out, to_json(r).dump(2));
  return 0;
}

int cmd_experiment(const Globals& g, const std::string& config, const std::string& name, const std::string& out_dir) {
  ExperimentConfig cfg;
  if (!config.empty())
    cfg = experiment_config_from_json(read_json(config));
  else if (!name.empty())
    cfg = default_experiment(experiment_kind_from_string(name));
  else
    throw Error(ErrorCode::InvalidConfig, "experiment needs --config or --name");
  if (g.seed) cfg.seed = cfg.dataset.seed = cfg.train.seed = *g.seed;
  if (g.f64) cfg.f64 = true;
  if (!out_dir.empty()) cfg.out_dir = out_dir;
  if (cfg.out_dir.empty()) cfg.out_dir = (fs::path(data_dir()) / to_string(cfg.kind)).string();
  const auto r = run_experiment(cfg, [](const std::string& s) {
    std::printf("%s\n", s.c_str());
    std::fflush(stdout);
  });
  std::printf("%s", points_csv(r).c_str());
  return 0;
}

int cmd_self_test(const Globals& g, std::size_t trials, const std::string& corrupt) {
  SelfTestOptions opt;
  opt.trials = trials;
  if (g.seed) opt.seed = *g.seed;
  opt.fault_op = corrupt;
  const auto checks = run_self_test(opt);
  bool ok = true;
  for (const auto& c : checks) {
    std::printf("%s  %-36s %s\n", c.passed ? "PASS" : "FAIL", c.name.c_str(), c.detail.c_str());
    ok = ok && c.passed;
  }
  std::printf("%s\n", ok ? "self-test passed" : "self-test FAILED");
  return ok ? 0 : kExitSelfTest;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"nocguard: NoC DDoS detection and localization workbench"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand
  Globals g;
  std::uint64_t seed = 0;
  auto* seed_opt = app.add_option("--seed", seed, "Override every seed in the loaded config");
  app.add_option("--threads", g.threads, "OpenMP threads (0 = runtime default)")->check(CLI::NonNegativeNumber);
  app.add_flag("--f64", g.f64, "Train and evaluate in double precision");

  std::string kind = "mesh2d", out, config, report, data, model, history, split = "test", trace, name, corrupt,
              model_config;
  std::uint32_t n = 8;
  double threshold = 0.5;
  std::size_t trials = 50;

  auto* topo = app.add_subcommand("topo", "Print a mesh topology as JSON");
  topo->add_option("--kind", kind)->check(CLI::IsMember({"mesh2d", "mesh3d"}));
  topo->add_option("--n", n, "Routers per dimension");
  topo->add_option("--out", out, "Output file (stdout when omitted)");

  auto* sim = app.add_subcommand("simulate", "Run one scenario and save its trace");
  sim->add_option("--config", config)->required();
  sim->add_option("--out", out);
  sim->add_option("--report", report, "Statistics JSON (stdout when omitted)");

  auto* gen = app.add_subcommand("gen-dataset", "Simulate every scenario of the collection protocol");
  gen->add_option("--config", config)->required();
  gen->add_option("--out", out);

  auto* tr = app.add_subcommand("train", "Train a model on a dataset");
  tr->add_option("--data", data)->required();
  tr->add_option("--config", config, "Training hyperparameters JSON");
  tr->add_option("--model-config", model_config, "Architecture JSON");
  tr->add_option("--out", out);
  tr->add_option("--history", history, "Per-epoch CSV");

  auto* ev = app.add_subcommand("eval", "Detection and localization metrics");
  ev->add_option("--model", model)->required();
  ev->add_option("--data", data)->required();
  ev->add_option("--split", split)->check(CLI::IsMember({"test", "train", "all"}));
  ev->add_option("--report", report);
  ev->add_option("--threshold", threshold)->check(CLI::Range(0.0, 1.0));

  auto* inf = app.add_subcommand("infer", "Score one trace");
  inf->add_option("--model", model)->required();
  inf->add_option("--trace", trace)->required();
  inf->add_option("--out", out);
  inf->add_option("--threshold", threshold)->check(CLI::Range(0.0, 1.0));

  auto* ex = app.add_subcommand("experiment", "Run a named experiment end to end");
  ex->add_option("--config", config);
  ex->add_option("--name", name)->check(CLI::IsMember({"baseline2d", "mip_sweep", "pir_sweep", "mesh3d"}));
  ex->add_option("--out-dir", out);

  auto* st = app.add_subcommand("self-test", "Gradient, GraphConv, decision and simulator checks");
  st->add_option("--trials", trials, "Gradient check trials per layer")->check(CLI::PositiveNumber);
  st->add_option("--corrupt-gradient", corrupt, "Negative control: damage the backward pass of this op");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }
  if (*seed_opt) g.seed = seed;
#ifdef _OPENMP
  if (g.threads > 0) omp_set_num_threads(g.threads);
#endif

  try {
    if (*topo) return cmd_topo(kind, n, out);
    if (*sim) return cmd_simulate(g, config, out, report);
    if (*gen) return cmd_gen_dataset(g, config, out);
    if (*tr) return cmd_train(g, data, config, model_config, out, history);
    if (*ev) return cmd_eval(model, data, split, report, threshold);
    if (*inf) return cmd_infer(model, trace, out, threshold);
    if (*ex) return cmd_experiment(g, config, name, out);
    if (*st) return cmd_self_test(g, trials, corrupt);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    switch (category_of(e.code())) {
      case ErrorCategory::Config: return kExitConfig;
      case ErrorCategory::Io: return kExitIo;
      case ErrorCategory::Validation: return kExitValidation;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitIo;
  }
  return 0;
}
