#include "nocguard/model.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <malloc.h>

#include "nocguard/error.hpp"

namespace nocguard {

std::vector<std::size_t> temporal_lengths(const ModelConfig& cfg) {
  std::vector<std::size_t> out{cfg.length};
  std::size_t len = cfg.length;
  for (std::size_t i = 0; i < cfg.conv_kernels.size(); ++i) {
    for (auto [k, s] : {std::pair{cfg.conv_kernels[i], cfg.conv_strides[i]},
                        std::pair{cfg.pool_kernels[i], cfg.pool_strides[i]}}) {
      if (k == 0 || s == 0) throw Error(ErrorCode::InvalidConfig, "kernels and strides must be >= 1");
      if (len < k)
        throw Error(ErrorCode::Length, "temporal stack needs length >= " + std::to_string(k) + " at layer " +
                                           std::to_string(i + 1) + ", has " + std::to_string(len));
      len = (len - k) / s + 1;
      out.push_back(len);
    }
  }
  return out;
}

std::size_t flattened_width(const ModelConfig& cfg) {
  return temporal_lengths(cfg).back() * cfg.conv_channels.back();
}

void validate(const ModelConfig& cfg) {
  const std::size_t n = cfg.conv_channels.size();
  if (n == 0) throw Error(ErrorCode::InvalidConfig, "model needs at least one conv layer");
  if (cfg.conv_kernels.size() != n || cfg.conv_strides.size() != n || cfg.pool_kernels.size() != n ||
      cfg.pool_strides.size() != n)
    throw Error(ErrorCode::InvalidConfig, "conv channel, kernel, stride and pool lists must have equal length");
  if (cfg.input_channels == 0 || cfg.length == 0) throw Error(ErrorCode::InvalidConfig, "empty model input");
  auto positive = [](const std::vector<std::uint32_t>& v) {
    return std::all_of(v.begin(), v.end(), [](auto x) { return x > 0; });
  };
  if (!positive(cfg.conv_channels) || !positive(cfg.graph_widths) || !positive(cfg.fc_widths))
    throw Error(ErrorCode::InvalidConfig, "layer widths must be >= 1");
  if (cfg.fc_widths.empty() || cfg.fc_widths.back() != 1)
    throw Error(ErrorCode::InvalidConfig, "the last fully connected layer must have width 1");
  if (!(cfg.conv_dropout >= 0.0 && cfg.conv_dropout < 1.0) || !(cfg.fc_dropout >= 0.0 && cfg.fc_dropout < 1.0))
    throw Error(ErrorCode::InvalidRate, "dropout rates must lie in [0,1)");
  if (cfg.fc_dropout_after > cfg.fc_widths.size())
    throw Error(ErrorCode::InvalidConfig, "fc_dropout_after points past the last FC layer");
  temporal_lengths(cfg);
}

nlohmann::json to_json(const ModelConfig& c) {
  return {{"input_channels", c.input_channels}, {"length", c.length},
          {"conv_channels", c.conv_channels},   {"conv_kernels", c.conv_kernels},
          {"conv_strides", c.conv_strides},     {"pool_kernels", c.pool_kernels},
          {"pool_strides", c.pool_strides},     {"conv_dropout", c.conv_dropout},
          {"graph_widths", c.graph_widths},     {"fc_widths", c.fc_widths},
          {"fc_dropout", c.fc_dropout},         {"fc_dropout_after", c.fc_dropout_after},
          {"node_agnostic", c.node_agnostic}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  try {
    ModelConfig c;
    c.input_channels = j.value("input_channels", c.input_channels);
    c.length = j.value("length", c.length);
    c.conv_channels = j.value("conv_channels", c.conv_channels);
    c.conv_kernels = j.value("conv_kernels", c.conv_kernels);
    c.conv_strides = j.value("conv_strides", c.conv_strides);
    c.pool_kernels = j.value("pool_kernels", c.pool_kernels);
    c.pool_strides = j.value("pool_strides", c.pool_strides);
    c.conv_dropout = j.value("conv_dropout", c.conv_dropout);
    c.graph_widths = j.value("graph_widths", c.graph_widths);
    c.fc_widths = j.value("fc_widths", c.fc_widths);
    c.fc_dropout = j.value("fc_dropout", c.fc_dropout);
    c.fc_dropout_after = j.value("fc_dropout_after", c.fc_dropout_after);
    c.node_agnostic = j.value("node_agnostic", c.node_agnostic);
    validate(c);
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("model config: ") + e.what());
  }
}

template <class T>
Tensor<T>& Model<T>::param(const std::string& name) {
  for (auto& [n, t] : params)
    if (n == name) return t;
  throw Error(ErrorCode::InvalidConfig, "model has no parameter '" + name + "'");
}

template <class T>
const Tensor<T>& Model<T>::param(const std::string& name) const {
  return const_cast<Model<T>*>(this)->param(name);
}

template <class T>
std::size_t Model<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : params) n += t.size();
  return n;
}

template <class T>
Model<T> build_model(const ModelConfig& cfg, std::uint64_t seed) {
  validate(cfg);
  Model<T> m;
  m.config = cfg;
  m.meta.seed = seed;
  Rng rng(seed);
  auto add = [&](std::string name, Shape shape, std::size_t fan_in) {
    const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
    Tensor<T> t(std::move(shape));
    for (auto& v : t.data) v = static_cast<T>(rng.uniform(-bound, bound));
    m.params.emplace_back(std::move(name), std::move(t));
  };
  std::size_t in = cfg.input_channels;
  for (std::size_t i = 0; i < cfg.conv_channels.size(); ++i) {
    const std::size_t out = cfg.conv_channels[i], k = cfg.conv_kernels[i];
    const std::string p = "conv" + std::to_string(i + 1);
    add(p + ".weight", {out, in, k}, in * k);
    add(p + ".bias", {out}, in * k);
    in = out;
  }
  std::size_t width = flattened_width(cfg);
  for (std::size_t i = 0; i < cfg.graph_widths.size(); ++i) {
    const std::size_t out = cfg.graph_widths[i];
    const std::string p = "graph" + std::to_string(i + 1);
    add(p + ".w_self", {width, out}, width);
    add(p + ".w_neighbor", {width, out}, width);
    add(p + ".bias", {out}, width);
    width = out;
  }
  for (std::size_t i = 0; i < cfg.fc_widths.size(); ++i) {
    const std::size_t out = cfg.fc_widths[i];
    const std::string p = "fc" + std::to_string(i + 1);
    add(p + ".weight", {width, out}, width);
    add(p + ".bias", {out}, width);
    width = out;
  }
  return m;
}

template <class T>
Var forward(Tape<T>& tape, const Model<T>& m, const std::vector<Var>& params, Var x,
            const kernels::Neighbors& adjacency, bool train, Rng* rng) {
  const auto& cfg = m.config;
  if (params.size() != m.params.size()) throw Error(ErrorCode::Shape, "parameter list does not match the model");
  if (train && !rng) throw Error(ErrorCode::InvalidConfig, "training forward needs an rng");
  const std::size_t n = tape.value(x).dim(0);
  std::size_t p = 0;
  Var h = x;
  for (std::size_t i = 0; i < cfg.conv_channels.size(); ++i) {
    h = tape.conv1d(h, params[p], params[p + 1], cfg.conv_strides[i]);
    p += 2;
    h = tape.relu(h);
    h = tape.avg_pool1d(h, cfg.pool_kernels[i], cfg.pool_strides[i]);
    if (train) h = tape.dropout(h, cfg.conv_dropout, true, *rng);
  }
  h = tape.reshape(h, {n, tape.value(h).size() / n});
  for (std::size_t i = 0; i < cfg.graph_widths.size(); ++i) {
    h = tape.graph_conv(h, adjacency, params[p], params[p + 1], params[p + 2]);
    p += 3;
    h = tape.relu(h);
  }
  for (std::size_t i = 0; i < cfg.fc_widths.size(); ++i) {
    h = tape.linear(h, params[p], params[p + 1]);
    p += 2;
    if (i + 1 == cfg.fc_widths.size()) break;
    h = tape.relu(h);
    if (train && i + 1 == cfg.fc_dropout_after) h = tape.dropout(h, cfg.fc_dropout, true, *rng);
  }
  return tape.sigmoid(tape.reshape(h, {n}));
}

namespace {

std::string describe(const std::string& kind, std::uint32_t dim) {
  return kind + " n=" + std::to_string(dim);
}

template <class T>
Tensor<T> graph_input(const SpatioTemporalGraph& g) {
  Tensor<T> x({g.node_count(), 2, g.length});
  for (std::size_t i = 0; i < g.x.size(); ++i) x[i] = static_cast<T>(g.x[i]);
  return x;
}

}  // namespace

template <class T>
void check_compatible(const Model<T>& m, const SpatioTemporalGraph& g) {
  if (!g.structure) throw Error(ErrorCode::Inference, "graph has no adjacency");
  const auto& topo = g.structure->topology;
  if (g.length != m.config.length)
    throw Error(ErrorCode::Inference, "graph window length " + std::to_string(g.length) + " differs from model length " +
                                          std::to_string(m.config.length));
  if (g.x.size() != g.node_count() * 2 * g.length || g.node_count() != topo.node_count())
    throw Error(ErrorCode::Inference, "graph features do not match its topology");
  if (m.config.input_channels != 2) throw Error(ErrorCode::Inference, "model expects two delay channels");
  if (m.meta.topology_digest != 0 && !m.config.node_agnostic && m.meta.topology_digest != topo.digest())
    throw Error(ErrorCode::Inference,
                "model was trained on " + describe(m.meta.topology_kind, m.meta.topology_dim) + " but the graph is " +
                    describe(to_string(topo.kind()), topo.dim()) +
                    " (N mismatch); set node_agnostic to allow transfer");
}

template <class T>
std::vector<double> predict(const Model<T>& m, const SpatioTemporalGraph& g) {
  check_compatible(m, g);
  Tape<T> tape;
  std::vector<Var> vars;
  vars.reserve(m.params.size());
  for (const auto& [name, t] : m.params) vars.push_back(tape.constant(t));
  const Var x = tape.constant(graph_input<T>(g));
  const Var s = forward(tape, m, vars, x, g.structure->neighbors, false, nullptr);
  std::vector<double> out;
  out.reserve(g.node_count());
  for (T v : tape.value(s).data)
    out.push_back(std::clamp(static_cast<double>(v), kProbabilityClamp, 1.0 - kProbabilityClamp));
  return out;
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"batch_size", c.batch_size},
          {"lr", c.lr},
          {"plateau_patience", c.plateau_patience},
          {"early_stop_patience", c.early_stop_patience},
          {"lr_factor", c.lr_factor},
          {"tolerance", c.tolerance},
          {"max_epochs", c.max_epochs},
          {"val_fraction", c.val_fraction},
          {"seed", c.seed}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  try {
    TrainConfig c;
    c.batch_size = j.value("batch_size", c.batch_size);
    c.lr = j.value("lr", c.lr);
    c.plateau_patience = j.value("plateau_patience", c.plateau_patience);
    c.early_stop_patience = j.value("early_stop_patience", c.early_stop_patience);
    c.lr_factor = j.value("lr_factor", c.lr_factor);
    c.tolerance = j.value("tolerance", c.tolerance);
    c.max_epochs = j.value("max_epochs", c.max_epochs);
    c.val_fraction = j.value("val_fraction", c.val_fraction);
    c.seed = j.value("seed", c.seed);
    if (c.batch_size == 0) throw Error(ErrorCode::InvalidConfig, "batch_size must be >= 1");
    if (!(c.val_fraction > 0.0 && c.val_fraction < 1.0))
      throw Error(ErrorCode::InvalidConfig, "val_fraction must lie in (0,1)");
    if (!(c.lr > 0.0)) throw Error(ErrorCode::InvalidConfig, "lr must be > 0");
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("train config: ") + e.what());
  }
}

std::string history_csv(const TrainResult& r) {
  std::string out = "epoch,train_loss,val_loss,lr,val_node_accuracy,val_graph_accuracy,seconds\n";
  char line[256];
  for (const auto& e : r.history) {
    std::snprintf(line, sizeof line, "%u,%.9g,%.9g,%.9g,%.6f,%.6f,%.3f\n", e.epoch, e.train_loss, e.val_loss, e.lr,
                  e.val_node_accuracy, e.val_graph_accuracy, e.seconds);
    out += line;
  }
  return out;
}

template <class T>
TrainResult train(Model<T>& m, const Dataset& data, const TrainConfig& tc,
                  const std::function<void(const EpochRecord&)>& on_epoch) {
  if (tc.batch_size == 0) throw Error(ErrorCode::InvalidConfig, "batch_size must be >= 1");
  if (data.graphs.empty() || data.split.train.empty())
    throw Error(ErrorCode::DegenerateClass, "training split is empty");
  for (auto gi : data.split.train) check_compatible(m, data.graphs.at(gi));
  const ClassWeights w = class_weights(data, data.split.train);
  // Every graph builds and frees a tape of multi-megabyte activations. glibc would
  // mmap and unmap them each time, paying page faults; keep them in the heap.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);

  TrainResult result;
  {
    std::vector<std::uint8_t> labels;
    for (auto gi : data.split.train) labels.push_back(data.graphs[gi].graph_label);
    const Split inner = split_dataset(labels, 1.0 - tc.val_fraction, hash_combine(tc.seed, 0x7A1ull));
    for (auto i : inner.train) result.fit_graphs.push_back(data.split.train[i]);
    for (auto i : inner.test) result.val_graphs.push_back(data.split.train[i]);
  }

  std::vector<Tensor<T>*> param_ptrs;
  for (auto& [name, t] : m.params) param_ptrs.push_back(&t);
  AdamConfig ac;
  ac.lr = tc.lr;
  Adam<T> adam(param_ptrs, ac);
  PlateauMonitor monitor({tc.plateau_patience, tc.early_stop_patience, tc.lr_factor, tc.tolerance});
  Rng rng(hash_combine(tc.seed, 0xD50ull));

  std::vector<Tensor<T>> grads;
  for (auto* p : param_ptrs) grads.emplace_back(p->shape);
  std::vector<const Tensor<T>*> grad_ptrs;
  for (auto& g : grads) grad_ptrs.push_back(&g);

  auto best = m.params;
  double lr = tc.lr;
  std::vector<std::size_t> order = result.fit_graphs;

  for (std::uint32_t epoch = 1; epoch <= tc.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    try {
      rng.shuffle(order.begin(), order.end());
      double train_loss = 0.0;
      for (std::size_t start = 0; start < order.size(); start += tc.batch_size) {
        const std::size_t end = std::min(order.size(), start + tc.batch_size);
        for (auto& g : grads) g.fill(T(0));
        for (std::size_t k = start; k < end; ++k) {
          const auto& g = data.graphs[order[k]];
          Tape<T> tape;
          std::vector<Var> vars;
          for (auto* p : param_ptrs) vars.push_back(tape.parameter(*p));
          const Var x = tape.constant(graph_input<T>(g));
          const Var s = forward(tape, m, vars, x, g.structure->neighbors, true, &rng);
          const Var loss = tape.weighted_bce(s, g.labels, w.benign, w.malicious);
          train_loss += static_cast<double>(tape.value(loss)[0]);
          tape.backward(loss);
          for (std::size_t i = 0; i < vars.size(); ++i) {
            const auto& gr = tape.grad(vars[i]);
            auto& acc = grads[i];
            for (std::size_t e = 0; e < acc.size(); ++e) acc[e] += gr[e];
          }
        }
        const T scale = T(1) / static_cast<T>(end - start);
        for (auto& g : grads)
          for (auto& v : g.data) v *= scale;
        adam.step(param_ptrs, grad_ptrs);
      }
      rec.train_loss = train_loss / static_cast<double>(order.size());

      double val_loss = 0.0;
      std::size_t node_hits = 0, nodes = 0, graph_hits = 0;
      for (auto gi : result.val_graphs) {
        const auto& g = data.graphs[gi];
        Tape<T> tape;
        std::vector<Var> vars;
        for (auto* p : param_ptrs) vars.push_back(tape.constant(*p));
        const Var s = forward(tape, m, vars, tape.constant(graph_input<T>(g)), g.structure->neighbors, false, nullptr);
        val_loss += static_cast<double>(tape.value(tape.weighted_bce(s, g.labels, w.benign, w.malicious))[0]);
        bool any = false;
        const auto& sv = tape.value(s);
        for (std::size_t i = 0; i < g.node_count(); ++i) {
          const bool pred = static_cast<double>(sv[i]) >= 0.5;
          any = any || pred;
          node_hits += pred == (g.labels[i] != 0);
        }
        nodes += g.node_count();
        graph_hits += any == (g.graph_label != 0);
      }
      rec.val_loss = val_loss / static_cast<double>(std::max<std::size_t>(1, result.val_graphs.size()));
      rec.val_node_accuracy = nodes ? static_cast<double>(node_hits) / static_cast<double>(nodes) : 0.0;
      rec.val_graph_accuracy =
          result.val_graphs.empty() ? 0.0
                                    : static_cast<double>(graph_hits) / static_cast<double>(result.val_graphs.size());
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NonFinite) throw;
      throw Error(ErrorCode::Divergence, "training diverged in epoch " + std::to_string(epoch) + " (" + e.what() + ")");
    }
    if (!std::isfinite(rec.train_loss) || !std::isfinite(rec.val_loss))
      throw Error(ErrorCode::Divergence, "loss became non-finite in epoch " + std::to_string(epoch));

    const auto decision = monitor.observe(rec.val_loss, lr);
    adam.set_lr(lr);
    if (decision.improved) {
      best = m.params;
      result.best_epoch = epoch;
      result.best_val_loss = rec.val_loss;
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (decision.stop) {
      result.early_stopped = true;
      break;
    }
  }

  m.params = std::move(best);
  const auto& topo = data.structure->topology;
  m.meta.topology_kind = to_string(topo.kind());
  m.meta.topology_dim = topo.dim();
  m.meta.topology_digest = topo.digest();
  m.meta.dataset_digest = digest64(data.generator);
  m.meta.epochs_run = static_cast<std::uint32_t>(result.history.size());
  m.meta.best_val_loss = result.best_val_loss;
  return result;
}

template <class To, class From>
Model<To> model_cast(const Model<From>& m) {
  Model<To> out;
  out.config = m.config;
  out.meta = m.meta;
  for (const auto& [name, t] : m.params) out.params.emplace_back(name, tensor_cast<To>(t));
  return out;
}

#define NOCGUARD_MODEL_INSTANTIATE(T)                                                                             \
  template struct Model<T>;                                                                                       \
  template Model<T> build_model<T>(const ModelConfig&, std::uint64_t);                                            \
  template Var forward<T>(Tape<T>&, const Model<T>&, const std::vector<Var>&, Var, const kernels::Neighbors&,    \
                          bool, Rng*);                                                                            \
  template void check_compatible<T>(const Model<T>&, const SpatioTemporalGraph&);                                 \
  template std::vector<double> predict<T>(const Model<T>&, const SpatioTemporalGraph&);                           \
  template TrainResult train<T>(Model<T>&, const Dataset&, const TrainConfig&,                                    \
                                const std::function<void(const EpochRecord&)>&);

NOCGUARD_MODEL_INSTANTIATE(float)
NOCGUARD_MODEL_INSTANTIATE(double)

template Model<float> model_cast<float, double>(const Model<double>&);
template Model<double> model_cast<double, float>(const Model<float>&);
template Model<float> model_cast<float, float>(const Model<float>&);
template Model<double> model_cast<double, double>(const Model<double>&);

}  // namespace nocguard
