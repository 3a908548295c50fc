#include "nocguard/binary_io.hpp"
#include "nocguard/error.hpp"
#include "nocguard/model.hpp"

namespace nocguard {

namespace {

constexpr char kMagic[4] = {'N', 'G', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint8_t kF32 = 0;
constexpr std::uint8_t kF64 = 1;

nlohmann::json to_json(const ModelMetadata& m) {
  return {{"topology_kind", m.topology_kind}, {"topology_dim", m.topology_dim},
          {"topology_digest", m.topology_digest}, {"dataset_digest", m.dataset_digest},
          {"seed", m.seed},                     {"epochs_run", m.epochs_run},
          {"best_val_loss", m.best_val_loss}};
}

ModelMetadata metadata_from_json(const nlohmann::json& j) {
  ModelMetadata m;
  m.topology_kind = j.value("topology_kind", m.topology_kind);
  m.topology_dim = j.value("topology_dim", m.topology_dim);
  m.topology_digest = j.value("topology_digest", m.topology_digest);
  m.dataset_digest = j.value("dataset_digest", m.dataset_digest);
  m.seed = j.value("seed", m.seed);
  m.epochs_run = j.value("epochs_run", m.epochs_run);
  m.best_val_loss = j.value("best_val_loss", m.best_val_loss);
  return m;
}

template <class T>
AnyModel read_params(ByteReader& r, ModelConfig cfg, ModelMetadata meta, std::uint8_t dtype) {
  Model<T> m;
  m.config = std::move(cfg);
  m.meta = std::move(meta);
  // Shapes must match a freshly built model of the same config.
  const auto reference = build_model<T>(m.config, 0);
  const std::uint32_t count = r.u32();
  if (count != reference.params.size())
    throw Error(ErrorCode::CorruptCheckpoint, "checkpoint holds " + std::to_string(count) + " tensors, config needs " +
                                                  std::to_string(reference.params.size()));
  for (std::uint32_t k = 0; k < count; ++k) {
    std::string name = r.string32();
    if (r.u8() != dtype) throw Error(ErrorCode::CorruptCheckpoint, "mixed parameter dtypes");
    Shape shape(r.u32());
    for (auto& d : shape) d = r.u64();
    const auto& [ref_name, ref] = reference.params[k];
    if (name != ref_name || shape != ref.shape)
      throw Error(ErrorCode::CorruptCheckpoint, "parameter " + name + " " + shape_string(shape) + " does not match " +
                                                    ref_name + " " + shape_string(ref.shape));
    Tensor<T> t(shape);
    for (auto& v : t.data) v = sizeof(T) == 8 ? static_cast<T>(r.f64()) : static_cast<T>(r.f32());
    m.params.emplace_back(std::move(name), std::move(t));
  }
  return m;
}

}  // namespace

template <class T>
std::vector<std::uint8_t> serialize_checkpoint(const Model<T>& m) {
  ByteWriter w;
  w.raw({kMagic, 4});
  w.u32(kVersion);
  const nlohmann::json header = {
      {"dtype", dtype_name<T>()}, {"model", to_json(m.config)}, {"metadata", to_json(m.meta)}};
  w.string32(header.dump());
  w.u32(static_cast<std::uint32_t>(m.params.size()));
  for (const auto& [name, t] : m.params) {
    w.string32(name);
    w.u8(sizeof(T) == 8 ? kF64 : kF32);
    w.u32(static_cast<std::uint32_t>(t.shape.size()));
    for (auto d : t.shape) w.u64(d);
    for (T v : t.data) {
      if constexpr (sizeof(T) == 8)
        w.f64(v);
      else
        w.f32(v);
    }
  }
  const std::uint64_t digest = digest64(w.buffer());
  w.u64(digest);
  return w.take();
}

AnyModel deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 16) throw Error(ErrorCode::CorruptCheckpoint, "checkpoint is truncated");
  ByteReader r(bytes, ErrorCode::CorruptCheckpoint);
  if (r.raw(4) != std::string_view(kMagic, 4)) throw Error(ErrorCode::CorruptCheckpoint, "bad checkpoint magic");
  if (const auto v = r.u32(); v != kVersion)
    throw Error(ErrorCode::UnsupportedVersion, "checkpoint version " + std::to_string(v));
  {
    ByteReader tail(bytes.subspan(bytes.size() - 8), ErrorCode::CorruptCheckpoint);
    if (tail.u64() != digest64(bytes.first(bytes.size() - 8)))
      throw Error(ErrorCode::CorruptCheckpoint, "checkpoint digest mismatch");
  }
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(r.string32());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::CorruptCheckpoint, std::string("checkpoint header: ") + e.what());
  }
  ModelConfig cfg;
  ModelMetadata meta;
  std::string dtype;
  try {
    cfg = model_config_from_json(header.at("model"));
    meta = metadata_from_json(header.at("metadata"));
    dtype = header.at("dtype").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::CorruptCheckpoint, std::string("checkpoint header: ") + e.what());
  }
  AnyModel out;
  if (dtype == "f64")
    out = read_params<double>(r, std::move(cfg), std::move(meta), kF64);
  else if (dtype == "f32")
    out = read_params<float>(r, std::move(cfg), std::move(meta), kF32);
  else
    throw Error(ErrorCode::CorruptCheckpoint, "unknown dtype '" + dtype + "'");
  r.u64();
  if (r.remaining() != 0) throw Error(ErrorCode::CorruptCheckpoint, "trailing bytes after checkpoint");
  return out;
}

template <class T>
void save_checkpoint(const Model<T>& m, const std::string& path) {
  write_file(path, serialize_checkpoint(m));
}

AnyModel load_checkpoint(const std::string& path) { return deserialize_checkpoint(read_file(path)); }

template std::vector<std::uint8_t> serialize_checkpoint<float>(const Model<float>&);
template std::vector<std::uint8_t> serialize_checkpoint<double>(const Model<double>&);
template void save_checkpoint<float>(const Model<float>&, const std::string&);
template void save_checkpoint<double>(const Model<double>&, const std::string&);

}  // namespace nocguard
