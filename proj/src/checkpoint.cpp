#include "meshmamba/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "meshmamba/error.hpp"

namespace meshmamba {

namespace {

constexpr char kMagic[4] = {'M', 'M', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in, const std::filesystem::path& path) {
  T v;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    throw Error(ErrorKind::Format, path.string() + ": truncated checkpoint");
  }
  return v;
}

}  // namespace

void save_checkpoint(const MeshMambaModel& model, const CheckpointState& state, const std::filesystem::path& path) {
  nlohmann::ordered_json manifest;
  manifest["format"] = "meshmamba-checkpoint";
  manifest["version"] = kVersion;
  manifest["model"] = nlohmann::ordered_json::parse(model.config().to_json());
  manifest["epoch"] = state.epoch;
  manifest["rng_state"] = state.rng_state;
  if (!state.train_json.empty()) manifest["train"] = nlohmann::ordered_json::parse(state.train_json);
  auto& tensors = manifest["tensors"] = nlohmann::ordered_json::array();
  for (const nn::Parameter& p : model.parameters().all()) {
    tensors.push_back({{"name", p.name}, {"rows", p.var.rows()}, {"cols", p.var.cols()}});
  }
  const std::string text = manifest.dump();

  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + tmp.string());
    out.write(kMagic, 4);
    put<std::uint32_t>(out, kVersion);
    put<std::uint64_t>(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const nn::Parameter& p : model.parameters().all()) {
      const auto& d = p.var.value().data;
      out.write(reinterpret_cast<const char*>(d.data()), static_cast<std::streamsize>(d.size() * sizeof(double)));
    }
    if (!out) throw Error(ErrorKind::Io, "failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw Error(ErrorKind::Format, path.string() + ": not a checkpoint");
  }
  const auto version = get<std::uint32_t>(in, path);
  if (version != kVersion) {
    throw Error(ErrorKind::Format, path.string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  const auto length = get<std::uint64_t>(in, path);
  if (length > (1ULL << 30)) throw Error(ErrorKind::Format, path.string() + ": manifest too large");
  std::string text(length, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(length))) {
    throw Error(ErrorKind::Format, path.string() + ": truncated manifest");
  }
  nlohmann::ordered_json manifest;
  try {
    manifest = nlohmann::ordered_json::parse(text);
  } catch (const std::exception& e) {
    throw Error(ErrorKind::Format, path.string() + ": bad manifest: " + e.what());
  }

  LoadedCheckpoint loaded;
  try {
    loaded.model = std::make_unique<MeshMambaModel>(ModelConfig::from_json(manifest.at("model").dump()));
    loaded.state.epoch = manifest.at("epoch").get<int>();
    loaded.state.rng_state = manifest.at("rng_state").get<std::string>();
    if (manifest.contains("train")) loaded.state.train_json = manifest.at("train").dump();
    auto& params = loaded.model->parameters().all();
    const auto& tensors = manifest.at("tensors");
    if (tensors.size() != params.size()) {
      throw Error(ErrorKind::Format, path.string() + ": tensor count does not match the model");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto& t = tensors[i];
      nn::Matrix& value = params[i].var.mutable_value();
      if (t.at("name").get<std::string>() != params[i].name || t.at("rows").get<int>() != value.rows ||
          t.at("cols").get<int>() != value.cols) {
        throw Error(ErrorKind::Format, path.string() + ": tensor '" + t.at("name").get<std::string>() +
                                           "' does not match the model");
      }
      if (!in.read(reinterpret_cast<char*>(value.data.data()),
                   static_cast<std::streamsize>(value.data.size() * sizeof(double)))) {
        throw Error(ErrorKind::Format, path.string() + ": truncated tensor data");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, path.string() + ": bad manifest: " + e.what());
  }
  return loaded;
}

}  // namespace meshmamba
