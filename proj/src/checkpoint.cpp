#include <fstream>
#include <json.hpp>
#include <sstream>

#include "vdn/array_io.hpp"
#include "vdn/error.hpp"
#include "vdn/train.hpp"

namespace vdn {
namespace {

constexpr const char* kManifest = "manifest.json";
constexpr int kCheckpointVersion = 1;

NdArray as_array(const ParamTensor& t, const FloatBuffer& values) {
  return NdArray{t.dims, {values.begin(), values.end()}};
}

void load_into(FloatBuffer& dst, const std::filesystem::path& file, const ParamTensor& t) {
  const NdArray a = load_nd_array(file);
  if (a.dims != t.dims) throw FormatError("checkpoint tensor " + t.name + " has unexpected shape");
  dst.assign(a.data.begin(), a.data.end());
}

}  // namespace

void save_checkpoint(const Model& model, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  nlohmann::ordered_json j;
  j["format"] = "vdn-checkpoint";
  j["version"] = kCheckpointVersion;
  j["config"] = nlohmann::json::parse(model.config.to_json());
  j["in_channels"] = model.in_channels();
  j["next_epoch"] = model.next_epoch;
  j["global_step"] = model.global_step;
  j["seed"] = model.config.seed;
  j["adam_steps"] = model.adam.steps();
  j["has_adam_state"] = !model.adam.slots().empty();

  auto tensors = nlohmann::ordered_json::array();
  std::size_t k = 0;
  auto write = [&](const char* net, const ParamStore& ps) {
    for (const ParamTensor& t : ps.tensors()) {
      const std::string base = std::string(net) + "." + t.name;
      save_array(as_array(t, t.value), dir / (base + ".vdna"));
      if (!model.adam.slots().empty()) {
        const auto& slot = model.adam.slots().at(k);
        save_array(as_array(t, slot.m), dir / ("adam_m." + base + ".vdna"));
        save_array(as_array(t, slot.v), dir / ("adam_v." + base + ".vdna"));
      }
      tensors.push_back({{"name", base}, {"shape", t.dims}});
      ++k;
    }
  };
  write("dnet", model.dnet.params());
  write("snet", model.snet.params());
  j["tensors"] = tensors;

  std::ofstream out(dir / kManifest, std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint manifest in " + dir.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("checkpoint manifest write failed in " + dir.string());
}

Model load_checkpoint(const std::filesystem::path& path) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::is_directory(path) ? path : path.parent_path();
  std::ifstream in(dir / kManifest);
  if (!in) throw IoError("missing checkpoint manifest: " + (dir / kManifest).string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint manifest is not valid JSON: ") + e.what());
  }
  if (j.value("format", "") != "vdn-checkpoint") throw FormatError("not a checkpoint manifest");
  if (j.value("version", 0) != kCheckpointVersion) throw FormatError("unsupported checkpoint version");

  const TrainConfig cfg = TrainConfig::from_json(j.at("config").dump());
  Model model(cfg, j.at("in_channels").get<int>());
  model.next_epoch = j.at("next_epoch").get<int>();
  model.global_step = j.at("global_step").get<std::uint64_t>();
  model.adam.set_steps(j.at("adam_steps").get<std::uint64_t>());
  const bool has_adam = j.value("has_adam_state", false);

  auto read = [&](const char* net, ParamStore& ps) {
    for (ParamTensor& t : ps.tensors()) {
      const std::string base = std::string(net) + "." + t.name;
      load_into(t.value, dir / (base + ".vdna"), t);
      if (has_adam) {
        Adam::Slot slot;
        load_into(slot.m, dir / ("adam_m." + base + ".vdna"), t);
        load_into(slot.v, dir / ("adam_v." + base + ".vdna"), t);
        model.adam.slots().push_back(std::move(slot));
      }
    }
  };
  read("dnet", model.dnet.params());
  read("snet", model.snet.params());
  return model;
}

}  // namespace vdn
