#include "picrnn/io/checkpoint.hpp"

#include "picrnn/io/config.hpp"
#include "picrnn/io/portable_array.hpp"

#include <stdexcept>

namespace picrnn::io {

using nlohmann::json;

namespace {

PortableArray to_array(const ad::Tensor& t) {
  PortableArray a;
  for (int d : t.shape()) a.dims.push_back(std::uint64_t(d));
  a.data.assign(t.data().begin(), t.data().end());
  return a;
}

json shape_json(const ad::Tensor& t) { return json(t.shape()); }

void load_into(ad::Tensor& t, const PortableArray& a, const std::string& name) {
  if (a.data.size() != t.size()) throw std::runtime_error("checkpoint: tensor " + name + " has the wrong size");
  std::copy(a.data.begin(), a.data.end(), t.mutable_data().begin());
}

}  // namespace

void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& ckpt) {
  namespace fs = std::filesystem;
  fs::path staging = dir;
  staging += ".tmp";
  fs::remove_all(staging);
  fs::create_directories(staging / "tensors");

  json tensors = json::array();
  for (const auto& p : ckpt.params.named()) {
    const std::string file = "tensors/" + p.name + ".parr";
    write_array(staging / file, to_array(p.tensor));
    tensors.push_back({{"name", p.name}, {"shape", shape_json(p.tensor)}, {"role", p.role}, {"file", file}});
  }
  json state = json::object();
  if (ckpt.hidden) {
    write_array(staging / "state/h.parr", to_array(ckpt.hidden->h));
    write_array(staging / "state/c.parr", to_array(ckpt.hidden->c));
    state["hidden"] = {{"h", "state/h.parr"}, {"c", "state/c.parr"}};
  }
  if (ckpt.last_state) {
    PortableArray x{{std::uint64_t(ckpt.last_state->size())},
                    std::vector<double>(ckpt.last_state->data(), ckpt.last_state->data() + ckpt.last_state->size())};
    write_array(staging / "state/x.parr", x);
    state["last_state"] = "state/x.parr";
  }

  json manifest{{"format", "picrnn-checkpoint"},
                {"version", 1},
                {"architecture", to_json(ckpt.params.arch)},
                {"normalizer",
                 {{"reference", ckpt.normalizer.reference},
                  {"scale", ckpt.normalizer.scale},
                  {"rate_scale", ckpt.normalizer.rate_scale}}},
                {"training", to_json(ckpt.train)},
                {"seed", ckpt.train.seed},
                {"trained_steps", ckpt.trained_steps},
                {"tensors", tensors},
                {"state", state},
                {"case", ckpt.case_config}};
  write_file_atomic(staging / "manifest.json", manifest.dump(2) + "\n");

  fs::remove_all(dir);
  fs::rename(staging, dir);
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  if (!std::filesystem::exists(manifest_path)) throw std::runtime_error("missing file " + manifest_path.string());
  const json manifest = json::parse(read_file(manifest_path));
  if (manifest.value("format", "") != "picrnn-checkpoint")
    throw std::runtime_error(manifest_path.string() + ": not a checkpoint manifest");

  Checkpoint ckpt;
  const Architecture arch = parse_architecture(manifest.at("architecture"), "/architecture", Architecture{});
  ckpt.params = PicrnnParams::initialize(arch, 0);
  auto named = ckpt.params.named();
  const json& tensors = manifest.at("tensors");
  if (tensors.size() != named.size()) throw std::runtime_error("checkpoint: tensor count mismatch");
  for (std::size_t i = 0; i < named.size(); ++i) {
    if (tensors[i].at("name").get<std::string>() != named[i].name)
      throw std::runtime_error("checkpoint: unexpected tensor " + tensors[i].at("name").get<std::string>());
    load_into(named[i].tensor, read_array(dir / tensors[i].at("file").get<std::string>()), named[i].name);
  }
  const json& norm = manifest.at("normalizer");
  ckpt.normalizer = {norm.at("reference").get<double>(), norm.at("scale").get<double>(),
                     norm.at("rate_scale").get<double>()};
  ckpt.train = parse_train_config(manifest.at("training"), "/training");
  ckpt.trained_steps = manifest.value("trained_steps", 0);
  ckpt.case_config = manifest.value("case", json::object());

  const json& state = manifest.value("state", json::object());
  if (state.contains("hidden")) {
    HiddenState h = HiddenState::zeros(arch);
    const auto ha = read_array(dir / state.at("hidden").at("h").get<std::string>());
    const auto ca = read_array(dir / state.at("hidden").at("c").get<std::string>());
    if (ha.data.size() != h.h.size() || ca.data.size() != h.c.size())
      throw std::runtime_error("checkpoint: hidden state has the wrong size");
    h.h = ad::Tensor::from(h.h.shape(), ha.data);
    h.c = ad::Tensor::from(h.c.shape(), ca.data);
    ckpt.hidden = h;
  }
  if (state.contains("last_state")) {
    const auto xa = read_array(dir / state.at("last_state").get<std::string>());
    ckpt.last_state = Eigen::Map<const Vector>(xa.data.data(), Index(xa.data.size()));
  }
  return ckpt;
}

}  // namespace picrnn::io
