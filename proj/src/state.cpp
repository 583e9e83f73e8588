#include "sifa/state.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "sifa/config_io.hpp"

namespace sifa {

namespace fs = std::filesystem;
using json = nlohmann::json;

torch::Tensor ImagePool::query(const torch::Tensor& images, std::mt19937_64& rng) {
  auto batch = images.detach();
  if (capacity_ <= 0) return batch;
  std::vector<torch::Tensor> out;
  out.reserve(static_cast<std::size_t>(batch.size(0)));
  for (int64_t i = 0; i < batch.size(0); ++i) {
    auto img = batch[i].clone();
    if (static_cast<int>(images_.size()) < capacity_) {
      images_.push_back(img);
      out.push_back(img);
      continue;
    }
    if (std::uniform_real_distribution<double>(0.0, 1.0)(rng) > 0.5) {
      const auto k = std::uniform_int_distribution<std::size_t>(0, images_.size() - 1)(rng);
      out.push_back(images_[k]);
      images_[k] = img;
    } else {
      out.push_back(img);
    }
  }
  return torch::stack(out);
}

SifaState::SifaState(const ArchConfig& arch, std::uint64_t seed_, double lr, int image_pool_size, LossWeights w)
    : seed(seed_),
      learning_rate(lr),
      weights(w),
      rng(seed_ ^ 0x5DEECE66DULL),
      pool_t(image_pool_size),
      pool_s(image_pool_size),
      arch_(arch),
      nets_(build_networks(arch, seed_)) {
  require(lr > 0, ErrorKind::InvalidArgument, "learning rate must be > 0");
  for (auto id : kAllNets) {
    optimizers_[static_cast<std::size_t>(id)] = std::make_unique<torch::optim::Adam>(
        nets_.parameters(id), torch::optim::AdamOptions(lr).betas({0.5, 0.999}));
  }
}

namespace {

std::string module_bytes(const torch::nn::Module& m) {
  torch::serialize::OutputArchive ar;
  m.save(ar);
  std::ostringstream os;
  ar.save_to(os);
  return os.str();
}

void module_from_bytes(torch::nn::Module& m, const std::string& bytes) {
  torch::serialize::InputArchive ar;
  std::istringstream is(bytes);
  ar.load_from(is);
  m.load(ar);
}

std::string optimizer_bytes(const torch::optim::Optimizer& o) {
  torch::serialize::OutputArchive ar;
  o.save(ar);
  std::ostringstream os;
  ar.save_to(os);
  return os.str();
}

void optimizer_from_bytes(torch::optim::Optimizer& o, const std::string& bytes) {
  torch::serialize::InputArchive ar;
  std::istringstream is(bytes);
  ar.load_from(is);
  o.load(ar);
}

std::string rng_string(const std::mt19937_64& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) fail(ErrorKind::CorruptCheckpoint, "missing checkpoint file " + p.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write " + p.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::string pool_bytes(const SifaState& s) {
  torch::serialize::OutputArchive ar;
  auto put = [&ar](const std::string& key, const ImagePool& pool) {
    const auto& imgs = pool.images();
    ar.write(key + "_count", torch::tensor(static_cast<int64_t>(imgs.size())));
    for (std::size_t i = 0; i < imgs.size(); ++i) ar.write(key + "_" + std::to_string(i), imgs[i]);
  };
  put("pool_t", s.pool_t);
  put("pool_s", s.pool_s);
  std::ostringstream os;
  ar.save_to(os);
  return os.str();
}

void pools_from_bytes(SifaState& s, const std::string& bytes) {
  torch::serialize::InputArchive ar;
  std::istringstream is(bytes);
  ar.load_from(is);
  auto get = [&ar](const std::string& key, ImagePool& pool) {
    torch::Tensor count;
    ar.read(key + "_count", count);
    std::vector<torch::Tensor> imgs;
    for (int64_t i = 0; i < count.item<int64_t>(); ++i) {
      torch::Tensor t;
      ar.read(key + "_" + std::to_string(i), t);
      imgs.push_back(t);
    }
    pool.restore(std::move(imgs));
  };
  get("pool_t", s.pool_t);
  get("pool_s", s.pool_s);
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << v;
  return os.str();
}

}  // namespace

SifaState SifaState::clone() const {
  SifaState copy(arch_, seed, learning_rate, pool_t.capacity(), weights);
  copy.iteration = iteration;
  copy.rng = rng;
  for (auto id : kAllNets) {
    module_from_bytes(*copy.nets_.module(id), module_bytes(*nets_.module(id)));
    optimizer_from_bytes(copy.optimizer(id), optimizer_bytes(optimizer(id)));
  }
  for (auto id : kAllNets) copy.nets_.module(id)->train(nets_.module(id)->is_training());
  copy.pool_t.restore([this] {
    std::vector<torch::Tensor> v;
    for (const auto& t : pool_t.images()) v.push_back(t.clone());
    return v;
  }());
  copy.pool_s.restore([this] {
    std::vector<torch::Tensor> v;
    for (const auto& t : pool_s.images()) v.push_back(t.clone());
    return v;
  }());
  return copy;
}

void save_checkpoint(const SifaState& state, const fs::path& dir) {
  fs::create_directories(dir);
  json manifest;
  manifest["format"] = "sifa-checkpoint";
  manifest["version"] = 1;
  manifest["iteration"] = state.iteration;
  manifest["seed"] = state.seed;
  manifest["learning_rate"] = state.learning_rate;
  manifest["image_pool_size"] = state.pool_t.capacity();
  manifest["arch"] = to_json(state.arch());
  manifest["arch_hash"] = hex64(state.arch().hash());
  manifest["loss_weights"] = to_json(state.weights);
  manifest["rng_state"] = rng_string(state.rng);
  json files = json::object();
  for (auto id : kAllNets) {
    const std::string name(to_string(id));
    write_file(dir / (name + ".pt"), module_bytes(*state.nets().module(id)));
    write_file(dir / (name + ".adam.pt"), optimizer_bytes(state.optimizer(id)));
    files[name] = {{"parameters", name + ".pt"}, {"optimizer", name + ".adam.pt"}};
  }
  write_file(dir / "pools.pt", pool_bytes(state));
  files["pools"] = "pools.pt";
  manifest["files"] = files;
  std::ofstream(dir / "manifest.json") << manifest.dump(2) << '\n';
}

SifaState load_checkpoint(const fs::path& dir, const std::optional<ArchConfig>& expected) {
  json manifest;
  try {
    manifest = json::parse(read_file(dir / "manifest.json"));
  } catch (const json::exception& e) {
    fail(ErrorKind::CorruptCheckpoint, std::string("unreadable manifest: ") + e.what());
  }
  try {
    if (manifest.at("format") != "sifa-checkpoint") fail(ErrorKind::CorruptCheckpoint, "not a checkpoint manifest");
    const auto arch = arch_from_json(manifest.at("arch"));
    if (hex64(arch.hash()) != manifest.at("arch_hash").get<std::string>()) {
      fail(ErrorKind::CorruptCheckpoint, "architecture hash does not match the stored architecture");
    }
    if (expected && expected->hash() != arch.hash()) {
      fail(ErrorKind::ArchMismatch, "checkpoint architecture {" + arch.canonical() + "} differs from {" +
                                        expected->canonical() + "}");
    }
    SifaState state(arch, manifest.at("seed").get<std::uint64_t>(), manifest.at("learning_rate").get<double>(),
                    manifest.at("image_pool_size").get<int>(), loss_weights_from_json(manifest.at("loss_weights")));
    state.iteration = manifest.at("iteration").get<std::int64_t>();
    std::istringstream(manifest.at("rng_state").get<std::string>()) >> state.rng;
    for (auto id : kAllNets) {
      const std::string name(to_string(id));
      module_from_bytes(*state.nets().module(id), read_file(dir / (name + ".pt")));
      optimizer_from_bytes(state.optimizer(id), read_file(dir / (name + ".adam.pt")));
    }
    pools_from_bytes(state, read_file(dir / "pools.pt"));
    return state;
  } catch (const json::exception& e) {
    fail(ErrorKind::CorruptCheckpoint, std::string("malformed manifest: ") + e.what());
  } catch (const c10::Error& e) {
    fail(ErrorKind::CorruptCheckpoint, std::string("unreadable parameter blob: ") + e.what_without_backtrace());
  }
}

bool same_parameters(const SifaState& a, const SifaState& b) {
  if (!(a.arch() == b.arch())) return false;
  for (auto id : kAllNets) {
    const auto pa = a.nets().module(id)->named_parameters();
    const auto pb = b.nets().module(id)->named_parameters();
    if (pa.size() != pb.size()) return false;
    for (const auto& item : pa) {
      const auto* other = pb.find(item.key());
      if (other == nullptr || !torch::equal(item.value(), *other)) return false;
    }
    const auto ba = a.nets().module(id)->named_buffers();
    const auto bb = b.nets().module(id)->named_buffers();
    for (const auto& item : ba) {
      const auto* other = bb.find(item.key());
      if (other == nullptr || !torch::equal(item.value(), *other)) return false;
    }
  }
  return true;
}

}  // namespace sifa
