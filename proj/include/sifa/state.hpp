#pragma once

#include <array>
#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <vector>

#include <torch/torch.h>

#include "sifa/domain.hpp"
#include "sifa/networks.hpp"

namespace sifa {

/// History buffer of generated images shown to a discriminator. Once full,
/// each incoming image is, with probability 1/2, swapped for a random stored
/// one. Capacity 0 passes images straight through.
class ImagePool {
 public:
  explicit ImagePool(int capacity = 50) : capacity_(capacity) {}

  torch::Tensor query(const torch::Tensor& images, std::mt19937_64& rng);

  int capacity() const { return capacity_; }
  const std::vector<torch::Tensor>& images() const { return images_; }
  void restore(std::vector<torch::Tensor> images) { images_ = std::move(images); }

 private:
  int capacity_;
  std::vector<torch::Tensor> images_;
};

/// Everything needed to continue training bit-exactly: parameters and
/// buffers of the nine networks, one Adam state per network, the iteration
/// counter, the trainer RNG and both image pools.
class SifaState {
 public:
  SifaState(const ArchConfig& arch, std::uint64_t seed, double learning_rate = 2e-4, int image_pool_size = 50,
            LossWeights weights = {});

  SifaState(SifaState&&) noexcept = default;
  SifaState& operator=(SifaState&&) noexcept = default;
  SifaState(const SifaState&) = delete;
  SifaState& operator=(const SifaState&) = delete;

  const ArchConfig& arch() const { return arch_; }
  Networks& nets() { return nets_; }
  const Networks& nets() const { return nets_; }
  torch::optim::Adam& optimizer(NetId id) { return *optimizers_[static_cast<std::size_t>(id)]; }
  const torch::optim::Adam& optimizer(NetId id) const { return *optimizers_[static_cast<std::size_t>(id)]; }

  /// The target-to-source generator, always reading E and U in place.
  TargetToSource target_to_source() const { return {nets_.E, nets_.U}; }

  std::int64_t iteration = 0;
  std::uint64_t seed = 0;
  double learning_rate = 2e-4;
  LossWeights weights;
  std::mt19937_64 rng;
  ImagePool pool_t;  // fakes for D_t
  ImagePool pool_s;  // fakes for D_s

  /// Deep copy through an in-memory archive.
  SifaState clone() const;

 private:
  ArchConfig arch_;
  Networks nets_;
  std::array<std::unique_ptr<torch::optim::Adam>, kNumNets> optimizers_;
};

/// Writes `<dir>/manifest.json` plus one parameter blob and one optimizer
/// blob per network and a blob holding both image pools.
void save_checkpoint(const SifaState& state, const std::filesystem::path& dir);

/// Throws ArchMismatch when `expected` is given and differs from the stored
/// architecture, CorruptCheckpoint for missing or unreadable pieces.
SifaState load_checkpoint(const std::filesystem::path& dir, const std::optional<ArchConfig>& expected = std::nullopt);

/// True when every parameter and buffer of both states is bit-identical.
bool same_parameters(const SifaState& a, const SifaState& b);

}  // namespace sifa
