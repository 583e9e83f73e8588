#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "sifa/batching.hpp"
#include "sifa/domain.hpp"
#include "sifa/state.hpp"
#include "sifa/trainer.hpp"

namespace sifa::testing {

/// Fresh empty directory under the system temp dir.
std::filesystem::path scratch_dir(const std::string& name);

/// Smallest architecture the PatchGAN geometry admits (32x32 inputs).
ArchConfig toy_arch(int num_classes = 3);

/// Seeded random image/label batches for the toy architecture.
SliceBatch random_batch(std::int64_t b, std::int64_t res, int num_classes, bool labels, std::uint64_t seed);

/// Labeled source and unlabeled target slices with a blob per class.
TrainingData toy_training_data(std::int64_t res, int num_classes, int n_slices, std::uint64_t seed);

/// Deep copies of every parameter and buffer, keyed by network.
struct Snapshot {
  std::vector<std::vector<torch::Tensor>> params;  // indexed by NetId
  std::vector<std::vector<torch::Tensor>> buffers;
};
Snapshot snapshot(const SifaState& s);
bool net_changed(const Snapshot& a, const Snapshot& b, NetId id);
bool net_buffers_changed(const Snapshot& a, const Snapshot& b, NetId id);
double param_diff_norm(const std::vector<torch::Tensor>& a, const std::vector<torch::Tensor>& b);

/// Random label volume with up to `k` classes, blobby so surfaces are
/// nontrivial; dims each in [1, max_dim].
LabelVolume random_label_volume(std::mt19937_64& rng, int k, int max_dim, const Spacing3& spacing,
                                const Dims3* dims = nullptr);

/// Set-counting Dice oracle for foreground classes.
std::vector<double> dice_oracle(const LabelVolume& p, const LabelVolume& g);
/// All-pairs brute-force ASD oracle, written independently of the library:
/// surface test via explicit neighbour offsets, distances in long double.
std::vector<std::optional<double>> asd_oracle(const LabelVolume& p, const LabelVolume& g);

}  // namespace sifa::testing

#define EXPECT_SIFA_ERROR(stmt, expected_kind)                                             \
  do {                                                                                     \
    try {                                                                                  \
      stmt;                                                                                \
      ADD_FAILURE() << "expected " << ::sifa::to_string(expected_kind) << ", nothing thrown"; \
    } catch (const ::sifa::Error& e) {                                                     \
      EXPECT_EQ(e.kind(), expected_kind) << e.what();                                      \
    }                                                                                      \
  } while (0)
