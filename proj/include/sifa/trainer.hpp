#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string_view>
#include <vector>

#include "sifa/batching.hpp"
#include "sifa/domain.hpp"
#include "sifa/losses.hpp"
#include "sifa/state.hpp"

namespace sifa {

enum class TrainVariant {
  no_adaptation_lower_bound,
  supervised_upper_bound,
  image_alignment_only,
  image_plus_fap,
  full_sifa,
};

std::string_view to_string(TrainVariant v);
TrainVariant train_variant_from_string(std::string_view s);

/// Ladder order used by ablation runs.
inline constexpr std::array<TrainVariant, 5> kAblationLadder = {
    TrainVariant::no_adaptation_lower_bound, TrainVariant::image_alignment_only, TrainVariant::image_plus_fap,
    TrainVariant::full_sifa, TrainVariant::supervised_upper_bound};

bool is_bound_variant(TrainVariant v);

struct TrainConfig {
  std::int64_t iterations = 20000;
  std::int64_t batch_size = 8;
  double learning_rate = 2e-4;
  LossWeights loss_weights;
  GanLossForm gan_loss_form = GanLossForm::log_loss;
  std::int64_t checkpoint_every = 0;  // 0 disables periodic checkpoints
  std::uint64_t seed = 0;
  int image_pool_size = 50;
  std::optional<AugmentConfig> augmentation;
  std::filesystem::path output_dir;  // checkpoints and loss log; empty keeps everything in memory

  void validate() const;
};

/// Loss weights with the terms a variant switches off set to zero.
LossWeights effective_weights(TrainVariant v, const LossWeights& w);

/// The seven update stages, in execution order.
enum class Stage { G_t, D_t, E, C, U, D_s, D_p };
inline constexpr std::array<Stage, 7> kStageOrder = {Stage::G_t, Stage::D_t, Stage::E,  Stage::C,
                                                     Stage::U,   Stage::D_s, Stage::D_p};
std::string_view to_string(Stage s);

/// Networks whose parameters a stage is allowed to change.
std::vector<NetId> stage_networks(Stage s);

/// Called before a stage's forward passes (after == false) and after its
/// optimizer step, for every stage that runs.
using StageObserver = std::function<void(Stage, bool after)>;

/// One SIFA iteration over the seven stages. `source` must be labeled and
/// `target` unlabeled, with equal batch sizes. Stages whose every term has
/// zero weight are skipped. Increments state.iteration.
LossRecord train_step(SifaState& state, const SliceBatch& source, const SliceBatch& target, const TrainConfig& cfg,
                      const StageObserver& observer = {});

/// One supervised E -> C_1 update on a labeled batch (the bound variants).
LossRecord supervised_step(SifaState& state, const SliceBatch& labeled, const TrainConfig& cfg);

struct TrainingData {
  std::vector<Slice2D> source;  // labeled
  std::vector<Slice2D> target;  // labels only used by supervised_upper_bound
};

struct TrainResult {
  SifaState state;
  std::vector<LossRecord> records;
  std::vector<std::filesystem::path> checkpoints;
};

/// Runs cfg.iterations steps of `variant`. With `resume`, training continues
/// from that state's iteration counter up to cfg.iterations in total.
TrainResult train(TrainVariant variant, const TrainingData& data, const ArchConfig& arch, const TrainConfig& cfg,
                  std::optional<SifaState> resume = std::nullopt);

/// Line-delimited JSON loss log: one object per iteration with the
/// iteration index, wall-clock seconds and every computed term.
void append_loss_log(const std::filesystem::path& path, const LossRecord& record);
std::vector<LossRecord> read_loss_log(const std::filesystem::path& path);

}  // namespace sifa
