#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sifa/evaluator.hpp"
#include "sifa/networks.hpp"
#include "sifa/preprocess.hpp"
#include "sifa/synthetic.hpp"
#include "sifa/trainer.hpp"

namespace sifa {

enum class Direction { source_to_target, target_to_source };
std::string_view to_string(Direction d);
Direction direction_from_string(std::string_view s);

/// Directories of real volumes, one image + label pair per subject.
struct RealData {
  std::filesystem::path source_dir;
  std::filesystem::path target_dir;
};

struct ExperimentSpec {
  Direction direction = Direction::source_to_target;
  TrainVariant variant = TrainVariant::full_sifa;
  std::optional<SyntheticConfig> synthetic;  // exactly one of synthetic / real
  std::optional<RealData> real;
  double train_fraction = 0.8;
  PreprocessConfig preprocess;
  ArchConfig arch;
  TrainConfig train;
  std::filesystem::path output_dir;

  void validate() const;

  /// Reference desk configuration: 64x64 synthetic slices, 8 subjects per
  /// domain, 2 organs, the reference shift, 2000 iterations of batch 4.
  static ExperimentSpec reference(std::uint64_t seed);
};

nlohmann::json to_json(const ExperimentSpec& s);
/// Missing fields keep the values of `base`.
ExperimentSpec experiment_from_json(const nlohmann::json& j, ExperimentSpec base = {});
ExperimentSpec load_experiment_spec(const std::filesystem::path& path);

/// Train/test cohorts of both roles after applying the direction.
struct ExperimentData {
  Cohort source_train, source_test, target_train, target_test;
};
ExperimentData load_experiment_data(const ExperimentSpec& spec);

/// Normalise, crop and slice every subject. Labels are kept only with
/// `with_labels`.
std::vector<Slice2D> prepare_slices(const Cohort& cohort, const PreprocessConfig& cfg, bool with_labels);

struct ExperimentResult {
  MetricsReport report;
  std::vector<LossRecord> records;
  std::vector<std::filesystem::path> checkpoints;
  std::filesystem::path loss_log;  // empty when output_dir is empty
};

/// Trains the spec's variant, evaluates on the target test subjects and,
/// when output_dir is set, writes spec.json, report.json, report.txt, the
/// loss log and checkpoints there. `resume` continues from a checkpoint
/// directory up to train.iterations in total.
ExperimentResult run_experiment(const ExperimentSpec& spec,
                                const std::optional<std::filesystem::path>& resume = std::nullopt);

/// The five ladder variants with shared data and seeds, each in
/// `<output_dir>/<variant>`. Writes ladder.json (reports including
/// per-subject Dice), ladder.txt and the plots.
std::vector<MetricsReport> run_ablation_ladder(const ExperimentSpec& base);

/// Writes, for every slice of every volume, the normalised original and
/// G_t of it as 8-bit PGM images; returns the translated images' paths.
std::vector<std::filesystem::path> export_transformed(const SifaState& state, const std::vector<Volume3D>& volumes,
                                                      const PreprocessConfig& cfg,
                                                      const std::filesystem::path& out_dir);

/// G_t applied to already extracted slices (labels dropped).
std::vector<Slice2D> translate_slices(const SifaState& state, const std::vector<Slice2D>& slices);

void write_pgm(const std::filesystem::path& path, const Slice2D& slice);

}  // namespace sifa
