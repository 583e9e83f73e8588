#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sifa/domain.hpp"
#include "sifa/preprocess.hpp"
#include "sifa/state.hpp"
#include "sifa/synthetic.hpp"

namespace sifa {

/// Argmax of C_1(E(slice)) for every slice along the slicing axis, resampled
/// back to the slice's original shape and restacked. The volume is expected
/// to be preprocessed the way training data was.
LabelVolume segment_volume(const SifaState& state, const Volume3D& volume, const PreprocessConfig& cfg);

/// Predicted label maps for already extracted slices (labels replaced).
std::vector<Slice2D> predict_slices(const SifaState& state, std::vector<Slice2D> slices, std::size_t chunk = 16);

/// Dice of every foreground class 1..K-1. Both sets empty gives 1, exactly
/// one empty gives 0.
std::vector<double> dice_per_class(const LabelVolume& pred, const LabelVolume& gt);

/// Average symmetric surface distance in mm for every foreground class,
/// the mean of the two directed mean nearest-surface distances. A voxel is
/// on the surface when a 6-neighbour is outside the class or outside the
/// volume. Undefined when either surface is empty.
std::vector<std::optional<double>> asd_per_class(const LabelVolume& pred, const LabelVolume& gt);

struct SubjectMetrics {
  std::string subject_id;
  std::vector<double> dice;
  std::vector<std::optional<double>> asd;
  std::vector<bool> both_empty;  // per class: absent from prediction and ground truth

  friend bool operator==(const SubjectMetrics&, const SubjectMetrics&) = default;
};

struct MetricsReport {
  std::string label;  // method / variant name used as the table row
  int num_classes = 0;
  std::vector<SubjectMetrics> subjects;
  std::vector<double> mean_dice;                    // per foreground class, over subjects
  std::vector<std::optional<double>> mean_asd;      // per foreground class, over defined entries
  double average_dice = 0.0;                        // over foreground classes
  std::optional<double> average_asd;                // over defined class means
  bool asd_has_undefined = false;                   // some subject/class ASD was N/A
  bool dice_has_both_empty = false;                 // some Dice came from the both-empty convention

  nlohmann::json to_json() const;
  static MetricsReport from_json(const nlohmann::json& j);

  /// Per-subject mean foreground Dice, in subject order.
  std::vector<double> subject_mean_dice() const;

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

/// Recomputes means and flags from `subjects`.
void finalize_report(MetricsReport& report);

/// Normalises and crops each test volume, segments it and scores it against
/// the equally cropped ground truth.
MetricsReport evaluate_dataset(const SifaState& state, const Cohort& test, const PreprocessConfig& cfg,
                               std::string label = {});

/// Aligned text table: one row per report, per-class Dice, per-class ASD,
/// then the two averages. N/A marks undefined ASD aggregates; a trailing '*'
/// marks aggregates that skipped undefined entries.
std::string format_table(const std::vector<MetricsReport>& reports);

}  // namespace sifa
