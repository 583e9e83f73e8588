#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sifa/domain.hpp"

namespace sifa {

enum class ShiftKind { intensity_inversion, gamma, additive_gaussian_noise, smooth_bias_field };

std::string_view to_string(ShiftKind k);
ShiftKind shift_kind_from_string(std::string_view s);

/// One appearance-shift step applied to target-cohort intensities.
/// `param` is gamma, noise sigma or bias amplitude; unused for inversion.
struct ShiftStep {
  ShiftKind kind = ShiftKind::intensity_inversion;
  double param = 0.0;

  friend bool operator==(const ShiftStep&, const ShiftStep&) = default;
};

struct SyntheticConfig {
  int image_size = 64;
  int num_slices = 12;
  int num_subjects_per_domain = 8;
  int num_shapes = 2;
  double texture_noise = 0.03;
  Spacing3 spacing{1.0, 1.0, 1.0};
  std::vector<ShiftStep> target_transform;
  std::uint64_t seed = 0;

  void validate() const;

  /// 64x64x12, 8 subjects per domain, 2 organs; inversion, gamma 1.5,
  /// noise 0.1, bias field 0.3.
  static SyntheticConfig reference(std::uint64_t seed);
};

/// Volumes with their ground truth, aligned by index.
struct Cohort {
  std::vector<Volume3D> volumes;
  std::vector<LabelVolume> labels;

  std::size_t size() const { return volumes.size(); }
  bool empty() const { return volumes.empty(); }
  void push_back(Volume3D v, LabelVolume l);
};

struct SyntheticDomains {
  Cohort source;
  Cohort target;
};

/// Two unpaired cohorts of ellipsoid "organs". Shapes of every subject are
/// drawn independently; only the target cohort passes through the shift.
SyntheticDomains make_synthetic_domains(const SyntheticConfig& cfg);

/// Base intensity of a class before any shift (class 0 is background).
double class_base_intensity(int cls, int num_shapes);

/// Deterministic subject-level split: the first round(fraction * n) subjects
/// train, the rest test. Subject ids are disjoint across the two halves.
std::pair<Cohort, Cohort> split_by_subject(const Cohort& cohort, double train_fraction = 0.8);

/// One directory per domain (`source/`, `target/`), one `.svol` image + label
/// pair per subject.
void write_synthetic_dataset(const std::filesystem::path& root, const SyntheticDomains& data);

/// Loads every image and its sibling label found directly in `dir`, ordered
/// by filename. Images without a label file are rejected.
Cohort load_cohort(const std::filesystem::path& dir, Domain domain);

}  // namespace sifa
