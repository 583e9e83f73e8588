#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sifa/error.hpp"

namespace sifa {

enum class Domain { source, target };

std::string_view to_string(Domain d);
Domain domain_from_string(std::string_view s);

using Dims3 = std::array<std::int64_t, 3>;
using Spacing3 = std::array<double, 3>;

/// Voxel storage is x-fastest: index = x + nx * (y + ny * z).
inline std::int64_t voxel_count(const Dims3& d) { return d[0] * d[1] * d[2]; }

/// A 3D scalar image. Dimensions and spacing are checked on construction;
/// finiteness is a separate query because raw scans may legitimately carry
/// NaN before preprocessing.
class Volume3D {
 public:
  Volume3D() = default;
  Volume3D(Dims3 dims, Spacing3 spacing, std::vector<float> voxels, Domain modality = Domain::source,
           std::string subject_id = {});

  const Dims3& dims() const noexcept { return dims_; }
  const Spacing3& spacing() const noexcept { return spacing_; }
  Domain modality() const noexcept { return modality_; }
  const std::string& subject_id() const noexcept { return subject_id_; }
  std::span<const float> voxels() const noexcept { return voxels_; }
  std::span<float> voxels() noexcept { return voxels_; }
  std::int64_t size() const noexcept { return static_cast<std::int64_t>(voxels_.size()); }

  float at(std::int64_t x, std::int64_t y, std::int64_t z) const {
    return voxels_[static_cast<std::size_t>(x + dims_[0] * (y + dims_[1] * z))];
  }
  float& at(std::int64_t x, std::int64_t y, std::int64_t z) {
    return voxels_[static_cast<std::size_t>(x + dims_[0] * (y + dims_[1] * z))];
  }

  bool all_finite() const noexcept;

  void set_modality(Domain d) noexcept { modality_ = d; }
  void set_subject_id(std::string id) { subject_id_ = std::move(id); }

  friend bool operator==(const Volume3D&, const Volume3D&) = default;

 private:
  Dims3 dims_{0, 0, 0};
  Spacing3 spacing_{1.0, 1.0, 1.0};
  std::vector<float> voxels_;
  Domain modality_ = Domain::source;
  std::string subject_id_;
};

/// Integer class map; class 0 is background.
class LabelVolume {
 public:
  LabelVolume() = default;
  LabelVolume(Dims3 dims, Spacing3 spacing, std::vector<std::int32_t> labels, int num_classes);

  const Dims3& dims() const noexcept { return dims_; }
  const Spacing3& spacing() const noexcept { return spacing_; }
  int num_classes() const noexcept { return num_classes_; }
  std::span<const std::int32_t> labels() const noexcept { return labels_; }
  std::int64_t size() const noexcept { return static_cast<std::int64_t>(labels_.size()); }

  std::int32_t at(std::int64_t x, std::int64_t y, std::int64_t z) const {
    return labels_[static_cast<std::size_t>(x + dims_[0] * (y + dims_[1] * z))];
  }

  friend bool operator==(const LabelVolume&, const LabelVolume&) = default;

 private:
  Dims3 dims_{0, 0, 0};
  Spacing3 spacing_{1.0, 1.0, 1.0};
  std::vector<std::int32_t> labels_;
  int num_classes_ = 2;
};

/// Throws ShapeMismatch, SpacingMismatch, LabelOutOfRange or NonFiniteData.
void validate_pair(const Volume3D& volume, const LabelVolume& labels);

/// One single-channel training sample. Rows and cols are equal once the
/// slice has been resampled to the training resolution; the original
/// in-plane shape is kept so predictions can be restacked.
struct Slice2D {
  std::int64_t rows = 0;
  std::int64_t cols = 0;
  std::vector<float> pixels;
  std::optional<std::vector<std::int32_t>> label;
  Domain domain = Domain::source;

  std::string subject_id;
  std::int64_t slice_index = 0;
  std::int64_t original_rows = 0;
  std::int64_t original_cols = 0;

  Slice2D() = default;
  Slice2D(std::int64_t rows, std::int64_t cols, std::vector<float> pixels,
          std::optional<std::vector<std::int32_t>> label, Domain domain);

  friend bool operator==(const Slice2D&, const Slice2D&) = default;
};

/// Trade-off coefficients of the overall objective. `adv_t` is the
/// coefficient of the image-space target adversarial term, fixed at 1 in the
/// published setting; a zero weight switches its term off entirely.
struct LossWeights {
  double adv_t = 1.0;
  double adv_s = 0.1;
  double cyc = 10.0;
  double seg_1 = 1.0;
  double seg_2 = 0.1;
  double adv_p1 = 0.1;
  double adv_p2 = 0.01;
  double adv_s_tilde = 0.1;

  void validate() const;
  friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

enum class LossTerm : int {
  adv_t,
  adv_s,
  cyc,
  seg_1,
  seg_2,
  adv_p1,
  adv_p2,
  adv_s_tilde,
  disc_t,
  disc_s,
  disc_s_aux,
  disc_p1,
  disc_p2,
};

inline constexpr int kNumLossTerms = 13;

std::string_view to_string(LossTerm t);
std::optional<LossTerm> loss_term_from_string(std::string_view s);

/// Per-iteration loss values. A term that the running variant does not
/// compute stays empty, which is distinct from a computed zero.
struct LossRecord {
  std::int64_t iteration = 0;
  double wall_clock_s = 0.0;
  std::array<std::optional<double>, kNumLossTerms> values{};

  std::optional<double>& operator[](LossTerm t) { return values[static_cast<int>(t)]; }
  const std::optional<double>& operator[](LossTerm t) const { return values[static_cast<int>(t)]; }

  bool has(LossTerm t) const { return (*this)[t].has_value(); }
  void set(LossTerm t, double v);
};

}  // namespace sifa
