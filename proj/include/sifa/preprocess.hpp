#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "sifa/domain.hpp"

namespace sifa {

enum class SlicingAxis { sagittal = 0, coronal = 1, axial = 2 };

std::string_view to_string(SlicingAxis a);
SlicingAxis slicing_axis_from_string(std::string_view s);

struct FixedBox {
  std::array<std::int64_t, 3> center{0, 0, 0};
  std::array<std::int64_t, 3> size{0, 0, 0};
};

enum class RoiKind { none, fixed_box, label_bounding_slices };

struct PreprocessConfig {
  RoiKind roi = RoiKind::none;
  FixedBox box;
  int target_resolution = 256;
  SlicingAxis slicing_axis = SlicingAxis::coronal;

  void validate() const;
};

struct AugmentConfig {
  double rotation_range_deg = 10.0;
  double scale_min = 0.9;
  double scale_max = 1.1;
  double shear_range = 0.1;
  bool enabled = true;

  void validate() const;
};

/// Zero-mean, unit-variance rescaling using population statistics over all
/// voxels of the volume. Throws DegenerateVolume for constant input.
Volume3D normalize(const Volume3D& volume);

std::pair<Volume3D, std::optional<LabelVolume>> crop_to_roi(const Volume3D& volume,
                                                           const std::optional<LabelVolume>& labels,
                                                           const PreprocessConfig& cfg);

/// In-plane shape (rows, cols) of a slice taken along `axis`. Rows follow the
/// higher-index remaining axis, columns the lower one.
std::pair<std::int64_t, std::int64_t> slice_shape(const Dims3& dims, SlicingAxis axis);
std::int64_t slice_count(const Dims3& dims, SlicingAxis axis);

/// Maps (slice index, row, col) to the flat voxel index.
std::int64_t voxel_index(const Dims3& dims, SlicingAxis axis, std::int64_t slice, std::int64_t row,
                         std::int64_t col);

template <typename T>
std::vector<T> take_plane(std::span<const T> data, const Dims3& dims, SlicingAxis axis, std::int64_t slice) {
  const auto [rows, cols] = slice_shape(dims, axis);
  std::vector<T> out(static_cast<std::size_t>(rows * cols));
  for (std::int64_t r = 0; r < rows; ++r) {
    for (std::int64_t c = 0; c < cols; ++c) {
      out[static_cast<std::size_t>(r * cols + c)] = data[static_cast<std::size_t>(voxel_index(dims, axis, slice, r, c))];
    }
  }
  return out;
}

/// Half-pixel-centre bilinear resize with edge clamping.
std::vector<float> resize_bilinear(std::span<const float> src, std::int64_t rows, std::int64_t cols,
                                   std::int64_t out_rows, std::int64_t out_cols);
/// Nearest-neighbour resize; output values are always a subset of the input's.
std::vector<std::int32_t> resize_nearest(std::span<const std::int32_t> src, std::int64_t rows, std::int64_t cols,
                                         std::int64_t out_rows, std::int64_t out_cols);

/// One resampled slice per index along the slicing axis, in order.
std::vector<Slice2D> extract_slices(const Volume3D& volume, const std::optional<LabelVolume>& labels,
                                    const PreprocessConfig& cfg);

/// Inverse of extract_slices for label maps: each slice label is resampled
/// (nearest) back to its original in-plane shape and placed at its index.
LabelVolume restack_labels(const std::vector<Slice2D>& slices, const Dims3& dims, const Spacing3& spacing,
                           SlicingAxis axis, int num_classes);

struct AffineParams {
  double angle_rad = 0.0;
  double scale = 1.0;
  double shear = 0.0;

  bool is_identity() const { return angle_rad == 0.0 && scale == 1.0 && shear == 0.0; }
};

AffineParams sample_affine(const AugmentConfig& cfg, std::uint64_t seed);

/// Applies the transform about the slice centre. Positive angles rotate
/// counter-clockwise as displayed (row 0 at the top). Image samples are
/// bilinear, labels nearest; out-of-range coordinates reflect at the border.
Slice2D apply_affine(const Slice2D& slice, const AffineParams& params);

Slice2D augment(const Slice2D& slice, const AugmentConfig& cfg, std::uint64_t seed);

}  // namespace sifa
