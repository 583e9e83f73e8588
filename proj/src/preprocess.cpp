#include "sifa/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace sifa {

std::string_view to_string(SlicingAxis a) {
  switch (a) {
    case SlicingAxis::sagittal: return "sagittal";
    case SlicingAxis::coronal: return "coronal";
    case SlicingAxis::axial: return "axial";
  }
  return "axial";
}

SlicingAxis slicing_axis_from_string(std::string_view s) {
  if (s == "sagittal") return SlicingAxis::sagittal;
  if (s == "coronal") return SlicingAxis::coronal;
  if (s == "axial") return SlicingAxis::axial;
  fail(ErrorKind::InvalidArgument, "unknown slicing axis '" + std::string(s) + "'");
}

void PreprocessConfig::validate() const {
  require(target_resolution >= 8 && target_resolution % 2 == 0, ErrorKind::InvalidArgument,
          "target_resolution must be even and >= 8");
}

void AugmentConfig::validate() const {
  require(rotation_range_deg >= 0 && shear_range >= 0, ErrorKind::InvalidArgument,
          "augmentation ranges must be nonnegative");
  require(scale_min > 0 && scale_min <= 1.0 && scale_max >= 1.0, ErrorKind::InvalidArgument,
          "scale range must contain 1.0");
}

Volume3D normalize(const Volume3D& volume) {
  const auto vox = volume.voxels();
  require(vox.size() >= 2, ErrorKind::DegenerateVolume, "need at least two voxels to normalize");
  require(volume.all_finite(), ErrorKind::NonFiniteData, "cannot normalize a volume with NaN/Inf");
  // Two passes in double keep the mean/std postcondition well inside 1e-5.
  double mean = 0.0;
  for (float v : vox) mean += v;
  mean /= static_cast<double>(vox.size());
  double var = 0.0;
  for (float v : vox) var += (v - mean) * (v - mean);
  var /= static_cast<double>(vox.size());
  if (!(var > 0.0)) fail(ErrorKind::DegenerateVolume, "volume has zero variance");
  const double inv_std = 1.0 / std::sqrt(var);
  std::vector<float> out(vox.size());
  for (std::size_t i = 0; i < vox.size(); ++i) out[i] = static_cast<float>((vox[i] - mean) * inv_std);
  return Volume3D(volume.dims(), volume.spacing(), std::move(out), volume.modality(), volume.subject_id());
}

namespace {

template <typename T>
std::vector<T> crop_box(std::span<const T> data, const Dims3& dims, const Dims3& start, const Dims3& size) {
  std::vector<T> out(static_cast<std::size_t>(voxel_count(size)));
  std::size_t k = 0;
  for (std::int64_t z = 0; z < size[2]; ++z) {
    for (std::int64_t y = 0; y < size[1]; ++y) {
      for (std::int64_t x = 0; x < size[0]; ++x) {
        out[k++] = data[static_cast<std::size_t>((start[0] + x) + dims[0] * ((start[1] + y) + dims[1] * (start[2] + z)))];
      }
    }
  }
  return out;
}

template <typename T>
std::vector<T> keep_slices(std::span<const T> data, const Dims3& dims, SlicingAxis axis,
                           const std::vector<std::int64_t>& keep, const Dims3& out_dims) {
  std::vector<T> out(static_cast<std::size_t>(voxel_count(out_dims)));
  const auto [rows, cols] = slice_shape(dims, axis);
  for (std::size_t s = 0; s < keep.size(); ++s) {
    for (std::int64_t r = 0; r < rows; ++r) {
      for (std::int64_t c = 0; c < cols; ++c) {
        out[static_cast<std::size_t>(voxel_index(out_dims, axis, static_cast<std::int64_t>(s), r, c))] =
            data[static_cast<std::size_t>(voxel_index(dims, axis, keep[s], r, c))];
      }
    }
  }
  return out;
}

}  // namespace

std::pair<Volume3D, std::optional<LabelVolume>> crop_to_roi(const Volume3D& volume,
                                                           const std::optional<LabelVolume>& labels,
                                                           const PreprocessConfig& cfg) {
  if (labels) {
    require(labels->dims() == volume.dims(), ErrorKind::ShapeMismatch, "volume and label shapes differ");
  }
  const Dims3& dims = volume.dims();
  switch (cfg.roi) {
    case RoiKind::none:
      return {volume, labels};
    case RoiKind::fixed_box: {
      Dims3 start{};
      Dims3 size{};
      for (std::size_t a = 0; a < 3; ++a) {
        size[a] = cfg.box.size[a];
        start[a] = cfg.box.center[a] - size[a] / 2;
        if (size[a] < 1 || start[a] < 0 || start[a] + size[a] > dims[a]) {
          fail(ErrorKind::RoiOutOfBounds, "fixed ROI box exceeds volume bounds on axis " + std::to_string(a));
        }
      }
      Volume3D v(size, volume.spacing(), crop_box(volume.voxels(), dims, start, size), volume.modality(),
                 volume.subject_id());
      std::optional<LabelVolume> l;
      if (labels) l = LabelVolume(size, labels->spacing(), crop_box(labels->labels(), dims, start, size), labels->num_classes());
      return {std::move(v), std::move(l)};
    }
    case RoiKind::label_bounding_slices: {
      require(labels.has_value(), ErrorKind::InvalidArgument, "label_bounding_slices requires labels");
      const auto n = slice_count(dims, cfg.slicing_axis);
      std::vector<std::int64_t> keep;
      for (std::int64_t s = 0; s < n; ++s) {
        const auto plane = take_plane(labels->labels(), dims, cfg.slicing_axis, s);
        if (std::any_of(plane.begin(), plane.end(), [](std::int32_t l) { return l != 0; })) keep.push_back(s);
      }
      if (keep.empty()) fail(ErrorKind::RoiOutOfBounds, "no slice contains foreground");
      Dims3 out_dims = dims;
      out_dims[static_cast<std::size_t>(cfg.slicing_axis)] = static_cast<std::int64_t>(keep.size());
      Volume3D v(out_dims, volume.spacing(), keep_slices(volume.voxels(), dims, cfg.slicing_axis, keep, out_dims),
                 volume.modality(), volume.subject_id());
      LabelVolume l(out_dims, labels->spacing(), keep_slices(labels->labels(), dims, cfg.slicing_axis, keep, out_dims),
                    labels->num_classes());
      return {std::move(v), std::move(l)};
    }
  }
  return {volume, labels};
}

std::pair<std::int64_t, std::int64_t> slice_shape(const Dims3& dims, SlicingAxis axis) {
  switch (axis) {
    case SlicingAxis::sagittal: return {dims[2], dims[1]};
    case SlicingAxis::coronal: return {dims[2], dims[0]};
    case SlicingAxis::axial: return {dims[1], dims[0]};
  }
  return {0, 0};
}

std::int64_t slice_count(const Dims3& dims, SlicingAxis axis) { return dims[static_cast<std::size_t>(axis)]; }

std::int64_t voxel_index(const Dims3& dims, SlicingAxis axis, std::int64_t slice, std::int64_t row, std::int64_t col) {
  std::int64_t x = 0, y = 0, z = 0;
  switch (axis) {
    case SlicingAxis::sagittal: x = slice; y = col; z = row; break;
    case SlicingAxis::coronal: y = slice; x = col; z = row; break;
    case SlicingAxis::axial: z = slice; x = col; y = row; break;
  }
  return x + dims[0] * (y + dims[1] * z);
}

std::vector<float> resize_bilinear(std::span<const float> src, std::int64_t rows, std::int64_t cols,
                                   std::int64_t out_rows, std::int64_t out_cols) {
  if (rows == out_rows && cols == out_cols) return {src.begin(), src.end()};
  std::vector<float> out(static_cast<std::size_t>(out_rows * out_cols));
  const double sy = static_cast<double>(rows) / static_cast<double>(out_rows);
  const double sx = static_cast<double>(cols) / static_cast<double>(out_cols);
  for (std::int64_t r = 0; r < out_rows; ++r) {
    const double fy = std::clamp((static_cast<double>(r) + 0.5) * sy - 0.5, 0.0, static_cast<double>(rows - 1));
    const auto y0 = static_cast<std::int64_t>(std::floor(fy));
    const auto y1 = std::min(y0 + 1, rows - 1);
    const double wy = fy - static_cast<double>(y0);
    for (std::int64_t c = 0; c < out_cols; ++c) {
      const double fx = std::clamp((static_cast<double>(c) + 0.5) * sx - 0.5, 0.0, static_cast<double>(cols - 1));
      const auto x0 = static_cast<std::int64_t>(std::floor(fx));
      const auto x1 = std::min(x0 + 1, cols - 1);
      const double wx = fx - static_cast<double>(x0);
      auto at = [&](std::int64_t y, std::int64_t x) { return static_cast<double>(src[static_cast<std::size_t>(y * cols + x)]); };
      const double v = (1 - wy) * ((1 - wx) * at(y0, x0) + wx * at(y0, x1)) + wy * ((1 - wx) * at(y1, x0) + wx * at(y1, x1));
      out[static_cast<std::size_t>(r * out_cols + c)] = static_cast<float>(v);
    }
  }
  return out;
}

std::vector<std::int32_t> resize_nearest(std::span<const std::int32_t> src, std::int64_t rows, std::int64_t cols,
                                         std::int64_t out_rows, std::int64_t out_cols) {
  if (rows == out_rows && cols == out_cols) return {src.begin(), src.end()};
  std::vector<std::int32_t> out(static_cast<std::size_t>(out_rows * out_cols));
  for (std::int64_t r = 0; r < out_rows; ++r) {
    const auto y = std::min(rows - 1, static_cast<std::int64_t>(std::floor((static_cast<double>(r) + 0.5) * static_cast<double>(rows) / static_cast<double>(out_rows))));
    for (std::int64_t c = 0; c < out_cols; ++c) {
      const auto x = std::min(cols - 1, static_cast<std::int64_t>(std::floor((static_cast<double>(c) + 0.5) * static_cast<double>(cols) / static_cast<double>(out_cols))));
      out[static_cast<std::size_t>(r * out_cols + c)] = src[static_cast<std::size_t>(y * cols + x)];
    }
  }
  return out;
}

std::vector<Slice2D> extract_slices(const Volume3D& volume, const std::optional<LabelVolume>& labels,
                                    const PreprocessConfig& cfg) {
  cfg.validate();
  if (labels) {
    require(labels->dims() == volume.dims(), ErrorKind::ShapeMismatch, "volume and label shapes differ");
  }
  const auto& dims = volume.dims();
  const auto [rows, cols] = slice_shape(dims, cfg.slicing_axis);
  const std::int64_t res = cfg.target_resolution;
  const auto n = slice_count(dims, cfg.slicing_axis);
  std::vector<Slice2D> out;
  out.reserve(static_cast<std::size_t>(n));
  for (std::int64_t s = 0; s < n; ++s) {
    auto plane = take_plane(volume.voxels(), dims, cfg.slicing_axis, s);
    std::optional<std::vector<std::int32_t>> lab;
    if (labels) {
      auto lp = take_plane(labels->labels(), dims, cfg.slicing_axis, s);
      lab = resize_nearest(lp, rows, cols, res, res);
    }
    Slice2D slice(res, res, resize_bilinear(plane, rows, cols, res, res), std::move(lab), volume.modality());
    slice.subject_id = volume.subject_id();
    slice.slice_index = s;
    slice.original_rows = rows;
    slice.original_cols = cols;
    out.push_back(std::move(slice));
  }
  return out;
}

LabelVolume restack_labels(const std::vector<Slice2D>& slices, const Dims3& dims, const Spacing3& spacing,
                           SlicingAxis axis, int num_classes) {
  require(static_cast<std::int64_t>(slices.size()) == slice_count(dims, axis), ErrorKind::ShapeMismatch,
          "slice count does not match target depth");
  const auto [rows, cols] = slice_shape(dims, axis);
  std::vector<std::int32_t> out(static_cast<std::size_t>(voxel_count(dims)), 0);
  for (const auto& s : slices) {
    require(s.label.has_value(), ErrorKind::InvalidArgument, "slice has no label map to restack");
    require(s.original_rows == rows && s.original_cols == cols, ErrorKind::ShapeMismatch,
            "slice original shape does not match volume geometry");
    require(s.slice_index >= 0 && s.slice_index < slice_count(dims, axis), ErrorKind::ShapeMismatch,
            "slice index out of range");
    const auto back = resize_nearest(*s.label, s.rows, s.cols, rows, cols);
    for (std::int64_t r = 0; r < rows; ++r) {
      for (std::int64_t c = 0; c < cols; ++c) {
        out[static_cast<std::size_t>(voxel_index(dims, axis, s.slice_index, r, c))] = back[static_cast<std::size_t>(r * cols + c)];
      }
    }
  }
  return LabelVolume(dims, spacing, std::move(out), num_classes);
}

AffineParams sample_affine(const AugmentConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if (!cfg.enabled) return {};
  std::mt19937_64 rng(seed);
  auto uniform = [&rng](double lo, double hi) {
    if (!(hi > lo)) return lo;
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };
  AffineParams p;
  p.angle_rad = uniform(-cfg.rotation_range_deg, cfg.rotation_range_deg) * std::numbers::pi / 180.0;
  p.scale = uniform(cfg.scale_min, cfg.scale_max);
  p.shear = uniform(-cfg.shear_range, cfg.shear_range);
  return p;
}

namespace {

// Mirror about the first/last sample centres, e.g. -1 -> 1 and n -> n-2.
double reflect_coord(double x, std::int64_t n) {
  if (n == 1) return 0.0;
  const double period = 2.0 * static_cast<double>(n - 1);
  x = std::fmod(std::abs(x), period);
  return x > static_cast<double>(n - 1) ? period - x : x;
}

std::int64_t reflect_index(std::int64_t i, std::int64_t n) {
  return static_cast<std::int64_t>(reflect_coord(static_cast<double>(i), n));
}

}  // namespace

Slice2D apply_affine(const Slice2D& slice, const AffineParams& params) {
  if (params.is_identity()) return slice;
  const std::int64_t rows = slice.rows;
  const std::int64_t cols = slice.cols;
  const double rc = 0.5 * static_cast<double>(rows - 1);
  const double cc = 0.5 * static_cast<double>(cols - 1);
  // Forward map in (u = col offset, v = row offset): A = R(angle) * scale * Shear.
  const double c = std::cos(params.angle_rad);
  const double s = std::sin(params.angle_rad);
  const double a00 = params.scale * c, a01 = params.scale * (c * params.shear + s);
  const double a10 = -params.scale * s, a11 = params.scale * (-s * params.shear + c);
  const double det = a00 * a11 - a01 * a10;
  const double i00 = a11 / det, i01 = -a01 / det, i10 = -a10 / det, i11 = a00 / det;

  Slice2D out = slice;
  for (std::int64_t r = 0; r < rows; ++r) {
    for (std::int64_t col = 0; col < cols; ++col) {
      const double u = static_cast<double>(col) - cc;
      const double v = static_cast<double>(r) - rc;
      const double su = i00 * u + i01 * v + cc;
      const double sv = i10 * u + i11 * v + rc;
      const std::size_t o = static_cast<std::size_t>(r * cols + col);

      const double fy = std::floor(sv);
      const double fx = std::floor(su);
      const double wy = sv - fy;
      const double wx = su - fx;
      auto px = [&](double y, double x) {
        const auto yy = reflect_index(static_cast<std::int64_t>(y), rows);
        const auto xx = reflect_index(static_cast<std::int64_t>(x), cols);
        return static_cast<double>(slice.pixels[static_cast<std::size_t>(yy * cols + xx)]);
      };
      const double val = (1 - wy) * ((1 - wx) * px(fy, fx) + wx * px(fy, fx + 1)) +
                         wy * ((1 - wx) * px(fy + 1, fx) + wx * px(fy + 1, fx + 1));
      out.pixels[o] = static_cast<float>(val);
      if (slice.label) {
        const auto ny = reflect_index(static_cast<std::int64_t>(std::lround(sv)), rows);
        const auto nx = reflect_index(static_cast<std::int64_t>(std::lround(su)), cols);
        (*out.label)[o] = (*slice.label)[static_cast<std::size_t>(ny * cols + nx)];
      }
    }
  }
  return out;
}

Slice2D augment(const Slice2D& slice, const AugmentConfig& cfg, std::uint64_t seed) {
  return apply_affine(slice, sample_affine(cfg, seed));
}

}  // namespace sifa
