#include "sifa/domain.hpp"

#include <algorithm>
#include <cmath>

namespace sifa {

std::string_view to_string(Domain d) { return d == Domain::source ? "source" : "target"; }

Domain domain_from_string(std::string_view s) {
  if (s == "source") return Domain::source;
  if (s == "target") return Domain::target;
  fail(ErrorKind::InvalidArgument, "unknown domain tag '" + std::string(s) + "'");
}

namespace {

void check_geometry(const Dims3& dims, const Spacing3& spacing, std::size_t payload) {
  for (auto d : dims) require(d >= 1, ErrorKind::InvalidArgument, "volume dimensions must be >= 1");
  for (auto s : spacing) {
    require(std::isfinite(s) && s > 0.0, ErrorKind::InvalidArgument, "voxel spacing must be positive");
  }
  require(static_cast<std::int64_t>(payload) == voxel_count(dims), ErrorKind::ShapeMismatch,
          "payload size does not match dimensions");
}

}  // namespace

Volume3D::Volume3D(Dims3 dims, Spacing3 spacing, std::vector<float> voxels, Domain modality,
                   std::string subject_id)
    : dims_(dims),
      spacing_(spacing),
      voxels_(std::move(voxels)),
      modality_(modality),
      subject_id_(std::move(subject_id)) {
  check_geometry(dims_, spacing_, voxels_.size());
}

bool Volume3D::all_finite() const noexcept {
  return std::all_of(voxels_.begin(), voxels_.end(), [](float v) { return std::isfinite(v); });
}

LabelVolume::LabelVolume(Dims3 dims, Spacing3 spacing, std::vector<std::int32_t> labels, int num_classes)
    : dims_(dims), spacing_(spacing), labels_(std::move(labels)), num_classes_(num_classes) {
  check_geometry(dims_, spacing_, labels_.size());
  require(num_classes_ >= 2, ErrorKind::InvalidArgument, "num_classes must be >= 2");
  for (auto l : labels_) {
    if (l < 0 || l >= num_classes_) {
      fail(ErrorKind::LabelOutOfRange,
           "label " + std::to_string(l) + " outside [0, " + std::to_string(num_classes_) + ")");
    }
  }
}

void validate_pair(const Volume3D& volume, const LabelVolume& labels) {
  require(volume.dims() == labels.dims(), ErrorKind::ShapeMismatch, "volume and label shapes differ");
  for (int a = 0; a < 3; ++a) {
    require(std::abs(volume.spacing()[a] - labels.spacing()[a]) <= 1e-6 * volume.spacing()[a],
            ErrorKind::SpacingMismatch, "volume and label spacings differ");
  }
  require(volume.all_finite(), ErrorKind::NonFiniteData, "volume contains NaN or Inf");
  // Label range is a LabelVolume construction invariant.
}

Slice2D::Slice2D(std::int64_t r, std::int64_t c, std::vector<float> px,
                 std::optional<std::vector<std::int32_t>> lbl, Domain d)
    : rows(r), cols(c), pixels(std::move(px)), label(std::move(lbl)), domain(d), original_rows(r), original_cols(c) {
  require(rows >= 1 && cols >= 1, ErrorKind::InvalidArgument, "slice dimensions must be >= 1");
  require(static_cast<std::int64_t>(pixels.size()) == rows * cols, ErrorKind::ShapeMismatch,
          "slice pixel count does not match shape");
  if (label) {
    require(static_cast<std::int64_t>(label->size()) == rows * cols, ErrorKind::ShapeMismatch,
            "slice label shape does not match image shape");
  }
}

void LossWeights::validate() const {
  for (double w : {adv_t, adv_s, cyc, seg_1, seg_2, adv_p1, adv_p2, adv_s_tilde}) {
    require(std::isfinite(w) && w >= 0.0, ErrorKind::InvalidArgument, "loss weights must be finite and >= 0");
  }
}

namespace {
constexpr std::array<std::string_view, kNumLossTerms> kTermNames = {
    "adv_t", "adv_s", "cyc",    "seg_1",      "seg_2",   "adv_p1",  "adv_p2",
    "adv_s_tilde", "disc_t", "disc_s", "disc_s_aux", "disc_p1", "disc_p2",
};
}

std::string_view to_string(LossTerm t) { return kTermNames[static_cast<std::size_t>(t)]; }

std::optional<LossTerm> loss_term_from_string(std::string_view s) {
  for (int i = 0; i < kNumLossTerms; ++i) {
    if (kTermNames[static_cast<std::size_t>(i)] == s) return static_cast<LossTerm>(i);
  }
  return std::nullopt;
}

void LossRecord::set(LossTerm t, double v) {
  if (!std::isfinite(v)) {
    fail(ErrorKind::NonFiniteLoss, std::string(to_string(t)) + " is not finite at iteration " +
                                       std::to_string(iteration));
  }
  (*this)[t] = v;
}

}  // namespace sifa
