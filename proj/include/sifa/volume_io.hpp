#pragma once

#include <filesystem>
#include <optional>

#include "sifa/domain.hpp"

namespace sifa {

/// Two on-disk containers are understood:
///  - `.svol`: a line-oriented text header (magic, kind, dims, spacing, dtype,
///    optional num_classes/modality/subject) closed by `end`, followed by a
///    little-endian raw payload;
///  - `.nii` / `.nii.gz`: single-file NIfTI-1.
/// Labels live next to the image: `<stem>_label<ext>`, or `<x>_label<ext>` when
/// the image stem is `<x>_image`.
struct LoadedVolume {
  Volume3D volume;
  std::optional<LabelVolume> labels;
};

std::filesystem::path label_path_for(const std::filesystem::path& image_path);

LoadedVolume load_volume(const std::filesystem::path& path);

/// `num_classes` overrides the stored (or, for NIfTI, inferred max+1) count.
LabelVolume load_labels(const std::filesystem::path& path, std::optional<int> num_classes = std::nullopt);

void save_volume(const std::filesystem::path& path, const Volume3D& volume);
void save_labels(const std::filesystem::path& path, const LabelVolume& labels);

/// Writes the image and, when given, its label file at label_path_for(path).
void save_pair(const std::filesystem::path& path, const Volume3D& volume, const LabelVolume* labels);

}  // namespace sifa
