#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <torch/torch.h>

#include "sifa/domain.hpp"
#include "sifa/preprocess.hpp"

namespace sifa {

/// A homogeneous-domain batch in libtorch layout: images [B, 1, H, W]
/// float32, labels [B, H, W] int64.
struct SliceBatch {
  torch::Tensor images;
  std::optional<torch::Tensor> labels;
  Domain domain = Domain::source;

  std::int64_t size() const { return images.size(0); }
  bool has_labels() const { return labels.has_value(); }
};

/// Stacks slices into a batch. Throws EmptyDataset for an empty span,
/// InvalidArgument for mixed domains and ShapeMismatch for ragged shapes.
/// Labels are included only when every slice carries one and `with_labels`.
SliceBatch make_batch(std::span<const Slice2D> slices, bool with_labels = true);

/// Deterministic epoch-shuffled batching. Batch `i` is a pure function of
/// (dataset, batch size, seed, i), so a trainer resumed at iteration k sees
/// exactly the batches an uninterrupted run would. The trailing partial
/// batch of each epoch is dropped.
class BatchStream {
 public:
  BatchStream(std::vector<Slice2D> dataset, std::int64_t batch_size, std::uint64_t seed,
              std::optional<AugmentConfig> augmentation = std::nullopt, bool with_labels = true);

  std::int64_t batches_per_epoch() const { return batches_per_epoch_; }
  std::int64_t dataset_size() const { return static_cast<std::int64_t>(dataset_.size()); }

  SliceBatch batch(std::int64_t global_index) const;

  /// Sequential cursor over batch(0), batch(1), ...
  SliceBatch next() { return batch(cursor_++); }
  void seek(std::int64_t global_index) { cursor_ = global_index; }

  /// Slice indices making up batch `global_index`, before augmentation.
  std::vector<std::int64_t> batch_indices(std::int64_t global_index) const;

 private:
  std::vector<Slice2D> dataset_;
  std::int64_t batch_size_;
  std::uint64_t seed_;
  std::optional<AugmentConfig> augmentation_;
  bool with_labels_;
  std::int64_t batches_per_epoch_ = 0;
  std::int64_t cursor_ = 0;
};

}  // namespace sifa
