#include "sifa/batching.hpp"

#include <algorithm>
#include <numeric>
#include <random>

namespace sifa {

SliceBatch make_batch(std::span<const Slice2D> slices, bool with_labels) {
  if (slices.empty()) fail(ErrorKind::EmptyDataset, "cannot build an empty batch");
  const auto& first = slices.front();
  const auto b = static_cast<std::int64_t>(slices.size());
  const bool labeled = with_labels && std::all_of(slices.begin(), slices.end(), [](const Slice2D& s) { return s.label.has_value(); });

  SliceBatch out;
  out.domain = first.domain;
  out.images = torch::empty({b, 1, first.rows, first.cols}, torch::kFloat32);
  torch::Tensor labels;
  if (labeled) labels = torch::empty({b, first.rows, first.cols}, torch::kInt64);
  auto* img = out.images.data_ptr<float>();
  const auto plane = first.rows * first.cols;
  for (std::int64_t i = 0; i < b; ++i) {
    const auto& s = slices[static_cast<std::size_t>(i)];
    require(s.domain == first.domain, ErrorKind::InvalidArgument, "mixed domains within a batch");
    require(s.rows == first.rows && s.cols == first.cols, ErrorKind::ShapeMismatch, "ragged slice shapes in batch");
    std::copy(s.pixels.begin(), s.pixels.end(), img + i * plane);
    if (labeled) {
      auto* lab = labels.data_ptr<std::int64_t>() + i * plane;
      std::copy(s.label->begin(), s.label->end(), lab);
    }
  }
  if (labeled) out.labels = labels;
  return out;
}

BatchStream::BatchStream(std::vector<Slice2D> dataset, std::int64_t batch_size, std::uint64_t seed,
                         std::optional<AugmentConfig> augmentation, bool with_labels)
    : dataset_(std::move(dataset)),
      batch_size_(batch_size),
      seed_(seed),
      augmentation_(std::move(augmentation)),
      with_labels_(with_labels) {
  require(batch_size_ >= 1, ErrorKind::InvalidArgument, "batch_size must be >= 1");
  if (dataset_.empty()) fail(ErrorKind::EmptyDataset, "dataset is empty");
  batches_per_epoch_ = static_cast<std::int64_t>(dataset_.size()) / batch_size_;
  if (batches_per_epoch_ == 0) {
    fail(ErrorKind::EmptyDataset, "dataset smaller than one batch (" + std::to_string(dataset_.size()) + " < " +
                                      std::to_string(batch_size_) + ")");
  }
  if (augmentation_) augmentation_->validate();
}

std::vector<std::int64_t> BatchStream::batch_indices(std::int64_t global_index) const {
  require(global_index >= 0, ErrorKind::InvalidArgument, "negative batch index");
  const auto epoch = global_index / batches_per_epoch_;
  const auto within = global_index % batches_per_epoch_;
  std::vector<std::int64_t> order(dataset_.size());
  std::iota(order.begin(), order.end(), 0);
  std::seed_seq seq{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32),
                    static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(epoch >> 32)};
  std::mt19937_64 rng(seq);
  std::shuffle(order.begin(), order.end(), rng);
  return {order.begin() + within * batch_size_, order.begin() + (within + 1) * batch_size_};
}

SliceBatch BatchStream::batch(std::int64_t global_index) const {
  const auto idx = batch_indices(global_index);
  std::vector<Slice2D> picked;
  picked.reserve(idx.size());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const auto& s = dataset_[static_cast<std::size_t>(idx[k])];
    if (augmentation_ && augmentation_->enabled) {
      const std::uint64_t aug_seed = seed_ * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(global_index) * 1315423911ULL + k;
      picked.push_back(augment(s, *augmentation_, aug_seed));
    } else {
      picked.push_back(s);
    }
  }
  return make_batch(picked, with_labels_);
}

}  // namespace sifa
