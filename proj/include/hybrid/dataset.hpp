#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "hybrid/tensor.hpp"

namespace hybrid {

/// Labelled image collection. Pixels are stored as 8-bit intensities and
/// exposed as doubles scaled by 1/255, so every image value lies in [0, 1].
/// Immutable once built; safe to share between concurrent readers.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::size_t channels, std::size_t height, std::size_t width, std::size_t classes,
          std::vector<std::uint8_t> pixels, std::vector<int> labels);

  std::size_t size() const { return labels_.size(); }
  bool empty() const { return labels_.empty(); }
  std::size_t classes() const { return classes_; }
  std::size_t channels() const { return channels_; }
  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t image_size() const { return channels_ * height_ * width_; }
  Shape image_shape() const { return {channels_, height_, width_}; }

  std::span<const int> labels() const { return labels_; }
  std::span<const std::uint8_t> pixels() const { return pixels_; }
  std::span<const std::uint8_t> raw_image(std::size_t index) const;

  /// Images [N, C, H, W] for the given sample indices.
  Tensor batch(std::span<const std::size_t> indices) const;
  std::vector<int> batch_labels(std::span<const std::size_t> indices) const;
  /// All images as a [N, C, H, W] tensor.
  Tensor images() const;

  Dataset subset(std::span<const std::size_t> indices) const;
  std::vector<std::size_t> class_histogram() const;

 private:
  std::size_t channels_ = 0;
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::size_t classes_ = 0;
  std::vector<std::uint8_t> pixels_;
  std::vector<int> labels_;
};

}  // namespace hybrid
