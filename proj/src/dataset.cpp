#include "hybrid/dataset.hpp"

#include <numeric>
#include <string>

#include "hybrid/errors.hpp"

namespace hybrid {

Dataset::Dataset(std::size_t channels, std::size_t height, std::size_t width, std::size_t classes,
                 std::vector<std::uint8_t> pixels, std::vector<int> labels)
    : channels_(channels),
      height_(height),
      width_(width),
      classes_(classes),
      pixels_(std::move(pixels)),
      labels_(std::move(labels)) {
  if (channels_ == 0 || height_ == 0 || width_ == 0 || classes_ == 0) {
    throw DimensionError("dataset dimensions and class count must be positive");
  }
  if (pixels_.size() != labels_.size() * image_size()) {
    throw DimensionError("dataset: " + std::to_string(pixels_.size()) + " pixels for " +
                         std::to_string(labels_.size()) + " labels");
  }
  for (int label : labels_) {
    if (label < 0 || static_cast<std::size_t>(label) >= classes_) {
      throw InputError("dataset: label " + std::to_string(label) + " outside [0, " +
                       std::to_string(classes_) + ")");
    }
  }
}

std::span<const std::uint8_t> Dataset::raw_image(std::size_t index) const {
  return std::span<const std::uint8_t>(pixels_).subspan(index * image_size(), image_size());
}

Tensor Dataset::batch(std::span<const std::size_t> indices) const {
  if (indices.empty()) {
    throw InputError("dataset: empty batch");
  }
  const std::size_t per = image_size();
  std::vector<double> data(indices.size() * per);
  for (std::size_t b = 0; b < indices.size(); ++b) {
    if (indices[b] >= size()) {
      throw InputError("dataset: sample index out of range");
    }
    const std::uint8_t* src = pixels_.data() + indices[b] * per;
    double* dst = data.data() + b * per;
    for (std::size_t j = 0; j < per; ++j) {
      dst[j] = src[j] / 255.0;
    }
  }
  return Tensor({indices.size(), channels_, height_, width_}, std::move(data));
}

std::vector<int> Dataset::batch_labels(std::span<const std::size_t> indices) const {
  std::vector<int> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) {
    out.push_back(labels_.at(i));
  }
  return out;
}

Tensor Dataset::images() const {
  std::vector<std::size_t> all(size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return batch(all);
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  const std::size_t per = image_size();
  std::vector<std::uint8_t> pixels;
  pixels.reserve(indices.size() * per);
  std::vector<int> labels;
  labels.reserve(indices.size());
  for (std::size_t i : indices) {
    const auto image = raw_image(i);
    pixels.insert(pixels.end(), image.begin(), image.end());
    labels.push_back(labels_.at(i));
  }
  return Dataset(channels_, height_, width_, classes_, std::move(pixels), std::move(labels));
}

std::vector<std::size_t> Dataset::class_histogram() const {
  std::vector<std::size_t> counts(classes_, 0);
  for (int label : labels_) {
    ++counts[static_cast<std::size_t>(label)];
  }
  return counts;
}

}  // namespace hybrid
