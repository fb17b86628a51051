#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hybrid/dataset.hpp"
#include "hybrid/nn.hpp"

namespace hybrid {

// ---- CIFAR-10 --------------------------------------------------------------

inline constexpr std::size_t kCifarRecordBytes = 3073;  // label byte + 3x32x32 pixels
inline constexpr std::size_t kCifarSide = 32;
inline constexpr std::size_t kCifarClasses = 10;

/// Batch files in load order: data_batch_1..5.bin, then test_batch.bin.
std::vector<std::string> cifar10_batch_names();

/// Parses one batch file of 3073-byte records (label, then channel-planar
/// R, G, B rows of 32x32). Throws FormatError naming the file and offset.
Dataset load_cifar10_batch(const std::filesystem::path& file);
/// All six batch files of the binary distribution, 60,000 images.
Dataset load_cifar10(const std::filesystem::path& directory);
/// Writes a dataset of 3x32x32 images in the batch-file record layout.
void write_cifar10_batch(const std::filesystem::path& file, const Dataset& ds);

// ---- Splits ----------------------------------------------------------------

struct SplitSpec {
  double train_fraction = 4.0 / 6.0;
  double validation_fraction = 1.0 / 6.0;
  double test_fraction = 1.0 / 6.0;
  bool stratified = true;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
};

struct Splits {
  Dataset train;
  Dataset validation;
  Dataset test;
};

/// Per class: seeded shuffle, then contiguous slices of rounded sizes
/// (validation, test, remainder to train). Each list is sorted ascending.
SplitIndices split_indices(const Dataset& ds, const SplitSpec& spec);
Splits stratified_split(const Dataset& ds, const SplitSpec& spec);

/// `count` samples with equal per-class shares (remainder to the lowest
/// classes), drawn by seeded shuffle within each class.
Dataset stratified_sample(const Dataset& ds, std::size_t count, std::uint64_t seed);

// ---- Synthetic data --------------------------------------------------------

struct SyntheticSpec {
  std::size_t classes = 10;
  std::size_t per_class = 1000;
  std::size_t channels = 3;
  std::size_t height = 16;
  std::size_t width = 16;
  double noise = 0.35;  // std of the per-pixel Gaussian noise
  std::uint64_t seed = 0;
};

/// Class-conditional Gaussian-blob images: each class has a smooth mean
/// pattern; samples add i.i.d. noise, clip to [0, 1] and quantize to 8 bits.
/// Samples are interleaved by class (label = index % classes).
Dataset make_synthetic(const SyntheticSpec& spec);

// ---- Checkpoints -----------------------------------------------------------

inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class TrainingPhase : std::uint8_t { kRegular = 0, kHybrid = 1, kEvolved = 2 };

struct TrainingCursor {
  std::uint64_t epoch = 0;
  std::uint64_t seed = 0;
  TrainingPhase phase = TrainingPhase::kRegular;

  friend bool operator==(const TrainingCursor&, const TrainingCursor&) = default;
};

struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  std::string architecture;  // Model::descriptor()
  std::vector<Tensor> parameters;
  TrainingCursor cursor;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

Checkpoint make_checkpoint(const Model& model, const TrainingCursor& cursor);
/// Rebuilds the model described by the checkpoint and installs its parameters.
Model restore_model(const Checkpoint& ckpt);

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace hybrid
