#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "hybrid/data_io.hpp"
#include "hybrid/errors.hpp"
#include "temp_dir.hpp"

using namespace hybrid;
namespace fs = std::filesystem;

namespace {

// Raw CIFAR-10 records built byte by byte, independent of the writer.
std::vector<std::uint8_t> raw_records(std::size_t count, std::size_t label_offset) {
  std::vector<std::uint8_t> bytes;
  for (std::size_t r = 0; r < count; ++r) {
    bytes.push_back(static_cast<std::uint8_t>((r + label_offset) % 10));
    for (std::size_t p = 0; p < 3072; ++p) bytes.push_back(static_cast<std::uint8_t>((r * 7 + p) % 256));
  }
  return bytes;
}

void write_bytes(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Dataset counting_dataset(std::size_t per_class, std::size_t classes) {
  const std::size_t n = per_class * classes;
  std::vector<std::uint8_t> pixels(n);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    pixels[i] = static_cast<std::uint8_t>(i % 256);
    labels[i] = static_cast<int>(i % classes);
  }
  return Dataset(1, 1, 1, classes, pixels, labels);
}

// Softmax regression on flattened pixels trained by plain full-batch gradient
// descent; returns holdout accuracy. Written out longhand on purpose.
double logistic_holdout_accuracy(const Dataset& ds, std::size_t train_count) {
  const std::size_t d = ds.image_size() + 1;  // bias feature
  const std::size_t k = ds.classes();
  auto feature = [&](std::size_t i, std::size_t j) {
    return j + 1 == d ? 1.0 : ds.raw_image(i)[j] / 255.0 - 0.5;
  };
  std::vector<double> x(ds.size() * d);
  for (std::size_t i = 0; i < ds.size(); ++i)
    for (std::size_t j = 0; j < d; ++j) x[i * d + j] = feature(i, j);
  std::vector<double> w(d * k, 0.0), grad(d * k), p(k);
  for (int iter = 0; iter < 150; ++iter) {
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t i = 0; i < train_count; ++i) {
      double mx = -1e300;
      for (std::size_t c = 0; c < k; ++c) {
        double s = 0.0;
        for (std::size_t j = 0; j < d; ++j) s += x[i * d + j] * w[j * k + c];
        p[c] = s;
        mx = std::max(mx, s);
      }
      double z = 0.0;
      for (double& v : p) z += (v = std::exp(v - mx));
      for (std::size_t c = 0; c < k; ++c) {
        const double g = p[c] / z - (static_cast<int>(c) == ds.labels()[i] ? 1.0 : 0.0);
        for (std::size_t j = 0; j < d; ++j) grad[j * k + c] += g * x[i * d + j];
      }
    }
    for (std::size_t t = 0; t < w.size(); ++t) w[t] -= 0.5 * grad[t] / static_cast<double>(train_count);
  }
  std::size_t correct = 0;
  for (std::size_t i = train_count; i < ds.size(); ++i) {
    std::size_t best = 0;
    double best_s = -1e300;
    for (std::size_t c = 0; c < k; ++c) {
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) s += x[i * d + j] * w[j * k + c];
      if (s > best_s) best_s = s, best = c;
    }
    correct += static_cast<int>(best) == ds.labels()[i];
  }
  return static_cast<double>(correct) / static_cast<double>(ds.size() - train_count);
}

}  // namespace

TEST(Cifar, ParsesRecordLayout) {
  TempDir dir;
  auto bytes = raw_records(5, 7);
  std::fill(bytes.begin() + 3073 * 2 + 1, bytes.begin() + 3073 * 3, 255);
  write_bytes(dir / "batch.bin", bytes);
  const Dataset ds = load_cifar10_batch(dir / "batch.bin");
  ASSERT_EQ(ds.size(), 5u);
  EXPECT_EQ(ds.labels()[0], 7);
  EXPECT_EQ(ds.image_shape(), (Shape{3, 32, 32}));
  const std::vector<std::size_t> idx{2};
  const Tensor white = ds.batch(idx);
  for (double v : white.values()) ASSERT_EQ(v, 1.0);
  // Channel-planar layout: pixel p of record r lands at flat index p.
  const std::vector<std::size_t> first{1};
  const Tensor img = ds.batch(first);
  EXPECT_DOUBLE_EQ(img[1024 + 32 * 3 + 5], ((7 + 1024 + 32 * 3 + 5) % 256) / 255.0);
  const Tensor all = ds.images();
  for (double v : all.values()) ASSERT_TRUE(v >= 0.0 && v <= 1.0);
}

TEST(Cifar, TruncatedMissingAndBadLabelFilesAreFormatErrors) {
  TempDir dir;
  auto bytes = raw_records(3, 0);
  bytes.resize(3073 * 2 + 100);
  write_bytes(dir / "short.bin", bytes);
  try {
    load_cifar10_batch(dir / "short.bin");
    FAIL();
  } catch (const FormatError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("short.bin"), std::string::npos);
    EXPECT_NE(msg.find("6146"), std::string::npos);
  }
  EXPECT_THROW(load_cifar10_batch(dir / "absent.bin"), FormatError);
  auto bad = raw_records(2, 0);
  bad[3073] = 10;
  write_bytes(dir / "bad.bin", bad);
  EXPECT_THROW(load_cifar10_batch(dir / "bad.bin"), FormatError);
  EXPECT_THROW(load_cifar10(dir.path()), FormatError);
}

TEST(Cifar, LoadsSixBatchesInOrderAndWriterRoundTrips) {
  TempDir dir;
  std::size_t offset = 0;
  for (const auto& name : cifar10_batch_names()) write_bytes(dir / name, raw_records(20, offset++));
  const Dataset ds = load_cifar10(dir.path());
  ASSERT_EQ(ds.size(), 120u);
  EXPECT_EQ(ds.labels()[20], 1);
  EXPECT_EQ(ds.labels()[100], 5);
  write_cifar10_batch(dir / "copy.bin", ds);
  EXPECT_EQ(load_cifar10_batch(dir / "copy.bin").pixels().size(), ds.pixels().size());
  const auto original = read_bytes(dir / "data_batch_1.bin");
  const auto copy = read_bytes(dir / "copy.bin");
  EXPECT_TRUE(std::equal(original.begin(), original.end(), copy.begin()));
}

TEST(Split, PerClassCountsForTenPercentSplits) {
  const Dataset ds = counting_dataset(10, 10);
  SplitSpec spec{0.8, 0.1, 0.1, true, 3};
  const Splits s = stratified_split(ds, spec);
  for (const auto& [part, want] : {std::pair{&s.train, 8u}, {&s.validation, 1u}, {&s.test, 1u}}) {
    const auto hist = part->class_histogram();
    for (std::size_t c = 0; c < 10; ++c) EXPECT_EQ(hist[c], want);
  }
}

TEST(Split, DisjointExhaustiveAndDeterministic) {
  const Dataset ds = counting_dataset(37, 4);
  SplitSpec spec;
  spec.seed = 11;
  const SplitIndices a = split_indices(ds, spec);
  const SplitIndices b = split_indices(ds, spec);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.validation, b.validation);
  EXPECT_EQ(a.test, b.test);
  std::multiset<std::size_t> all(a.train.begin(), a.train.end());
  all.insert(a.validation.begin(), a.validation.end());
  all.insert(a.test.begin(), a.test.end());
  EXPECT_EQ(all.size(), ds.size());
  EXPECT_EQ(std::set<std::size_t>(all.begin(), all.end()).size(), ds.size());
  // Per-class proportions within one sample of the global ones.
  for (const auto* part : {&a.train, &a.validation, &a.test}) {
    std::vector<double> hist(4, 0.0);
    for (std::size_t i : *part) hist[static_cast<std::size_t>(ds.labels()[i])] += 1.0;
    for (double h : hist) EXPECT_NEAR(h, static_cast<double>(part->size()) / 4.0, 1.0);
  }
  spec.seed = 12;
  EXPECT_NE(split_indices(ds, spec).validation, a.validation);
}

TEST(Split, InvalidFractionsAreConfigErrors) {
  const Dataset ds = counting_dataset(10, 2);
  EXPECT_THROW(split_indices(ds, SplitSpec{0.5, 0.3, 0.3, true, 0}), ConfigError);
  EXPECT_THROW(split_indices(ds, SplitSpec{1.0, 0.0, 0.0, true, 0}), ConfigError);
  EXPECT_THROW(split_indices(counting_dataset(1, 2), SplitSpec{}), ConfigError);
}

TEST(Split, StratifiedSampleIsBalanced) {
  const Dataset ds = counting_dataset(50, 10);
  const Dataset sub = stratified_sample(ds, 200, 4);
  for (std::size_t h : sub.class_histogram()) EXPECT_EQ(h, 20u);
  EXPECT_THROW(stratified_sample(ds, 501, 4), ConfigError);
}

TEST(Synthetic, BalancedDeterministicAndNoiseFreeClassesIdentical) {
  SyntheticSpec spec;
  spec.classes = 2;
  spec.per_class = 50;
  const Dataset ds = make_synthetic(spec);
  EXPECT_EQ(ds.size(), 100u);
  EXPECT_EQ(ds.class_histogram(), (std::vector<std::size_t>{50, 50}));
  const Dataset again = make_synthetic(spec);
  EXPECT_TRUE(std::equal(ds.pixels().begin(), ds.pixels().end(), again.pixels().begin()));

  spec.noise = 0.0;
  const Dataset clean = make_synthetic(spec);
  for (std::size_t i = 2; i < clean.size(); ++i) {
    const auto a = clean.raw_image(i % 2), b = clean.raw_image(i);
    ASSERT_TRUE(std::equal(a.begin(), a.end(), b.begin()));
  }
  const auto c0 = clean.raw_image(0), c1 = clean.raw_image(1);
  EXPECT_FALSE(std::equal(c0.begin(), c0.end(), c1.begin()));
  EXPECT_THROW(make_synthetic(SyntheticSpec{0}), ConfigError);
}

TEST(Synthetic, LinearlySeparableAtDefaultNoise) {
  SyntheticSpec spec;
  spec.per_class = 100;
  spec.seed = 5;
  const Dataset ds = make_synthetic(spec);
  // Samples are interleaved by class, so a prefix split stays balanced.
  const double acc = logistic_holdout_accuracy(ds, 800);
  RecordProperty("holdout_accuracy", std::to_string(acc));
  EXPECT_GE(acc, 0.95);
}

namespace {

Checkpoint sample_checkpoint() {
  Model model = Model::small_convnet(3, 8, 8, 4);
  RngStream rng(6);
  model.initialize(rng);
  return make_checkpoint(model, {7, 42, TrainingPhase::kHybrid});
}

}  // namespace

TEST(Checkpoint, RoundTripIsBitExactAndByteStable) {
  TempDir dir;
  const Checkpoint ckpt = sample_checkpoint();
  save_checkpoint(dir / "a.ckpt", ckpt);
  const Checkpoint loaded = load_checkpoint(dir / "a.ckpt");
  EXPECT_EQ(loaded, ckpt);
  save_checkpoint(dir / "b.ckpt", loaded);
  EXPECT_EQ(read_bytes(dir / "a.ckpt"), read_bytes(dir / "b.ckpt"));
  const Model model = restore_model(loaded);
  EXPECT_EQ(make_checkpoint(model, loaded.cursor), ckpt);
}

TEST(Checkpoint, TruncationMagicVersionAndTrailingBytesRejected) {
  const auto bytes = encode_checkpoint(sample_checkpoint());
  for (std::size_t cut : {std::size_t{0}, std::size_t{5}, std::size_t{12}, bytes.size() / 2, bytes.size() - 1}) {
    EXPECT_THROW(decode_checkpoint(std::vector<std::uint8_t>(bytes.begin(), bytes.begin() + cut)),
                 FormatError)
        << cut;
  }
  auto magic = bytes;
  magic[0] = 'X';
  EXPECT_THROW(decode_checkpoint(magic), FormatError);
  auto version = bytes;
  version[8] = 2;
  try {
    decode_checkpoint(version);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("version"), std::string::npos);
  }
  auto trailing = bytes;
  trailing.push_back(0);
  EXPECT_THROW(decode_checkpoint(trailing), FormatError);
  TempDir dir;
  EXPECT_THROW(load_checkpoint(dir / "missing.ckpt"), FormatError);
}

TEST(Checkpoint, ArchitectureMismatchRejected) {
  Checkpoint ckpt = sample_checkpoint();
  ckpt.parameters.pop_back();
  EXPECT_THROW(restore_model(ckpt), FormatError);
}
