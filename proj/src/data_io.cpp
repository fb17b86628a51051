#include "hybrid/data_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <numeric>

#include "hybrid/errors.hpp"
#include "hybrid/rng.hpp"

namespace hybrid {

namespace fs = std::filesystem;

namespace {

std::vector<std::uint8_t> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw FormatError("cannot open " + path.string());
  }
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw InputError("cannot write " + path.string());
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw InputError("failed writing " + path.string());
  }
}

void shuffle(std::vector<std::size_t>& items, RngStream& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    std::swap(items[i - 1], items[rng.uniform_index(i)]);
  }
}

std::vector<std::vector<std::size_t>> indices_by_class(const Dataset& ds) {
  std::vector<std::vector<std::size_t>> out(ds.classes());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out[static_cast<std::size_t>(ds.labels()[i])].push_back(i);
  }
  return out;
}

// Little-endian byte stream helpers for the checkpoint format.
class Writer {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
  void text(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes_.insert(bytes_.end(), s.begin(), s.end());
  }
  void raw(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) {
      bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
  }
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  double f64() { return std::bit_cast<double>(get(8)); }
  std::string text(std::size_t limit) {
    const std::uint32_t n = u32();
    if (n > limit) {
      throw FormatError("checkpoint: text field too long at offset " + std::to_string(pos_));
    }
    need(n);
    std::string s(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_),
                  bytes_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  std::size_t offset() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (remaining() < n) {
      throw FormatError("checkpoint: truncated at offset " + std::to_string(pos_));
    }
  }
  std::uint64_t get(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) {
      v |= static_cast<std::uint64_t>(bytes_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
    }
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

constexpr std::string_view kMagic = "HYBRIDCK";

}  // namespace

// ---- CIFAR-10 --------------------------------------------------------------

std::vector<std::string> cifar10_batch_names() {
  return {"data_batch_1.bin", "data_batch_2.bin", "data_batch_3.bin",
          "data_batch_4.bin", "data_batch_5.bin", "test_batch.bin"};
}

Dataset load_cifar10_batch(const fs::path& file) {
  if (!fs::exists(file)) {
    throw FormatError(file.string() + ": missing CIFAR-10 batch file");
  }
  const auto bytes = read_file(file);
  if (bytes.empty()) {
    throw FormatError(file.string() + ": empty file at offset 0");
  }
  const std::size_t whole = bytes.size() / kCifarRecordBytes;
  if (bytes.size() % kCifarRecordBytes != 0) {
    throw FormatError(file.string() + ": truncated record at offset " +
                      std::to_string(whole * kCifarRecordBytes));
  }
  const std::size_t pixels_per = kCifarRecordBytes - 1;
  std::vector<std::uint8_t> pixels(whole * pixels_per);
  std::vector<int> labels(whole);
  for (std::size_t r = 0; r < whole; ++r) {
    const std::size_t offset = r * kCifarRecordBytes;
    if (bytes[offset] >= kCifarClasses) {
      throw FormatError(file.string() + ": label " + std::to_string(bytes[offset]) +
                        " out of range at offset " + std::to_string(offset));
    }
    labels[r] = bytes[offset];
    std::copy_n(bytes.begin() + static_cast<std::ptrdiff_t>(offset + 1), pixels_per,
                pixels.begin() + static_cast<std::ptrdiff_t>(r * pixels_per));
  }
  return Dataset(3, kCifarSide, kCifarSide, kCifarClasses, std::move(pixels), std::move(labels));
}

Dataset load_cifar10(const fs::path& directory) {
  std::vector<std::uint8_t> pixels;
  std::vector<int> labels;
  for (const auto& name : cifar10_batch_names()) {
    const Dataset part = load_cifar10_batch(directory / name);
    pixels.insert(pixels.end(), part.pixels().begin(), part.pixels().end());
    labels.insert(labels.end(), part.labels().begin(), part.labels().end());
  }
  return Dataset(3, kCifarSide, kCifarSide, kCifarClasses, std::move(pixels), std::move(labels));
}

void write_cifar10_batch(const fs::path& file, const Dataset& ds) {
  if (ds.channels() != 3 || ds.height() != kCifarSide || ds.width() != kCifarSide ||
      ds.classes() > kCifarClasses) {
    throw DimensionError("write_cifar10_batch: dataset is not 3x32x32 with <= 10 classes");
  }
  std::vector<std::uint8_t> bytes;
  bytes.reserve(ds.size() * kCifarRecordBytes);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    bytes.push_back(static_cast<std::uint8_t>(ds.labels()[i]));
    const auto image = ds.raw_image(i);
    bytes.insert(bytes.end(), image.begin(), image.end());
  }
  write_file(file, bytes);
}

// ---- Splits ----------------------------------------------------------------

void SplitSpec::validate() const {
  if (!(train_fraction > 0.0 && validation_fraction > 0.0 && test_fraction > 0.0)) {
    throw ConfigError("split fractions must be positive");
  }
  if (std::abs(train_fraction + validation_fraction + test_fraction - 1.0) > 1e-9) {
    throw ConfigError("split fractions must sum to 1");
  }
}

SplitIndices split_indices(const Dataset& ds, const SplitSpec& spec) {
  spec.validate();
  SplitIndices out;
  auto assign = [&](std::vector<std::size_t> items, RngStream& rng) {
    shuffle(items, rng);
    const auto n = static_cast<double>(items.size());
    const auto n_val = static_cast<std::size_t>(std::llround(n * spec.validation_fraction));
    const auto n_test = static_cast<std::size_t>(std::llround(n * spec.test_fraction));
    if (n_val + n_test > items.size()) {
      throw ConfigError("split: fractions do not fit " + std::to_string(items.size()) + " samples");
    }
    out.validation.insert(out.validation.end(), items.begin(),
                          items.begin() + static_cast<std::ptrdiff_t>(n_val));
    out.test.insert(out.test.end(), items.begin() + static_cast<std::ptrdiff_t>(n_val),
                    items.begin() + static_cast<std::ptrdiff_t>(n_val + n_test));
    out.train.insert(out.train.end(), items.begin() + static_cast<std::ptrdiff_t>(n_val + n_test),
                     items.end());
  };

  if (spec.stratified) {
    auto groups = indices_by_class(ds);
    for (std::size_t c = 0; c < groups.size(); ++c) {
      RngStream rng(derive_seed(spec.seed, {stream_tag::kSplit, c}));
      assign(std::move(groups[c]), rng);
    }
  } else {
    std::vector<std::size_t> all(ds.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    RngStream rng(derive_seed(spec.seed, {stream_tag::kSplit}));
    assign(std::move(all), rng);
  }
  if (out.train.empty() || out.validation.empty() || out.test.empty()) {
    throw ConfigError("split: a partition would be empty for " + std::to_string(ds.size()) +
                      " samples");
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.validation.begin(), out.validation.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

Splits stratified_split(const Dataset& ds, const SplitSpec& spec) {
  const auto idx = split_indices(ds, spec);
  return {ds.subset(idx.train), ds.subset(idx.validation), ds.subset(idx.test)};
}

Dataset stratified_sample(const Dataset& ds, std::size_t count, std::uint64_t seed) {
  if (count == 0 || count > ds.size()) {
    throw ConfigError("stratified_sample: count must lie in [1, " + std::to_string(ds.size()) + "]");
  }
  auto groups = indices_by_class(ds);
  std::vector<std::size_t> chosen;
  const std::size_t classes = groups.size();
  for (std::size_t c = 0; c < classes; ++c) {
    const std::size_t want = count / classes + (c < count % classes ? 1 : 0);
    if (want > groups[c].size()) {
      throw ConfigError("stratified_sample: class " + std::to_string(c) + " has only " +
                        std::to_string(groups[c].size()) + " samples");
    }
    RngStream rng(derive_seed(seed, {stream_tag::kSplit, 1000 + c}));
    shuffle(groups[c], rng);
    chosen.insert(chosen.end(), groups[c].begin(),
                  groups[c].begin() + static_cast<std::ptrdiff_t>(want));
  }
  std::sort(chosen.begin(), chosen.end());
  return ds.subset(chosen);
}

// ---- Synthetic -------------------------------------------------------------

Dataset make_synthetic(const SyntheticSpec& spec) {
  if (spec.classes == 0 || spec.per_class == 0 || spec.channels == 0 || spec.height == 0 ||
      spec.width == 0) {
    throw ConfigError("make_synthetic: arguments must be positive");
  }
  if (!(spec.noise >= 0.0)) {
    throw ConfigError("make_synthetic: noise must be non-negative");
  }
  const std::size_t plane = spec.height * spec.width;
  const std::size_t image = spec.channels * plane;

  // Mean pattern per class: a few random low-frequency plane waves per channel.
  RngStream pattern_rng(derive_seed(spec.seed, {stream_tag::kSynthetic, 0}));
  std::vector<double> means(spec.classes * image, 0.5);
  for (std::size_t c = 0; c < spec.classes; ++c) {
    for (std::size_t ch = 0; ch < spec.channels; ++ch) {
      for (int wave = 0; wave < 3; ++wave) {
        const double amp = pattern_rng.uniform(0.05, 0.12);
        const double fx = static_cast<double>(pattern_rng.uniform_index(4));
        const double fy = static_cast<double>(pattern_rng.uniform_index(4));
        const double phase = pattern_rng.uniform(0.0, 2.0 * std::numbers::pi);
        for (std::size_t y = 0; y < spec.height; ++y) {
          for (std::size_t x = 0; x < spec.width; ++x) {
            const double t = 2.0 * std::numbers::pi *
                             (fx * static_cast<double>(x) / static_cast<double>(spec.width) +
                              fy * static_cast<double>(y) / static_cast<double>(spec.height));
            means[c * image + ch * plane + y * spec.width + x] += amp * std::sin(t + phase);
          }
        }
      }
    }
  }

  RngStream noise_rng(derive_seed(spec.seed, {stream_tag::kSynthetic, 1}));
  const std::size_t total = spec.classes * spec.per_class;
  std::vector<std::uint8_t> pixels(total * image);
  std::vector<int> labels(total);
  for (std::size_t i = 0; i < total; ++i) {
    const std::size_t c = i % spec.classes;
    labels[i] = static_cast<int>(c);
    for (std::size_t j = 0; j < image; ++j) {
      double v = means[c * image + j];
      if (spec.noise > 0.0) {
        v += spec.noise * noise_rng.normal();
      }
      v = std::clamp(v, 0.0, 1.0);
      pixels[i * image + j] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
  }
  return Dataset(spec.channels, spec.height, spec.width, spec.classes, std::move(pixels),
                 std::move(labels));
}

// ---- Checkpoints -----------------------------------------------------------

Checkpoint make_checkpoint(const Model& model, const TrainingCursor& cursor) {
  Checkpoint ckpt;
  ckpt.architecture = model.descriptor();
  for (const Tensor* p : model.parameters()) {
    ckpt.parameters.push_back(*p);
  }
  ckpt.cursor = cursor;
  return ckpt;
}

Model restore_model(const Checkpoint& ckpt) {
  Model model = Model::from_descriptor(ckpt.architecture);
  auto params = model.parameters();
  if (params.size() != ckpt.parameters.size()) {
    throw FormatError("checkpoint: parameter count does not match architecture");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->shape() != ckpt.parameters[i].shape()) {
      throw FormatError("checkpoint: parameter " + std::to_string(i) + " has shape " +
                        shape_string(ckpt.parameters[i].shape()) + ", architecture expects " +
                        shape_string(params[i]->shape()));
    }
    *params[i] = ckpt.parameters[i];
  }
  return model;
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  w.raw(kMagic);
  w.u32(ckpt.version);
  w.text(ckpt.architecture);
  w.u64(ckpt.cursor.epoch);
  w.u64(ckpt.cursor.seed);
  w.u8(static_cast<std::uint8_t>(ckpt.cursor.phase));
  w.u32(static_cast<std::uint32_t>(ckpt.parameters.size()));
  for (const Tensor& t : ckpt.parameters) {
    w.u32(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) {
      w.u64(d);
    }
    for (double v : t.values()) {
      w.f64(v);
    }
  }
  return w.take();
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kMagic.size() ||
      !std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) {
    throw FormatError("checkpoint: bad magic");
  }
  std::vector<std::uint8_t> body(bytes.begin() + static_cast<std::ptrdiff_t>(kMagic.size()),
                                 bytes.end());
  Reader r(body);
  Checkpoint ckpt;
  ckpt.version = r.u32();
  if (ckpt.version != kCheckpointVersion) {
    throw FormatError("checkpoint: unsupported version " + std::to_string(ckpt.version) +
                      " (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  ckpt.architecture = r.text(1 << 16);
  ckpt.cursor.epoch = r.u64();
  ckpt.cursor.seed = r.u64();
  const std::uint8_t phase = r.u8();
  if (phase > static_cast<std::uint8_t>(TrainingPhase::kEvolved)) {
    throw FormatError("checkpoint: unknown phase " + std::to_string(phase));
  }
  ckpt.cursor.phase = static_cast<TrainingPhase>(phase);
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t rank = r.u32();
    if (rank == 0 || rank > 8) {
      throw FormatError("checkpoint: bad tensor rank at offset " + std::to_string(r.offset()));
    }
    Shape shape(rank);
    std::size_t elements = 1;
    for (auto& d : shape) {
      d = r.u64();
      if (d == 0 || d > r.remaining()) {
        throw FormatError("checkpoint: bad tensor dimension at offset " +
                          std::to_string(r.offset()));
      }
      elements *= d;
    }
    if (elements > r.remaining() / 8) {
      throw FormatError("checkpoint: truncated tensor payload at offset " +
                        std::to_string(r.offset()));
    }
    std::vector<double> data(elements);
    for (double& v : data) {
      v = r.f64();
    }
    ckpt.parameters.emplace_back(std::move(shape), std::move(data));
  }
  if (r.remaining() != 0) {
    throw FormatError("checkpoint: " + std::to_string(r.remaining()) + " trailing bytes");
  }
  return ckpt;
}

void save_checkpoint(const fs::path& path, const Checkpoint& ckpt) {
  write_file(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const fs::path& path) {
  if (!fs::exists(path)) {
    throw FormatError(path.string() + ": checkpoint not found");
  }
  try {
    return decode_checkpoint(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace hybrid
