#include "hybrid/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "hybrid/errors.hpp"

namespace hybrid {

namespace {

void im2col(const double* image, std::size_t channels, std::size_t height, std::size_t width,
            std::size_t kernel, std::size_t padding, std::size_t out_h, std::size_t out_w,
            double* cols) {
  const auto pad = static_cast<std::ptrdiff_t>(padding);
  const std::size_t spatial = out_h * out_w;
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t ky = 0; ky < kernel; ++ky) {
      for (std::size_t kx = 0; kx < kernel; ++kx) {
        double* row = cols + ((c * kernel + ky) * kernel + kx) * spatial;
        for (std::size_t oy = 0; oy < out_h; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy + ky) - pad;
          double* dst = row + oy * out_w;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(height)) {
            std::fill_n(dst, out_w, 0.0);
            continue;
          }
          const double* src = image + (c * height + static_cast<std::size_t>(iy)) * width;
          for (std::size_t ox = 0; ox < out_w; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox + kx) - pad;
            dst[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(width))
                          ? 0.0
                          : src[static_cast<std::size_t>(ix)];
          }
        }
      }
    }
  }
}

void col2im_add(const double* cols, std::size_t channels, std::size_t height, std::size_t width,
                std::size_t kernel, std::size_t padding, std::size_t out_h, std::size_t out_w,
                double* image) {
  const auto pad = static_cast<std::ptrdiff_t>(padding);
  const std::size_t spatial = out_h * out_w;
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t ky = 0; ky < kernel; ++ky) {
      for (std::size_t kx = 0; kx < kernel; ++kx) {
        const double* row = cols + ((c * kernel + ky) * kernel + kx) * spatial;
        for (std::size_t oy = 0; oy < out_h; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy + ky) - pad;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(height)) {
            continue;
          }
          double* dst = image + (c * height + static_cast<std::size_t>(iy)) * width;
          for (std::size_t ox = 0; ox < out_w; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox + kx) - pad;
            if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(width)) {
              dst[static_cast<std::size_t>(ix)] += row[oy * out_w + ox];
            }
          }
        }
      }
    }
  }
}

void he_normal(Tensor& t, std::size_t fan_in, RngStream& rng) {
  const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (double& v : t.values()) {
    v = rng.normal() * stddev;
  }
}

// Shared by Dense::forward and Dense::apply so that fitness scores computed
// from cached features are bit-identical to a full forward pass.
Tensor affine(const Tensor& features, std::span<const double> weight, std::span<const double> bias,
              std::size_t fan_out) {
  if (features.rank() != 2) {
    throw DimensionError("dense: expected rank-2 input, got " + shape_string(features.shape()));
  }
  const std::size_t batch = features.dim(0);
  const std::size_t fan_in = features.dim(1);
  if (weight.size() != fan_in * fan_out || bias.size() != fan_out) {
    throw DimensionError("dense: parameter sizes do not match input " +
                         shape_string(features.shape()));
  }
  Tensor out({batch, fan_out});
  gemm(features.values(), false, weight, false, out.values(), batch, fan_in, fan_out, false);
  for (std::size_t r = 0; r < batch; ++r) {
    double* row = out.data() + r * fan_out;
    for (std::size_t j = 0; j < fan_out; ++j) {
      row[j] += bias[j];
    }
  }
  return out;
}

std::size_t require_chw(const Tensor& input, std::size_t channels, const char* who) {
  if (input.rank() != 4 || input.dim(1) != channels) {
    throw DimensionError(std::string(who) + ": unexpected input shape " +
                         shape_string(input.shape()));
  }
  return input.dim(0);
}

}  // namespace

// ---- Conv2d ----------------------------------------------------------------

Conv2d::Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
               std::size_t padding)
    : in_channels_(in_channels),
      out_channels_(out_channels),
      kernel_(kernel),
      padding_(padding),
      weight_({out_channels, in_channels, kernel, kernel}),
      bias_({out_channels}) {}

Shape Conv2d::output_shape(const Shape& input) const {
  if (input.size() != 3 || input[0] != in_channels_ || input[1] + 2 * padding_ < kernel_ ||
      input[2] + 2 * padding_ < kernel_) {
    throw DimensionError("conv2d: incompatible input shape " + shape_string(input));
  }
  return {out_channels_, input[1] + 2 * padding_ - kernel_ + 1, input[2] + 2 * padding_ - kernel_ + 1};
}

Tensor Conv2d::forward(const Tensor& input) const {
  const std::size_t batch = require_chw(input, in_channels_, "conv2d");
  const std::size_t height = input.dim(2);
  const std::size_t width = input.dim(3);
  const Shape out_shape = output_shape({in_channels_, height, width});
  const std::size_t out_h = out_shape[1];
  const std::size_t out_w = out_shape[2];
  const std::size_t spatial = out_h * out_w;
  const std::size_t patch = in_channels_ * kernel_ * kernel_;

  Tensor out({batch, out_channels_, out_h, out_w});
  std::vector<double> cols(patch * spatial);
  for (std::size_t b = 0; b < batch; ++b) {
    im2col(input.data() + b * in_channels_ * height * width, in_channels_, height, width, kernel_,
           padding_, out_h, out_w, cols.data());
    std::span<double> dst(out.data() + b * out_channels_ * spatial, out_channels_ * spatial);
    gemm(weight_.values(), false, cols, false, dst, out_channels_, patch, spatial, false);
    for (std::size_t o = 0; o < out_channels_; ++o) {
      const double bias = bias_[o];
      for (std::size_t s = 0; s < spatial; ++s) {
        dst[o * spatial + s] += bias;
      }
    }
  }
  return out;
}

Tensor Conv2d::backward(const Tensor& input, const Tensor& grad_output,
                        std::span<Tensor> grads) const {
  const std::size_t batch = require_chw(input, in_channels_, "conv2d");
  const std::size_t height = input.dim(2);
  const std::size_t width = input.dim(3);
  const std::size_t out_h = grad_output.dim(2);
  const std::size_t out_w = grad_output.dim(3);
  const std::size_t spatial = out_h * out_w;
  const std::size_t patch = in_channels_ * kernel_ * kernel_;
  const std::size_t image = in_channels_ * height * width;

  Tensor& grad_weight = grads[0];
  Tensor& grad_bias = grads[1];
  std::fill(grad_weight.values().begin(), grad_weight.values().end(), 0.0);
  std::fill(grad_bias.values().begin(), grad_bias.values().end(), 0.0);

  Tensor grad_input(input.shape());
  std::vector<double> cols(patch * spatial);
  std::vector<double> grad_cols(patch * spatial);
  for (std::size_t b = 0; b < batch; ++b) {
    im2col(input.data() + b * image, in_channels_, height, width, kernel_, padding_, out_h, out_w,
           cols.data());
    std::span<const double> dout(grad_output.data() + b * out_channels_ * spatial,
                                 out_channels_ * spatial);
    gemm(dout, false, cols, true, grad_weight.values(), out_channels_, spatial, patch, true);
    for (std::size_t o = 0; o < out_channels_; ++o) {
      double sum = 0.0;
      for (std::size_t s = 0; s < spatial; ++s) {
        sum += dout[o * spatial + s];
      }
      grad_bias[o] += sum;
    }
    gemm(weight_.values(), true, dout, false, grad_cols, patch, out_channels_, spatial, false);
    col2im_add(grad_cols.data(), in_channels_, height, width, kernel_, padding_, out_h, out_w,
               grad_input.data() + b * image);
  }
  return grad_input;
}

std::string Conv2d::descriptor() const {
  std::ostringstream out;
  out << "conv2d " << in_channels_ << ' ' << out_channels_ << ' ' << kernel_ << ' ' << padding_;
  return out.str();
}

void Conv2d::initialize(RngStream& rng) {
  he_normal(weight_, in_channels_ * kernel_ * kernel_, rng);
  std::fill(bias_.values().begin(), bias_.values().end(), 0.0);
}

// ---- Relu ------------------------------------------------------------------

Tensor Relu::forward(const Tensor& input) const {
  Tensor out = input;
  for (double& v : out.values()) {
    v = v > 0.0 ? v : 0.0;
  }
  return out;
}

Tensor Relu::backward(const Tensor& input, const Tensor& grad_output, std::span<Tensor>) const {
  Tensor grad = grad_output;
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!(input[i] > 0.0)) {
      grad[i] = 0.0;
    }
  }
  return grad;
}

// ---- MaxPool2d -------------------------------------------------------------

MaxPool2d::MaxPool2d(std::size_t window) : window_(window) {
  if (window == 0) {
    throw ConfigError("maxpool2d: window must be positive");
  }
}

Shape MaxPool2d::output_shape(const Shape& input) const {
  if (input.size() != 3 || input[1] < window_ || input[2] < window_) {
    throw DimensionError("maxpool2d: incompatible input shape " + shape_string(input));
  }
  return {input[0], input[1] / window_, input[2] / window_};
}

Tensor MaxPool2d::forward(const Tensor& input) const {
  if (input.rank() != 4) {
    throw DimensionError("maxpool2d: expected rank-4 input");
  }
  const std::size_t planes = input.dim(0) * input.dim(1);
  const std::size_t height = input.dim(2);
  const std::size_t width = input.dim(3);
  const std::size_t out_h = height / window_;
  const std::size_t out_w = width / window_;
  Tensor out({input.dim(0), input.dim(1), out_h, out_w});
  for (std::size_t p = 0; p < planes; ++p) {
    const double* src = input.data() + p * height * width;
    double* dst = out.data() + p * out_h * out_w;
    for (std::size_t oy = 0; oy < out_h; ++oy) {
      for (std::size_t ox = 0; ox < out_w; ++ox) {
        double best = src[(oy * window_) * width + ox * window_];
        for (std::size_t dy = 0; dy < window_; ++dy) {
          for (std::size_t dx = 0; dx < window_; ++dx) {
            best = std::max(best, src[(oy * window_ + dy) * width + ox * window_ + dx]);
          }
        }
        dst[oy * out_w + ox] = best;
      }
    }
  }
  return out;
}

Tensor MaxPool2d::backward(const Tensor& input, const Tensor& grad_output, std::span<Tensor>) const {
  const std::size_t planes = input.dim(0) * input.dim(1);
  const std::size_t height = input.dim(2);
  const std::size_t width = input.dim(3);
  const std::size_t out_h = height / window_;
  const std::size_t out_w = width / window_;
  Tensor grad(input.shape());
  for (std::size_t p = 0; p < planes; ++p) {
    const double* src = input.data() + p * height * width;
    const double* dout = grad_output.data() + p * out_h * out_w;
    double* dst = grad.data() + p * height * width;
    for (std::size_t oy = 0; oy < out_h; ++oy) {
      for (std::size_t ox = 0; ox < out_w; ++ox) {
        std::size_t best_index = (oy * window_) * width + ox * window_;
        for (std::size_t dy = 0; dy < window_; ++dy) {
          for (std::size_t dx = 0; dx < window_; ++dx) {
            const std::size_t idx = (oy * window_ + dy) * width + ox * window_ + dx;
            if (src[idx] > src[best_index]) {
              best_index = idx;
            }
          }
        }
        dst[best_index] += dout[oy * out_w + ox];
      }
    }
  }
  return grad;
}

std::string MaxPool2d::descriptor() const { return "maxpool2d " + std::to_string(window_); }

// ---- Flatten ---------------------------------------------------------------

Tensor Flatten::forward(const Tensor& input) const {
  return reshape(input, {input.dim(0), input.size() / input.dim(0)});
}

Tensor Flatten::backward(const Tensor& input, const Tensor& grad_output, std::span<Tensor>) const {
  return reshape(grad_output, input.shape());
}

// ---- Dense -----------------------------------------------------------------

Dense::Dense(std::size_t fan_in, std::size_t fan_out)
    : fan_in_(fan_in), fan_out_(fan_out), weight_({fan_in, fan_out}), bias_({fan_out}) {}

Shape Dense::output_shape(const Shape& input) const {
  if (input.size() != 1 || input[0] != fan_in_) {
    throw DimensionError("dense: expected input [" + std::to_string(fan_in_) + "], got " +
                         shape_string(input));
  }
  return {fan_out_};
}

Tensor Dense::forward(const Tensor& input) const {
  return affine(input, weight_.values(), bias_.values(), fan_out_);
}

Tensor Dense::apply(const Tensor& features, std::span<const double> genome, std::size_t fan_out) {
  if (features.rank() != 2 || genome.size() != features.dim(1) * fan_out + fan_out) {
    throw DimensionError("dense: genome length " + std::to_string(genome.size()) +
                         " does not fit features " + shape_string(features.shape()));
  }
  const std::size_t split = features.dim(1) * fan_out;
  return affine(features, genome.first(split), genome.subspan(split), fan_out);
}

Tensor Dense::backward(const Tensor& input, const Tensor& grad_output,
                       std::span<Tensor> grads) const {
  const std::size_t batch = input.dim(0);
  gemm(input.values(), true, grad_output.values(), false, grads[0].values(), fan_in_, batch,
       fan_out_, false);
  Tensor& grad_bias = grads[1];
  std::fill(grad_bias.values().begin(), grad_bias.values().end(), 0.0);
  for (std::size_t r = 0; r < batch; ++r) {
    for (std::size_t j = 0; j < fan_out_; ++j) {
      grad_bias[j] += grad_output[r * fan_out_ + j];
    }
  }
  Tensor grad_input({batch, fan_in_});
  gemm(grad_output.values(), false, weight_.values(), true, grad_input.values(), batch, fan_out_,
       fan_in_, false);
  return grad_input;
}

std::string Dense::descriptor() const {
  return "dense " + std::to_string(fan_in_) + " " + std::to_string(fan_out_);
}

void Dense::initialize(RngStream& rng) {
  he_normal(weight_, fan_in_, rng);
  std::fill(bias_.values().begin(), bias_.values().end(), 0.0);
}

// ---- Loss ------------------------------------------------------------------

SoftmaxLoss softmax_cross_entropy(const Tensor& scores, std::span<const int> labels) {
  if (scores.rank() != 2 || scores.dim(0) != labels.size()) {
    throw DimensionError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                         " labels for scores " + shape_string(scores.shape()));
  }
  const std::size_t batch = scores.dim(0);
  const std::size_t classes = scores.dim(1);
  Tensor grad(scores.shape());
  double total = 0.0;
  for (std::size_t r = 0; r < batch; ++r) {
    const double* row = scores.data() + r * classes;
    double* grow = grad.data() + r * classes;
    const auto label = static_cast<std::size_t>(labels[r]);
    if (labels[r] < 0 || label >= classes) {
      throw InputError("softmax_cross_entropy: label out of range");
    }
    const double peak = *std::max_element(row, row + classes);
    double sum = 0.0;
    for (std::size_t j = 0; j < classes; ++j) {
      grow[j] = std::exp(row[j] - peak);
      sum += grow[j];
    }
    total += std::log(sum) + peak - row[label];
    for (std::size_t j = 0; j < classes; ++j) {
      grow[j] = (grow[j] / sum - (j == label ? 1.0 : 0.0)) / static_cast<double>(batch);
    }
  }
  return {total / static_cast<double>(batch), std::move(grad)};
}

// ---- Model -----------------------------------------------------------------

Model::Model(Shape input_shape, std::vector<std::unique_ptr<Layer>> layers)
    : input_shape_(std::move(input_shape)), layers_(std::move(layers)) {
  if (layers_.empty() || layers_.back()->kind() != LayerKind::kDense) {
    throw ConfigError("model must end in a dense tail layer");
  }
  Shape shape = input_shape_;
  for (const auto& layer : layers_) {
    shape = layer->output_shape(shape);
  }
}

Model::Model(const Model& other) : input_shape_(other.input_shape_) {
  layers_.reserve(other.layers_.size());
  for (const auto& layer : other.layers_) {
    layers_.push_back(layer->clone());
  }
}

Model& Model::operator=(const Model& other) {
  if (this != &other) {
    Model copy(other);
    *this = std::move(copy);
  }
  return *this;
}

Model Model::small_convnet(std::size_t channels, std::size_t height, std::size_t width,
                           std::size_t classes) {
  std::vector<std::unique_ptr<Layer>> layers;
  layers.push_back(std::make_unique<Conv2d>(channels, 16, 3, 1));
  layers.push_back(std::make_unique<Relu>());
  layers.push_back(std::make_unique<MaxPool2d>(2));
  layers.push_back(std::make_unique<Conv2d>(16, 32, 3, 1));
  layers.push_back(std::make_unique<Relu>());
  layers.push_back(std::make_unique<MaxPool2d>(2));
  layers.push_back(std::make_unique<Flatten>());
  layers.push_back(std::make_unique<Dense>(32 * (height / 4) * (width / 4), classes));
  return Model({channels, height, width}, std::move(layers));
}

std::string Model::descriptor() const {
  std::ostringstream out;
  out << "input";
  for (std::size_t d : input_shape_) {
    out << ' ' << d;
  }
  for (const auto& layer : layers_) {
    out << "; " << layer->descriptor();
  }
  return out.str();
}

Model Model::from_descriptor(const std::string& text) {
  std::vector<std::string> parts;
  std::string current;
  for (char ch : text) {
    if (ch == ';') {
      parts.push_back(current);
      current.clear();
    } else {
      current += ch;
    }
  }
  parts.push_back(current);

  Shape input;
  std::vector<std::unique_ptr<Layer>> layers;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    std::istringstream in(parts[i]);
    std::string name;
    in >> name;
    std::vector<std::size_t> args;
    std::size_t value = 0;
    while (in >> value) {
      args.push_back(value);
    }
    if (!in.eof()) {
      throw FormatError("model descriptor: bad arguments in '" + parts[i] + "'");
    }
    auto expect = [&](std::size_t n) {
      if (args.size() != n) {
        throw FormatError("model descriptor: '" + name + "' expects " + std::to_string(n) +
                          " arguments");
      }
    };
    if (i == 0) {
      if (name != "input" || args.empty()) {
        throw FormatError("model descriptor must start with 'input'");
      }
      input = args;
    } else if (name == "conv2d") {
      expect(4);
      layers.push_back(std::make_unique<Conv2d>(args[0], args[1], args[2], args[3]));
    } else if (name == "relu") {
      expect(0);
      layers.push_back(std::make_unique<Relu>());
    } else if (name == "maxpool2d") {
      expect(1);
      layers.push_back(std::make_unique<MaxPool2d>(args[0]));
    } else if (name == "flatten") {
      expect(0);
      layers.push_back(std::make_unique<Flatten>());
    } else if (name == "dense") {
      expect(2);
      layers.push_back(std::make_unique<Dense>(args[0], args[1]));
    } else {
      throw FormatError("model descriptor: unknown layer '" + name + "'");
    }
  }
  try {
    return Model(std::move(input), std::move(layers));
  } catch (const DimensionError& e) {
    throw FormatError(std::string("model descriptor: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("model descriptor: ") + e.what());
  }
}

void Model::initialize(RngStream& rng) {
  for (auto& layer : layers_) {
    layer->initialize(rng);
  }
  activations_.clear();
}

std::size_t Model::classes() const { return tail().fan_out(); }

const Dense& Model::tail() const { return static_cast<const Dense&>(*layers_.back()); }

std::vector<Tensor*> Model::parameters() {
  std::vector<Tensor*> out;
  for (auto& layer : layers_) {
    for (Tensor* p : layer->parameters()) {
      out.push_back(p);
    }
  }
  return out;
}

std::vector<const Tensor*> Model::parameters() const {
  std::vector<const Tensor*> out;
  for (const auto& layer : layers_) {
    for (const Tensor* p : std::as_const(*layer).parameters()) {
      out.push_back(p);
    }
  }
  return out;
}

void Model::check_input(const Tensor& batch) const {
  if (batch.rank() != input_shape_.size() + 1 ||
      !std::equal(input_shape_.begin(), input_shape_.end(), batch.shape().begin() + 1)) {
    throw DimensionError("model expects samples of shape " + shape_string(input_shape_) +
                         ", got batch " + shape_string(batch.shape()));
  }
}

Tensor Model::forward(const Tensor& batch) {
  check_input(batch);
  activations_.clear();
  activations_.reserve(layers_.size() + 1);
  activations_.push_back(batch);
  for (const auto& layer : layers_) {
    activations_.push_back(layer->forward(activations_.back()));
  }
  return activations_.back();
}

Tensor Model::predict(const Tensor& batch) const {
  return tail().forward(features(batch));
}

Tensor Model::features(const Tensor& batch) const {
  check_input(batch);
  Tensor x = batch;
  for (std::size_t i = 0; i + 1 < layers_.size(); ++i) {
    x = layers_[i]->forward(x);
  }
  if (x.rank() != 2) {
    x = reshape(x, {x.dim(0), x.size() / x.dim(0)});
  }
  return x;
}

Gradients Model::backward(std::span<const int> labels) {
  if (activations_.empty()) {
    throw StateError("backward called before forward");
  }
  SoftmaxLoss loss = softmax_cross_entropy(activations_.back(), labels);

  Gradients result;
  result.loss = loss.loss;
  for (const Tensor* p : std::as_const(*this).parameters()) {
    result.tensors.emplace_back(p->shape());
  }
  std::size_t slot = result.tensors.size();
  Tensor grad = std::move(loss.grad);
  for (std::size_t i = layers_.size(); i-- > 0;) {
    const std::size_t count = std::as_const(*layers_[i]).parameters().size();
    slot -= count;
    std::span<Tensor> grads(result.tensors.data() + slot, count);
    grad = layers_[i]->backward(activations_[i], grad, grads);
  }
  activations_.clear();
  return result;
}

WeightVector Model::tail_weights() const {
  const auto params = std::as_const(*layers_.back()).parameters();
  WeightVector out;
  out.reserve(tail().genome_length());
  out.insert(out.end(), params[0]->values().begin(), params[0]->values().end());
  out.insert(out.end(), params[1]->values().begin(), params[1]->values().end());
  return out;
}

void Model::set_tail_weights(std::span<const double> genome) {
  if (genome.size() != tail().genome_length()) {
    throw DimensionError("tail genome length " + std::to_string(genome.size()) + ", expected " +
                         std::to_string(tail().genome_length()));
  }
  auto params = layers_.back()->parameters();
  const std::size_t split = params[0]->size();
  std::copy(genome.begin(), genome.begin() + static_cast<std::ptrdiff_t>(split),
            params[0]->values().begin());
  std::copy(genome.begin() + static_cast<std::ptrdiff_t>(split), genome.end(),
            params[1]->values().begin());
}

void sgd_step(Model& model, const Gradients& gradients, double learning_rate) {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning rate must be a finite non-negative number");
  }
  auto params = model.parameters();
  if (gradients.tensors.size() != params.size()) {
    throw DimensionError("sgd_step: gradient count does not match parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (gradients.tensors[i].shape() != params[i]->shape()) {
      throw DimensionError("sgd_step: gradient shape mismatch at parameter " + std::to_string(i));
    }
    if (!gradients.tensors[i].all_finite()) {
      throw NumericError("sgd_step: non-finite gradient at parameter " + std::to_string(i));
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto dst = params[i]->values();
    auto src = gradients.tensors[i].values();
    for (std::size_t j = 0; j < dst.size(); ++j) {
      dst[j] -= learning_rate * src[j];
    }
  }
}

double accuracy_from_scores(const Tensor& scores, std::span<const int> labels) {
  const auto predicted = argmax_rows(scores);
  if (predicted.size() != labels.size()) {
    throw DimensionError("accuracy: score rows do not match labels");
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    correct += predicted[i] == static_cast<std::size_t>(labels[i]) ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

double evaluate(const Model& model, const Dataset& split, std::size_t batch_size) {
  if (split.empty()) {
    throw InputError("evaluate: empty split");
  }
  if (batch_size == 0) {
    throw ConfigError("evaluate: batch size must be positive");
  }
  std::size_t correct = 0;
  std::vector<std::size_t> indices;
  for (std::size_t start = 0; start < split.size(); start += batch_size) {
    const std::size_t end = std::min(split.size(), start + batch_size);
    indices.resize(end - start);
    std::iota(indices.begin(), indices.end(), start);
    const auto predicted = argmax_rows(model.predict(split.batch(indices)));
    for (std::size_t i = 0; i < predicted.size(); ++i) {
      correct += predicted[i] == static_cast<std::size_t>(split.labels()[start + i]) ? 1 : 0;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(split.size());
}

}  // namespace hybrid
