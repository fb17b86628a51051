#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "hybrid/dataset.hpp"
#include "hybrid/rng.hpp"
#include "hybrid/tensor.hpp"

namespace hybrid {

/// Flat genome of the tail dense layer: the [fan_in, classes] weight matrix
/// in row-major order followed by the bias vector.
using WeightVector = std::vector<double>;

enum class LayerKind { kConv2d, kRelu, kMaxPool2d, kFlatten, kDense };

/// A network stage. Layers hold parameters only; activations needed by the
/// backward pass are owned by the Model, so forward evaluation is const and
/// can run on several threads at once.
class Layer {
 public:
  virtual ~Layer() = default;

  virtual LayerKind kind() const = 0;
  /// Per-sample output shape for a per-sample input shape.
  virtual Shape output_shape(const Shape& input) const = 0;
  virtual Tensor forward(const Tensor& input) const = 0;
  /// Returns d(loss)/d(input) and writes parameter gradients into `grads`,
  /// which has one slot per parameter tensor.
  virtual Tensor backward(const Tensor& input, const Tensor& grad_output,
                          std::span<Tensor> grads) const = 0;
  virtual std::string descriptor() const = 0;
  virtual std::unique_ptr<Layer> clone() const = 0;

  virtual std::vector<Tensor*> parameters() { return {}; }
  virtual std::vector<const Tensor*> parameters() const { return {}; }
  virtual void initialize(RngStream& /*rng*/) {}
};

/// Square-kernel convolution, stride 1, symmetric zero padding.
class Conv2d final : public Layer {
 public:
  Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, std::size_t padding);

  LayerKind kind() const override { return LayerKind::kConv2d; }
  Shape output_shape(const Shape& input) const override;
  Tensor forward(const Tensor& input) const override;
  Tensor backward(const Tensor& input, const Tensor& grad_output,
                  std::span<Tensor> grads) const override;
  std::string descriptor() const override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Conv2d>(*this); }
  std::vector<Tensor*> parameters() override { return {&weight_, &bias_}; }
  std::vector<const Tensor*> parameters() const override { return {&weight_, &bias_}; }
  void initialize(RngStream& rng) override;

 private:
  std::size_t in_channels_;
  std::size_t out_channels_;
  std::size_t kernel_;
  std::size_t padding_;
  Tensor weight_;  // [out, in, k, k]
  Tensor bias_;    // [out]
};

class Relu final : public Layer {
 public:
  LayerKind kind() const override { return LayerKind::kRelu; }
  Shape output_shape(const Shape& input) const override { return input; }
  Tensor forward(const Tensor& input) const override;
  Tensor backward(const Tensor& input, const Tensor& grad_output,
                  std::span<Tensor> grads) const override;
  std::string descriptor() const override { return "relu"; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Relu>(*this); }
};

/// Non-overlapping max pooling with window = stride. Ties route the gradient
/// to the first maximum in scan order.
class MaxPool2d final : public Layer {
 public:
  explicit MaxPool2d(std::size_t window);

  LayerKind kind() const override { return LayerKind::kMaxPool2d; }
  Shape output_shape(const Shape& input) const override;
  Tensor forward(const Tensor& input) const override;
  Tensor backward(const Tensor& input, const Tensor& grad_output,
                  std::span<Tensor> grads) const override;
  std::string descriptor() const override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<MaxPool2d>(*this); }

 private:
  std::size_t window_;
};

class Flatten final : public Layer {
 public:
  LayerKind kind() const override { return LayerKind::kFlatten; }
  Shape output_shape(const Shape& input) const override { return {shape_size(input)}; }
  Tensor forward(const Tensor& input) const override;
  Tensor backward(const Tensor& input, const Tensor& grad_output,
                  std::span<Tensor> grads) const override;
  std::string descriptor() const override { return "flatten"; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Flatten>(*this); }
};

/// y = x W + b with W stored [fan_in, fan_out].
class Dense final : public Layer {
 public:
  Dense(std::size_t fan_in, std::size_t fan_out);

  LayerKind kind() const override { return LayerKind::kDense; }
  Shape output_shape(const Shape& input) const override;
  Tensor forward(const Tensor& input) const override;
  Tensor backward(const Tensor& input, const Tensor& grad_output,
                  std::span<Tensor> grads) const override;
  std::string descriptor() const override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Dense>(*this); }
  std::vector<Tensor*> parameters() override { return {&weight_, &bias_}; }
  std::vector<const Tensor*> parameters() const override { return {&weight_, &bias_}; }
  void initialize(RngStream& rng) override;

  std::size_t fan_in() const { return fan_in_; }
  std::size_t fan_out() const { return fan_out_; }
  std::size_t genome_length() const { return fan_in_ * fan_out_ + fan_out_; }

  /// Scores for rank-2 features using a flat genome in WeightVector layout.
  static Tensor apply(const Tensor& features, std::span<const double> genome, std::size_t fan_out);

 private:
  std::size_t fan_in_;
  std::size_t fan_out_;
  Tensor weight_;
  Tensor bias_;
};

/// Parameter gradients in Model::parameters() order, plus the batch loss.
struct Gradients {
  std::vector<Tensor> tensors;
  double loss = 0.0;
};

struct SoftmaxLoss {
  double loss;    // mean cross-entropy over the batch
  Tensor grad;    // d(loss)/d(scores)
};

SoftmaxLoss softmax_cross_entropy(const Tensor& scores, std::span<const int> labels);

/// Layered classifier ending in a dense "tail" whose parameters form the
/// evolvable WeightVector. Copying a model deep-copies its layers.
class Model {
 public:
  Model(Shape input_shape, std::vector<std::unique_ptr<Layer>> layers);
  Model(const Model& other);
  Model& operator=(const Model& other);
  Model(Model&&) noexcept = default;
  Model& operator=(Model&&) noexcept = default;

  /// conv(C->16,3x3,pad 1), relu, maxpool 2, conv(16->32,3x3,pad 1), relu,
  /// maxpool 2, flatten, dense(32*(H/4)*(W/4) -> classes).
  static Model small_convnet(std::size_t channels, std::size_t height, std::size_t width,
                             std::size_t classes);
  /// Parses the text produced by descriptor().
  static Model from_descriptor(const std::string& text);
  std::string descriptor() const;

  void initialize(RngStream& rng);

  const Shape& input_shape() const { return input_shape_; }
  std::size_t classes() const;
  std::size_t layer_count() const { return layers_.size(); }
  const Layer& layer(std::size_t i) const { return *layers_.at(i); }
  const Dense& tail() const;

  std::vector<Tensor*> parameters();
  std::vector<const Tensor*> parameters() const;

  /// Scores [batch, classes]; keeps the activations for backward().
  Tensor forward(const Tensor& batch);
  /// Scores without touching cached state.
  Tensor predict(const Tensor& batch) const;
  /// Penultimate features (input to the tail layer), [batch, fan_in].
  Tensor features(const Tensor& batch) const;
  /// Gradient of the mean cross-entropy of the last forward() batch.
  Gradients backward(std::span<const int> labels);

  WeightVector tail_weights() const;
  void set_tail_weights(std::span<const double> genome);

 private:
  void check_input(const Tensor& batch) const;

  Shape input_shape_;
  std::vector<std::unique_ptr<Layer>> layers_;
  std::vector<Tensor> activations_;  // input to each layer, then scores
};

void sgd_step(Model& model, const Gradients& gradients, double learning_rate);

/// Fraction of samples whose argmax score equals the label.
double evaluate(const Model& model, const Dataset& split, std::size_t batch_size = 256);

/// Fraction of rows whose first-maximum column equals the label.
double accuracy_from_scores(const Tensor& scores, std::span<const int> labels);

}  // namespace hybrid
