#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "hybrid/rng.hpp"

namespace hybrid {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major array of doubles. Operations return new tensors and never
/// mutate their inputs. Public operations reject non-finite results with a
/// NumericError.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor from_rows(const std::vector<std::vector<double>>& rows);
  static Tensor vector(std::vector<double> values);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t row, std::size_t col);
  double at(std::size_t row, std::size_t col) const;

  bool all_finite() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor reshape(const Tensor& a, Shape shape);
/// Elements [begin, end) of a rank-1 tensor.
Tensor slice(const Tensor& a, std::size_t begin, std::size_t end);
Tensor concatenate(const std::vector<Tensor>& parts);
/// Index of the first maximum along the last axis of a rank-2 tensor.
std::vector<std::size_t> argmax_rows(const Tensor& a);

Tensor draw_normal(RngStream& rng, std::size_t n);
Tensor draw_uniform(RngStream& rng, double lo, double hi, std::size_t n);

/// C (+)= op(A) * op(B) over raw row-major buffers, where op transposes when
/// the matching flag is set. op(A) is rows x inner, op(B) is inner x cols.
void gemm(std::span<const double> a, bool transpose_a, std::span<const double> b,
          bool transpose_b, std::span<double> c, std::size_t rows, std::size_t inner,
          std::size_t cols, bool accumulate);

}  // namespace hybrid
