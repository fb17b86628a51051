#include "hybrid/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "hybrid/errors.hpp"

namespace hybrid {

namespace {

void require_finite(const Tensor& t, const char* op) {
  if (!t.all_finite()) {
    throw NumericError(std::string(op) + ": result contains non-finite values");
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

template <typename F>
Tensor zip(const Tensor& a, const Tensor& b, const char* op, F f) {
  require_same_shape(a, b, op);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = f(a[i], b[i]);
  }
  Tensor result(a.shape(), std::move(out));
  require_finite(result, op);
  return result;
}

}  // namespace

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    out << (i ? "," : "") << shape[i];
  }
  out << ']';
  return out.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {
  if (std::find(shape_.begin(), shape_.end(), 0) != shape_.end()) {
    throw DimensionError("tensor dimensions must be positive: " + shape_string(shape_));
  }
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (std::find(shape_.begin(), shape_.end(), 0) != shape_.end()) {
    throw DimensionError("tensor dimensions must be positive: " + shape_string(shape_));
  }
  if (shape_size(shape_) != data_.size()) {
    throw DimensionError("shape " + shape_string(shape_) + " does not match " +
                         std::to_string(data_.size()) + " values");
  }
}

Tensor Tensor::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty() || rows.front().empty()) {
    throw DimensionError("from_rows: empty input");
  }
  const std::size_t cols = rows.front().size();
  std::vector<double> data;
  data.reserve(rows.size() * cols);
  for (const auto& row : rows) {
    if (row.size() != cols) {
      throw DimensionError("from_rows: ragged rows");
    }
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor({rows.size(), cols}, std::move(data));
}

Tensor Tensor::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor({n}, std::move(values));
}

double& Tensor::at(std::size_t row, std::size_t col) {
  return data_[row * shape_.at(1) + col];
}

double Tensor::at(std::size_t row, std::size_t col) const {
  return data_[row * shape_.at(1) + col];
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void gemm(std::span<const double> a, bool transpose_a, std::span<const double> b, bool transpose_b,
          std::span<double> c, std::size_t rows, std::size_t inner, std::size_t cols,
          bool accumulate) {
  if (a.size() < rows * inner || b.size() < inner * cols || c.size() < rows * cols) {
    throw DimensionError("gemm: buffer too small");
  }
  if (!accumulate) {
    std::fill_n(c.begin(), rows * cols, 0.0);
  }
  const double* pa = a.data();
  const double* pb = b.data();
  double* pc = c.data();
  if (!transpose_a && !transpose_b) {
    for (std::size_t i = 0; i < rows; ++i) {
      double* crow = pc + i * cols;
      for (std::size_t k = 0; k < inner; ++k) {
        const double aik = pa[i * inner + k];
        const double* brow = pb + k * cols;
        for (std::size_t j = 0; j < cols; ++j) {
          crow[j] += aik * brow[j];
        }
      }
    }
  } else if (transpose_a && !transpose_b) {
    // a is stored inner x rows.
    for (std::size_t k = 0; k < inner; ++k) {
      const double* arow = pa + k * rows;
      const double* brow = pb + k * cols;
      for (std::size_t i = 0; i < rows; ++i) {
        const double aki = arow[i];
        double* crow = pc + i * cols;
        for (std::size_t j = 0; j < cols; ++j) {
          crow[j] += aki * brow[j];
        }
      }
    }
  } else if (!transpose_a && transpose_b) {
    // b is stored cols x inner. Four interleaved partial sums let the
    // compiler vectorize the reduction; the order is fixed, so results stay
    // deterministic.
    for (std::size_t i = 0; i < rows; ++i) {
      const double* arow = pa + i * inner;
      for (std::size_t j = 0; j < cols; ++j) {
        const double* brow = pb + j * inner;
        double part[4] = {0.0, 0.0, 0.0, 0.0};
        std::size_t k = 0;
        for (; k + 4 <= inner; k += 4) {
          part[0] += arow[k] * brow[k];
          part[1] += arow[k + 1] * brow[k + 1];
          part[2] += arow[k + 2] * brow[k + 2];
          part[3] += arow[k + 3] * brow[k + 3];
        }
        double sum = (part[0] + part[1]) + (part[2] + part[3]);
        for (; k < inner; ++k) {
          sum += arow[k] * brow[k];
        }
        pc[i * cols + j] += sum;
      }
    }
  } else {
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t j = 0; j < cols; ++j) {
        double sum = 0.0;
        for (std::size_t k = 0; k < inner; ++k) {
          sum += pa[k * rows + i] * pb[j * inner + k];
        }
        pc[i * cols + j] += sum;
      }
    }
  }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw DimensionError("matmul: operands must be rank 2");
  }
  if (a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
  }
  Tensor out({a.dim(0), b.dim(1)});
  gemm(a.values(), false, b.values(), false, out.values(), a.dim(0), a.dim(1), b.dim(1), false);
  require_finite(out, "matmul");
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  return zip(a, b, "add", [](double x, double y) { return x + y; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return zip(a, b, "sub", [](double x, double y) { return x - y; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return zip(a, b, "mul", [](double x, double y) { return x * y; });
}

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.values().begin(), a.values().end());
  for (double& v : out) {
    v *= factor;
  }
  Tensor result(a.shape(), std::move(out));
  require_finite(result, "scale");
  return result;
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_size(shape) != a.size()) {
    throw DimensionError("reshape: " + shape_string(a.shape()) + " -> " + shape_string(shape));
  }
  return Tensor(std::move(shape), std::vector<double>(a.values().begin(), a.values().end()));
}

Tensor slice(const Tensor& a, std::size_t begin, std::size_t end) {
  if (a.rank() != 1) {
    throw DimensionError("slice: tensor must be rank 1");
  }
  if (begin >= end || end > a.size()) {
    throw DimensionError("slice: invalid range [" + std::to_string(begin) + ", " +
                         std::to_string(end) + ") of " + std::to_string(a.size()));
  }
  return Tensor::vector(std::vector<double>(a.values().begin() + static_cast<std::ptrdiff_t>(begin),
                                            a.values().begin() + static_cast<std::ptrdiff_t>(end)));
}

Tensor concatenate(const std::vector<Tensor>& parts) {
  std::vector<double> out;
  for (const Tensor& part : parts) {
    if (part.rank() != 1) {
      throw DimensionError("concatenate: parts must be rank 1");
    }
    out.insert(out.end(), part.values().begin(), part.values().end());
  }
  if (out.empty()) {
    throw DimensionError("concatenate: nothing to join");
  }
  return Tensor::vector(std::move(out));
}

std::vector<std::size_t> argmax_rows(const Tensor& a) {
  if (a.rank() != 2) {
    throw DimensionError("argmax_rows: tensor must be rank 2");
  }
  const std::size_t cols = a.dim(1);
  std::vector<std::size_t> result(a.dim(0));
  for (std::size_t r = 0; r < result.size(); ++r) {
    const double* row = a.data() + r * cols;
    result[r] = static_cast<std::size_t>(std::max_element(row, row + cols) - row);
  }
  return result;
}

Tensor draw_normal(RngStream& rng, std::size_t n) {
  if (n == 0) {
    throw DimensionError("draw_normal: n must be >= 1");
  }
  std::vector<double> out(n);
  for (double& v : out) {
    v = rng.normal();
  }
  return Tensor::vector(std::move(out));
}

Tensor draw_uniform(RngStream& rng, double lo, double hi, std::size_t n) {
  if (n == 0) {
    throw DimensionError("draw_uniform: n must be >= 1");
  }
  if (!(lo <= hi)) {
    throw ConfigError("draw_uniform: lo must not exceed hi");
  }
  std::vector<double> out(n);
  for (double& v : out) {
    v = rng.uniform(lo, hi);
  }
  return Tensor::vector(std::move(out));
}

}  // namespace hybrid
