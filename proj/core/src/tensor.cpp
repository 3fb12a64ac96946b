#include "kpff/tensor.hpp"

#include <cmath>
#include <sstream>
#include <utility>

namespace kpff {

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t checked_element_count(const Shape& shape) {
  if (shape.empty() || shape.size() > 4) {
    throw ShapeError("tensor rank must be 1..4, got shape " + shape_to_string(shape));
  }
  std::size_t count = 1;
  for (auto extent : shape) {
    if (extent == 0) {
      throw ShapeError("tensor extents must be >= 1, got shape " + shape_to_string(shape));
    }
    count *= extent;
  }
  return count;
}

Tensor::Tensor(Shape shape)
    : shape_(std::move(shape)), data_(checked_element_count(shape_), 0.0) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (checked_element_count(shape_) != data_.size()) {
    throw ShapeError("shape " + shape_to_string(shape_) + " does not match " +
                     std::to_string(data_.size()) + " values");
  }
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::vector<double>(values));
}

Tensor Tensor::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor({n}, std::move(values));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t m = rows.size();
  const std::size_t n = m ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(m * n);
  for (const auto& row : rows) {
    if (row.size() != n) throw ShapeError("ragged matrix literal");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor({m, n}, std::move(data));
}

void Tensor::fill(double value) {
  for (auto& x : data_) x = value;
}

Tensor Tensor::reshaped(Shape shape) const {
  return Tensor(std::move(shape), data_);
}

Tensor zeros(const Shape& shape) { return Tensor(shape); }

Tensor identity(std::size_t n) {
  Tensor out({n, n});
  for (std::size_t i = 0; i < n; ++i) out.at(i, i) = 1.0;
  return out;
}

void require_shape(const Tensor& t, const Shape& expected, std::string_view what) {
  if (t.shape() != expected) {
    throw ShapeError(std::string(what) + ": expected shape " + shape_to_string(expected) +
                     ", got " + shape_to_string(t.shape()));
  }
}

bool all_finite(std::span<const double> values) noexcept {
  for (double v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void require_finite(const Tensor& t, std::string_view what) {
  if (!all_finite(t.values())) {
    throw NumericError(std::string(what) + ": non-finite value");
  }
}

Tensor elementwise_add(const Tensor& a, const Tensor& b) {
  require_shape(b, a.shape(), "elementwise_add");
  Tensor out = a;
  auto o = out.values();
  auto bv = b.values();
  for (std::size_t k = 0; k < o.size(); ++k) o[k] += bv[k];
  require_finite(out, "elementwise_add");
  return out;
}

void add_into(Tensor& acc, const Tensor& b) {
  require_shape(b, acc.shape(), "add_into");
  auto o = acc.values();
  auto bv = b.values();
  for (std::size_t k = 0; k < o.size(); ++k) o[k] += bv[k];
}

Tensor scale(const Tensor& a, double s) {
  if (!std::isfinite(s)) throw NumericError("scale: non-finite factor");
  Tensor out = a;
  for (auto& x : out.values()) x *= s;
  require_finite(out, "scale");
  return out;
}

Tensor matvec(const Tensor& m, const Tensor& v) {
  if (m.rank() != 2 || v.rank() != 1) {
    throw ShapeError("matvec: expected rank-2 matrix and rank-1 vector, got " +
                     shape_to_string(m.shape()) + " and " + shape_to_string(v.shape()));
  }
  const std::size_t rows = m.extent(0);
  const std::size_t cols = m.extent(1);
  if (v.size() != cols) {
    throw ShapeError("matvec: matrix " + shape_to_string(m.shape()) + " cannot multiply vector " +
                     shape_to_string(v.shape()));
  }
  Tensor out({rows});
  const auto md = m.values();
  const auto vd = v.values();
  for (std::size_t i = 0; i < rows; ++i) {
    double acc = 0.0;
    const double* row = md.data() + i * cols;
    for (std::size_t j = 0; j < cols; ++j) acc += row[j] * vd[j];
    out[i] = acc;
  }
  require_finite(out, "matvec");
  return out;
}

}  // namespace kpff
