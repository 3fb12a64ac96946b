#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace kpff {

/// Raised when operand shapes do not line up. Shapes are never broadcast.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when an operation would produce or consume NaN/Inf.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& shape);

/// Dense row-major array of doubles with rank 1 to 4.
///
/// A default-constructed Tensor is an empty placeholder (rank 0, no data);
/// every other constructor enforces `product(shape) == size()` and
/// `1 <= rank <= 4` with all extents >= 1.
class Tensor {
 public:
  Tensor() = default;

  /// All-zero tensor.
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor vector(std::initializer_list<double> values);
  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t extent(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<const double> values() const noexcept { return data_; }
  std::span<double> values() noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }

  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }

  // Row-major element access by multi-index. Unchecked apart from rank.
  double& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  double at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
  double& at(std::size_t c, std::size_t h, std::size_t w) {
    return data_[(c * shape_[1] + h) * shape_[2] + w];
  }
  double at(std::size_t c, std::size_t h, std::size_t w) const {
    return data_[(c * shape_[1] + h) * shape_[2] + w];
  }
  double& at(std::size_t a, std::size_t b, std::size_t c, std::size_t d) {
    return data_[((a * shape_[1] + b) * shape_[2] + c) * shape_[3] + d];
  }
  double at(std::size_t a, std::size_t b, std::size_t c, std::size_t d) const {
    return data_[((a * shape_[1] + b) * shape_[2] + c) * shape_[3] + d];
  }

  void fill(double value);

  /// Same data viewed under a new shape of equal element count.
  Tensor reshaped(Shape shape) const;

  friend bool operator==(const Tensor& a, const Tensor& b) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

/// Number of elements a shape describes; throws ShapeError on a zero extent
/// or a rank outside 1..4.
std::size_t checked_element_count(const Shape& shape);

Tensor zeros(const Shape& shape);
Tensor identity(std::size_t n);

Tensor elementwise_add(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor matvec(const Tensor& m, const Tensor& v);

/// `acc += b` in place; shapes must match exactly.
void add_into(Tensor& acc, const Tensor& b);

bool all_finite(std::span<const double> values) noexcept;
/// Throws NumericError naming `what` when any entry is NaN/Inf.
void require_finite(const Tensor& t, std::string_view what);

void require_shape(const Tensor& t, const Shape& expected, std::string_view what);

}  // namespace kpff
