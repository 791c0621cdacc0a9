#include "dnas3d/array.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dnas3d/errors.hpp"

namespace dnas3d {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

static void check_positive(const Shape& shape) {
  if (shape.empty()) throw DimensionError("array shape must have rank >= 1");
  for (auto d : shape)
    if (d == 0) throw DimensionError("array dims must be positive, got " + shape_str(shape));
}

Array::Array(Shape shape, double fill) : shape_(std::move(shape)) {
  check_positive(shape_);
  data_.assign(shape_numel(shape_), fill);
}

Array::Array(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check_positive(shape_);
  if (data_.size() != shape_numel(shape_))
    throw DimensionError("data length " + std::to_string(data_.size()) + " does not match shape " +
                         shape_str(shape_));
}

void Array::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Array Array::reshaped(Shape shape) const { return Array(std::move(shape), data_); }

bool Array::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace dnas3d
