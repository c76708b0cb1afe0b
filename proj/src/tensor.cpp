#include "eags/tensor.hpp"

#include <sstream>

#include "eags/error.hpp"

namespace eags::nn {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
  std::size_t p = 1;
  for (std::size_t d : shape) p *= d;
  return p;
}

Tensor::Tensor(std::vector<std::size_t> shape_, double fill)
    : shape(std::move(shape_)), data(shape_product(shape), fill) {}

Tensor::Tensor(std::vector<std::size_t> shape_, std::vector<double> values)
    : shape(std::move(shape_)), data(std::move(values)) {
  if (shape_product(shape) != data.size())
    throw ShapeError("Tensor: shape " + shape_string() + " does not hold " + std::to_string(data.size()) +
                     " values");
}

std::size_t Tensor::rows() const {
  if (shape.size() <= 1) return 1;
  std::size_t r = 1;
  for (std::size_t i = 0; i + 1 < shape.size(); ++i) r *= shape[i];
  return r;
}

std::size_t Tensor::cols() const { return shape.empty() ? 1 : shape.back(); }

std::string Tensor::shape_string() const {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

}  // namespace eags::nn
