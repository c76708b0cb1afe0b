#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace eags::nn {

// Dense row-major array of doubles with an optional gradient buffer of the
// same size. Ops treat rank-0 as 1x1 and rank-1 as a single row.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty when no gradient has been accumulated

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape_, double fill = 0.0);
  Tensor(std::vector<std::size_t> shape_, std::vector<double> values);

  static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0) {
    return Tensor({rows, cols}, fill);
  }
  static Tensor scalar(double v) { return Tensor(std::vector<std::size_t>{}, std::vector<double>{v}); }

  std::size_t size() const { return data.size(); }
  std::size_t rows() const;
  std::size_t cols() const;

  double& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

  bool has_grad() const { return !grad.empty(); }
  void zero_grad() { grad.assign(data.size(), 0.0); }

  std::string shape_string() const;
};

std::size_t shape_product(const std::vector<std::size_t>& shape);

}  // namespace eags::nn
