#pragma once

#include <stdexcept>
#include <string>

namespace eags {

// Bad user input: malformed files, out-of-range flags, unknown tokens where
// they are not allowed. The CLI maps this to exit code 2.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An internal invariant was violated (corrupt trajectory, mutated fixed
// token, ...). The CLI maps this to exit code 3.
class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Tensor shape mismatch inside an op. Message names the op and the shapes.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace eags
