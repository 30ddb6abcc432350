#pragma once

#include <cstddef>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace qgen {

using Shape = std::vector<int>;

inline long shape_numel(const Shape& s) {
  long n = 1;
  for (int d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << "]";
  return os.str();
}

// Dense row-major tensor. `grad` is empty until someone asks for it; once
// allocated it always has the same length as `values` and accumulates until
// explicitly zeroed.
template <typename T>
struct Tensor {
  Shape shape;
  std::vector<T> values;
  std::vector<T> grad;
  bool requires_grad = false;
  std::string name;

  Tensor() = default;
  explicit Tensor(Shape s, bool rg = false)
      : shape(std::move(s)), values(size_t(shape_numel(shape)), T(0)), requires_grad(rg) {
    for (int d : shape) {
      if (d <= 0) throw std::invalid_argument("tensor dimension must be positive, got " + shape_str(shape));
    }
  }

  long numel() const { return long(values.size()); }
  int rank() const { return int(shape.size()); }
  int rows() const { return rank() == 2 ? shape[0] : (rank() == 1 ? 1 : -1); }
  int cols() const { return rank() == 2 ? shape[1] : (rank() == 1 ? shape[0] : -1); }
  bool is_scalar() const { return numel() == 1; }

  std::vector<T>& grad_ref() {
    if (grad.empty()) grad.assign(values.size(), T(0));
    return grad;
  }
  void zero_grad() {
    if (!grad.empty()) std::fill(grad.begin(), grad.end(), T(0));
  }
};

template <typename T>
using TensorPtr = std::shared_ptr<Tensor<T>>;

template <typename T>
TensorPtr<T> make_tensor(Shape shape, bool requires_grad = false) {
  return std::make_shared<Tensor<T>>(std::move(shape), requires_grad);
}

template <typename T>
TensorPtr<T> make_tensor(Shape shape, std::vector<T> values, bool requires_grad = false) {
  auto t = std::make_shared<Tensor<T>>(std::move(shape), requires_grad);
  if (long(values.size()) != t->numel())
    throw std::invalid_argument("value count does not match shape " + shape_str(t->shape));
  t->values = std::move(values);
  return t;
}

}  // namespace qgen
