#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "moesim/errors.hpp"

namespace moesim {

using Shape = std::vector<int64_t>;

inline int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

// Dense row-major tensor. All graph ops in this library are rank-1/2; the
// shape is kept general so callers can carry e.g. image dims around.
template <typename T>
struct TensorT {
  Shape shape;
  std::vector<T> data;
  bool requires_grad = false;
  std::vector<T> grad;  // empty until first accumulation; same size as data after
  std::string name;     // parameters carry names for diagnostics and checkpoints

  TensorT() = default;
  TensorT(Shape s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
    if (shape_numel(shape) != static_cast<int64_t>(data.size()))
      throw ShapeError("tensor data size " + std::to_string(data.size()) +
                       " does not match shape " + shape_str(shape));
  }

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  int64_t rank() const { return static_cast<int64_t>(shape.size()); }
  int64_t rows() const { return rank() >= 1 ? shape[0] : 1; }
  int64_t cols() const { return rank() >= 2 ? shape[1] : 1; }
  bool is_scalar() const { return numel() == 1; }

  T& at(int64_t i, int64_t j) { return data[static_cast<size_t>(i * cols() + j)]; }
  T at(int64_t i, int64_t j) const { return data[static_cast<size_t>(i * cols() + j)]; }

  T scalar() const {
    if (!is_scalar())
      throw ShapeError("scalar() on tensor of shape " + shape_str(shape));
    return data[0];
  }

  void ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), T(0));
  }
  void zero_grad() { grad.assign(grad.empty() ? 0 : data.size(), T(0)); }
  bool has_grad() const { return !grad.empty(); }
};

template <typename T>
using TensorPtrT = std::shared_ptr<TensorT<T>>;

using Tensor = TensorT<float>;
using TensorPtr = TensorPtrT<float>;

template <typename T>
TensorPtrT<T> make_tensor(Shape shape, std::vector<T> data, bool requires_grad = false,
                          std::string name = {}) {
  auto t = std::make_shared<TensorT<T>>(std::move(shape), std::move(data));
  t->requires_grad = requires_grad;
  t->name = std::move(name);
  return t;
}

template <typename T>
TensorPtrT<T> zeros(Shape shape, bool requires_grad = false, std::string name = {}) {
  const auto n = static_cast<size_t>(shape_numel(shape));
  return make_tensor<T>(std::move(shape), std::vector<T>(n, T(0)), requires_grad,
                        std::move(name));
}

template <typename T>
TensorPtrT<T> full(Shape shape, T value) {
  const auto n = static_cast<size_t>(shape_numel(shape));
  return make_tensor<T>(std::move(shape), std::vector<T>(n, value));
}

template <typename T>
TensorPtrT<T> scalar_tensor(T value) {
  return make_tensor<T>({1, 1}, {value});
}

template <typename T>
bool all_finite(const TensorT<T>& t) {
  for (T v : t.data)
    if (!std::isfinite(static_cast<double>(v))) return false;
  return true;
}

// Value-level copy with a different scalar type; used by the f64 replica
// machinery in gradient checks.
template <typename To, typename From>
TensorPtrT<To> cast_tensor(const TensorPtrT<From>& t) {
  std::vector<To> data(t->data.size());
  for (size_t i = 0; i < data.size(); ++i) data[i] = static_cast<To>(t->data[i]);
  auto out = make_tensor<To>(t->shape, std::move(data), t->requires_grad, t->name);
  return out;
}

}  // namespace moesim
