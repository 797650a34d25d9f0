#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "moesim/errors.hpp"
#include "moesim/kernels.hpp"
#include "moesim/rng.hpp"
#include "moesim/tensor.hpp"

namespace moesim {

// Reverse-mode tape. Ops append a closure that pulls the gradient of their
// output and adds it into their inputs; backward() replays the closures in
// reverse recording order. Gradients accumulate additively until zero_grad,
// and the tape is cleared between training steps.
template <typename T>
class TapeT {
 public:
  void record(const TensorPtrT<T>& out, std::function<void()> backward) {
    out->requires_grad = true;
    produced_.insert(out.get());
    nodes_.push_back(std::move(backward));
  }

  bool produced(const TensorT<T>* t) const {
    return produced_.count(const_cast<TensorT<T>*>(t)) > 0;
  }

  void backward(const TensorPtrT<T>& loss) {
    if (!loss->is_scalar())
      throw ShapeError("backward: loss must be scalar, got " + shape_str(loss->shape));
    if (!produced(loss.get()))
      throw TapeError("backward: loss tensor was not computed on this tape");
    // Intermediate grads are scratch space for one replay; only leaf
    // (parameter) grads accumulate across backward calls.
    for (auto* t : produced_)
      if (t->has_grad()) t->zero_grad();
    loss->ensure_grad();
    loss->grad[0] = T(1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
  }

  void clear() {
    nodes_.clear();
    produced_.clear();
  }

  size_t size() const { return nodes_.size(); }

 private:
  std::vector<std::function<void()>> nodes_;
  std::unordered_set<TensorT<T>*> produced_;
};

using Tape = TapeT<float>;

namespace detail {

template <typename T>
bool wants_grad(const TapeT<T>* tape, std::initializer_list<const TensorPtrT<T>*> ins) {
  if (!tape) return false;
  for (auto* in : ins)
    if ((*in)->requires_grad) return true;
  return false;
}

// How the second operand of a binary op lines up against the first.
enum class Broadcast { none, row, col, scalar };

template <typename T>
Broadcast classify_broadcast(const TensorPtrT<T>& a, const TensorPtrT<T>& b,
                             const char* opname) {
  if (a->shape == b->shape) return Broadcast::none;
  if (b->is_scalar()) return Broadcast::scalar;
  if (b->rank() == 2 && b->rows() == 1 && b->cols() == a->cols())
    return Broadcast::row;
  if (b->rank() == 2 && b->cols() == 1 && b->rows() == a->rows())
    return Broadcast::col;
  throw ShapeError(std::string(opname) + ": cannot broadcast " + shape_str(b->shape) +
                   " against " + shape_str(a->shape));
}

template <typename T>
int64_t broadcast_index(Broadcast bc, int64_t i, int64_t cols) {
  switch (bc) {
    case Broadcast::none: return i;
    case Broadcast::row: return i % cols;
    case Broadcast::col: return i / cols;
    case Broadcast::scalar: return 0;
  }
  return 0;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Binary elementwise ops. The second operand may be the same shape as the
// first, a 1xC row, an Rx1 column, or a scalar.
// ---------------------------------------------------------------------------

template <typename T, typename Fwd, typename Bwd>
TensorPtrT<T> binary_op(TapeT<T>* tape, const TensorPtrT<T>& a, const TensorPtrT<T>& b,
                        const char* opname, Fwd fwd, Bwd bwd) {
  const auto bc = detail::classify_broadcast(a, b, opname);
  const int64_t cols = a->cols();
  std::vector<T> out_data(a->data.size());
  for (int64_t i = 0; i < a->numel(); ++i)
    out_data[i] = fwd(a->data[i], b->data[detail::broadcast_index<T>(bc, i, cols)]);
  auto out = make_tensor<T>(a->shape, std::move(out_data));
  if (detail::wants_grad(tape, {&a, &b})) {
    tape->record(out, [a, b, out, bc, cols, bwd]() {
      if (out->grad.empty()) return;
      if (a->requires_grad) a->ensure_grad();
      if (b->requires_grad) b->ensure_grad();
      for (int64_t i = 0; i < a->numel(); ++i) {
        const int64_t bi = detail::broadcast_index<T>(bc, i, cols);
        const T g = out->grad[i];
        T da, db;
        bwd(a->data[i], b->data[bi], g, da, db);
        if (a->requires_grad) a->grad[i] += da;
        if (b->requires_grad) b->grad[bi] += db;
      }
    });
  }
  return out;
}

template <typename T>
TensorPtrT<T> add(TapeT<T>* tape, const TensorPtrT<T>& a, const TensorPtrT<T>& b) {
  return binary_op(
      tape, a, b, "add", [](T x, T y) { return x + y; },
      [](T, T, T g, T& da, T& db) {
        da = g;
        db = g;
      });
}

template <typename T>
TensorPtrT<T> sub(TapeT<T>* tape, const TensorPtrT<T>& a, const TensorPtrT<T>& b) {
  return binary_op(
      tape, a, b, "sub", [](T x, T y) { return x - y; },
      [](T, T, T g, T& da, T& db) {
        da = g;
        db = -g;
      });
}

template <typename T>
TensorPtrT<T> mul(TapeT<T>* tape, const TensorPtrT<T>& a, const TensorPtrT<T>& b) {
  return binary_op(
      tape, a, b, "mul", [](T x, T y) { return x * y; },
      [](T x, T y, T g, T& da, T& db) {
        da = g * y;
        db = g * x;
      });
}

template <typename T>
TensorPtrT<T> div(TapeT<T>* tape, const TensorPtrT<T>& a, const TensorPtrT<T>& b) {
  return binary_op(
      tape, a, b, "div", [](T x, T y) { return x / y; },
      [](T x, T y, T g, T& da, T& db) {
        da = g / y;
        db = -g * x / (y * y);
      });
}

// ---------------------------------------------------------------------------
// Unary elementwise ops.
// ---------------------------------------------------------------------------

template <typename T, typename Fwd, typename Bwd>
TensorPtrT<T> unary_op(TapeT<T>* tape, const TensorPtrT<T>& x, Fwd fwd, Bwd bwd) {
  std::vector<T> out_data(x->data.size());
  for (size_t i = 0; i < out_data.size(); ++i) out_data[i] = fwd(x->data[i]);
  auto out = make_tensor<T>(x->shape, std::move(out_data));
  if (detail::wants_grad(tape, {&x})) {
    tape->record(out, [x, out, bwd]() {
      if (out->grad.empty()) return;
      x->ensure_grad();
      for (size_t i = 0; i < x->data.size(); ++i)
        x->grad[i] += bwd(x->data[i], out->data[i], out->grad[i]);
    });
  }
  return out;
}

template <typename T>
TensorPtrT<T> exp(TapeT<T>* tape, const TensorPtrT<T>& x) {
  return unary_op(
      tape, x, [](T v) { return std::exp(v); },
      [](T, T y, T g) { return g * y; });
}

template <typename T>
TensorPtrT<T> log(TapeT<T>* tape, const TensorPtrT<T>& x) {
  for (T v : x->data)
    if (!(v > T(0)))
      throw DomainError("log: input must be strictly positive, got " +
                        std::to_string(static_cast<double>(v)));
  return unary_op(
      tape, x, [](T v) { return std::log(v); },
      [](T v, T, T g) { return g / v; });
}

template <typename T>
TensorPtrT<T> relu(TapeT<T>* tape, const TensorPtrT<T>& x) {
  return unary_op(
      tape, x, [](T v) { return v > T(0) ? v : T(0); },
      [](T v, T, T g) { return v > T(0) ? g : T(0); });
}

template <typename T>
TensorPtrT<T> sigmoid(TapeT<T>* tape, const TensorPtrT<T>& x) {
  return unary_op(
      tape, x,
      [](T v) {
        if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
        const T e = std::exp(v);
        return e / (T(1) + e);
      },
      [](T, T y, T g) { return g * y * (T(1) - y); });
}

template <typename T>
TensorPtrT<T> neg(TapeT<T>* tape, const TensorPtrT<T>& x) {
  return unary_op(
      tape, x, [](T v) { return -v; }, [](T, T, T g) { return -g; });
}

template <typename T>
TensorPtrT<T> square(TapeT<T>* tape, const TensorPtrT<T>& x) {
  return unary_op(
      tape, x, [](T v) { return v * v; },
      [](T v, T, T g) { return T(2) * v * g; });
}

template <typename T>
TensorPtrT<T> reciprocal(TapeT<T>* tape, const TensorPtrT<T>& x) {
  return unary_op(
      tape, x, [](T v) { return T(1) / v; },
      [](T, T y, T g) { return -g * y * y; });
}

// Gradient passes through unclamped elements (boundary included) and is zero
// where the value was clipped.
template <typename T>
TensorPtrT<T> clamp(TapeT<T>* tape, const TensorPtrT<T>& x, T lo, T hi) {
  return unary_op(
      tape, x, [lo, hi](T v) { return std::min(std::max(v, lo), hi); },
      [lo, hi](T v, T, T g) { return (v >= lo && v <= hi) ? g : T(0); });
}

template <typename T>
TensorPtrT<T> scale(TapeT<T>* tape, const TensorPtrT<T>& x, T c) {
  return unary_op(
      tape, x, [c](T v) { return c * v; }, [c](T, T, T g) { return c * g; });
}

template <typename T>
TensorPtrT<T> add_const(TapeT<T>* tape, const TensorPtrT<T>& x, T c) {
  return unary_op(
      tape, x, [c](T v) { return v + c; }, [](T, T, T g) { return g; });
}

// c - x, elementwise.
template <typename T>
TensorPtrT<T> scalar_sub(TapeT<T>* tape, T c, const TensorPtrT<T>& x) {
  return unary_op(
      tape, x, [c](T v) { return c - v; }, [](T, T, T g) { return -g; });
}

// ---------------------------------------------------------------------------
// Matrix ops.
// ---------------------------------------------------------------------------

template <typename T>
TensorPtrT<T> matmul(TapeT<T>* tape, const TensorPtrT<T>& a, const TensorPtrT<T>& b) {
  if (a->rank() != 2 || b->rank() != 2 || a->cols() != b->rows())
    throw ShapeError("matmul: incompatible shapes " + shape_str(a->shape) + " and " +
                     shape_str(b->shape));
  const int64_t m = a->rows(), k = a->cols(), n = b->cols();
  auto out = zeros<T>({m, n});
  detail::mm_nn(a->data.data(), b->data.data(), out->data.data(), m, k, n, false);
  if (detail::wants_grad(tape, {&a, &b})) {
    tape->record(out, [a, b, out, m, k, n]() {
      if (out->grad.empty()) return;
      if (a->requires_grad) {
        a->ensure_grad();
        detail::mm_nt(out->grad.data(), b->data.data(), a->grad.data(), m, n, k, true);
      }
      if (b->requires_grad) {
        b->ensure_grad();
        detail::mm_tn(a->data.data(), out->grad.data(), b->grad.data(), k, m, n, true);
      }
    });
  }
  return out;
}

template <typename T>
TensorPtrT<T> transpose(TapeT<T>* tape, const TensorPtrT<T>& x) {
  if (x->rank() != 2)
    throw ShapeError("transpose: expected rank-2 tensor, got " + shape_str(x->shape));
  const int64_t m = x->rows(), n = x->cols();
  auto out = zeros<T>({n, m});
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < n; ++j) out->data[j * m + i] = x->data[i * n + j];
  if (detail::wants_grad(tape, {&x})) {
    tape->record(out, [x, out, m, n]() {
      if (out->grad.empty()) return;
      x->ensure_grad();
      for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) x->grad[i * n + j] += out->grad[j * m + i];
    });
  }
  return out;
}

// Row-wise softmax with max subtraction.
template <typename T>
TensorPtrT<T> softmax(TapeT<T>* tape, const TensorPtrT<T>& x) {
  if (x->rank() != 2)
    throw ShapeError("softmax: expected rank-2 tensor, got " + shape_str(x->shape));
  const int64_t m = x->rows(), n = x->cols();
  auto out = zeros<T>({m, n});
  for (int64_t i = 0; i < m; ++i) {
    const T* row = &x->data[i * n];
    T* orow = &out->data[i * n];
    T mx = row[0];
    for (int64_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
    T sum = T(0);
    for (int64_t j = 0; j < n; ++j) {
      orow[j] = std::exp(row[j] - mx);
      sum += orow[j];
    }
    for (int64_t j = 0; j < n; ++j) orow[j] /= sum;
  }
  if (detail::wants_grad(tape, {&x})) {
    tape->record(out, [x, out, m, n]() {
      if (out->grad.empty()) return;
      x->ensure_grad();
      for (int64_t i = 0; i < m; ++i) {
        const T* y = &out->data[i * n];
        const T* g = &out->grad[i * n];
        T dot = T(0);
        for (int64_t j = 0; j < n; ++j) dot += g[j] * y[j];
        for (int64_t j = 0; j < n; ++j) x->grad[i * n + j] += y[j] * (g[j] - dot);
      }
    });
  }
  return out;
}

// Inverted dropout: survivors are scaled by 1/(1-rate) at train time so that
// inference is the identity.
template <typename T>
TensorPtrT<T> dropout(TapeT<T>* tape, const TensorPtrT<T>& x, double rate,
                      bool training, Rng* rng) {
  if (!(rate >= 0.0 && rate < 1.0))
    throw ParameterError("dropout: rate must be in [0,1), got " + std::to_string(rate));
  if (!training || rate == 0.0) return x;
  if (!rng) throw ParameterError("dropout: training mode requires a generator");
  const T keep_scale = T(1.0 / (1.0 - rate));
  std::vector<T> mask(x->data.size());
  std::vector<T> out_data(x->data.size());
  for (size_t i = 0; i < mask.size(); ++i) {
    mask[i] = rng->uniform() < rate ? T(0) : keep_scale;
    out_data[i] = x->data[i] * mask[i];
  }
  auto out = make_tensor<T>(x->shape, std::move(out_data));
  if (detail::wants_grad(tape, {&x})) {
    tape->record(out, [x, out, mask = std::move(mask)]() {
      if (out->grad.empty()) return;
      x->ensure_grad();
      for (size_t i = 0; i < mask.size(); ++i) x->grad[i] += out->grad[i] * mask[i];
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reductions and indexing.
// ---------------------------------------------------------------------------

template <typename T>
TensorPtrT<T> sum_all(TapeT<T>* tape, const TensorPtrT<T>& x) {
  T s = T(0);
  for (T v : x->data) s += v;
  auto out = scalar_tensor<T>(s);
  if (detail::wants_grad(tape, {&x})) {
    tape->record(out, [x, out]() {
      if (out->grad.empty()) return;
      x->ensure_grad();
      const T g = out->grad[0];
      for (size_t i = 0; i < x->data.size(); ++i) x->grad[i] += g;
    });
  }
  return out;
}

template <typename T>
TensorPtrT<T> mean_all(TapeT<T>* tape, const TensorPtrT<T>& x) {
  return scale(tape, sum_all(tape, x), T(1) / static_cast<T>(x->numel()));
}

// Column means: (m x n) -> (1 x n).
template <typename T>
TensorPtrT<T> mean_rows(TapeT<T>* tape, const TensorPtrT<T>& x) {
  if (x->rank() != 2)
    throw ShapeError("mean_rows: expected rank-2 tensor, got " + shape_str(x->shape));
  const int64_t m = x->rows(), n = x->cols();
  auto out = zeros<T>({1, n});
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < n; ++j) out->data[j] += x->data[i * n + j];
  for (int64_t j = 0; j < n; ++j) out->data[j] /= static_cast<T>(m);
  if (detail::wants_grad(tape, {&x})) {
    tape->record(out, [x, out, m, n]() {
      if (out->grad.empty()) return;
      x->ensure_grad();
      for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j)
          x->grad[i * n + j] += out->grad[j] / static_cast<T>(m);
    });
  }
  return out;
}

// Selects rows of x; gradient scatter-adds back. Duplicate indices are fine.
template <typename T>
TensorPtrT<T> gather_rows(TapeT<T>* tape, const TensorPtrT<T>& x,
                          std::vector<int> indices) {
  if (x->rank() != 2)
    throw ShapeError("gather_rows: expected rank-2 tensor, got " + shape_str(x->shape));
  const int64_t m = x->rows(), n = x->cols();
  for (int idx : indices)
    if (idx < 0 || idx >= m)
      throw ParameterError("gather_rows: index " + std::to_string(idx) +
                           " out of range [0," + std::to_string(m) + ")");
  const int64_t r = static_cast<int64_t>(indices.size());
  auto out = zeros<T>({r, n});
  for (int64_t i = 0; i < r; ++i)
    std::copy_n(&x->data[static_cast<int64_t>(indices[i]) * n], n, &out->data[i * n]);
  if (detail::wants_grad(tape, {&x})) {
    tape->record(out, [x, out, indices = std::move(indices), n]() {
      if (out->grad.empty()) return;
      x->ensure_grad();
      for (size_t i = 0; i < indices.size(); ++i) {
        const int64_t src = static_cast<int64_t>(i) * n;
        const int64_t dst = static_cast<int64_t>(indices[i]) * n;
        for (int64_t j = 0; j < n; ++j) x->grad[dst + j] += out->grad[src + j];
      }
    });
  }
  return out;
}

// Reassembles a full (n_rows x n) matrix from row-disjoint pieces; the inverse
// of routing a batch through per-group subnetworks. Every output row must be
// covered exactly once.
template <typename T>
TensorPtrT<T> assemble_rows(TapeT<T>* tape, const std::vector<TensorPtrT<T>>& pieces,
                            const std::vector<std::vector<int>>& index_lists,
                            int64_t n_rows) {
  if (pieces.size() != index_lists.size())
    throw RoutingError("assemble_rows: pieces and index lists differ in count");
  if (pieces.empty()) throw RoutingError("assemble_rows: no pieces");
  const int64_t n = pieces[0]->cols();
  auto out = zeros<T>({n_rows, n});
  std::vector<uint8_t> covered(static_cast<size_t>(n_rows), 0);
  for (size_t p = 0; p < pieces.size(); ++p) {
    const auto& piece = pieces[p];
    const auto& idx = index_lists[p];
    if (piece->cols() != n || piece->rows() != static_cast<int64_t>(idx.size()))
      throw RoutingError("assemble_rows: piece " + std::to_string(p) +
                         " shape does not match its index list");
    for (size_t i = 0; i < idx.size(); ++i) {
      const int row = idx[i];
      if (row < 0 || row >= n_rows || covered[row])
        throw RoutingError("assemble_rows: row " + std::to_string(row) +
                           " out of range or covered twice");
      covered[row] = 1;
      std::copy_n(&piece->data[static_cast<int64_t>(i) * n], n,
                  &out->data[static_cast<int64_t>(row) * n]);
    }
  }
  for (int64_t i = 0; i < n_rows; ++i)
    if (!covered[i])
      throw RoutingError("assemble_rows: row " + std::to_string(i) + " not covered");
  bool any_grad = false;
  for (const auto& p : pieces) any_grad = any_grad || p->requires_grad;
  if (tape && any_grad) {
    tape->record(out, [out, pieces, index_lists, n]() {
      if (out->grad.empty()) return;
      for (size_t p = 0; p < pieces.size(); ++p) {
        if (!pieces[p]->requires_grad) continue;
        pieces[p]->ensure_grad();
        const auto& idx = index_lists[p];
        for (size_t i = 0; i < idx.size(); ++i) {
          const int64_t src = static_cast<int64_t>(idx[i]) * n;
          const int64_t dst = static_cast<int64_t>(i) * n;
          for (int64_t j = 0; j < n; ++j)
            pieces[p]->grad[dst + j] += out->grad[src + j];
        }
      }
    });
  }
  return out;
}

// Column k of a (m x n) matrix as (m x 1).
template <typename T>
TensorPtrT<T> slice_col(TapeT<T>* tape, const TensorPtrT<T>& x, int64_t k) {
  if (x->rank() != 2 || k < 0 || k >= x->cols())
    throw ShapeError("slice_col: column " + std::to_string(k) + " out of " +
                     shape_str(x->shape));
  const int64_t m = x->rows(), n = x->cols();
  auto out = zeros<T>({m, 1});
  for (int64_t i = 0; i < m; ++i) out->data[i] = x->data[i * n + k];
  if (detail::wants_grad(tape, {&x})) {
    tape->record(out, [x, out, k, m, n]() {
      if (out->grad.empty()) return;
      x->ensure_grad();
      for (int64_t i = 0; i < m; ++i) x->grad[i * n + k] += out->grad[i];
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Adam.
// ---------------------------------------------------------------------------

template <typename T>
void zero_grad(const std::vector<TensorPtrT<T>>& params) {
  for (const auto& p : params) p->zero_grad();
}

// Rescales all gradients so their global L2 norm is at most max_norm.
// Returns the pre-clip norm.
template <typename T>
double clip_grad_norm(const std::vector<TensorPtrT<T>>& params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params)
    for (T g : p->grad) sq += static_cast<double>(g) * static_cast<double>(g);
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const T factor = static_cast<T>(max_norm / norm);
    for (const auto& p : params)
      for (T& g : p->grad) g *= factor;
  }
  return norm;
}

// Standard Adam with bias correction. Moment buffers are kept in parameter
// order; the step counter advances once per step() across all parameters.
template <typename T>
class AdamT {
 public:
  AdamT(std::vector<TensorPtrT<T>> params, T lr, T beta1 = T(0.9), T beta2 = T(0.999),
        T epsilon = T(1e-8))
      : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2),
        epsilon_(epsilon) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const auto& p : params_) {
      m_.emplace_back(p->data.size(), T(0));
      v_.emplace_back(p->data.size(), T(0));
    }
  }

  void step() {
    for (const auto& p : params_)
      if (p->grad.empty())
        throw OptimizerError("adam: missing gradient for parameter '" +
                             (p->name.empty() ? std::string("<unnamed>") : p->name) +
                             "'");
    ++t_;
    const double bc1 = 1.0 - std::pow(static_cast<double>(beta1_), static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(static_cast<double>(beta2_), static_cast<double>(t_));
    for (size_t pi = 0; pi < params_.size(); ++pi) {
      auto& p = *params_[pi];
      auto& m = m_[pi];
      auto& v = v_[pi];
      for (size_t i = 0; i < p.data.size(); ++i) {
        const T g = p.grad[i];
        m[i] = beta1_ * m[i] + (T(1) - beta1_) * g;
        v[i] = beta2_ * v[i] + (T(1) - beta2_) * g * g;
        const T mhat = static_cast<T>(m[i] / bc1);
        const T vhat = static_cast<T>(v[i] / bc2);
        p.data[i] -= lr_ * mhat / (std::sqrt(vhat) + epsilon_);
      }
    }
  }

  uint64_t step_count() const { return t_; }
  T learning_rate() const { return lr_; }
  T beta1() const { return beta1_; }
  T beta2() const { return beta2_; }
  T epsilon() const { return epsilon_; }
  const std::vector<TensorPtrT<T>>& params() const { return params_; }
  const std::vector<std::vector<T>>& first_moments() const { return m_; }
  const std::vector<std::vector<T>>& second_moments() const { return v_; }

  // Checkpoint restore.
  void set_state(uint64_t t, std::vector<std::vector<T>> m, std::vector<std::vector<T>> v) {
    if (m.size() != params_.size() || v.size() != params_.size())
      throw OptimizerError("adam: restored moment count does not match parameters");
    for (size_t i = 0; i < params_.size(); ++i)
      if (m[i].size() != params_[i]->data.size() || v[i].size() != params_[i]->data.size())
        throw OptimizerError("adam: restored moments for '" + params_[i]->name +
                             "' have wrong size");
    t_ = t;
    m_ = std::move(m);
    v_ = std::move(v);
  }

 private:
  std::vector<TensorPtrT<T>> params_;
  std::vector<std::vector<T>> m_, v_;
  T lr_, beta1_, beta2_, epsilon_;
  uint64_t t_ = 0;
};

using Adam = AdamT<float>;

}  // namespace moesim
