#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "moesim/autodiff.hpp"
#include "moesim/similarity.hpp"

namespace moesim {

// Floor applied inside every log of the BCE-style losses.
inline constexpr double kLogClamp = 1e-8;
// Floor for per-cluster variance estimates.
inline constexpr double kVarianceFloor = 1e-6;

struct LossBreakdown {
  double reconst = 0.0;
  double kl = 0.0;
  double similarity = 0.0;
  double depict = 0.0;
  double total = 0.0;
};

// Full negated binary cross-entropy between inputs in [0,1] and
// reconstructions in (0,1), summed over features and averaged over samples.
template <typename T>
TensorPtrT<T> reconstruction_bce(TapeT<T>* tape, const TensorPtrT<T>& x,
                                 const TensorPtrT<T>& x_reconst) {
  if (x->shape != x_reconst->shape)
    throw ShapeError("reconstruction_bce: shape mismatch " + shape_str(x->shape) +
                     " vs " + shape_str(x_reconst->shape));
  for (T v : x->data)
    if (!(v >= T(0) && v <= T(1)))
      throw DomainError("reconstruction_bce: input value " +
                        std::to_string(static_cast<double>(v)) + " outside [0,1]");
  const int64_t n = x->rows();
  std::vector<T> ones_minus(x->data.size());
  for (size_t i = 0; i < ones_minus.size(); ++i) ones_minus[i] = T(1) - x->data[i];
  auto x_const = make_tensor<T>(x->shape, std::vector<T>(x->data));
  auto xm_const = make_tensor<T>(x->shape, std::move(ones_minus));
  // each log argument is floored separately; the f32 grid cannot represent
  // 1 - kLogClamp, so the complement is clamped after the subtraction
  auto pos = mul(tape, x_const,
                 log(tape, clamp(tape, x_reconst, T(kLogClamp), T(1))));
  auto neg_term =
      mul(tape, xm_const,
          log(tape, clamp(tape, scalar_sub(tape, T(1), x_reconst), T(kLogClamp), T(1))));
  auto summed = sum_all(tape, add(tape, pos, neg_term));
  return scale(tape, summed, T(-1.0 / static_cast<double>(n)));
}

// Per-cluster diagonal-covariance penalty against a unit-covariance target:
// for every cluster with at least two assigned samples, estimate diagonal
// variances of its latent codes around their empirical mean and accumulate
// 1/2 * (sum_j 1/var_j - D + sum_j ln var_j), then average over the
// contributing clusters. Variances are floored at kVarianceFloor.
//
// With soft_variance the per-cluster mean and variance are weighted by the
// responsibility column (taken as constants), instead of using only the
// hard-assigned rows.
template <typename T>
TensorPtrT<T> kl_mixture(TapeT<T>* tape, const TensorPtrT<T>& z,
                         const TensorPtrT<T>& P, const std::vector<int>& assignments,
                         bool soft_variance = false) {
  const int64_t n = z->rows();
  const int64_t dim = z->cols();
  const int64_t k = P->cols();
  if (static_cast<int64_t>(assignments.size()) != n || P->rows() != n)
    throw ShapeError("kl_mixture: z, P and assignments disagree on sample count");

  std::vector<std::vector<int>> members(static_cast<size_t>(k));
  for (int64_t i = 0; i < n; ++i) {
    const int a = assignments[i];
    if (a < 0 || a >= k)
      throw ParameterError("kl_mixture: assignment " + std::to_string(a) +
                           " out of range");
    members[a].push_back(static_cast<int>(i));
  }

  TensorPtrT<T> acc;
  int contributing = 0;
  for (int64_t c = 0; c < k; ++c) {
    const auto& idx = members[c];
    if (idx.size() < 2) continue;  // degenerate clusters are counted out
    ++contributing;

    TensorPtrT<T> var;
    if (!soft_variance) {
      auto zc = gather_rows(tape, z, idx);
      auto mu = mean_rows(tape, zc);
      auto centered = sub(tape, zc, mu);
      var = mean_rows(tape, square(tape, centered));
    } else {
      std::vector<T> w(static_cast<size_t>(n));
      T wsum = T(0);
      for (int64_t i = 0; i < n; ++i) {
        w[i] = P->data[i * k + c];
        wsum += w[i];
      }
      auto wcol = make_tensor<T>({n, 1}, std::move(w));
      const T renorm = static_cast<T>(n) / wsum;
      auto mu = scale(tape, mean_rows(tape, mul(tape, z, wcol)), renorm);
      auto centered = sub(tape, z, mu);
      var = scale(tape, mean_rows(tape, mul(tape, square(tape, centered), wcol)),
                  renorm);
    }
    var = clamp(tape, var, T(kVarianceFloor), std::numeric_limits<T>::max());
    auto trace_term = sum_all(tape, reciprocal(tape, var));
    auto logdet_term = sum_all(tape, log(tape, var));
    auto cluster_kl = scale(
        tape, add_const(tape, add(tape, trace_term, logdet_term), T(-dim)), T(0.5));
    acc = acc ? add(tape, acc, cluster_kl) : cluster_kl;
  }
  if (!contributing) return scalar_tensor<T>(T(0));
  return scale(tape, acc, T(1) / static_cast<T>(contributing));
}

// Elementwise BCE between the binary adjacency S and P P^T (clamped into
// (0,1)), summed over all N^2 entries and averaged over N. The diagonal is
// included by default; exclude_diagonal masks it out.
template <typename T>
TensorPtrT<T> similarity_bce(TapeT<T>* tape, const SimilarityMatrix& s,
                             const TensorPtrT<T>& P, bool exclude_diagonal = false) {
  s.validate();
  const int64_t n = P->rows();
  if (s.n != n)
    throw ShapeError("similarity_bce: S is " + std::to_string(s.n) + "x" +
                     std::to_string(s.n) + " but P has " + std::to_string(n) + " rows");
  auto gram = matmul(tape, P, transpose(tape, P));

  std::vector<T> s_pos(s.values.size()), s_neg(s.values.size());
  for (size_t i = 0; i < s.values.size(); ++i) {
    s_pos[i] = static_cast<T>(s.values[i]);
    s_neg[i] = T(1) - s_pos[i];
  }
  if (exclude_diagonal)
    for (int64_t i = 0; i < n; ++i) s_pos[i * n + i] = s_neg[i * n + i] = T(0);
  auto pos_mask = make_tensor<T>({n, n}, std::move(s_pos));
  auto neg_mask = make_tensor<T>({n, n}, std::move(s_neg));

  auto pos = mul(tape, pos_mask, log(tape, clamp(tape, gram, T(kLogClamp), T(1))));
  auto neg_term =
      mul(tape, neg_mask,
          log(tape, clamp(tape, scalar_sub(tape, T(1), gram), T(kLogClamp), T(1))));
  auto summed = sum_all(tape, add(tape, pos, neg_term));
  return scale(tape, summed, T(-1.0 / static_cast<double>(n)));
}

// Sharpened auxiliary targets computed from the clean responsibilities.
// Returned as a constant: no gradient flows through Q.
template <typename T>
TensorPtrT<T> depict_targets(const TensorPtrT<T>& P) {
  const int64_t n = P->rows(), k = P->cols();
  std::vector<T> colsum(static_cast<size_t>(k), T(0));
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < k; ++j) colsum[j] += P->data[i * k + j];
  std::vector<T> q(P->data.size());
  for (int64_t i = 0; i < n; ++i) {
    T row_total = T(0);
    for (int64_t j = 0; j < k; ++j) {
      q[i * k + j] = P->data[i * k + j] / std::sqrt(colsum[j]);
      row_total += q[i * k + j];
    }
    for (int64_t j = 0; j < k; ++j) q[i * k + j] /= row_total;
  }
  return make_tensor<T>(P->shape, std::move(q));
}

// Cross-entropy between constant targets Q and the noisy responsibilities.
template <typename T>
TensorPtrT<T> depict_loss(TapeT<T>* tape, const TensorPtrT<T>& Q,
                          const TensorPtrT<T>& P_noisy) {
  if (Q->shape != P_noisy->shape)
    throw ShapeError("depict_loss: shape mismatch " + shape_str(Q->shape) + " vs " +
                     shape_str(P_noisy->shape));
  const int64_t n = Q->rows();
  auto p = clamp(tape, P_noisy, T(kLogClamp), T(1));
  auto summed = sum_all(tape, mul(tape, Q, log(tape, p)));
  return scale(tape, summed, T(-1.0 / static_cast<double>(n)));
}

template <typename T>
struct LossTerms {
  TensorPtrT<T> reconst, kl, similarity, depict;
};

// Weighted composition of the four objectives. Throws TrainingError naming
// the first non-finite component.
template <typename T>
std::pair<TensorPtrT<T>, LossBreakdown> total_loss(TapeT<T>* tape,
                                                   const LossTerms<T>& terms,
                                                   double pi1, double pi2) {
  LossBreakdown b;
  b.reconst = static_cast<double>(terms.reconst->scalar());
  b.kl = static_cast<double>(terms.kl->scalar());
  b.similarity = static_cast<double>(terms.similarity->scalar());
  b.depict = static_cast<double>(terms.depict->scalar());
  const std::pair<const char*, double> named[] = {{"reconst", b.reconst},
                                                  {"kl", b.kl},
                                                  {"similarity", b.similarity},
                                                  {"depict", b.depict}};
  for (const auto& [name, value] : named)
    if (!std::isfinite(value))
      throw TrainingError(std::string("total_loss: non-finite component '") + name +
                          "' = " + std::to_string(value));
  auto total = add(tape, add(tape, terms.reconst, scale(tape, terms.kl, T(pi1))),
                   add(tape, terms.similarity, scale(tape, terms.depict, T(pi2))));
  // recorded total uses double arithmetic so the breakdown identity holds
  // exactly; the graph scalar drives backward and is checked separately
  b.total = b.reconst + pi1 * b.kl + b.similarity + pi2 * b.depict;
  if (!std::isfinite(static_cast<double>(total->scalar())) || !std::isfinite(b.total))
    throw TrainingError("total_loss: non-finite component 'total'");
  return {total, b};
}

}  // namespace moesim
