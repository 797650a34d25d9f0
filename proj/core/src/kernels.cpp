#include "moesim/kernels.hpp"

#include <Eigen/Core>

namespace moesim::detail {

namespace {

template <typename T>
using MatMap =
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

template <typename T>
using MutMatMap =
    Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

}  // namespace

template <typename T>
void mm_nn(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n,
           bool accumulate) {
  MatMap<T> A(a, m, k);
  MatMap<T> B(b, k, n);
  MutMatMap<T> C(c, m, n);
  if (accumulate)
    C.noalias() += A * B;
  else
    C.noalias() = A * B;
}

template <typename T>
void mm_nt(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n,
           bool accumulate) {
  MatMap<T> A(a, m, k);
  MatMap<T> B(b, n, k);
  MutMatMap<T> C(c, m, n);
  if (accumulate)
    C.noalias() += A * B.transpose();
  else
    C.noalias() = A * B.transpose();
}

template <typename T>
void mm_tn(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n,
           bool accumulate) {
  MatMap<T> A(a, k, m);
  MatMap<T> B(b, k, n);
  MutMatMap<T> C(c, m, n);
  if (accumulate)
    C.noalias() += A.transpose() * B;
  else
    C.noalias() = A.transpose() * B;
}

template <typename T>
void pairwise_sqdist(const T* x, int64_t n, int64_t d, T* out) {
  MatMap<T> X(x, n, d);
  MutMatMap<T> D(out, n, n);
  const auto norms = X.rowwise().squaredNorm().eval();
  D.noalias() = -2 * (X * X.transpose());
  D.colwise() += norms;
  D.rowwise() += norms.transpose();
  D = D.cwiseMax(T(0));
}

template <typename T>
void cross_sqdist(const T* x, int64_t m, const T* y, int64_t n, int64_t d, T* out) {
  MatMap<T> X(x, m, d);
  MatMap<T> Y(y, n, d);
  MutMatMap<T> D(out, m, n);
  const auto xn = X.rowwise().squaredNorm().eval();
  const auto yn = Y.rowwise().squaredNorm().eval();
  D.noalias() = -2 * (X * Y.transpose());
  D.colwise() += xn;
  D.rowwise() += yn.transpose();
  D = D.cwiseMax(T(0));
}

template void mm_nn<float>(const float*, const float*, float*, int64_t, int64_t,
                           int64_t, bool);
template void mm_nn<double>(const double*, const double*, double*, int64_t, int64_t,
                            int64_t, bool);
template void mm_nt<float>(const float*, const float*, float*, int64_t, int64_t,
                           int64_t, bool);
template void mm_nt<double>(const double*, const double*, double*, int64_t, int64_t,
                            int64_t, bool);
template void mm_tn<float>(const float*, const float*, float*, int64_t, int64_t,
                           int64_t, bool);
template void mm_tn<double>(const double*, const double*, double*, int64_t, int64_t,
                            int64_t, bool);
template void pairwise_sqdist<float>(const float*, int64_t, int64_t, float*);
template void pairwise_sqdist<double>(const double*, int64_t, int64_t, double*);
template void cross_sqdist<float>(const float*, int64_t, const float*, int64_t,
                                  int64_t, float*);
template void cross_sqdist<double>(const double*, int64_t, const double*, int64_t,
                                   int64_t, double*);

}  // namespace moesim::detail
