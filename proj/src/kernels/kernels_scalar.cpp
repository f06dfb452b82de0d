#include "kernels_impl.hpp"

namespace mlg::kernels::scalar {
namespace {

template <typename T>
void gemm_nn(int m, int n, int k, const T* a, const T* b, T* c) {
  for (int i = 0; i < m; ++i) {
    T* crow = c + static_cast<std::size_t>(i) * n;
    const T* arow = a + static_cast<std::size_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      const T av = arow[p];
      if (av == T(0)) continue;
      const T* brow = b + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <typename T>
void gemm_nt(int m, int n, int k, const T* a, const T* b, T* c) {
  for (int i = 0; i < m; ++i) {
    const T* arow = a + static_cast<std::size_t>(i) * k;
    T* crow = c + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const T* brow = b + static_cast<std::size_t>(j) * k;
      T s = 0;
      for (int p = 0; p < k; ++p) s += arow[p] * brow[p];
      crow[j] += s;
    }
  }
}

template <typename T>
void gemm_tn(int m, int n, int k, const T* a, const T* b, T* c) {
  for (int p = 0; p < k; ++p) {
    const T* arow = a + static_cast<std::size_t>(p) * m;
    const T* brow = b + static_cast<std::size_t>(p) * n;
    for (int i = 0; i < m; ++i) {
      const T av = arow[i];
      if (av == T(0)) continue;
      T* crow = c + static_cast<std::size_t>(i) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <typename T>
T dot(std::size_t n, const T* x, const T* y) {
  T s = 0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

template <typename T>
void axpy(std::size_t n, T a, const T* x, T* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

MaskCounts mask_counts(std::size_t n, const std::uint8_t* a, const std::uint8_t* b) {
  MaskCounts r;
  for (std::size_t i = 0; i < n; ++i) {
    r.intersection += a[i] & b[i];
    r.a += a[i];
    r.b += b[i];
  }
  return r;
}

void threshold(std::size_t n, const float* v, float theta, std::uint8_t* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = v[i] >= theta ? 1 : 0;
}

}  // namespace

const Table& table() {
  static const Table t{
      &gemm_nn<float>, &gemm_nn<double>, &gemm_nt<float>, &gemm_nt<double>,
      &gemm_tn<float>, &gemm_tn<double>, &dot<float>,     &dot<double>,
      &axpy<float>,    &axpy<double>,    &mask_counts,    &threshold,
  };
  return t;
}

}  // namespace mlg::kernels::scalar
