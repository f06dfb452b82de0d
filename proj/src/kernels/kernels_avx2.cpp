// Compiled with -mavx2 -mfma; only reached after CPUID confirms support.

#include <immintrin.h>

#include "kernels_impl.hpp"

namespace mlg::kernels::avx2 {
namespace {

template <typename T>
struct Vec;

template <>
struct Vec<float> {
  using reg = __m256;
  static constexpr int width = 8;
  static reg zero() { return _mm256_setzero_ps(); }
  static reg load(const float* p) { return _mm256_loadu_ps(p); }
  static void store(float* p, reg v) { _mm256_storeu_ps(p, v); }
  static reg set1(float v) { return _mm256_set1_ps(v); }
  static reg fma(reg a, reg b, reg c) { return _mm256_fmadd_ps(a, b, c); }
  static reg add(reg a, reg b) { return _mm256_add_ps(a, b); }
  static float hsum(reg v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_add_ps(lo, hi);
    __m128 sh = _mm_movehdup_ps(lo);
    __m128 s = _mm_add_ps(lo, sh);
    sh = _mm_movehl_ps(sh, s);
    s = _mm_add_ss(s, sh);
    return _mm_cvtss_f32(s);
  }
};

template <>
struct Vec<double> {
  using reg = __m256d;
  static constexpr int width = 4;
  static reg zero() { return _mm256_setzero_pd(); }
  static reg load(const double* p) { return _mm256_loadu_pd(p); }
  static void store(double* p, reg v) { _mm256_storeu_pd(p, v); }
  static reg set1(double v) { return _mm256_set1_pd(v); }
  static reg fma(reg a, reg b, reg c) { return _mm256_fmadd_pd(a, b, c); }
  static reg add(reg a, reg b) { return _mm256_add_pd(a, b); }
  static double hsum(reg v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d h = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, h));
  }
};

template <typename T>
void axpy(std::size_t n, T a, const T* x, T* y) {
  using V = Vec<T>;
  const auto va = V::set1(a);
  std::size_t i = 0;
  for (; i + V::width <= n; i += V::width) V::store(y + i, V::fma(va, V::load(x + i), V::load(y + i)));
  for (; i < n; ++i) y[i] += a * x[i];
}

template <typename T>
T dot(std::size_t n, const T* x, const T* y) {
  using V = Vec<T>;
  auto acc0 = V::zero();
  auto acc1 = V::zero();
  std::size_t i = 0;
  for (; i + 2 * V::width <= n; i += 2 * V::width) {
    acc0 = V::fma(V::load(x + i), V::load(y + i), acc0);
    acc1 = V::fma(V::load(x + i + V::width), V::load(y + i + V::width), acc1);
  }
  for (; i + V::width <= n; i += V::width) acc0 = V::fma(V::load(x + i), V::load(y + i), acc0);
  T s = V::hsum(V::add(acc0, acc1));
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

// 4-row register block; columns in one SIMD register per row.
template <typename T>
void gemm_nn(int m, int n, int k, const T* a, const T* b, T* c) {
  using V = Vec<T>;
  const std::size_t sn = n, sk = k;
  int i = 0;
  for (; i + 4 <= m; i += 4) {
    const T* a0 = a + i * sk;
    const T* a1 = a0 + sk;
    const T* a2 = a1 + sk;
    const T* a3 = a2 + sk;
    T* c0 = c + i * sn;
    T* c1 = c0 + sn;
    T* c2 = c1 + sn;
    T* c3 = c2 + sn;
    int j = 0;
    for (; j + V::width <= n; j += V::width) {
      auto r0 = V::load(c0 + j), r1 = V::load(c1 + j), r2 = V::load(c2 + j), r3 = V::load(c3 + j);
      for (int p = 0; p < k; ++p) {
        const auto bv = V::load(b + p * sn + j);
        r0 = V::fma(V::set1(a0[p]), bv, r0);
        r1 = V::fma(V::set1(a1[p]), bv, r1);
        r2 = V::fma(V::set1(a2[p]), bv, r2);
        r3 = V::fma(V::set1(a3[p]), bv, r3);
      }
      V::store(c0 + j, r0);
      V::store(c1 + j, r1);
      V::store(c2 + j, r2);
      V::store(c3 + j, r3);
    }
    for (; j < n; ++j) {
      T s0 = 0, s1 = 0, s2 = 0, s3 = 0;
      for (int p = 0; p < k; ++p) {
        const T bv = b[p * sn + j];
        s0 += a0[p] * bv;
        s1 += a1[p] * bv;
        s2 += a2[p] * bv;
        s3 += a3[p] * bv;
      }
      c0[j] += s0;
      c1[j] += s1;
      c2[j] += s2;
      c3[j] += s3;
    }
  }
  for (; i < m; ++i) {
    const T* arow = a + i * sk;
    T* crow = c + i * sn;
    for (int p = 0; p < k; ++p) axpy<T>(sn, arow[p], b + p * sn, crow);
  }
}

template <typename T>
void gemm_nt(int m, int n, int k, const T* a, const T* b, T* c) {
  const std::size_t sk = k;
  for (int i = 0; i < m; ++i) {
    const T* arow = a + i * sk;
    T* crow = c + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) crow[j] += dot<T>(sk, arow, b + j * sk);
  }
}

template <typename T>
void gemm_tn(int m, int n, int k, const T* a, const T* b, T* c) {
  const std::size_t sn = n, sm = m;
  for (int p = 0; p < k; ++p) {
    const T* arow = a + p * sm;
    const T* brow = b + p * sn;
    for (int i = 0; i < m; ++i) {
      const T av = arow[i];
      if (av == T(0)) continue;
      axpy<T>(sn, av, brow, c + i * sn);
    }
  }
}

MaskCounts mask_counts(std::size_t n, const std::uint8_t* a, const std::uint8_t* b) {
  MaskCounts r;
  std::size_t i = 0;
  const __m256i zero = _mm256_setzero_si256();
  __m256i acc_i = zero, acc_a = zero, acc_b = zero;
  // sad_epu8 sums 8-byte groups into 64-bit lanes; no overflow for 0/1 input.
  for (; i + 32 <= n; i += 32) {
    const __m256i va = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(a + i));
    const __m256i vb = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(b + i));
    acc_i = _mm256_add_epi64(acc_i, _mm256_sad_epu8(_mm256_and_si256(va, vb), zero));
    acc_a = _mm256_add_epi64(acc_a, _mm256_sad_epu8(va, zero));
    acc_b = _mm256_add_epi64(acc_b, _mm256_sad_epu8(vb, zero));
  }
  alignas(32) std::int64_t lanes[4];
  _mm256_store_si256(reinterpret_cast<__m256i*>(lanes), acc_i);
  r.intersection = lanes[0] + lanes[1] + lanes[2] + lanes[3];
  _mm256_store_si256(reinterpret_cast<__m256i*>(lanes), acc_a);
  r.a = lanes[0] + lanes[1] + lanes[2] + lanes[3];
  _mm256_store_si256(reinterpret_cast<__m256i*>(lanes), acc_b);
  r.b = lanes[0] + lanes[1] + lanes[2] + lanes[3];
  for (; i < n; ++i) {
    r.intersection += a[i] & b[i];
    r.a += a[i];
    r.b += b[i];
  }
  return r;
}

void threshold(std::size_t n, const float* v, float theta, std::uint8_t* out) {
  const __m256 t = _mm256_set1_ps(theta);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const int bits = _mm256_movemask_ps(_mm256_cmp_ps(_mm256_loadu_ps(v + i), t, _CMP_GE_OQ));
    for (int l = 0; l < 8; ++l) out[i + l] = static_cast<std::uint8_t>((bits >> l) & 1);
  }
  for (; i < n; ++i) out[i] = v[i] >= theta ? 1 : 0;
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

}  // namespace mlg::kernels::avx2
