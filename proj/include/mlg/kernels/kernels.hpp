#pragma once

// Dense inner-loop kernels used by the autodiff tape, the backbone convolutions
// and the mask metrics. Every kernel has a portable scalar reference and,
// where the build enables it, an AVX2/FMA variant. The variant is chosen once
// at startup from CPUID and can be forced with MLG_SIMD=scalar|avx2 or
// set_isa().

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace mlg::kernels {

enum class Isa { Scalar, Avx2 };

std::string_view isa_name(Isa isa);

// Best ISA this CPU and build support.
Isa detected_isa();

// ISA currently used by the dispatching entry points below.
Isa active_isa();

// Returns false (and leaves the active ISA unchanged) if `isa` is unavailable.
bool set_isa(Isa isa);

struct MaskCounts {
  std::int64_t intersection = 0;
  std::int64_t a = 0;
  std::int64_t b = 0;
};

// Function table for one ISA. All matrices are dense row-major.
struct Table {
  // C(m,n) += A(m,k) * B(k,n)
  void (*gemm_nn_f32)(int m, int n, int k, const float* a, const float* b, float* c);
  void (*gemm_nn_f64)(int m, int n, int k, const double* a, const double* b, double* c);
  // C(m,n) += A(m,k) * B(n,k)^T
  void (*gemm_nt_f32)(int m, int n, int k, const float* a, const float* b, float* c);
  void (*gemm_nt_f64)(int m, int n, int k, const double* a, const double* b, double* c);
  // C(m,n) += A(k,m)^T * B(k,n)
  void (*gemm_tn_f32)(int m, int n, int k, const float* a, const float* b, float* c);
  void (*gemm_tn_f64)(int m, int n, int k, const double* a, const double* b, double* c);

  float (*dot_f32)(std::size_t n, const float* x, const float* y);
  double (*dot_f64)(std::size_t n, const double* x, const double* y);
  void (*axpy_f32)(std::size_t n, float a, const float* x, float* y);
  void (*axpy_f64)(std::size_t n, double a, const double* x, double* y);

  // Masks hold 0/1 bytes.
  MaskCounts (*mask_counts)(std::size_t n, const std::uint8_t* a, const std::uint8_t* b);
  // out[i] = v[i] >= theta
  void (*threshold)(std::size_t n, const float* v, float theta, std::uint8_t* out);
};

const Table& scalar_table();
// nullptr when the build has no AVX2 variant.
const Table* avx2_table();
const Table& active_table();

// Typed front-ends over the active table.
template <typename T>
void gemm_nn(int m, int n, int k, const T* a, const T* b, T* c);
template <typename T>
void gemm_nt(int m, int n, int k, const T* a, const T* b, T* c);
template <typename T>
void gemm_tn(int m, int n, int k, const T* a, const T* b, T* c);
template <typename T>
T dot(std::size_t n, const T* x, const T* y);
template <typename T>
void axpy(std::size_t n, T a, const T* x, T* y);

inline MaskCounts mask_counts(std::size_t n, const std::uint8_t* a, const std::uint8_t* b) {
  return active_table().mask_counts(n, a, b);
}
inline void threshold(std::size_t n, const float* v, float theta, std::uint8_t* out) {
  active_table().threshold(n, v, theta, out);
}

}  // namespace mlg::kernels
