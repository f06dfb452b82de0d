#include <atomic>
#include <cstdlib>
#include <string>

#include "kernels_impl.hpp"

namespace mlg::kernels {
namespace {

bool cpu_has_avx2() {
#if defined(MLG_HAVE_AVX2) && (defined(__x86_64__) || defined(__i386__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const Table* table_for(Isa isa) {
#if defined(MLG_HAVE_AVX2)
  if (isa == Isa::Avx2) return &avx2::table();
#endif
  if (isa == Isa::Scalar) return &scalar::table();
  return nullptr;
}

Isa initial_isa() {
  Isa isa = detected_isa();
  if (const char* env = std::getenv("MLG_SIMD")) {
    const std::string v(env);
    if (v == "scalar") isa = Isa::Scalar;
  }
  return isa;
}

std::atomic<const Table*>& current() {
  static std::atomic<const Table*> t{table_for(initial_isa())};
  return t;
}

std::atomic<Isa>& current_isa() {
  static std::atomic<Isa> isa{initial_isa()};
  return isa;
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::Scalar:
      return "scalar";
    case Isa::Avx2:
      return "avx2";
  }
  return "unknown";
}

Isa detected_isa() { return cpu_has_avx2() ? Isa::Avx2 : Isa::Scalar; }

Isa active_isa() { return current_isa().load(); }

bool set_isa(Isa isa) {
  if (isa == Isa::Avx2 && !cpu_has_avx2()) return false;
  const Table* t = table_for(isa);
  if (!t) return false;
  current().store(t);
  current_isa().store(isa);
  return true;
}

const Table& scalar_table() { return scalar::table(); }

const Table* avx2_table() {
#if defined(MLG_HAVE_AVX2)
  return cpu_has_avx2() ? &avx2::table() : nullptr;
#else
  return nullptr;
#endif
}

const Table& active_table() { return *current().load(std::memory_order_relaxed); }

template <>
void gemm_nn<float>(int m, int n, int k, const float* a, const float* b, float* c) {
  active_table().gemm_nn_f32(m, n, k, a, b, c);
}
template <>
void gemm_nn<double>(int m, int n, int k, const double* a, const double* b, double* c) {
  active_table().gemm_nn_f64(m, n, k, a, b, c);
}
template <>
void gemm_nt<float>(int m, int n, int k, const float* a, const float* b, float* c) {
  active_table().gemm_nt_f32(m, n, k, a, b, c);
}
template <>
void gemm_nt<double>(int m, int n, int k, const double* a, const double* b, double* c) {
  active_table().gemm_nt_f64(m, n, k, a, b, c);
}
template <>
void gemm_tn<float>(int m, int n, int k, const float* a, const float* b, float* c) {
  active_table().gemm_tn_f32(m, n, k, a, b, c);
}
template <>
void gemm_tn<double>(int m, int n, int k, const double* a, const double* b, double* c) {
  active_table().gemm_tn_f64(m, n, k, a, b, c);
}
template <>
float dot<float>(std::size_t n, const float* x, const float* y) {
  return active_table().dot_f32(n, x, y);
}
template <>
double dot<double>(std::size_t n, const double* x, const double* y) {
  return active_table().dot_f64(n, x, y);
}
template <>
void axpy<float>(std::size_t n, float a, const float* x, float* y) {
  active_table().axpy_f32(n, a, x, y);
}
template <>
void axpy<double>(std::size_t n, double a, const double* x, double* y) {
  active_table().axpy_f64(n, a, x, y);
}

}  // namespace mlg::kernels
