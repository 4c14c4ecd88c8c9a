#pragma once

#include <cstddef>
#include <cstdint>

namespace mulsim::kernels {

// Numeric inner loops exist twice: a scalar reference implementation and an
// AVX2 variant compiled in its own translation unit. One of them is selected
// once at startup (CPU probe, overridable via force_backend or the
// MULSIM_KERNELS environment variable) and every caller goes through the
// active dispatch table.

enum class Backend { kScalar, kAvx2 };

struct Ops {
  double (*dot)(std::size_t n, const double* x, const double* y);
  void (*axpy)(std::size_t n, double a, const double* x, double* y);  // y += a*x
  void (*add)(std::size_t n, const double* x, const double* y, double* out);
  void (*sub)(std::size_t n, const double* x, const double* y, double* out);
  void (*mul)(std::size_t n, const double* x, const double* y, double* out);
  void (*scale)(std::size_t n, double a, const double* x, double* out);
  double (*sum)(std::size_t n, const double* x);
  double (*max)(std::size_t n, const double* x);  // n >= 1
  // C (m x n) += A (m x k) * B (k x n), row-major, C zeroed by caller
  void (*matmul)(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b,
                 double* c);
  // C (m x n) = A (m x k) * B^T, B is (n x k)
  void (*matmul_nt)(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b,
                    double* c);
  // C (k x n) += A^T * B, A is (m x k), B is (m x n)
  void (*matmul_tn)(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b,
                    double* c);
  // w = clamp(round_half_even(x * 2^9), -2^17, 2^17 - 1); inputs must be finite
  void (*quantize_q99)(std::size_t n, const double* x, std::int32_t* w);
  void (*dequantize_q99)(std::size_t n, const std::int32_t* w, double* x);
};

const Ops& scalar_ops();
const Ops& avx2_ops();  // valid only when avx2_supported()

bool avx2_supported();
Backend active_backend();
void force_backend(Backend b);  // throws mulsim::ConfigError if unsupported
const Ops& active();

}  // namespace mulsim::kernels
