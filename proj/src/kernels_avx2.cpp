#include "mulsim/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <cmath>

namespace mulsim::kernels {
namespace {

inline double hsum4(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
}

double k_dot(std::size_t n, const double* x, const double* y) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc);
  double r = hsum4(acc);
  for (; i < n; ++i) r += x[i] * y[i];
  return r;
}

void k_axpy(std::size_t n, double a, const double* x, double* y) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d v = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
    _mm256_storeu_pd(y + i, v);
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void k_add(std::size_t n, const double* x, const double* y, double* out) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) out[i] = x[i] + y[i];
}

void k_sub(std::size_t n, const double* x, const double* y, double* out) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_sub_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) out[i] = x[i] - y[i];
}

void k_mul(std::size_t n, const double* x, const double* y, double* out) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) out[i] = x[i] * y[i];
}

void k_scale(std::size_t n, double a, const double* x, double* out) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
  for (; i < n; ++i) out[i] = a * x[i];
}

double k_sum(std::size_t n, const double* x) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
  double r = hsum4(acc);
  for (; i < n; ++i) r += x[i];
  return r;
}

double k_max(std::size_t n, const double* x) {
  std::size_t i = 0;
  double m = x[0];
  if (n >= 4) {
    __m256d vm = _mm256_loadu_pd(x);
    for (i = 4; i + 4 <= n; i += 4) vm = _mm256_max_pd(vm, _mm256_loadu_pd(x + i));
    __m128d lo = _mm_max_pd(_mm256_castpd256_pd128(vm), _mm256_extractf128_pd(vm, 1));
    m = _mm_cvtsd_f64(_mm_max_sd(lo, _mm_unpackhi_pd(lo, lo)));
  }
  for (; i < n; ++i)
    if (x[i] > m) m = x[i];
  return m;
}

void k_matmul(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b,
              double* c) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    for (std::size_t p = 0; p < k; ++p) k_axpy(n, a[i * k + p], b + p * n, ci);
  }
}

void k_matmul_nt(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b,
                 double* c) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) c[i * n + j] = k_dot(k, a + i * k, b + j * k);
}

void k_matmul_tn(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b,
                 double* c) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) k_axpy(n, a[i * k + p], b + i * n, c + p * n);
}

void k_quantize(std::size_t n, const double* x, std::int32_t* w) {
  const __m256d kScale = _mm256_set1_pd(512.0);
  const __m256d kLo = _mm256_set1_pd(-131072.0);
  const __m256d kHi = _mm256_set1_pd(131071.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d t = _mm256_mul_pd(_mm256_loadu_pd(x + i), kScale);
    t = _mm256_min_pd(_mm256_max_pd(t, kLo), kHi);
    _mm_storeu_si128(reinterpret_cast<__m128i*>(w + i), _mm256_cvtpd_epi32(t));
  }
  for (; i < n; ++i) {
    double t = x[i] * 512.0;
    if (t < -131072.0) t = -131072.0;
    if (t > 131071.0) t = 131071.0;
    w[i] = static_cast<std::int32_t>(std::llrint(t));
  }
}

void k_dequantize(std::size_t n, const std::int32_t* w, double* x) {
  const __m256d kInv = _mm256_set1_pd(0x1.0p-9);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d t = _mm256_cvtepi32_pd(_mm_loadu_si128(reinterpret_cast<const __m128i*>(w + i)));
    _mm256_storeu_pd(x + i, _mm256_mul_pd(t, kInv));
  }
  for (; i < n; ++i) x[i] = static_cast<double>(w[i]) * 0x1.0p-9;
}

}  // namespace

const Ops& avx2_ops() {
  static const Ops ops = {k_dot,    k_axpy, k_add,       k_sub,       k_mul,
                          k_scale,  k_sum,  k_max,       k_matmul,    k_matmul_nt,
                          k_matmul_tn, k_quantize, k_dequantize};
  return ops;
}

}  // namespace mulsim::kernels

#else

namespace mulsim::kernels {
const Ops& avx2_ops() { return scalar_ops(); }
}  // namespace mulsim::kernels

#endif
