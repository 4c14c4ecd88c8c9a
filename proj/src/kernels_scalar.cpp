#include <cmath>

#include "mulsim/kernels.hpp"

namespace mulsim::kernels {
namespace {

double k_dot(std::size_t n, const double* x, const double* y) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

void k_axpy(std::size_t n, double a, const double* x, double* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void k_add(std::size_t n, const double* x, const double* y, double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] + y[i];
}

void k_sub(std::size_t n, const double* x, const double* y, double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] - y[i];
}

void k_mul(std::size_t n, const double* x, const double* y, double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] * y[i];
}

void k_scale(std::size_t n, double a, const double* x, double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a * x[i];
}

double k_sum(std::size_t n, const double* x) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

double k_max(std::size_t n, const double* x) {
  double m = x[0];
  for (std::size_t i = 1; i < n; ++i)
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
  for (std::size_t i = 0; i < n; ++i) {
    double t = x[i] * 512.0;
    if (t < -131072.0) t = -131072.0;
    if (t > 131071.0) t = 131071.0;
    w[i] = static_cast<std::int32_t>(std::llrint(t));
  }
}

void k_dequantize(std::size_t n, const std::int32_t* w, double* x) {
  for (std::size_t i = 0; i < n; ++i) x[i] = static_cast<double>(w[i]) * 0x1.0p-9;
}

}  // namespace

const Ops& scalar_ops() {
  static const Ops ops = {k_dot,    k_axpy, k_add,       k_sub,       k_mul,
                          k_scale,  k_sum,  k_max,       k_matmul,    k_matmul_nt,
                          k_matmul_tn, k_quantize, k_dequantize};
  return ops;
}

}  // namespace mulsim::kernels
