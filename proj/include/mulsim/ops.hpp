#pragma once

#include <vector>

#include "mulsim/matrix.hpp"

namespace mulsim::tensor {

// Value-level operations. The autodiff tape wraps these for training; the
// inference paths call them directly, so both paths share one numeric truth.

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_nt(const Matrix& a, const Matrix& b);  // a * b^T
Matrix matmul_tn(const Matrix& a, const Matrix& b);  // a^T * b
Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix hadamard(const Matrix& a, const Matrix& b);
Matrix add_row_broadcast(const Matrix& a, const Matrix& bias);  // bias is 1 x cols
Matrix scale(const Matrix& a, double s);
Matrix transpose(const Matrix& a);
Matrix concat_cols(const std::vector<const Matrix*>& parts);
Matrix softmax_rows(const Matrix& a);
Matrix gelu(const Matrix& a);
Matrix gelu_grad_factor(const Matrix& a);  // d gelu(x) / dx, elementwise
Matrix col_sum(const Matrix& a);           // 1 x cols
double sum_all(const Matrix& a);
double mean_all(const Matrix& a);
Matrix take_last_row(const Matrix& a);  // 1 x cols
int argmax_row(const Matrix& a, int r);  // lowest index on ties

struct LayerNormCache {
  Matrix normalized;   // y = (x - mu) / sigma, per row
  std::vector<double> inv_sigma;
};

// Per-row normalization followed by elementwise gain and bias (both 1 x cols).
Matrix layer_norm_rows(const Matrix& x, const Matrix& gain, const Matrix& bias, double eps,
                       LayerNormCache* cache = nullptr);

}  // namespace mulsim::tensor
