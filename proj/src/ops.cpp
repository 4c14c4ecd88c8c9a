#include "mulsim/ops.hpp"

#include <cmath>

#include "mulsim/kernels.hpp"

namespace mulsim::tensor {

namespace {
const kernels::Ops& K() { return kernels::active(); }
constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;
}  // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw_shape("matmul", a.rows(), a.cols(), b.rows(), b.cols());
  Matrix c(a.rows(), b.cols());
  K().matmul(a.rows(), a.cols(), b.cols(), a.data(), b.data(), c.data());
  return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw_shape("matmul_nt", a.rows(), a.cols(), b.rows(), b.cols());
  Matrix c(a.rows(), b.rows());
  K().matmul_nt(a.rows(), a.cols(), b.rows(), a.data(), b.data(), c.data());
  return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw_shape("matmul_tn", a.rows(), a.cols(), b.rows(), b.cols());
  Matrix c(a.cols(), b.cols());
  K().matmul_tn(a.rows(), a.cols(), b.cols(), a.data(), b.data(), c.data());
  return c;
}

Matrix add(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) throw_shape("add", a.rows(), a.cols(), b.rows(), b.cols());
  Matrix c(a.rows(), a.cols());
  K().add(a.size(), a.data(), b.data(), c.data());
  return c;
}

Matrix sub(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) throw_shape("sub", a.rows(), a.cols(), b.rows(), b.cols());
  Matrix c(a.rows(), a.cols());
  K().sub(a.size(), a.data(), b.data(), c.data());
  return c;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) throw_shape("hadamard", a.rows(), a.cols(), b.rows(), b.cols());
  Matrix c(a.rows(), a.cols());
  K().mul(a.size(), a.data(), b.data(), c.data());
  return c;
}

Matrix add_row_broadcast(const Matrix& a, const Matrix& bias) {
  if (bias.rows() != 1 || bias.cols() != a.cols())
    throw_shape("add_row_broadcast", a.rows(), a.cols(), bias.rows(), bias.cols());
  Matrix c(a.rows(), a.cols());
  for (int i = 0; i < a.rows(); ++i) K().add(a.cols(), a.row(i), bias.data(), c.row(i));
  return c;
}

Matrix scale(const Matrix& a, double s) {
  Matrix c(a.rows(), a.cols());
  K().scale(a.size(), s, a.data(), c.data());
  return c;
}

Matrix transpose(const Matrix& a) {
  Matrix c(a.cols(), a.rows());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) c.at(j, i) = a.at(i, j);
  return c;
}

Matrix concat_cols(const std::vector<const Matrix*>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const int rows = parts[0]->rows();
  int cols = 0;
  for (const Matrix* p : parts) {
    if (p->rows() != rows) throw_shape("concat_cols", rows, cols, p->rows(), p->cols());
    cols += p->cols();
  }
  Matrix c(rows, cols);
  for (int i = 0; i < rows; ++i) {
    double* out = c.row(i);
    for (const Matrix* p : parts) {
      for (int j = 0; j < p->cols(); ++j) *out++ = p->at(i, j);
    }
  }
  return c;
}

Matrix softmax_rows(const Matrix& a) {
  if (a.cols() < 1) throw_shape("softmax_rows", a.rows(), a.cols());
  Matrix c(a.rows(), a.cols());
  for (int i = 0; i < a.rows(); ++i) {
    const double m = K().max(a.cols(), a.row(i));
    double* out = c.row(i);
    const double* in = a.row(i);
    for (int j = 0; j < a.cols(); ++j) out[j] = std::exp(in[j] - m);
    const double s = K().sum(a.cols(), out);
    K().scale(a.cols(), 1.0 / s, out, out);
  }
  return c;
}

Matrix gelu(const Matrix& a) {
  Matrix c(a.rows(), a.cols());
  const double* in = a.data();
  double* out = c.data();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = in[i];
    out[i] = 0.5 * x * (1.0 + std::erf(x * kInvSqrt2));
  }
  return c;
}

Matrix gelu_grad_factor(const Matrix& a) {
  Matrix c(a.rows(), a.cols());
  const double* in = a.data();
  double* out = c.data();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = in[i];
    const double phi = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
    out[i] = phi + x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
  }
  return c;
}

Matrix col_sum(const Matrix& a) {
  Matrix c(1, a.cols());
  for (int i = 0; i < a.rows(); ++i) K().add(a.cols(), c.data(), a.row(i), c.data());
  return c;
}

double sum_all(const Matrix& a) { return K().sum(a.size(), a.data()); }

double mean_all(const Matrix& a) {
  if (a.size() == 0) throw_shape("mean_all", a.rows(), a.cols());
  return sum_all(a) / static_cast<double>(a.size());
}

Matrix take_last_row(const Matrix& a) {
  if (a.rows() < 1) throw_shape("take_last_row", a.rows(), a.cols());
  Matrix c(1, a.cols());
  K().scale(a.cols(), 1.0, a.row(a.rows() - 1), c.data());
  return c;
}

int argmax_row(const Matrix& a, int r) {
  int best = 0;
  for (int j = 1; j < a.cols(); ++j)
    if (a.at(r, j) > a.at(r, best)) best = j;
  return best;
}

Matrix layer_norm_rows(const Matrix& x, const Matrix& gain, const Matrix& bias, double eps,
                       LayerNormCache* cache) {
  if (gain.rows() != 1 || gain.cols() != x.cols())
    throw_shape("layer_norm_rows", x.rows(), x.cols(), gain.rows(), gain.cols());
  if (bias.rows() != 1 || bias.cols() != x.cols())
    throw_shape("layer_norm_rows", x.rows(), x.cols(), bias.rows(), bias.cols());
  const int c = x.cols();
  Matrix out(x.rows(), c);
  if (cache) {
    cache->normalized = Matrix(x.rows(), c);
    cache->inv_sigma.assign(x.rows(), 0.0);
  }
  for (int i = 0; i < x.rows(); ++i) {
    const double* xi = x.row(i);
    const double mu = K().sum(c, xi) / c;
    double var = 0.0;
    for (int j = 0; j < c; ++j) {
      const double d = xi[j] - mu;
      var += d * d;
    }
    var /= c;
    const double inv = 1.0 / std::sqrt(var + eps);
    double* oi = out.row(i);
    for (int j = 0; j < c; ++j) {
      const double y = (xi[j] - mu) * inv;
      if (cache) cache->normalized.at(i, j) = y;
      oi[j] = y * gain.at(0, j) + bias.at(0, j);
    }
    if (cache) cache->inv_sigma[i] = inv;
  }
  return out;
}

}  // namespace mulsim::tensor
