#include "mulsim/tape.hpp"

#include <cmath>
#include <memory>

#include "mulsim/kernels.hpp"

namespace mulsim::tensor {

namespace {
const kernels::Ops& K() { return kernels::active(); }
}

NodeId Tape::push(Matrix value, bool requires_grad, std::function<void(Tape&)> back) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  if (grad_enabled_ && requires_grad) n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size()) - 1;
}

NodeId Tape::input(Matrix value, bool requires_grad) {
  return push(std::move(value), requires_grad, nullptr);
}

const Matrix& Tape::grad(NodeId id) const {
  if (nodes_[id].grad.empty()) throw Error("grad: node has no gradient (run backward first)");
  return nodes_[id].grad;
}

void Tape::accum(NodeId id, const Matrix& g) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return;
  if (n.grad.empty()) n.grad = Matrix(n.value.rows(), n.value.cols());
  K().add(n.grad.size(), n.grad.data(), g.data(), n.grad.data());
}

void Tape::accum_scaled(NodeId id, const Matrix& g, double s) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return;
  if (n.grad.empty()) n.grad = Matrix(n.value.rows(), n.value.cols());
  K().axpy(n.grad.size(), s, g.data(), n.grad.data());
}

NodeId Tape::matmul(NodeId a, NodeId b) {
  Matrix v = tensor::matmul(nodes_[a].value, nodes_[b].value);
  muls_ += static_cast<std::uint64_t>(nodes_[a].value.rows()) * nodes_[a].value.cols() *
           nodes_[b].value.cols();
  const bool rg = track(a) || track(b);
  NodeId out = push(std::move(v), nodes_[a].requires_grad || nodes_[b].requires_grad, nullptr);
  if (grad_enabled_ && rg) {
    nodes_[out].back = [a, b, out](Tape& t) {
      const Matrix& g = t.nodes_[out].grad;
      if (t.nodes_[a].requires_grad) t.accum(a, tensor::matmul_nt(g, t.nodes_[b].value));
      if (t.nodes_[b].requires_grad) t.accum(b, tensor::matmul_tn(t.nodes_[a].value, g));
    };
  }
  return out;
}

NodeId Tape::matmul_nt(NodeId a, NodeId b) {
  Matrix v = tensor::matmul_nt(nodes_[a].value, nodes_[b].value);
  muls_ += static_cast<std::uint64_t>(nodes_[a].value.rows()) * nodes_[a].value.cols() *
           nodes_[b].value.rows();
  const bool rg = track(a) || track(b);
  NodeId out = push(std::move(v), nodes_[a].requires_grad || nodes_[b].requires_grad, nullptr);
  if (grad_enabled_ && rg) {
    nodes_[out].back = [a, b, out](Tape& t) {
      const Matrix& g = t.nodes_[out].grad;
      if (t.nodes_[a].requires_grad) t.accum(a, tensor::matmul(g, t.nodes_[b].value));
      if (t.nodes_[b].requires_grad) t.accum(b, tensor::matmul_tn(g, t.nodes_[a].value));
    };
  }
  return out;
}

NodeId Tape::add(NodeId a, NodeId b) {
  Matrix v = tensor::add(nodes_[a].value, nodes_[b].value);
  const bool rg = track(a) || track(b);
  NodeId out = push(std::move(v), nodes_[a].requires_grad || nodes_[b].requires_grad, nullptr);
  if (grad_enabled_ && rg) {
    nodes_[out].back = [a, b, out](Tape& t) {
      const Matrix& g = t.nodes_[out].grad;
      t.accum(a, g);
      t.accum(b, g);
    };
  }
  return out;
}

NodeId Tape::add_row_broadcast(NodeId a, NodeId bias) {
  Matrix v = tensor::add_row_broadcast(nodes_[a].value, nodes_[bias].value);
  const bool rg = track(a) || track(bias);
  NodeId out = push(std::move(v), nodes_[a].requires_grad || nodes_[bias].requires_grad, nullptr);
  if (grad_enabled_ && rg) {
    nodes_[out].back = [a, bias, out](Tape& t) {
      const Matrix& g = t.nodes_[out].grad;
      t.accum(a, g);
      if (t.nodes_[bias].requires_grad) t.accum(bias, tensor::col_sum(g));
    };
  }
  return out;
}

NodeId Tape::scale(NodeId a, double s) {
  Matrix v = tensor::scale(nodes_[a].value, s);
  muls_ += v.size();
  NodeId out = push(std::move(v), nodes_[a].requires_grad, nullptr);
  if (track(a)) {
    nodes_[out].back = [a, s, out](Tape& t) { t.accum_scaled(a, t.nodes_[out].grad, s); };
  }
  return out;
}

NodeId Tape::softmax_rows(NodeId a) {
  Matrix v = tensor::softmax_rows(nodes_[a].value);
  muls_ += v.size();
  NodeId out = push(std::move(v), nodes_[a].requires_grad, nullptr);
  if (track(a)) {
    nodes_[out].back = [a, out](Tape& t) {
      const Matrix& g = t.nodes_[out].grad;
      const Matrix& s = t.nodes_[out].value;
      Matrix d(s.rows(), s.cols());
      for (int i = 0; i < s.rows(); ++i) {
        const double dot = K().dot(s.cols(), g.row(i), s.row(i));
        for (int j = 0; j < s.cols(); ++j) d.at(i, j) = s.at(i, j) * (g.at(i, j) - dot);
      }
      t.accum(a, d);
    };
  }
  return out;
}

NodeId Tape::layer_norm_rows(NodeId x, NodeId gain, NodeId bias, double eps) {
  auto cache = std::make_shared<LayerNormCache>();
  Matrix v = tensor::layer_norm_rows(nodes_[x].value, nodes_[gain].value, nodes_[bias].value, eps,
                                     cache.get());
  muls_ += 3 * v.size();
  const bool rg = track(x) || track(gain) || track(bias);
  NodeId out = push(std::move(v),
                    nodes_[x].requires_grad || nodes_[gain].requires_grad ||
                        nodes_[bias].requires_grad,
                    nullptr);
  if (grad_enabled_ && rg) {
    nodes_[out].back = [x, gain, bias, out, cache](Tape& t) {
      const Matrix& g = t.nodes_[out].grad;
      const Matrix& y = cache->normalized;
      const int c = y.cols();
      if (t.nodes_[gain].requires_grad) t.accum(gain, tensor::col_sum(tensor::hadamard(g, y)));
      if (t.nodes_[bias].requires_grad) t.accum(bias, tensor::col_sum(g));
      if (t.nodes_[x].requires_grad) {
        const Matrix& gn = t.nodes_[gain].value;
        Matrix dx(y.rows(), c);
        for (int i = 0; i < y.rows(); ++i) {
          double mean_dy = 0.0, mean_dyy = 0.0;
          for (int j = 0; j < c; ++j) {
            const double dy = g.at(i, j) * gn.at(0, j);
            mean_dy += dy;
            mean_dyy += dy * y.at(i, j);
          }
          mean_dy /= c;
          mean_dyy /= c;
          const double inv = cache->inv_sigma[i];
          for (int j = 0; j < c; ++j) {
            const double dy = g.at(i, j) * gn.at(0, j);
            dx.at(i, j) = inv * (dy - mean_dy - y.at(i, j) * mean_dyy);
          }
        }
        t.accum(x, dx);
      }
    };
  }
  return out;
}

NodeId Tape::gelu(NodeId a) {
  Matrix v = tensor::gelu(nodes_[a].value);
  muls_ += 3 * v.size();
  NodeId out = push(std::move(v), nodes_[a].requires_grad, nullptr);
  if (track(a)) {
    nodes_[out].back = [a, out](Tape& t) {
      Matrix f = tensor::gelu_grad_factor(t.nodes_[a].value);
      t.accum(a, tensor::hadamard(t.nodes_[out].grad, f));
    };
  }
  return out;
}

NodeId Tape::concat_cols(const std::vector<NodeId>& parts) {
  std::vector<const Matrix*> ptrs;
  ptrs.reserve(parts.size());
  bool rg = false;
  for (NodeId p : parts) {
    ptrs.push_back(&nodes_[p].value);
    rg = rg || nodes_[p].requires_grad;
  }
  Matrix v = tensor::concat_cols(ptrs);
  NodeId out = push(std::move(v), rg, nullptr);
  if (grad_enabled_ && rg) {
    std::vector<NodeId> ps = parts;
    nodes_[out].back = [ps, out](Tape& t) {
      const Matrix& g = t.nodes_[out].grad;
      int off = 0;
      for (NodeId p : ps) {
        const Matrix& pv = t.nodes_[p].value;
        Matrix gp(pv.rows(), pv.cols());
        for (int i = 0; i < pv.rows(); ++i)
          for (int j = 0; j < pv.cols(); ++j) gp.at(i, j) = g.at(i, off + j);
        t.accum(p, gp);
        off += pv.cols();
      }
    };
  }
  return out;
}

NodeId Tape::take_last_row(NodeId a) {
  Matrix v = tensor::take_last_row(nodes_[a].value);
  NodeId out = push(std::move(v), nodes_[a].requires_grad, nullptr);
  if (track(a)) {
    nodes_[out].back = [a, out](Tape& t) {
      const Matrix& g = t.nodes_[out].grad;
      const Matrix& av = t.nodes_[a].value;
      Matrix ga(av.rows(), av.cols());
      for (int j = 0; j < av.cols(); ++j) ga.at(av.rows() - 1, j) = g.at(0, j);
      t.accum(a, ga);
    };
  }
  return out;
}

NodeId Tape::mean_all(NodeId a) {
  Matrix v(1, 1);
  v.at(0, 0) = tensor::mean_all(nodes_[a].value);
  NodeId out = push(std::move(v), nodes_[a].requires_grad, nullptr);
  if (track(a)) {
    nodes_[out].back = [a, out](Tape& t) {
      const Matrix& av = t.nodes_[a].value;
      const double s = t.nodes_[out].grad.at(0, 0) / static_cast<double>(av.size());
      t.accum(a, Matrix::full(av.rows(), av.cols(), s));
    };
  }
  return out;
}

NodeId Tape::sum_all(NodeId a) {
  Matrix v(1, 1);
  v.at(0, 0) = tensor::sum_all(nodes_[a].value);
  NodeId out = push(std::move(v), nodes_[a].requires_grad, nullptr);
  if (track(a)) {
    nodes_[out].back = [a, out](Tape& t) {
      const Matrix& av = t.nodes_[a].value;
      t.accum(a, Matrix::full(av.rows(), av.cols(), t.nodes_[out].grad.at(0, 0)));
    };
  }
  return out;
}

NodeId Tape::softmax_cross_entropy(NodeId logits, int label) {
  const Matrix& z = nodes_[logits].value;
  if (z.rows() != 1 || z.cols() < 1) throw_shape("softmax_cross_entropy", z.rows(), z.cols());
  if (label < 0 || label >= z.cols())
    throw ConfigError("softmax_cross_entropy: label out of range");
  const double m = K().max(z.cols(), z.data());
  double se = 0.0;
  auto probs = std::make_shared<Matrix>(1, z.cols());
  for (int j = 0; j < z.cols(); ++j) {
    const double e = std::exp(z.at(0, j) - m);
    probs->at(0, j) = e;
    se += e;
  }
  K().scale(z.cols(), 1.0 / se, probs->data(), probs->data());
  Matrix v(1, 1);
  v.at(0, 0) = m + std::log(se) - z.at(0, label);
  NodeId out = push(std::move(v), nodes_[logits].requires_grad, nullptr);
  if (track(logits)) {
    nodes_[out].back = [logits, label, out, probs](Tape& t) {
      const double g = t.nodes_[out].grad.at(0, 0);
      Matrix d(1, probs->cols());
      for (int j = 0; j < probs->cols(); ++j) d.at(0, j) = g * probs->at(0, j);
      d.at(0, label) -= g;
      t.accum(logits, d);
    };
  }
  return out;
}

void Tape::backward(NodeId loss) {
  if (!grad_enabled_) throw Error("backward: tape was created with gradients disabled");
  Node& ln = nodes_[loss];
  if (ln.value.rows() != 1 || ln.value.cols() != 1)
    throw_shape("backward", ln.value.rows(), ln.value.cols());
  accum(loss, Matrix::full(1, 1, 1.0));
  backward_visits_ = 0;
  for (NodeId i = loss; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.back && !n.grad.empty()) {
      n.back(*this);
      ++backward_visits_;
    }
  }
}

}  // namespace mulsim::tensor
