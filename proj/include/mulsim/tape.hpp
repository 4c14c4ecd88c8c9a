#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "mulsim/ops.hpp"

namespace mulsim::tensor {

using NodeId = int;

// Reverse-mode autodiff over an append-only list of recorded primitives.
// Construct with grad_enabled=false for inference: the same value code runs
// but no closures are recorded. Forward multiplies are tallied so analytic
// cost formulas can be checked against an executed pass.
class Tape {
 public:
  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

  NodeId input(Matrix value, bool requires_grad = false);

  const Matrix& value(NodeId id) const { return nodes_[id].value; }
  const Matrix& grad(NodeId id) const;
  bool requires_grad(NodeId id) const { return nodes_[id].requires_grad; }
  std::size_t size() const { return nodes_.size(); }
  std::uint64_t multiply_count() const { return muls_; }
  int last_backward_visits() const { return backward_visits_; }

  NodeId matmul(NodeId a, NodeId b);
  NodeId matmul_nt(NodeId a, NodeId b);  // value(a) * value(b)^T
  NodeId add(NodeId a, NodeId b);
  NodeId add_row_broadcast(NodeId a, NodeId bias);
  NodeId scale(NodeId a, double s);
  NodeId softmax_rows(NodeId a);
  NodeId layer_norm_rows(NodeId x, NodeId gain, NodeId bias, double eps);
  NodeId gelu(NodeId a);
  NodeId concat_cols(const std::vector<NodeId>& parts);
  NodeId take_last_row(NodeId a);
  NodeId mean_all(NodeId a);
  NodeId sum_all(NodeId a);
  NodeId softmax_cross_entropy(NodeId logits, int label);

  // Seeds d(loss)/d(loss) = 1 and walks the tape once in reverse creation
  // order. loss must be 1x1.
  void backward(NodeId loss);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    std::function<void(Tape&)> back;
  };

  bool track(NodeId a) const { return grad_enabled_ && nodes_[a].requires_grad; }
  NodeId push(Matrix value, bool requires_grad, std::function<void(Tape&)> back);
  void accum(NodeId id, const Matrix& g);
  void accum_scaled(NodeId id, const Matrix& g, double s);

  std::vector<Node> nodes_;
  bool grad_enabled_;
  std::uint64_t muls_ = 0;
  int backward_visits_ = 0;
};

}  // namespace mulsim::tensor
