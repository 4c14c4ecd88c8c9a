#pragma once

#include <map>
#include <string>

#include "mulsim/matrix.hpp"

namespace mulsim::tensor {

// AdamW with decoupled weight decay: the decay term is applied directly to
// the parameter, not mixed into the moment estimates.
class AdamW {
 public:
  AdamW(double lr = 1e-3, double weight_decay = 1e-3, double beta1 = 0.9, double beta2 = 0.999,
        double eps = 1e-8)
      : lr_(lr), wd_(weight_decay), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  // Updates every parameter that has an entry in grads. Parameters without a
  // gradient entry are left untouched.
  void step(std::map<std::string, Matrix>& params, const std::map<std::string, Matrix>& grads);

  long steps_taken() const { return t_; }

 private:
  double lr_, wd_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::map<std::string, Matrix> m_, v_;
};

}  // namespace mulsim::tensor
