#include "mulsim/adamw.hpp"

#include <cmath>

#include "mulsim/error.hpp"

namespace mulsim::tensor {

void AdamW::step(std::map<std::string, Matrix>& params,
                 const std::map<std::string, Matrix>& grads) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (const auto& [name, g] : grads) {
    auto it = params.find(name);
    if (it == params.end()) throw ConfigError("AdamW::step: unknown parameter " + name);
    Matrix& p = it->second;
    if (!p.same_shape(g)) throw_shape("AdamW::step", p.rows(), p.cols(), g.rows(), g.cols());
    Matrix& m = m_.try_emplace(name, p.rows(), p.cols()).first->second;
    Matrix& v = v_.try_emplace(name, p.rows(), p.cols()).first->second;
    double* pp = p.data();
    double* mp = m.data();
    double* vp = v.data();
    const double* gp = g.data();
    for (std::size_t i = 0; i < p.size(); ++i) {
      mp[i] = beta1_ * mp[i] + (1.0 - beta1_) * gp[i];
      vp[i] = beta2_ * vp[i] + (1.0 - beta2_) * gp[i] * gp[i];
      const double mhat = mp[i] / bc1;
      const double vhat = vp[i] / bc2;
      pp[i] -= lr_ * (mhat / (std::sqrt(vhat) + eps_) + wd_ * pp[i]);
    }
  }
}

}  // namespace mulsim::tensor
