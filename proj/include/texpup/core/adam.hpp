#pragma once

#include <cmath>

#include "texpup/core/params.hpp"

namespace texpup {

/// Adaptive-moment gradient descent over a ParamSet.
class Adam {
 public:
  explicit Adam(const ParamSet& params, double beta1 = 0.9,
                double beta2 = 0.999, double eps = 1e-8)
      : m_(ParamSet::zeros_like(params)),
        v_(ParamSet::zeros_like(params)),
        beta1_(beta1),
        beta2_(beta2),
        eps_(eps) {}

  void step(ParamSet& params, const ParamSet& grads, double lr) {
    ++t_;
    double c1 = 1.0 - std::pow(beta1_, t_);
    double c2 = 1.0 - std::pow(beta2_, t_);
    // Iterates the moment set, so an optimizer built over a parameter
    // subset leaves every other entry of `params` untouched.
    for (auto& [name, m] : m_) {
      Tensor& p = params.at(name);
      const Tensor& g = grads.at(name);
      Tensor& v = v_.at(name);
      for (std::size_t i = 0; i < p.size(); ++i) {
        m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
        v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
        double mh = m[i] / c1;
        double vh = v[i] / c2;
        p[i] -= lr * mh / (std::sqrt(vh) + eps_);
      }
    }
  }

 private:
  ParamSet m_, v_;
  double beta1_, beta2_, eps_;
  long t_ = 0;
};

}  // namespace texpup
