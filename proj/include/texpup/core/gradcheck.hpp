#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

#include "texpup/core/params.hpp"

namespace texpup {

/// Scalar loss over a ParamSet. When `grads` is non-null the callee must
/// accumulate analytic gradients into it (pre-zeroed by the caller).
using LossFn = std::function<double(const ParamSet&, ParamSet* grads)>;

/// Compares analytic gradients against central finite differences for every
/// scalar parameter. Returns the maximum relative error
/// |g_an - g_fd| / max(1e-12, |g_an| + |g_fd|).
inline double grad_check(const LossFn& loss_fn, const ParamSet& params,
                         double epsilon) {
  if (epsilon <= 0.0) throw std::invalid_argument("grad_check: epsilon <= 0");
  ParamSet grads = ParamSet::zeros_like(params);
  double base = loss_fn(params, &grads);
  if (!std::isfinite(base)) throw std::runtime_error("grad_check: non-finite loss");

  ParamSet probe = params;
  double worst = 0.0;
  for (const auto& [name, tensor] : params) {
    Tensor& pt = probe.at(name);
    for (std::size_t i = 0; i < tensor.size(); ++i) {
      double orig = pt[i];
      pt[i] = orig + epsilon;
      double up = loss_fn(probe, nullptr);
      pt[i] = orig - epsilon;
      double dn = loss_fn(probe, nullptr);
      pt[i] = orig;
      if (!std::isfinite(up) || !std::isfinite(dn))
        throw std::runtime_error("grad_check: non-finite loss at " + name);
      double fd = (up - dn) / (2.0 * epsilon);
      double an = grads.at(name)[i];
      double rel = std::fabs(an - fd) / std::max(1e-12, std::fabs(an) + std::fabs(fd));
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

}  // namespace texpup
