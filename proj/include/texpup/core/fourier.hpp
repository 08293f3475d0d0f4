#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

namespace texpup {

/// Positional encoding: for each input component p_i and band b in
/// [0, bands) emits sin(2^b * pi * p_i), cos(2^b * pi * p_i).
/// Output length is 2 * bands * p.size().
inline std::vector<double> fourier_encode(const std::vector<double>& p,
                                          int bands) {
  if (bands < 1) throw std::invalid_argument("fourier_encode: bands < 1");
  for (double v : p)
    if (!std::isfinite(v))
      throw std::invalid_argument("fourier_encode: non-finite input");
  std::vector<double> out;
  out.reserve(2 * static_cast<std::size_t>(bands) * p.size());
  constexpr double kPi = 3.14159265358979323846;
  for (double v : p) {
    double freq = kPi;
    for (int b = 0; b < bands; ++b) {
      out.push_back(std::sin(freq * v));
      out.push_back(std::cos(freq * v));
      freq *= 2.0;
    }
  }
  return out;
}

inline std::size_t fourier_dim(std::size_t input_dim, int bands) {
  return 2 * static_cast<std::size_t>(bands) * input_dim;
}

}  // namespace texpup
