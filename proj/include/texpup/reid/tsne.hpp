#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "texpup/core/rng.hpp"

namespace texpup::reid {

struct TsneConfig {
  double perplexity = 30.0;
  int iterations = 1000;
  int exaggeration_iters = 250;   // early exaggeration window
  double exaggeration = 12.0;
  double learning_rate = 200.0;
  double momentum_early = 0.5;
  double momentum_late = 0.8;
  std::uint64_t seed = 17;
};

namespace detail {

/// Shannon entropy (nats) and the conditional row p_{j|i} for precision beta.
inline double row_entropy(const std::vector<double>& d2, std::size_t i,
                          double beta, std::vector<double>& p) {
  std::size_t n = p.size();
  double sum = 0.0;
  for (std::size_t j = 0; j < n; ++j)
    sum += p[j] = (j == i) ? 0.0 : std::exp(-beta * d2[i * n + j]);
  if (sum <= 0.0) return 0.0;
  double h = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    p[j] /= sum;
    if (p[j] > 1e-300) h -= p[j] * std::log(p[j]);
  }
  return h;
}

/// Bisects the Gaussian precision until the row perplexity matches the target
/// within `tol` (measured on the perplexity itself).
inline void solve_row(const std::vector<double>& d2, std::size_t i,
                      double perplexity, double tol, std::vector<double>& p) {
  double target_h = std::log(perplexity);
  double beta = 1.0, lo = 0.0, hi = std::numeric_limits<double>::infinity();
  for (int it = 0; it < 200; ++it) {
    double h = row_entropy(d2, i, beta, p);
    if (std::fabs(std::exp(h) - perplexity) <= tol) return;
    if (h > target_h) {  // too flat: raise precision
      lo = beta;
      beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
    } else {
      hi = beta;
      beta = 0.5 * (beta + lo);
    }
  }
  throw std::runtime_error("tsne: perplexity bisection did not converge");
}

}  // namespace detail

/// Conditional perplexity of row i of a symmetric-input affinity solve; test
/// hook for the bisection contract.
inline double row_perplexity(const std::vector<double>& points, std::size_t n,
                             std::size_t dim, std::size_t i, double perplexity,
                             double tol = 1e-4) {
  std::vector<double> d2(n * n, 0.0);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b) {
      double s = 0.0;
      for (std::size_t k = 0; k < dim; ++k) {
        double d = points[a * dim + k] - points[b * dim + k];
        s += d * d;
      }
      d2[a * n + b] = s;
    }
  std::vector<double> p(n, 0.0);
  detail::solve_row(d2, i, perplexity, tol, p);
  double h = 0.0;
  for (double v : p)
    if (v > 1e-300) h -= v * std::log(v);
  return std::exp(h);
}

/// Exact t-SNE: full pairwise affinities, per-point bandwidth solved by
/// bisection, Student-t low-dimensional kernel, gradient descent with early
/// exaggeration and adaptive gains. Deterministic for a fixed seed.
inline std::vector<double> tsne_project(const std::vector<double>& points,
                                        std::size_t n, std::size_t dim,
                                        const TsneConfig& cfg = {}) {
  if (points.size() != n * dim) throw std::invalid_argument("tsne: size");
  if (static_cast<double>(n) <= 3.0 * cfg.perplexity)
    throw std::invalid_argument("tsne: need more than 3*perplexity points");

  std::vector<double> d2(n * n, 0.0);
  double max_d2 = 0.0;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b) {
      double s = 0.0;
      for (std::size_t k = 0; k < dim; ++k) {
        double d = points[a * dim + k] - points[b * dim + k];
        s += d * d;
      }
      d2[a * n + b] = d2[b * n + a] = s;
      max_d2 = std::max(max_d2, s);
    }
  if (max_d2 <= 0.0)
    throw std::invalid_argument("tsne: degenerate input (all points identical)");

  // Symmetrized joint affinities.
  std::vector<double> P(n * n, 0.0), row(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    detail::solve_row(d2, i, cfg.perplexity, 1e-4, row);
    for (std::size_t j = 0; j < n; ++j) P[i * n + j] += row[j];
  }
  double psum = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      double v = (P[i * n + j] + P[j * n + i]) / (2.0 * n);
      P[i * n + j] = P[j * n + i] = std::max(v, 1e-12);
      psum += 2.0 * P[i * n + j];
    }
  for (double& v : P) v /= psum;

  Rng rng(cfg.seed);
  std::vector<double> y(n * 2), vel(n * 2, 0.0), gain(n * 2, 1.0),
      grad(n * 2, 0.0), q(n * n, 0.0);
  for (double& v : y) v = 1e-4 * rng.normal();

  for (int it = 0; it < cfg.iterations; ++it) {
    bool early = it < cfg.exaggeration_iters;
    double ex = early ? cfg.exaggeration : 1.0;
    double mom = early ? cfg.momentum_early : cfg.momentum_late;

    double qsum = 0.0;
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = a + 1; b < n; ++b) {
        double dx = y[a * 2] - y[b * 2], dy = y[a * 2 + 1] - y[b * 2 + 1];
        double w = 1.0 / (1.0 + dx * dx + dy * dy);
        q[a * n + b] = q[b * n + a] = w;
        qsum += 2.0 * w;
      }

    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b) {
        if (a == b) continue;
        double w = q[a * n + b];
        double coeff = 4.0 * (ex * P[a * n + b] - std::max(w / qsum, 1e-12)) * w;
        grad[a * 2] += coeff * (y[a * 2] - y[b * 2]);
        grad[a * 2 + 1] += coeff * (y[a * 2 + 1] - y[b * 2 + 1]);
      }

    for (std::size_t k = 0; k < n * 2; ++k) {
      gain[k] = (grad[k] > 0.0) != (vel[k] > 0.0) ? gain[k] + 0.2
                                                  : std::max(gain[k] * 0.8, 0.01);
      vel[k] = mom * vel[k] - cfg.learning_rate * gain[k] * grad[k];
      y[k] += vel[k];
    }
    // Re-center so the layout does not drift.
    double mx = 0.0, my = 0.0;
    for (std::size_t a = 0; a < n; ++a) {
      mx += y[a * 2];
      my += y[a * 2 + 1];
    }
    mx /= n;
    my /= n;
    for (std::size_t a = 0; a < n; ++a) {
      y[a * 2] -= mx;
      y[a * 2 + 1] -= my;
    }
  }
  return y;
}

}  // namespace texpup::reid
