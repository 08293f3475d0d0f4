#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

namespace texpup::reid {

struct KdeGrid {
  std::size_t nx = 0, ny = 0;
  double x0 = 0, y0 = 0;  // node (0,0)
  double dx = 0, dy = 0;
  std::vector<double> density;  // ny rows by nx cols

  double at(std::size_t iy, std::size_t ix) const {
    return density[iy * nx + ix];
  }
  /// Trapezoidal integral over the grid extent.
  double integral() const {
    double s = 0.0;
    for (std::size_t iy = 0; iy + 1 < ny; ++iy)
      for (std::size_t ix = 0; ix + 1 < nx; ++ix)
        s += 0.25 * (at(iy, ix) + at(iy, ix + 1) + at(iy + 1, ix) +
                     at(iy + 1, ix + 1));
    return s * dx * dy;
  }
};

/// Isotropic Scott's-rule bandwidth for 2D points: mean marginal sigma scaled
/// by n^(-1/6). Falls back to 1 for a degenerate (zero-spread) cloud.
inline double scott_bandwidth(const std::vector<double>& pts) {
  std::size_t n = pts.size() / 2;
  if (n == 0) throw std::invalid_argument("bandwidth: no points");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += pts[i * 2];
    my += pts[i * 2 + 1];
  }
  mx /= n;
  my /= n;
  double vx = 0, vy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    vx += (pts[i * 2] - mx) * (pts[i * 2] - mx);
    vy += (pts[i * 2 + 1] - my) * (pts[i * 2 + 1] - my);
  }
  double sigma = std::sqrt(0.5 * (vx + vy) / n);
  if (sigma <= 0.0) return 1.0;
  return sigma * std::pow(static_cast<double>(n), -1.0 / 6.0);
}

/// Gaussian-kernel density on a regular grid. The grid covers the point
/// bounding box with a 10% margin, widened by 4 bandwidths so the density
/// mass is captured (integral check within 2%).
inline KdeGrid kde_grid(const std::vector<double>& pts, double bandwidth,
                        std::size_t resolution) {
  if (pts.empty() || pts.size() % 2 != 0)
    throw std::invalid_argument("kde: need 2D points");
  if (bandwidth <= 0.0) throw std::invalid_argument("kde: bandwidth > 0");
  if (resolution < 2) throw std::invalid_argument("kde: resolution >= 2");
  std::size_t n = pts.size() / 2;

  double lx = pts[0], hx = pts[0], ly = pts[1], hy = pts[1];
  for (std::size_t i = 0; i < n; ++i) {
    lx = std::min(lx, pts[i * 2]);
    hx = std::max(hx, pts[i * 2]);
    ly = std::min(ly, pts[i * 2 + 1]);
    hy = std::max(hy, pts[i * 2 + 1]);
  }
  double mx = 0.1 * (hx - lx) + 4.0 * bandwidth;
  double my = 0.1 * (hy - ly) + 4.0 * bandwidth;

  KdeGrid g;
  g.nx = g.ny = resolution;
  g.x0 = lx - mx;
  g.y0 = ly - my;
  g.dx = (hx + mx - g.x0) / static_cast<double>(resolution - 1);
  g.dy = (hy + my - g.y0) / static_cast<double>(resolution - 1);
  g.density.assign(resolution * resolution, 0.0);

  double norm = 1.0 / (2.0 * M_PI * bandwidth * bandwidth * n);
  double inv2h2 = 1.0 / (2.0 * bandwidth * bandwidth);
  for (std::size_t iy = 0; iy < g.ny; ++iy) {
    double y = g.y0 + iy * g.dy;
    for (std::size_t ix = 0; ix < g.nx; ++ix) {
      double x = g.x0 + ix * g.dx;
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        double ddx = x - pts[i * 2], ddy = y - pts[i * 2 + 1];
        acc += std::exp(-(ddx * ddx + ddy * ddy) * inv2h2);
      }
      g.density[iy * g.nx + ix] = norm * acc;
    }
  }
  return g;
}

}  // namespace texpup::reid
