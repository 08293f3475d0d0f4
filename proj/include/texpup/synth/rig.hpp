#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "texpup/synth/camera.hpp"

namespace texpup::synth {

struct RigIntrinsics {
  double fx, fy, cx, cy;
};

/// Cameras evenly spaced in azimuth on `rings` circles of the given radius,
/// one circle per entry of `heights`, all aimed at `target`.
inline std::vector<Camera> sample_camera_rig(int rings, int per_ring,
                                             double radius,
                                             const std::vector<double>& heights,
                                             const RigIntrinsics& intr,
                                             const Vector3d& target,
                                             double azimuth_offset = 0.0) {
  if (rings < 1 || per_ring < 1)
    throw std::invalid_argument("rig: rings, per_ring >= 1");
  if (radius <= 0.0) throw std::invalid_argument("rig: radius > 0");
  if (static_cast<int>(heights.size()) != rings)
    throw std::invalid_argument("rig: one height per ring");
  std::vector<Camera> out;
  out.reserve(static_cast<std::size_t>(rings) * per_ring);
  for (int r = 0; r < rings; ++r) {
    for (int i = 0; i < per_ring; ++i) {
      double az = azimuth_offset + 2.0 * M_PI * i / per_ring;
      Vector3d eye(target.x() + radius * std::cos(az),
                   target.y() + radius * std::sin(az), heights[r]);
      out.push_back(look_at(eye, target, intr.fx, intr.fy, intr.cx, intr.cy));
    }
  }
  return out;
}

}  // namespace texpup::synth
