#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include "texpup/synth/camera.hpp"
#include "texpup/synth/skeleton.hpp"
#include "texpup/synth/texture_spec.hpp"

namespace texpup::synth {

/// One posed creature instance placed in the world by a rigid offset.
struct CreatureInstance {
  const Skeleton* skeleton = nullptr;
  std::vector<Isometry3d> joints;     // from joint_transforms
  Isometry3d world = Isometry3d::Identity();
  const TextureSpec* texture = nullptr;
};

struct RayHit {
  double t = std::numeric_limits<double>::infinity();
  int bone = -1;
  int creature = -1;
  Vector3d neutral_point = Vector3d::Zero();  // exact neutral-pose preimage
  Vector3d world_normal = Vector3d::Zero();
};

namespace detail {

/// Nearest intersection of ray o + s*d (d unit) with the capsule around
/// segment [a, b] of radius r, restricted to s > s_min.
inline std::optional<double> ray_capsule(const Vector3d& o, const Vector3d& d,
                                         const Vector3d& a, const Vector3d& b,
                                         double r, double s_min = 1e-9) {
  double best = std::numeric_limits<double>::infinity();
  Vector3d ab = b - a;
  double len = ab.norm();
  // Cylinder body (skipped for degenerate segments).
  if (len > 1e-12) {
    Vector3d u = ab / len;
    Vector3d oo = o - a;
    Vector3d m = oo - oo.dot(u) * u;
    Vector3d n = d - d.dot(u) * u;
    double qa = n.squaredNorm();
    if (qa > 1e-14) {
      double qb = 2.0 * m.dot(n);
      double qc = m.squaredNorm() - r * r;
      double disc = qb * qb - 4.0 * qa * qc;
      if (disc >= 0.0) {
        double sq = std::sqrt(disc);
        for (double s : {(-qb - sq) / (2.0 * qa), (-qb + sq) / (2.0 * qa)}) {
          if (s <= s_min || s >= best) continue;
          double axial = (oo + s * d).dot(u);
          if (axial >= 0.0 && axial <= len) best = s;
        }
      }
    }
  }
  // Sphere caps.
  for (const Vector3d& c : {a, b}) {
    Vector3d oc = o - c;
    double qb = 2.0 * oc.dot(d);
    double qc = oc.squaredNorm() - r * r;
    double disc = qb * qb - 4.0 * qc;
    if (disc < 0.0) continue;
    double sq = std::sqrt(disc);
    for (double s : {(-qb - sq) / 2.0, (-qb + sq) / 2.0})
      if (s > s_min && s < best) best = s;
  }
  if (!std::isfinite(best)) return std::nullopt;
  return best;
}

inline Vector3d capsule_normal(const Vector3d& p, const Vector3d& a,
                               const Vector3d& b) {
  Vector3d ab = b - a;
  double len2 = ab.squaredNorm();
  double t = len2 > 1e-24 ? (p - a).dot(ab) / len2 : 0.0;
  t = t < 0.0 ? 0.0 : (t > 1.0 ? 1.0 : t);
  Vector3d axis_pt = a + t * ab;
  Vector3d n = p - axis_pt;
  double nn = n.norm();
  return nn > 1e-12 ? Vector3d(n / nn) : Vector3d(0, 0, 1);
}

}  // namespace detail

/// Nearest hit of a world-space ray against a set of posed creatures.
/// Each capsule is intersected in the neutral frame (the bone transform and
/// world offset are rigid), so the neutral-pose preimage of the hit point is
/// exact by construction.
inline RayHit cast_ray(const Vector3d& origin, const Vector3d& dir,
                       const std::vector<CreatureInstance>& creatures) {
  RayHit best;
  for (std::size_t ci = 0; ci < creatures.size(); ++ci) {
    const CreatureInstance& cr = creatures[ci];
    const Skeleton& skel = *cr.skeleton;
    for (std::size_t j = 0; j < skel.joint_count(); ++j) {
      if (skel.parent[j] < 0) continue;
      Isometry3d to_world = cr.world * bone_transform(skel, cr.joints,
                                                      static_cast<int>(j));
      Isometry3d to_neutral = to_world.inverse();
      Vector3d o = to_neutral * origin;
      Vector3d d = to_neutral.linear() * dir;
      auto s = detail::ray_capsule(o, d, skel.neutral[skel.parent[j]],
                                   skel.neutral[j], skel.radii[j]);
      if (s && *s < best.t) {
        best.t = *s;
        best.bone = static_cast<int>(j);
        best.creature = static_cast<int>(ci);
        best.neutral_point = o + *s * d;
        Vector3d n_neutral = detail::capsule_normal(
            best.neutral_point, skel.neutral[skel.parent[j]], skel.neutral[j]);
        best.world_normal = to_world.linear() * n_neutral;
      }
    }
  }
  return best;
}

inline bool ray_hits(const RayHit& h) { return h.bone >= 0; }

/// Fixed directional light with an ambient floor; textures dominate
/// appearance, shading only adds shape cues.
inline double lambert_term(const Vector3d& world_normal) {
  static const Vector3d light = Vector3d(0.4, 0.25, 0.88).normalized();
  double d = world_normal.dot(light);
  return 0.3 + 0.7 * (d > 0.0 ? d : 0.0);
}

}  // namespace texpup::synth
