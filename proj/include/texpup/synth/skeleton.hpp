#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <json.hpp>

namespace texpup::synth {

using Eigen::Isometry3d;
using Eigen::Quaterniond;
using Eigen::Vector3d;

/// Articulated capsule creature. Joint j with parent p >= 0 carries a capsule
/// along the neutral segment [neutral[p], neutral[j]] with radius radii[j].
struct Skeleton {
  std::vector<Vector3d> neutral;  // K keypoints, neutral pose, scene units
  std::vector<int> parent;        // -1 for the root
  std::vector<double> radii;      // per joint; used when parent[j] >= 0

  std::size_t joint_count() const { return neutral.size(); }

  void validate() const {
    if (neutral.size() != parent.size() || neutral.size() != radii.size())
      throw std::invalid_argument("skeleton: field length mismatch");
    int roots = 0;
    for (std::size_t j = 0; j < parent.size(); ++j) {
      if (parent[j] < 0) {
        ++roots;
        continue;
      }
      if (parent[j] >= static_cast<int>(j))
        throw std::invalid_argument("skeleton: parents must precede children");
      if (radii[j] <= 0.0) throw std::invalid_argument("skeleton: radii > 0");
      if (!neutral[j].allFinite())
        throw std::invalid_argument("skeleton: non-finite keypoint");
    }
    if (roots != 1) throw std::invalid_argument("skeleton: exactly one root");
  }

  /// Axis-aligned box of the capsule union in the neutral pose.
  void neutral_bbox(Vector3d& lo, Vector3d& hi) const {
    lo = Vector3d::Constant(1e30);
    hi = Vector3d::Constant(-1e30);
    for (std::size_t j = 0; j < neutral.size(); ++j) {
      double r = parent[j] >= 0 ? radii[j] : 0.0;
      lo = lo.cwiseMin(neutral[j] - Vector3d::Constant(r));
      hi = hi.cwiseMax(neutral[j] + Vector3d::Constant(r));
      if (parent[j] >= 0) {
        lo = lo.cwiseMin(neutral[parent[j]] - Vector3d::Constant(r));
        hi = hi.cwiseMax(neutral[parent[j]] + Vector3d::Constant(r));
      }
    }
  }
};

struct PoseSample {
  int id = 0;
  std::vector<Quaterniond> rotations;  // one per joint, unit norm
  std::vector<Vector3d> keypoints;     // derived, forward kinematics
};

/// Global rigid transform per joint. G[root] rotates about the root pivot;
/// G[j] = G[parent] * Rot(q_j) about the neutral position of j. The bone
/// ending at joint j (capsule parent->j) is rigid under G[parent[j]].
inline std::vector<Isometry3d> joint_transforms(
    const Skeleton& skel, const std::vector<Quaterniond>& rotations) {
  skel.validate();
  if (rotations.size() != skel.joint_count())
    throw std::invalid_argument("fk: rotation count mismatch");
  std::vector<Isometry3d> g(skel.joint_count());
  for (std::size_t j = 0; j < skel.joint_count(); ++j) {
    if (std::fabs(rotations[j].norm() - 1.0) > 1e-6)
      throw std::invalid_argument("fk: non-unit quaternion at joint " +
                                  std::to_string(j));
    Isometry3d local = Isometry3d::Identity();
    local.translate(skel.neutral[j])
        .rotate(rotations[j].normalized())
        .translate(-skel.neutral[j]);
    g[j] = (skel.parent[j] < 0) ? local : g[skel.parent[j]] * local;
  }
  return g;
}

/// Posed keypoints; the root stays fixed.
inline std::vector<Vector3d> forward_kinematics(
    const Skeleton& skel, const std::vector<Quaterniond>& rotations) {
  auto g = joint_transforms(skel, rotations);
  std::vector<Vector3d> out(skel.joint_count());
  for (std::size_t j = 0; j < skel.joint_count(); ++j)
    out[j] = (skel.parent[j] < 0) ? skel.neutral[j]
                                  : g[skel.parent[j]] * skel.neutral[j];
  return out;
}

/// Rigid transform moving bone b (the capsule ending at joint b) from the
/// neutral to the posed configuration.
inline Isometry3d bone_transform(const Skeleton& skel,
                                 const std::vector<Isometry3d>& g, int bone) {
  if (bone < 0 || bone >= static_cast<int>(skel.joint_count()) ||
      skel.parent[bone] < 0)
    throw std::invalid_argument("bone_transform: not a bone joint");
  return g[skel.parent[bone]];
}

/// Linear blend skinning of one point. `weights` has one entry per joint;
/// joints without a parent must carry weight 0.
inline Vector3d skin_point(const Vector3d& p_neutral, const Skeleton& skel,
                           const std::vector<Quaterniond>& rotations,
                           const std::vector<double>& weights) {
  if (weights.size() != skel.joint_count())
    throw std::invalid_argument("skin_point: weight count mismatch");
  double sum = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw std::invalid_argument("skin_point: negative weight");
    sum += w;
  }
  if (std::fabs(sum - 1.0) > 1e-6)
    throw std::invalid_argument("skin_point: weights must sum to 1");
  auto g = joint_transforms(skel, rotations);
  Vector3d out = Vector3d::Zero();
  for (std::size_t j = 0; j < weights.size(); ++j) {
    if (weights[j] == 0.0) continue;
    if (skel.parent[j] < 0)
      throw std::invalid_argument("skin_point: weight on root joint");
    out += weights[j] * (bone_transform(skel, g, static_cast<int>(j)) * p_neutral);
  }
  return out;
}

/// Normalization of a neutral-pose point into [0,1]^3 against the given box.
/// Points outside the box are clamped.
inline Vector3d nnopcs_of(const Vector3d& p_neutral, const Vector3d& bbox_lo,
                          const Vector3d& bbox_hi) {
  Vector3d ext = bbox_hi - bbox_lo;
  if (ext.minCoeff() <= 0.0)
    throw std::invalid_argument("nnopcs_of: degenerate bbox");
  Vector3d u = (p_neutral - bbox_lo).cwiseQuotient(ext);
  return u.cwiseMax(0.0).cwiseMin(1.0);
}

/// Desk-scale quadruped: 8 joints, 7 capsules, body length about 2.2 scene
/// units and height about 1.65.
inline Skeleton make_quadruped() {
  Skeleton s;
  // 0 hip (root), 1 chest, 2 head, 3 tail tip, 4/5 front feet, 6/7 back feet
  s.neutral = {
      Vector3d(-0.45, 0.0, 1.10), Vector3d(0.65, 0.0, 1.15),
      Vector3d(1.25, 0.0, 1.50),  Vector3d(-1.05, 0.0, 1.25),
      Vector3d(0.60, 0.28, 0.05), Vector3d(0.60, -0.28, 0.05),
      Vector3d(-0.45, 0.28, 0.05), Vector3d(-0.45, -0.28, 0.05)};
  s.parent = {-1, 0, 1, 0, 1, 1, 0, 0};
  s.radii = {0.0, 0.40, 0.17, 0.09, 0.11, 0.11, 0.11, 0.11};
  s.validate();
  return s;
}

/// Seeded pose: one rotation per joint, uniform axis, angle uniform within
/// the per-joint limit (radians). Root gets a yaw-only rotation.
template <typename RngT>
PoseSample sample_pose(const Skeleton& skel, int pose_id, RngT& rng,
                       double joint_limit = 0.45, double root_yaw_limit = 0.5) {
  PoseSample p;
  p.id = pose_id;
  p.rotations.resize(skel.joint_count());
  for (std::size_t j = 0; j < skel.joint_count(); ++j) {
    if (skel.parent[j] < 0) {
      double a = rng.uniform(-root_yaw_limit, root_yaw_limit);
      p.rotations[j] = Quaterniond(Eigen::AngleAxisd(a, Vector3d::UnitZ()));
    } else {
      Vector3d axis(rng.normal(), rng.normal(), rng.normal());
      if (axis.norm() < 1e-9) axis = Vector3d::UnitX();
      axis.normalize();
      double a = rng.uniform(-joint_limit, joint_limit);
      p.rotations[j] = Quaterniond(Eigen::AngleAxisd(a, axis));
    }
  }
  p.keypoints = forward_kinematics(skel, p.rotations);
  return p;
}

}  // namespace texpup::synth
