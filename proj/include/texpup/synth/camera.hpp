#pragma once

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <json.hpp>

namespace texpup::synth {

using Eigen::Matrix3d;
using Eigen::Vector2d;
using Eigen::Vector3d;

/// Pinhole camera. Extrinsics map world to camera: Xc = R * Xw + t.
struct Camera {
  double fx = 0, fy = 0, cx = 0, cy = 0;
  Matrix3d R = Matrix3d::Identity();
  Vector3d t = Vector3d::Zero();

  void validate() const {
    if (fx <= 0 || fy <= 0) throw std::invalid_argument("camera: fx, fy > 0");
    Matrix3d e = R * R.transpose() - Matrix3d::Identity();
    if (e.cwiseAbs().maxCoeff() > 1e-9 || std::fabs(R.determinant() - 1.0) > 1e-9)
      throw std::invalid_argument("camera: R not a rotation");
  }

  Vector3d to_camera(const Vector3d& xw) const { return R * xw + t; }

  /// Continuous pixel coordinates of a camera-space point (z > 0).
  Vector2d project_cam(const Vector3d& xc) const {
    return {fx * xc.x() / xc.z() + cx, fy * xc.y() / xc.z() + cy};
  }

  Vector3d center() const { return -R.transpose() * t; }

  /// World-space direction of the ray through pixel coordinate (u, v).
  Vector3d ray_dir(double u, double v) const {
    Vector3d dc((u - cx) / fx, (v - cy) / fy, 1.0);
    return (R.transpose() * dc).normalized();
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["fx"] = fx;
    j["fy"] = fy;
    j["cx"] = cx;
    j["cy"] = cy;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) j["R"].push_back(R(r, c));
    for (int r = 0; r < 3; ++r) j["t"].push_back(t(r));
    return j;
  }

  static Camera from_json(const nlohmann::json& j) {
    Camera c;
    c.fx = j.at("fx");
    c.fy = j.at("fy");
    c.cx = j.at("cx");
    c.cy = j.at("cy");
    for (int r = 0; r < 3; ++r)
      for (int k = 0; k < 3; ++k) c.R(r, k) = j.at("R")[3 * r + k];
    for (int r = 0; r < 3; ++r) c.t(r) = j.at("t")[r];
    c.validate();
    return c;
  }
};

/// Camera placed at `eye` looking at `target`, +y of the image pointing down.
inline Camera look_at(const Vector3d& eye, const Vector3d& target, double fx,
                      double fy, double cx, double cy) {
  Vector3d fwd = (target - eye).normalized();
  Vector3d world_up(0, 0, 1);
  Vector3d right = fwd.cross(world_up).normalized();
  if (!right.allFinite() || right.norm() < 1e-9) right = Vector3d(1, 0, 0);
  Vector3d down = fwd.cross(right).normalized();
  Camera c;
  c.fx = fx;
  c.fy = fy;
  c.cx = cx;
  c.cy = cy;
  c.R.row(0) = right.transpose();
  c.R.row(1) = down.transpose();
  c.R.row(2) = fwd.transpose();
  c.t = -c.R * eye;
  c.validate();
  return c;
}

}  // namespace texpup::synth
