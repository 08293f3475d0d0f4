#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "texpup/core/rng.hpp"

namespace texpup::synth {

using Eigen::Vector3d;

/// Procedural texture: seeded spots placed in the normalized neutral-pose
/// coordinate cube. color() maps a [0,1]^3 coordinate to RGB in [0,1]^3.
/// Spot edges are smoothed so color reconstruction rewards sub-spot accuracy.
struct TextureSpec {
  int id = 0;
  Vector3d base_color{0.92, 0.91, 0.88};
  Vector3d spot_color{0.10, 0.08, 0.07};
  std::vector<Vector3d> spot_centers;  // in [0,1]^3
  std::vector<double> spot_radii;
  std::uint64_t seed = 0;

  Vector3d color(const Vector3d& u) const {
    double s = 0.0;  // spot coverage in [0,1]
    for (std::size_t i = 0; i < spot_centers.size(); ++i) {
      double d = (u - spot_centers[i]).norm();
      double r = spot_radii[i];
      double edge = 0.35 * r;
      double t = 1.0 - (d - (r - edge)) / edge;  // 1 inside, 0 outside
      t = t < 0.0 ? 0.0 : (t > 1.0 ? 1.0 : t);
      t = t * t * (3.0 - 2.0 * t);  // smoothstep
      s = s + t - s * t;            // soft union
    }
    return base_color * (1.0 - s) + spot_color * s;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["id"] = id;
    j["seed"] = seed;
    j["base_color"] = {base_color.x(), base_color.y(), base_color.z()};
    j["spot_color"] = {spot_color.x(), spot_color.y(), spot_color.z()};
    for (std::size_t i = 0; i < spot_centers.size(); ++i) {
      j["spots"].push_back({{"c",
                             {spot_centers[i].x(), spot_centers[i].y(),
                              spot_centers[i].z()}},
                            {"r", spot_radii[i]}});
    }
    return j;
  }

  static TextureSpec from_json(const nlohmann::json& j) {
    TextureSpec t;
    t.id = j.at("id");
    t.seed = j.at("seed");
    for (int k = 0; k < 3; ++k) {
      t.base_color[k] = j.at("base_color")[k];
      t.spot_color[k] = j.at("spot_color")[k];
    }
    if (j.contains("spots"))
      for (const auto& s : j["spots"]) {
        t.spot_centers.emplace_back(s.at("c")[0], s.at("c")[1], s.at("c")[2]);
        t.spot_radii.push_back(s.at("r"));
      }
    return t;
  }
};

/// Seeded random spot layout. Base and spot colors stay close across
/// identities so the spot layout is what identifies a texture.
inline TextureSpec make_texture_spec(int id, std::uint64_t seed, int spot_count,
                                     double spot_radius) {
  TextureSpec t;
  t.id = id;
  t.seed = seed;
  Rng rng(seed ^ 0x7e7ULL);
  // Small per-identity tint; patterns carry the identity.
  t.base_color += 0.04 * Vector3d(rng.uniform(-1, 1), rng.uniform(-1, 1),
                                  rng.uniform(-1, 1));
  t.spot_color += 0.05 * Vector3d(rng.uniform(0, 1), rng.uniform(0, 1),
                                  rng.uniform(0, 1));
  for (int i = 0; i < spot_count; ++i) {
    t.spot_centers.emplace_back(rng.uniform(), rng.uniform(), rng.uniform());
    t.spot_radii.push_back(spot_radius * rng.uniform(0.75, 1.3));
  }
  return t;
}

/// Near-duplicate of `src`: same colors, spot centers nudged slightly.
/// Mirrors the dataset's intentionally similar texture pairs.
inline TextureSpec make_near_duplicate(const TextureSpec& src, int id,
                                       std::uint64_t seed, double nudge = 0.035) {
  TextureSpec t = src;
  t.id = id;
  t.seed = seed;
  Rng rng(seed ^ 0x51a3ULL);
  for (auto& c : t.spot_centers) {
    c += nudge * Vector3d(rng.uniform(-1, 1), rng.uniform(-1, 1),
                          rng.uniform(-1, 1));
    c = c.cwiseMax(0.0).cwiseMin(1.0);
  }
  return t;
}

/// Mean squared color difference over a fixed probe grid; > 0 certifies two
/// specs produce distinct color fields.
inline double texture_l2(const TextureSpec& a, const TextureSpec& b,
                         int grid = 8) {
  double acc = 0.0;
  int n = 0;
  for (int x = 0; x < grid; ++x)
    for (int y = 0; y < grid; ++y)
      for (int z = 0; z < grid; ++z) {
        Vector3d u((x + 0.5) / grid, (y + 0.5) / grid, (z + 0.5) / grid);
        acc += (a.color(u) - b.color(u)).squaredNorm();
        ++n;
      }
  return acc / n;
}

}  // namespace texpup::synth
