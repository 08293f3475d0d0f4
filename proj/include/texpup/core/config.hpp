#pragma once

#include <stdexcept>
#include <string>

#include <json.hpp>

namespace texpup {

/// Widths and sizes shared by both networks.
struct ModelConfig {
  int d_f = 32;            // local feature width
  int d_z = 64;            // global latent width
  int keypoints = 8;       // K
  int vca_neighbors = 4;   // k nearest anchors per query pixel
  int fourier_bands = 6;
  int image_w = 96;
  int image_h = 72;

  void validate() const {
    if (d_f < 1) throw std::invalid_argument("config: d_f >= 1");
    if (d_z < 1) throw std::invalid_argument("config: d_z >= 1");
    if (keypoints < 1) throw std::invalid_argument("config: K >= 1");
    if (vca_neighbors < 1 || vca_neighbors > keypoints)
      throw std::invalid_argument("config: 1 <= vca_neighbors <= K");
    if (fourier_bands < 1) throw std::invalid_argument("config: fourier_bands >= 1");
    if (image_w < 8 || image_h < 8)
      throw std::invalid_argument("config: image_w, image_h >= 8");
  }

  nlohmann::json to_json() const {
    return {{"d_f", d_f},
            {"d_z", d_z},
            {"keypoints", keypoints},
            {"vca_neighbors", vca_neighbors},
            {"fourier_bands", fourier_bands},
            {"image_w", image_w},
            {"image_h", image_h}};
  }

  static ModelConfig from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.d_f = j.at("d_f");
    c.d_z = j.at("d_z");
    c.keypoints = j.at("keypoints");
    c.vca_neighbors = j.at("vca_neighbors");
    c.fourier_bands = j.at("fourier_bands");
    c.image_w = j.at("image_w");
    c.image_h = j.at("image_h");
    c.validate();
    return c;
  }
};

}  // namespace texpup
