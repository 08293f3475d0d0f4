#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "texpup/core/config.hpp"
#include "texpup/core/tape.hpp"
#include "texpup/net/vca.hpp"
#include "texpup/synth/camera.hpp"

namespace texpup::geomnet {

using net::EncodedKeypoints;
using net::EncoderSpec;
using net::Vector2d;
using net::VcaSpec;
using synth::Camera;

inline EncoderSpec encoder_spec(const ModelConfig& cfg) {
  return {"geom.enc", static_cast<std::size_t>(cfg.d_f),
          static_cast<std::size_t>(cfg.d_z), cfg.fourier_bands, 2,
          static_cast<std::size_t>(cfg.keypoints)};
}

inline VcaSpec renderer_spec(const ModelConfig& cfg) {
  VcaSpec s;
  s.prefix = "geom.rend";
  s.feat_width = static_cast<std::size_t>(cfg.d_f);
  s.global_width = static_cast<std::size_t>(cfg.d_z);
  s.attn_width = static_cast<std::size_t>(2 * cfg.d_f);
  s.hidden_width = static_cast<std::size_t>(4 * cfg.d_f);
  s.fourier_bands = cfg.fourier_bands;
  s.neighbors = cfg.vca_neighbors;
  s.pixel_scale = static_cast<double>(cfg.image_w);
  s.heads = {{"nnopcs", 3, true}, {"sil", 1, false}, {"depth", 1, false}};
  s.with_depth = true;
  s.depth_scale = 4.0;  // roughly the camera orbit radius in scene units
  return s;
}

inline void init_params(const ModelConfig& cfg, ParamSet& ps, Rng& rng) {
  net::add_encoder_params(ps, encoder_spec(cfg), rng);
  net::add_vca_params(ps, renderer_spec(cfg), rng);
}

/// Keypoints -> (local features, global code).
inline EncodedKeypoints encode_pose(Tape& t, const ModelConfig& cfg,
                                    const std::vector<Eigen::Vector3d>& kp) {
  if (static_cast<int>(kp.size()) != cfg.keypoints)
    throw std::invalid_argument("encode_pose: keypoint count mismatch");
  return net::encode_keypoints(t, encoder_spec(cfg), kp);
}

struct AnchorSet {
  std::vector<Vector2d> anchors;     // projected, behind-camera excluded
  std::vector<double> depths;        // camera-space z per surviving anchor
  std::vector<std::size_t> indices;  // original keypoint index per anchor
};

inline AnchorSet project_anchors(const std::vector<Eigen::Vector3d>& kp,
                                 const Camera& cam) {
  AnchorSet out;
  for (std::size_t i = 0; i < kp.size(); ++i) {
    Eigen::Vector3d xc = cam.to_camera(kp[i]);
    if (xc.z() <= 1e-6) continue;  // behind the camera: excluded
    out.anchors.push_back(cam.project_cam(xc));
    out.depths.push_back(xc.z());
    out.indices.push_back(i);
  }
  if (out.anchors.empty())
    throw std::invalid_argument("render: all keypoints behind the camera");
  return out;
}

struct RenderedGeometry {
  Var nnopcs;  // [P x 3] in [0,1]
  Var sil;     // [P x 1] logits
  Var depth;   // [P x 1] scene units
};

/// Renders the three geometry heads at the query pixels. When keypoints fall
/// behind the camera the neighbor count drops to the surviving anchor count.
inline RenderedGeometry render_geometry(Tape& t, const ModelConfig& cfg,
                                        const std::vector<Eigen::Vector3d>& kp,
                                        const EncodedKeypoints& latent,
                                        const Camera& cam,
                                        const std::vector<Vector2d>& queries) {
  AnchorSet a = project_anchors(kp, cam);
  VcaSpec spec = renderer_spec(cfg);
  spec.neighbors = std::min<int>(spec.neighbors, static_cast<int>(a.anchors.size()));
  Var feats = a.indices.size() == kp.size()
                  ? latent.local
                  : t.gather_rows(latent.local, a.indices);
  auto out = net::vca_render(t, spec, a.anchors, feats, latent.global, queries,
                             &a.depths);
  return {out.heads[0], out.heads[1], out.heads[2]};
}

// ---- losses ----------------------------------------------------------------

/// Sum of squared differences over pixels and channels (Eq.-style color/map
/// loss). Returns the sum; callers scale by 1/(3P) for the optimizer.
inline Var loss_map_sum(Tape& t, Var pred, const Tensor& gt) {
  if (!t.val(pred).same_shape(gt))
    throw std::invalid_argument("loss_map: shape mismatch");
  Var r = t.sub(pred, t.constant(gt));
  return t.sum(t.mul(r, r));
}

/// Euclidean norm of the residual vector over the pixel set.
inline Var loss_depth_norm(Tape& t, Var pred, const Tensor& gt) {
  if (!t.val(pred).same_shape(gt))
    throw std::invalid_argument("loss_depth: shape mismatch");
  Var r = t.sub(pred, t.constant(gt));
  return t.sqrt_(t.sum(t.mul(r, r)));
}

/// Mean binary cross-entropy on silhouette logits.
inline Var loss_silhouette(Tape& t, Var logits, const Tensor& gt_mask) {
  if (gt_mask.size() == 0) throw std::invalid_argument("loss_sil: empty pixel set");
  return t.bce_logits_mean(logits, gt_mask);
}

// ---- pixel sampling --------------------------------------------------------

/// Uniform pixel sample over the support of `mask` (value != 0). Without
/// replacement when the mask has at least n pixels, with replacement
/// otherwise. Returns linear pixel indices.
inline std::vector<std::size_t> sample_mask_pixels(
    const std::vector<std::uint8_t>& mask, std::size_t n, Rng& rng,
    bool invert = false) {
  std::vector<std::size_t> support;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if ((mask[i] != 0) != invert) support.push_back(i);
  if (support.empty()) throw std::invalid_argument("sample_pixels: empty mask");
  std::vector<std::size_t> out(n);
  if (support.size() < n) {
    for (std::size_t i = 0; i < n; ++i)
      out[i] = support[rng.below(support.size())];
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t j = i + rng.below(support.size() - i);
      std::swap(support[i], support[j]);
      out[i] = support[i];
    }
  }
  return out;
}

/// Background pixel sample biased toward the silhouette: half the pixels come
/// from a 3-px dilation band around the mask (where the silhouette decision is
/// hardest), half uniformly from the whole background.
inline std::vector<std::size_t> sample_background_pixels(
    const std::vector<std::uint8_t>& mask, int w, std::size_t n, Rng& rng) {
  int h = static_cast<int>(mask.size()) / w;
  std::vector<std::uint8_t> band(mask.size(), 0);
  std::vector<std::size_t> frontier;
  for (std::size_t p = 0; p < mask.size(); ++p)
    if (mask[p]) frontier.push_back(p);
  for (int d = 0; d < 3; ++d) {
    std::vector<std::size_t> next;
    for (std::size_t p : frontier) {
      int x = static_cast<int>(p % w), y = static_cast<int>(p / w);
      const int dx[4] = {1, -1, 0, 0}, dy[4] = {0, 0, 1, -1};
      for (int i = 0; i < 4; ++i) {
        int nx = x + dx[i], ny = y + dy[i];
        if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
        std::size_t q = static_cast<std::size_t>(ny) * w + nx;
        if (!mask[q] && !band[q]) {
          band[q] = 1;
          next.push_back(q);
        }
      }
    }
    frontier = std::move(next);
  }
  std::size_t nb = n / 2;
  std::vector<std::size_t> out;
  out.reserve(n);
  bool has_band = false;
  for (std::size_t p = 0; p < band.size(); ++p)
    if (band[p]) { has_band = true; break; }
  if (has_band) {
    std::vector<std::size_t> picked = sample_mask_pixels(band, nb, rng);
    out.insert(out.end(), picked.begin(), picked.end());
  }
  std::vector<std::size_t> uni =
      sample_mask_pixels(mask, n - out.size(), rng, /*invert=*/true);
  out.insert(out.end(), uni.begin(), uni.end());
  return out;
}

inline std::vector<Vector2d> pixel_centers(const std::vector<std::size_t>& idx,
                                           int w) {
  std::vector<Vector2d> out;
  out.reserve(idx.size());
  for (std::size_t i : idx)
    out.emplace_back(static_cast<double>(i % w) + 0.5,
                     static_cast<double>(i / w) + 0.5);
  return out;
}

// ---- full-frame inference ---------------------------------------------------

struct GeometryFrame {
  int w = 0, h = 0;
  std::vector<double> nnopcs;      // h*w*3
  std::vector<double> sil_logits;  // h*w
  std::vector<double> depth;       // h*w
};

/// Dense rendering on the pixel grid, evaluated in bounded batches.
inline GeometryFrame render_frame(const ParamSet& params, const ModelConfig& cfg,
                                  const std::vector<Eigen::Vector3d>& kp,
                                  const Camera& cam, int w, int h,
                                  std::size_t batch = 4096) {
  GeometryFrame fr;
  fr.w = w;
  fr.h = h;
  fr.nnopcs.assign(static_cast<std::size_t>(w) * h * 3, 0.0);
  fr.sil_logits.assign(static_cast<std::size_t>(w) * h, 0.0);
  fr.depth.assign(static_cast<std::size_t>(w) * h, 0.0);

  std::size_t total = static_cast<std::size_t>(w) * h;
  for (std::size_t start = 0; start < total; start += batch) {
    std::size_t count = std::min(batch, total - start);
    std::vector<std::size_t> idx(count);
    for (std::size_t i = 0; i < count; ++i) idx[i] = start + i;
    Tape t(&params);
    EncodedKeypoints latent = encode_pose(t, cfg, kp);
    auto r = render_geometry(t, cfg, kp, latent, cam, pixel_centers(idx, w));
    const Tensor& p = t.val(r.nnopcs);
    const Tensor& s = t.val(r.sil);
    const Tensor& d = t.val(r.depth);
    for (std::size_t i = 0; i < count; ++i) {
      for (int c = 0; c < 3; ++c)
        fr.nnopcs[(start + i) * 3 + c] = p.at2(i, c);
      fr.sil_logits[start + i] = s[i];
      fr.depth[start + i] = d[i];
    }
  }
  return fr;
}

// ---- metrics ----------------------------------------------------------------

struct GeometryMetrics {
  double nnopcs_mse = 0.0;       // full frame, prediction gated by its own
                                 // silhouette, background zero (map MSE)
  double nnopcs_mse_masked = 0.0;  // inside the GT silhouette only
  double depth_mae = 0.0;          // masked, scene units
  double sil_iou = 0.0;            // full frame at logit threshold 0
  std::size_t views = 0;
};

/// Per-view metric accumulation against ground truth buffers.
inline void accumulate_metrics(const GeometryFrame& fr,
                               const std::vector<float>& gt_nnopcs,
                               const std::vector<float>& gt_depth,
                               const std::vector<std::uint8_t>& gt_mask,
                               GeometryMetrics& acc) {
  double mse_full = 0.0, mse_in = 0.0, mae = 0.0;
  std::size_t inside = 0, inter = 0, uni = 0;
  for (std::size_t p = 0; p < gt_mask.size(); ++p) {
    bool pred_in = fr.sil_logits[p] > 0.0;
    bool gt_in = gt_mask[p] != 0;
    inter += pred_in && gt_in;
    uni += pred_in || gt_in;
    for (int c = 0; c < 3; ++c) {
      double pv = pred_in ? fr.nnopcs[p * 3 + c] : 0.0;
      double gv = gt_in ? static_cast<double>(gt_nnopcs[p * 3 + c]) : 0.0;
      double d = pv - gv;
      mse_full += d * d;
    }
    if (!gt_in) continue;
    ++inside;
    for (int c = 0; c < 3; ++c) {
      double d = fr.nnopcs[p * 3 + c] - gt_nnopcs[p * 3 + c];
      mse_in += d * d;
    }
    mae += std::fabs(fr.depth[p] - gt_depth[p]);
  }
  if (inside == 0) return;
  acc.nnopcs_mse += mse_full / (3.0 * static_cast<double>(gt_mask.size()));
  acc.nnopcs_mse_masked += mse_in / (3.0 * static_cast<double>(inside));
  acc.depth_mae += mae / static_cast<double>(inside);
  acc.sil_iou += uni == 0 ? 1.0 : static_cast<double>(inter) / uni;
  acc.views += 1;
}

inline GeometryMetrics finalize_metrics(GeometryMetrics m) {
  if (m.views == 0) throw std::invalid_argument("metrics: empty split");
  m.nnopcs_mse /= static_cast<double>(m.views);
  m.nnopcs_mse_masked /= static_cast<double>(m.views);
  m.depth_mae /= static_cast<double>(m.views);
  m.sil_iou /= static_cast<double>(m.views);
  return m;
}

}  // namespace texpup::geomnet
