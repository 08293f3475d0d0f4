#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "texpup/core/adam.hpp"
#include "texpup/geomnet/model.hpp"
#include "texpup/synth/dataset.hpp"
#include "texpup/texnet/model.hpp"

namespace texpup::texnet {

using synth::Dataset;
using synth::ViewRecord;

struct TexTrainConfig {
  int epochs = 6;
  double lr = 5e-4;
  double lr_decay = 0.2;
  int lr_decay_every = 4;
  int pixels_per_iter = 500;
  double lambda_col = 5.0;
  // KL weight, scaled inversely with the latent width so the per-dimension
  // pull toward the prior stays tiny.
  double lambda_kld = 1.6e-7;
  double bn_momentum = 0.1;
  std::uint64_t seed = 21;
  Variant variant = Variant::full;

  double lr_at(int epoch) const {
    return lr * std::pow(lr_decay, epoch / lr_decay_every);
  }
};

struct TexEpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
};

struct TexTrainResult {
  ParamSet best_params;  // geometry group + texture group
  std::vector<TexEpochLog> log;
  int best_epoch = -1;
  double best_val = 0.0;
};

namespace detail {

/// NNOPCS map fed to the encoder: the dataset buffer, or zeros when the
/// variant drops coordinate conditioning (encode_texture then ignores it).
inline const std::vector<float>& nnopcs_input(const ViewRecord& v) {
  return v.nnopcs;
}

struct TexViewLoss {
  Var total;
  double color = 0.0, kld = 0.0;
};

/// Full per-view objective: encode the masked view, sample (or take the mean
/// of) the latent, decode texture features, render color at pixels inside the
/// GT mask, and combine reconstruction with the KL term.
inline TexViewLoss view_loss(Tape& t, const ModelConfig& cfg,
                             const TexArch& arch, const TexTrainConfig& tc,
                             const std::vector<Eigen::Vector3d>& kp,
                             const ViewRecord& v,
                             const std::vector<std::size_t>& inside,
                             bool training, Rng* eps_rng,
                             std::vector<Tape::BatchNormStats>* bn_stats) {
  TextureLatent lat = encode_texture(t, cfg, arch, v.rgb, nnopcs_input(v),
                                     training, bn_stats);
  Var z_tex = eps_rng
                  ? sample_latent(t, lat, standard_normal_row(
                                              static_cast<std::size_t>(cfg.d_z),
                                              *eps_rng))
                  : lat.mu;
  Var f_tex = decode_texture(t, cfg, z_tex);
  geomnet::EncodedKeypoints geo = geomnet::encode_pose(t, cfg, kp);
  Var rgb = render_color(t, cfg, arch.variant, kp, geo, f_tex, z_tex, v.camera,
                         geomnet::pixel_centers(inside, v.w));

  std::size_t n = inside.size();
  Tensor gt({n, 3});
  for (std::size_t i = 0; i < n; ++i)
    for (int c = 0; c < 3; ++c) gt.at2(i, c) = v.rgb[inside[i] * 3 + c];

  Var l_col = t.scale(geomnet::loss_map_sum(t, rgb, gt),
                      1.0 / (3.0 * static_cast<double>(n)));
  Var l_kld = loss_kld(t, lat);
  TexViewLoss out;
  out.color = t.val(l_col).item();
  out.kld = t.val(l_kld).item();
  out.total = total_texture_loss(t, l_col, l_kld, tc.lambda_col, tc.lambda_kld);
  return out;
}

inline void fold_running_stats(ParamSet& params,
                               const std::vector<Tape::BatchNormStats>& stats,
                               double momentum) {
  for (std::size_t i = 0; i < stats.size(); ++i) {
    std::string bn = "tex.enc.bn" + std::to_string(i);
    Tensor& rm = params.at(bn + ".running_mean");
    Tensor& rv = params.at(bn + ".running_var");
    for (std::size_t j = 0; j < rm.size(); ++j) {
      rm[j] = (1.0 - momentum) * rm[j] + momentum * stats[i].mean[j];
      rv[j] = (1.0 - momentum) * rv[j] + momentum * stats[i].var[j];
    }
  }
}

}  // namespace detail

/// Deterministic mean objective over a pose split: eval-mode batch norm,
/// latent mean instead of a sample, epoch-independent pixel choices.
inline double validation_loss(const ParamSet& params, const ModelConfig& cfg,
                              const TexArch& arch, const TexTrainConfig& tc,
                              const Dataset& ds, const std::vector<int>& split) {
  double total = 0.0;
  std::size_t count = 0;
  std::size_t n = static_cast<std::size_t>(tc.pixels_per_iter);
  for (int tex = 0; tex < ds.config.textures; ++tex) {
    for (int m : split) {
      for (int c = 0; c < ds.config.known_cameras(); ++c) {
        ViewRecord v = ds.load_view(tex, m, c);
        Rng rng = Rng(tc.seed).fork(0x3e0000 + (tex * 128 + m) * 64 + c);
        auto inside = geomnet::sample_mask_pixels(v.mask, n, rng);
        Tape t(&params);
        auto l = detail::view_loss(t, cfg, arch, tc, ds.poses[m].keypoints, v,
                                   inside, /*training=*/false,
                                   /*eps_rng=*/nullptr, nullptr);
        total += t.val(l.total).item();
        ++count;
      }
    }
  }
  if (count == 0) throw std::invalid_argument("validation_loss: empty split");
  return total / static_cast<double>(count);
}

/// Trains the texture encoder/decoder and the color renderer on top of a
/// frozen geometry model. Geometry parameters live in the returned set but are
/// never updated; this is asserted by hashing the group before and after.
inline TexTrainResult train_texture(const Dataset& ds, const ModelConfig& cfg,
                                    const ParamSet& geometry_params,
                                    const TexArch& arch,
                                    const TexTrainConfig& tc,
                                    const ParamSet* warm_start = nullptr) {
  if (arch.input_w != cfg.image_w || arch.input_h != cfg.image_h)
    throw std::invalid_argument("train_texture: arch/config resolution mismatch");
  ParamSet params;
  for (const auto& [name, tsr] : geometry_params)
    if (name.rfind("geom.", 0) == 0) params.add(name, tsr);
  if (params.names().empty())
    throw std::invalid_argument("train_texture: no geometry parameters");
  std::uint64_t geom_hash = params.hash_group("geom.");

  if (warm_start) {
    for (const auto& [name, tsr] : *warm_start)
      if (name.rfind("tex.", 0) == 0) params.add(name, tsr);
  } else {
    Rng init_rng = Rng(tc.seed).fork(0x2b1d);
    init_params(cfg, arch, params, init_rng);
  }

  ParamSet trainable = trainable_texture_params(params);
  Adam opt(trainable);
  ParamSet grads;

  std::vector<std::tuple<int, int, int>> views;  // (texture, pose, camera)
  for (int tex = 0; tex < ds.config.textures; ++tex)
    for (int m : ds.train_split)
      for (int c = 0; c < ds.config.known_cameras(); ++c)
        views.emplace_back(tex, m, c);

  TexTrainResult res;
  Rng shuffle_rng = Rng(tc.seed).fork(0x77a1);
  Rng sample_rng = Rng(tc.seed).fork(0xc4e2);
  Rng eps_rng = Rng(tc.seed).fork(0x51fd);
  std::size_t n = static_cast<std::size_t>(tc.pixels_per_iter);
  std::vector<Tape::BatchNormStats> bn_stats;

  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    for (std::size_t i = views.size(); i > 1; --i)
      std::swap(views[i - 1], views[shuffle_rng.below(i)]);

    double lr = tc.lr_at(epoch);
    double train_loss = 0.0;
    for (const auto& [tex, m, c] : views) {
      ViewRecord v = ds.load_view(tex, m, c);
      auto inside = geomnet::sample_mask_pixels(v.mask, n, sample_rng);
      Tape t(&params);
      auto l = detail::view_loss(t, cfg, arch, tc, ds.poses[m].keypoints, v,
                                 inside, /*training=*/true, &eps_rng, &bn_stats);
      double lv = t.val(l.total).item();
      if (!std::isfinite(lv))
        throw std::runtime_error("train_texture: loss diverged at epoch " +
                                 std::to_string(epoch));
      train_loss += lv;
      t.backward(l.total);
      grads = ParamSet::zeros_like(trainable);
      t.add_param_grads(grads);
      opt.step(params, grads, lr);
      detail::fold_running_stats(params, bn_stats, tc.bn_momentum);
    }
    train_loss /= static_cast<double>(views.size());
    double val = validation_loss(params, cfg, arch, tc, ds, ds.val_split);
    res.log.push_back({epoch, train_loss, val, lr});
    if (res.best_epoch < 0 || val < res.best_val) {
      res.best_epoch = epoch;
      res.best_val = val;
      res.best_params = params;
    }
  }

  if (params.hash_group("geom.") != geom_hash ||
      res.best_params.hash_group("geom.") != geom_hash)
    throw std::logic_error("train_texture: geometry parameters changed");
  return res;
}

// ---- inference and evaluation -----------------------------------------------

struct ColorFrame {
  int w = 0, h = 0;
  std::vector<float> rgb;  // h*w*3
};

/// Dense color rendering for one view using a fixed latent code. The encoder
/// is *not* run here; pass z_texture from embed_view or a centroid.
inline ColorFrame render_color_frame(const ParamSet& params,
                                     const ModelConfig& cfg, const TexArch& arch,
                                     const std::vector<Eigen::Vector3d>& kp,
                                     const Tensor& z_texture, const Camera& cam,
                                     int w, int h, std::size_t batch = 4096) {
  if (z_texture.size() != static_cast<std::size_t>(cfg.d_z))
    throw std::invalid_argument("render_color_frame: z width");
  ColorFrame fr;
  fr.w = w;
  fr.h = h;
  fr.rgb.assign(static_cast<std::size_t>(w) * h * 3, 0.0f);
  std::size_t total = static_cast<std::size_t>(w) * h;
  for (std::size_t start = 0; start < total; start += batch) {
    std::size_t count = std::min(batch, total - start);
    std::vector<std::size_t> idx(count);
    for (std::size_t i = 0; i < count; ++i) idx[i] = start + i;
    Tape t(&params);
    Var z = t.constant(z_texture.reshaped({1, z_texture.size()}));
    Var f_tex = decode_texture(t, cfg, z);
    geomnet::EncodedKeypoints geo = geomnet::encode_pose(t, cfg, kp);
    Var rgb = render_color(t, cfg, arch.variant, kp, geo, f_tex, z, cam,
                           geomnet::pixel_centers(idx, w));
    const Tensor& p = t.val(rgb);
    for (std::size_t i = 0; i < count; ++i)
      for (int c = 0; c < 3; ++c)
        fr.rgb[(start + i) * 3 + c] = static_cast<float>(p.at2(i, c));
  }
  return fr;
}

/// Encoder pass on a single view (eval-mode batch norm). Returns the latent
/// mean and variance as plain tensors.
struct ViewCode {
  Tensor mu;      // [1 x d_z]
  Tensor sigma2;  // [1 x d_z]
};

inline ViewCode embed_view(const ParamSet& params, const ModelConfig& cfg,
                           const TexArch& arch, const std::vector<float>& rgb,
                           const std::vector<float>& nnopcs_map) {
  Tape t(&params);
  TextureLatent lat =
      encode_texture(t, cfg, arch, rgb, nnopcs_map, /*training=*/false);
  return {t.val(lat.mu), t.val(lat.sigma2)};
}

struct PsnrReport {
  double masked = 0.0;      // inside the GT silhouette (primary number)
  double full_frame = 0.0;  // prediction composited with the GT mask
  std::size_t views = 0;
};

/// Reconstruction PSNR over a pose split. Each view is encoded from its own
/// ground-truth inputs (latent mean), then re-rendered and compared against
/// the ground-truth image. Full-frame numbers composite the prediction with
/// the GT mask, matching the dataset's zero background.
inline PsnrReport eval_psnr(const ParamSet& params, const ModelConfig& cfg,
                            const TexArch& arch, const Dataset& ds,
                            const std::vector<int>& split,
                            const std::vector<int>& camera_ids) {
  if (split.empty() || camera_ids.empty())
    throw std::invalid_argument("eval_psnr: empty split");
  PsnrReport rep;
  for (int tex = 0; tex < ds.config.textures; ++tex) {
    for (int m : split) {
      for (int c : camera_ids) {
        ViewRecord v = ds.load_view(tex, m, c);
        ViewCode code = embed_view(params, cfg, arch, v.rgb, v.nnopcs);
        ColorFrame fr = render_color_frame(params, cfg, arch,
                                           ds.poses[m].keypoints, code.mu,
                                           v.camera, v.w, v.h);
        std::vector<float> composited(fr.rgb.size(), 0.0f);
        for (std::size_t p = 0; p < v.mask.size(); ++p)
          if (v.mask[p])
            for (int ch = 0; ch < 3; ++ch)
              composited[p * 3 + ch] = fr.rgb[p * 3 + ch];
        rep.masked += psnr(fr.rgb, v.rgb, v.mask);
        rep.full_frame += psnr(composited, v.rgb, {});
        rep.views += 1;
      }
    }
  }
  rep.masked /= static_cast<double>(rep.views);
  rep.full_frame /= static_cast<double>(rep.views);
  return rep;
}

}  // namespace texpup::texnet
