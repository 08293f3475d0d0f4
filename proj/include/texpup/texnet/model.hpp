#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "texpup/core/config.hpp"
#include "texpup/core/tape.hpp"
#include "texpup/geomnet/model.hpp"
#include "texpup/net/vca.hpp"

namespace texpup::texnet {

using geomnet::EncodedKeypoints;
using net::Vector2d;
using net::VcaSpec;
using synth::Camera;

enum class Variant { full, no_nnopcs, no_f_texture };

inline std::string variant_name(Variant v) {
  switch (v) {
    case Variant::full: return "full";
    case Variant::no_nnopcs: return "no_nnopcs";
    case Variant::no_f_texture: return "no_f_texture";
  }
  throw std::invalid_argument("variant");
}

inline Variant variant_from_name(const std::string& s) {
  if (s == "full") return Variant::full;
  if (s == "no_nnopcs") return Variant::no_nnopcs;
  if (s == "no_f_texture") return Variant::no_f_texture;
  throw std::invalid_argument("unknown variant: " + s);
}

/// Texture network architecture. The encoder is a strided conv stack with
/// batch normalization followed by two dense layers producing mean and
/// log-variance heads.
struct TexArch {
  int input_w = 96, input_h = 72;
  std::vector<int> channels = {16, 16, 24, 24, 32, 32, 48, 48};
  std::vector<int> strides = {2, 1, 2, 1, 2, 1, 2, 1};
  int dense_hidden = 192;
  int decoder_hidden = 128;
  Variant variant = Variant::full;

  int input_channels() const { return variant == Variant::no_nnopcs ? 3 : 6; }

  /// Spatial size after the conv stack (stride-2 layers halve, rounding up).
  std::pair<int, int> conv_out_hw() const {
    int h = input_h, w = input_w;
    for (int s : strides) {
      h = (h - 1) / s + 1;
      w = (w - 1) / s + 1;
    }
    return {h, w};
  }

  std::size_t flat_dim() const {
    auto [h, w] = conv_out_hw();
    return static_cast<std::size_t>(h) * w * channels.back();
  }

  nlohmann::json to_json() const {
    return {{"input_w", input_w},     {"input_h", input_h},
            {"channels", channels},   {"strides", strides},
            {"dense_hidden", dense_hidden}, {"decoder_hidden", decoder_hidden},
            {"variant", variant_name(variant)}};
  }
  static TexArch from_json(const nlohmann::json& j) {
    TexArch a;
    a.input_w = j.at("input_w");
    a.input_h = j.at("input_h");
    a.channels = j.at("channels").get<std::vector<int>>();
    a.strides = j.at("strides").get<std::vector<int>>();
    a.dense_hidden = j.at("dense_hidden");
    a.decoder_hidden = j.at("decoder_hidden");
    a.variant = variant_from_name(j.at("variant"));
    return a;
  }
};

inline VcaSpec color_renderer_spec(const ModelConfig& cfg, Variant variant) {
  VcaSpec s;
  s.prefix = "tex.rend";
  // Local features: geometry f concatenated with f_texture (dropped in the
  // no_f_texture variant). Global code: [z ; z_texture].
  s.feat_width = static_cast<std::size_t>(
      variant == Variant::no_f_texture ? cfg.d_f : 2 * cfg.d_f);
  s.global_width = static_cast<std::size_t>(2 * cfg.d_z);
  s.attn_width = static_cast<std::size_t>(cfg.d_f);
  s.hidden_width = static_cast<std::size_t>(2 * cfg.d_f);
  s.fourier_bands = cfg.fourier_bands;
  s.neighbors = cfg.vca_neighbors;
  s.pixel_scale = static_cast<double>(cfg.image_w);
  s.heads = {{"rgb", 3, true}};
  s.with_depth = true;
  s.depth_scale = 4.0;
  return s;
}

inline void init_params(const ModelConfig& cfg, const TexArch& arch,
                        ParamSet& ps, Rng& rng) {
  int cin = arch.input_channels();
  for (std::size_t i = 0; i < arch.channels.size(); ++i) {
    int cout = arch.channels[i];
    std::string p = "tex.enc.conv" + std::to_string(i);
    ps.add(p + ".w", init_weight({static_cast<std::size_t>(cout),
                                  static_cast<std::size_t>(cin) * 9},
                                 static_cast<std::size_t>(cin) * 9, rng));
    ps.add(p + ".b", Tensor({1, static_cast<std::size_t>(cout)}));
    std::string bn = "tex.enc.bn" + std::to_string(i);
    ps.add(bn + ".gamma", Tensor::full({1, static_cast<std::size_t>(cout)}, 1.0));
    ps.add(bn + ".beta", Tensor({1, static_cast<std::size_t>(cout)}));
    ps.add(bn + ".running_mean", Tensor({1, static_cast<std::size_t>(cout)}));
    ps.add(bn + ".running_var",
           Tensor::full({1, static_cast<std::size_t>(cout)}, 1.0));
    cin = cout;
  }
  net::add_linear(ps, "tex.enc.dense1", arch.flat_dim(),
                  static_cast<std::size_t>(arch.dense_hidden), rng);
  net::add_linear(ps, "tex.enc.dense2",
                  static_cast<std::size_t>(arch.dense_hidden),
                  static_cast<std::size_t>(2 * cfg.d_z), rng);
  net::add_linear(ps, "tex.dec.fc1", static_cast<std::size_t>(cfg.d_z),
                  static_cast<std::size_t>(arch.decoder_hidden), rng);
  net::add_linear(ps, "tex.dec.fc2", static_cast<std::size_t>(arch.decoder_hidden),
                  static_cast<std::size_t>(cfg.keypoints * cfg.d_f), rng);
  net::add_vca_params(ps, color_renderer_spec(cfg, arch.variant), rng);
}

/// Names the optimizer may update during texture training: the texture group
/// minus batch-norm running statistics (state, not parameters).
inline ParamSet trainable_texture_params(const ParamSet& ps) {
  ParamSet out;
  for (const auto& [name, t] : ps) {
    if (name.rfind("tex.", 0) != 0) continue;
    if (name.find(".running_") != std::string::npos) continue;
    out.add(name, t);
  }
  return out;
}

struct TextureLatent {
  Var mu;       // [1 x d_z]
  Var logvar;   // [1 x d_z]
  Var sigma2;   // [1 x d_z], exp(logvar) > 0
};

/// Masked RGB + coordinate-map encoder. Inputs must already be zero outside
/// the silhouette. In training mode batch statistics are used (and reported
/// through `running_update` for the caller to fold into the running stats);
/// in eval mode the stored running statistics apply.
inline TextureLatent encode_texture(Tape& t, const ModelConfig& cfg,
                                    const TexArch& arch,
                                    const std::vector<float>& masked_rgb,
                                    const std::vector<float>& nnopcs_map,
                                    bool training,
                                    std::vector<Tape::BatchNormStats>*
                                        running_update = nullptr) {
  std::size_t hw =
      static_cast<std::size_t>(arch.input_h) * static_cast<std::size_t>(arch.input_w);
  if (masked_rgb.size() != hw * 3)
    throw std::invalid_argument("encode_texture: resolution mismatch");
  bool use_map = arch.variant != Variant::no_nnopcs;
  if (use_map && nnopcs_map.size() != hw * 3)
    throw std::invalid_argument("encode_texture: coordinate map resolution");

  int cin = arch.input_channels();
  Tensor x({hw, static_cast<std::size_t>(cin)});
  for (std::size_t p = 0; p < hw; ++p) {
    for (int c = 0; c < 3; ++c) x.at2(p, c) = masked_rgb[p * 3 + c];
    if (use_map)
      for (int c = 0; c < 3; ++c) x.at2(p, 3 + c) = nnopcs_map[p * 3 + c];
  }

  Var h = t.constant(std::move(x));
  int cur_h = arch.input_h, cur_w = arch.input_w;
  if (running_update) running_update->clear();
  for (std::size_t i = 0; i < arch.channels.size(); ++i) {
    std::string p = "tex.enc.conv" + std::to_string(i);
    h = t.conv3x3(h, cur_h, cur_w, t.param(p + ".w"), t.param(p + ".b"),
                  arch.strides[i]);
    cur_h = (cur_h - 1) / arch.strides[i] + 1;
    cur_w = (cur_w - 1) / arch.strides[i] + 1;
    std::string bn = "tex.enc.bn" + std::to_string(i);
    if (training) {
      Tape::BatchNormStats stats;
      h = t.batchnorm_train(h, t.param(bn + ".gamma"), t.param(bn + ".beta"),
                            1e-5, &stats);
      if (running_update) running_update->push_back(std::move(stats));
    } else {
      // ParamSet stores running stats as [1 x C] tensors. Copy them out: the
      // tape's node storage may reallocate under the param() calls below.
      Tensor rm = t.val(t.param(bn + ".running_mean"));
      Tensor rv = t.val(t.param(bn + ".running_var"));
      h = t.batchnorm_eval(h, t.param(bn + ".gamma"), t.param(bn + ".beta"),
                           rm.data, rv.data, 1e-5);
    }
    h = t.relu(h);
  }

  Var flat = t.reshape(h, {1, arch.flat_dim()});
  Var d1 = t.relu(net::linear(t, "tex.enc.dense1", flat));
  Var d2 = net::linear(t, "tex.enc.dense2", d1);
  std::size_t dz = static_cast<std::size_t>(cfg.d_z);
  TextureLatent out;
  out.mu = t.slice_cols(d2, 0, dz);
  out.logvar = t.slice_cols(d2, dz, 2 * dz);
  out.sigma2 = t.exp_(out.logvar);
  return out;
}

/// Reparametrized sample z = mu + sqrt(sigma2) .* eps; gradients flow to the
/// latent distribution parameters.
inline Var sample_latent(Tape& t, const TextureLatent& lat, const Tensor& eps) {
  for (double v : t.val(lat.sigma2).data)
    if (v <= 0.0) throw std::invalid_argument("sample_latent: sigma2 <= 0");
  Var sigma = t.sqrt_(lat.sigma2);
  return t.add(lat.mu, t.mul(sigma, t.constant(eps)));
}

inline Tensor standard_normal_row(std::size_t n, Rng& rng) {
  Tensor eps({1, n});
  for (double& v : eps.data) v = rng.normal();
  return eps;
}

/// z_texture -> per-keypoint texture features [K x d_f].
inline Var decode_texture(Tape& t, const ModelConfig& cfg, Var z_texture) {
  Var h = t.relu(net::linear(t, "tex.dec.fc1", z_texture));
  Var o = net::linear(t, "tex.dec.fc2", h);
  return t.reshape(o, {static_cast<std::size_t>(cfg.keypoints),
                       static_cast<std::size_t>(cfg.d_f)});
}

/// Color rendering conditioned on frozen geometry plus texture features.
inline Var render_color(Tape& t, const ModelConfig& cfg, Variant variant,
                        const std::vector<Eigen::Vector3d>& kp,
                        const EncodedKeypoints& geo, Var tex_features,
                        Var z_texture, const Camera& cam,
                        const std::vector<Vector2d>& queries) {
  geomnet::AnchorSet a = geomnet::project_anchors(kp, cam);
  VcaSpec spec = color_renderer_spec(cfg, variant);
  spec.neighbors = std::min<int>(spec.neighbors, static_cast<int>(a.anchors.size()));

  Var feats = variant == Variant::no_f_texture
                  ? geo.local
                  : t.concat_cols(geo.local, tex_features);
  if (a.indices.size() != kp.size()) feats = t.gather_rows(feats, a.indices);
  Var global_code = t.concat_cols(geo.global, z_texture);
  auto out = net::vca_render(t, spec, a.anchors, feats, global_code, queries,
                             &a.depths);
  return out.heads[0];
}

// ---- losses ----------------------------------------------------------------

/// KL divergence between N(mu, diag(sigma2)) and the standard normal:
/// 0.5 * sum(mu^2 + sigma2 - log sigma2 - 1).
inline Var loss_kld(Tape& t, const TextureLatent& lat) {
  std::size_t n = t.val(lat.mu).size();
  Var mu2 = t.mul(lat.mu, lat.mu);
  Var inner = t.sub(t.add(mu2, lat.sigma2),
                    t.add(lat.logvar, t.constant(Tensor::full({1, n}, 1.0))));
  return t.scale(t.sum(inner), 0.5);
}

/// Closed form on plain values (for callers outside a training tape).
inline double kld_value(const std::vector<double>& mu,
                        const std::vector<double>& sigma2) {
  if (mu.size() != sigma2.size()) throw std::invalid_argument("kld: size");
  double acc = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    if (sigma2[i] <= 0.0) throw std::invalid_argument("kld: sigma2 <= 0");
    acc += mu[i] * mu[i] + sigma2[i] - std::log(sigma2[i]) - 1.0;
  }
  return 0.5 * acc;
}

inline Var total_texture_loss(Tape& t, Var color_term, Var kld_term,
                              double lambda_col, double lambda_kld) {
  if (lambda_col < 0.0 || lambda_kld < 0.0)
    throw std::invalid_argument("total_texture_loss: lambda >= 0");
  return t.add(t.scale(color_term, lambda_col), t.scale(kld_term, lambda_kld));
}

/// Peak signal-to-noise ratio in dB for values in [0,1]. `mask` empty means
/// full frame. A zero-MSE comparison reports the documented 99 dB cap.
inline double psnr(const std::vector<float>& pred, const std::vector<float>& gt,
                   const std::vector<std::uint8_t>& mask) {
  if (pred.size() != gt.size()) throw std::invalid_argument("psnr: size mismatch");
  double mse = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!mask.empty() && !mask[i / 3]) continue;
    double d = static_cast<double>(pred[i]) - static_cast<double>(gt[i]);
    mse += d * d;
    ++n;
  }
  if (n == 0) throw std::invalid_argument("psnr: empty mask");
  mse /= static_cast<double>(n);
  if (mse <= 0.0) return 99.0;
  return std::min(99.0, 10.0 * std::log10(1.0 / mse));
}

}  // namespace texpup::texnet
