#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "texpup/core/fourier.hpp"
#include "texpup/core/params.hpp"
#include "texpup/core/tape.hpp"
#include "texpup/synth/camera.hpp"

namespace texpup::net {

using Eigen::Vector2d;

// ---- small layer helpers -------------------------------------------------

inline void add_linear(ParamSet& ps, const std::string& name, std::size_t in,
                       std::size_t out, Rng& rng) {
  ps.add(name + ".w", init_weight({in, out}, in, rng));
  ps.add(name + ".b", Tensor({1, out}));
}

inline Var linear(Tape& t, const std::string& name, Var x) {
  return t.add_bias(t.matmul(x, t.param(name + ".w")), t.param(name + ".b"));
}

// ---- nearest-k vector cross-attention renderer ----------------------------

/// Width/head layout of one renderer instance. The texture renderer reuses
/// the same machinery with doubled local/global widths and an RGB head.
struct VcaSpec {
  std::string prefix;        // parameter prefix, e.g. "geom.rend"
  std::size_t feat_width;    // per-keypoint feature width fed to keys/values
  std::size_t global_width;  // global code width
  std::size_t attn_width;    // attention/value width
  std::size_t hidden_width;  // trunk MLP width
  int fourier_bands;
  int neighbors;             // k
  double pixel_scale;        // relative offsets divided by this (image width)
  struct Head {
    std::string name;
    std::size_t width;
    bool sigmoid;
  };
  std::vector<Head> heads;
  bool with_depth = false;   // append anchor camera depth to key/value encodings
  double depth_scale = 1.0;  // anchor depths divided by this before encoding

  // Queries encode the 2D pixel-to-anchor offset; keys/values optionally add
  // the anchor's camera-space depth so attention can resolve self-occlusion.
  std::size_t query_dim() const { return fourier_dim(2, fourier_bands); }
  std::size_t kv_encoding_dim() const {
    return fourier_dim(with_depth ? 3 : 2, fourier_bands);
  }
};

inline void add_vca_params(ParamSet& ps, const VcaSpec& spec, Rng& rng) {
  std::size_t eq = spec.query_dim();
  std::size_t ekv = spec.kv_encoding_dim();
  add_linear(ps, spec.prefix + ".query", eq, spec.attn_width, rng);
  add_linear(ps, spec.prefix + ".key", spec.feat_width + ekv, spec.attn_width, rng);
  add_linear(ps, spec.prefix + ".value", spec.feat_width + ekv, spec.attn_width, rng);
  add_linear(ps, spec.prefix + ".global", spec.global_width, spec.attn_width, rng);
  add_linear(ps, spec.prefix + ".trunk", spec.attn_width, spec.hidden_width, rng);
  add_linear(ps, spec.prefix + ".trunk2", spec.hidden_width, spec.hidden_width, rng);
  for (const auto& h : spec.heads)
    add_linear(ps, spec.prefix + ".head_" + h.name, spec.hidden_width, h.width,
               rng);
}

/// Indices of the k anchors nearest to q, ties broken by lowest index.
inline std::vector<std::size_t> nearest_anchors(const std::vector<Vector2d>& anchors,
                                                const Vector2d& q, int k) {
  if (static_cast<int>(anchors.size()) < k)
    throw std::invalid_argument("vca: fewer anchors than neighbors");
  std::vector<std::size_t> idx(anchors.size());
  std::iota(idx.begin(), idx.end(), 0);
  auto cmp = [&](std::size_t a, std::size_t b) {
    double da = (anchors[a] - q).squaredNorm();
    double db = (anchors[b] - q).squaredNorm();
    return da < db || (da == db && a < b);
  };
  std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), cmp);
  idx.resize(k);
  return idx;
}

struct VcaOutputs {
  std::vector<Var> heads;  // aligned with spec.heads, each [P x width]
};

/// Renders a batch of query pixels. `feats` is [K x feat_width] on the tape,
/// `global_code` is [1 x global_width]. Anchor positions are constants.
///
/// Per pixel: the k nearest anchors are selected; the query comes from the
/// positional encoding of the pixel-to-anchor offset, keys/values from the
/// anchor's features concatenated with that encoding; attention is a softmax
/// over the k neighbors; a linear image of the global code conditions the
/// attended value before the output trunk.
inline VcaOutputs vca_render(Tape& t, const VcaSpec& spec,
                             const std::vector<Vector2d>& anchors, Var feats,
                             Var global_code,
                             const std::vector<Vector2d>& queries,
                             const std::vector<double>* anchor_depths = nullptr) {
  int k = spec.neighbors;
  if (static_cast<int>(anchors.size()) < k)
    throw std::invalid_argument("vca: fewer anchors than neighbors");
  if (spec.with_depth &&
      (!anchor_depths || anchor_depths->size() != anchors.size()))
    throw std::invalid_argument("vca: with_depth needs one depth per anchor");
  std::size_t p_n = queries.size();
  std::size_t eq_dim = spec.query_dim();
  std::size_t ekv_dim = spec.kv_encoding_dim();

  Tensor enc_q({p_n * k, eq_dim});
  Tensor enc_kv({p_n * k, ekv_dim});
  std::vector<std::size_t> gather(p_n * k);
  for (std::size_t p = 0; p < p_n; ++p) {
    auto idx = nearest_anchors(anchors, queries[p], k);
    for (int i = 0; i < k; ++i) {
      gather[p * k + i] = idx[i];
      Vector2d rel = (queries[p] - anchors[idx[i]]) / spec.pixel_scale;
      auto e = fourier_encode({rel.x(), rel.y()}, spec.fourier_bands);
      std::copy(e.begin(), e.end(), enc_q.data.begin() + (p * k + i) * eq_dim);
      if (spec.with_depth) {
        auto ekv = fourier_encode(
            {rel.x(), rel.y(), (*anchor_depths)[idx[i]] / spec.depth_scale},
            spec.fourier_bands);
        std::copy(ekv.begin(), ekv.end(),
                  enc_kv.data.begin() + (p * k + i) * ekv_dim);
      }
    }
  }
  Var enc_qv = t.constant(std::move(enc_q));
  Var enc_kvv = spec.with_depth ? t.constant(std::move(enc_kv)) : enc_qv;

  // Keys/values act on [feats_i ; enc]; the feature half has only one distinct
  // row per anchor, so multiply those K rows first and gather, instead of
  // multiplying the gathered P*k-row concatenation.
  std::vector<std::size_t> fidx(spec.feat_width), eidx(ekv_dim);
  std::iota(fidx.begin(), fidx.end(), 0);
  std::iota(eidx.begin(), eidx.end(), spec.feat_width);
  auto kv_linear = [&](const std::string& name) {
    Var w = t.param(name + ".w");
    Var per_anchor = t.matmul(feats, t.gather_rows(w, fidx));
    Var per_query =
        t.add_bias(t.matmul(enc_kvv, t.gather_rows(w, eidx)), t.param(name + ".b"));
    return t.add(t.gather_rows(per_anchor, gather), per_query);
  };

  Var q = linear(t, spec.prefix + ".query", enc_qv);
  Var key = kv_linear(spec.prefix + ".key");
  Var val = kv_linear(spec.prefix + ".value");

  Var scores = t.scale(t.row_sum(t.mul(q, key)),
                       1.0 / std::sqrt(static_cast<double>(spec.attn_width)));
  Var alpha = t.softmax_rows(t.reshape(scores, {p_n, static_cast<std::size_t>(k)}));
  Var alpha_col = t.reshape(alpha, {p_n * k, 1});
  Var attended = t.group_sum(t.scale_rows(val, alpha_col), k);

  Var cond = linear(t, spec.prefix + ".global", global_code);
  Var h = t.add(attended, t.broadcast_row(cond, p_n));
  Var trunk = t.relu(linear(t, spec.prefix + ".trunk", h));
  trunk = t.relu(linear(t, spec.prefix + ".trunk2", trunk));

  VcaOutputs out;
  for (const auto& head : spec.heads) {
    Var o = linear(t, spec.prefix + ".head_" + head.name, trunk);
    out.heads.push_back(head.sigmoid ? t.sigmoid(o) : o);
  }
  return out;
}

// ---- keypoint token encoder ------------------------------------------------

/// Parameters of the keypoint encoder: tokens from positional encodings of
/// centered keypoints, two rounds of full self-attention, mean-pooled global
/// code.
struct EncoderSpec {
  std::string prefix;  // e.g. "geom.enc"
  std::size_t d_f;
  std::size_t d_z;
  int fourier_bands;
  int rounds = 2;
  std::size_t keypoints = 0;  // when > 0, adds a learned identity embedding
};

inline void add_encoder_params(ParamSet& ps, const EncoderSpec& spec, Rng& rng) {
  add_linear(ps, spec.prefix + ".token", fourier_dim(3, spec.fourier_bands),
             spec.d_f, rng);
  // Positional encodings alone cannot tell symmetric keypoints apart (two
  // limbs in similar posed positions would collapse); a per-index embedding
  // restores identity.
  if (spec.keypoints > 0)
    ps.add(spec.prefix + ".id",
           init_weight({spec.keypoints, spec.d_f}, spec.d_f, rng));
  for (int r = 0; r < spec.rounds; ++r) {
    std::string p = spec.prefix + ".sa" + std::to_string(r);
    add_linear(ps, p + ".q", spec.d_f, spec.d_f, rng);
    add_linear(ps, p + ".k", spec.d_f, spec.d_f, rng);
    add_linear(ps, p + ".v", spec.d_f, spec.d_f, rng);
    add_linear(ps, p + ".mlp1", spec.d_f, spec.d_f, rng);
    add_linear(ps, p + ".mlp2", spec.d_f, spec.d_f, rng);
  }
  add_linear(ps, spec.prefix + ".pool", spec.d_f, spec.d_z, rng);
}

struct EncodedKeypoints {
  Var local;   // [K x d_f]
  Var global;  // [1 x d_z]
};

/// Keypoints are centered before encoding, so the local features are
/// invariant to a common translation of all keypoints.
inline EncodedKeypoints encode_keypoints(Tape& t, const EncoderSpec& spec,
                                         const std::vector<Eigen::Vector3d>& kp) {
  std::size_t K = kp.size();
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (const auto& x : kp) {
    if (!x.allFinite())
      throw std::invalid_argument("encode: non-finite keypoint");
    centroid += x;
  }
  centroid /= static_cast<double>(K);

  Tensor enc({K, fourier_dim(3, spec.fourier_bands)});
  for (std::size_t i = 0; i < K; ++i) {
    Eigen::Vector3d c = kp[i] - centroid;
    auto e = fourier_encode({c.x(), c.y(), c.z()}, spec.fourier_bands);
    std::copy(e.begin(), e.end(), enc.data.begin() + i * e.size());
  }

  Var tok = linear(t, spec.prefix + ".token", t.constant(std::move(enc)));
  if (spec.keypoints > 0) {
    if (spec.keypoints != K)
      throw std::invalid_argument("encode: keypoint count mismatch");
    tok = t.add(tok, t.param(spec.prefix + ".id"));
  }
  double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(spec.d_f));
  for (int r = 0; r < spec.rounds; ++r) {
    std::string p = spec.prefix + ".sa" + std::to_string(r);
    Var q = linear(t, p + ".q", tok);
    Var key = linear(t, p + ".k", tok);
    Var val = linear(t, p + ".v", tok);
    // Full K x K attention; K is small.
    Var scores = t.scale(t.matmul(q, t.transpose(key)), inv_sqrt);
    Var alpha = t.softmax_rows(scores);
    tok = t.add(tok, t.matmul(alpha, val));
    Var h = t.relu(linear(t, p + ".mlp1", tok));
    tok = t.add(tok, linear(t, p + ".mlp2", h));
  }
  EncodedKeypoints out;
  out.local = tok;
  out.global = linear(t, spec.prefix + ".pool", t.mean_rows(tok));
  return out;
}

}  // namespace texpup::net
