#pragma once

#include <algorithm>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "texpup/core/adam.hpp"
#include "texpup/core/checkpoint.hpp"
#include "texpup/geomnet/model.hpp"
#include "texpup/synth/dataset.hpp"

namespace texpup::geomnet {

using synth::Dataset;
using synth::ViewRecord;

struct TrainConfig {
  int epochs = 28;
  double lr = 5e-4;            // initial learning rate
  double lr_decay = 0.2;       // step decay factor
  int lr_decay_every = 12;     // epochs between decays
  int pixels_per_iter = 500;   // sampled inside the GT mask; matched outside
  double lambda_nnopcs = 1.0;
  double lambda_sil = 1.0;
  double lambda_depth = 0.1;
  std::uint64_t seed = 11;

  double lr_at(int epoch) const {
    return lr * std::pow(lr_decay, epoch / lr_decay_every);
  }
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
};

struct TrainResult {
  ParamSet best_params;
  std::vector<EpochLog> log;
  int best_epoch = -1;
  double best_val = 0.0;
};

/// Memory cache of geometry views (texture 0 carries the shared geometry
/// ground truth).
class GeomViewCache {
 public:
  explicit GeomViewCache(const Dataset& ds) : ds_(&ds) {}

  const ViewRecord& get(int m, int c) {
    auto key = std::make_pair(m, c);
    auto it = cache_.find(key);
    if (it == cache_.end())
      it = cache_.emplace(key, ds_->load_view(0, m, c)).first;
    return it->second;
  }

 private:
  const Dataset* ds_;
  std::map<std::pair<int, int>, ViewRecord> cache_;
};

namespace detail {

/// Composite geometry loss for one view on sampled pixels. Returns the loss
/// Var; the first n queries lie inside the GT mask, the rest outside.
inline Var view_loss(Tape& t, const ModelConfig& cfg, const TrainConfig& tc,
                     const std::vector<Eigen::Vector3d>& kp,
                     const ViewRecord& v,
                     const std::vector<std::size_t>& inside,
                     const std::vector<std::size_t>& outside) {
  std::size_t n = inside.size();
  std::vector<std::size_t> all = inside;
  all.insert(all.end(), outside.begin(), outside.end());

  EncodedKeypoints latent = encode_pose(t, cfg, kp);
  auto r = render_geometry(t, cfg, kp, latent, v.camera, pixel_centers(all, v.w));

  std::vector<std::size_t> head(n);
  for (std::size_t i = 0; i < n; ++i) head[i] = i;

  Tensor gt_n({n, 3}), gt_d({n, 1}), gt_s({all.size(), 1});
  for (std::size_t i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) gt_n.at2(i, c) = v.nnopcs[inside[i] * 3 + c];
    gt_d[i] = v.depth[inside[i]];
  }
  for (std::size_t i = 0; i < all.size(); ++i) gt_s[i] = v.mask[all[i]] ? 1.0 : 0.0;

  Var l_n = t.scale(loss_map_sum(t, t.gather_rows(r.nnopcs, head), gt_n),
                    1.0 / (3.0 * static_cast<double>(n)));
  Var l_d = loss_depth_norm(t, t.gather_rows(r.depth, head), gt_d);
  Var l_s = loss_silhouette(t, r.sil, gt_s);
  return t.add(t.add(t.scale(l_n, tc.lambda_nnopcs), t.scale(l_s, tc.lambda_sil)),
               t.scale(l_d, tc.lambda_depth));
}

}  // namespace detail

/// Mean composite loss over a pose split with deterministic pixel sampling
/// (independent of the epoch, so values are comparable across epochs).
inline double validation_loss(const ParamSet& params, const ModelConfig& cfg,
                              const TrainConfig& tc, const Dataset& ds,
                              GeomViewCache& cache, const std::vector<int>& split) {
  double total = 0.0;
  std::size_t count = 0;
  std::size_t n = static_cast<std::size_t>(tc.pixels_per_iter);
  for (int m : split) {
    for (int c = 0; c < ds.config.known_cameras(); ++c) {
      const ViewRecord& v = cache.get(m, c);
      Rng rng = Rng(tc.seed).fork(0x7a10000 + m * 64 + c);
      auto inside = sample_mask_pixels(v.mask, n, rng);
      auto outside = sample_background_pixels(v.mask, v.w, n, rng);
      Tape t(&params);
      Var loss =
          detail::view_loss(t, cfg, tc, ds.poses[m].keypoints, v, inside, outside);
      total += t.val(loss).item();
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

/// Joint training of the keypoint encoder and the geometry renderer against
/// coordinate-map, silhouette and depth ground truth. The checkpoint with the
/// minimum validation loss wins.
inline TrainResult train_geometry(const Dataset& ds, const ModelConfig& cfg,
                                  const TrainConfig& tc,
                                  ParamSet* warm_start = nullptr) {
  ParamSet params;
  if (warm_start) {
    params = *warm_start;
  } else {
    Rng init_rng = Rng(tc.seed).fork(0x1417);
    init_params(cfg, params, init_rng);
  }
  ParamSet grads = ParamSet::zeros_like(params);
  Adam opt(params);
  GeomViewCache cache(ds);

  std::vector<std::pair<int, int>> views;
  for (int m : ds.train_split)
    for (int c = 0; c < ds.config.known_cameras(); ++c) views.emplace_back(m, c);

  TrainResult res;
  Rng shuffle_rng = Rng(tc.seed).fork(0x5481);
  Rng sample_rng = Rng(tc.seed).fork(0x9a3f);
  std::size_t n = static_cast<std::size_t>(tc.pixels_per_iter);

  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    for (std::size_t i = views.size(); i > 1; --i)
      std::swap(views[i - 1], views[shuffle_rng.below(i)]);

    double lr = tc.lr_at(epoch);
    double train_loss = 0.0;
    for (const auto& [m, c] : views) {
      const ViewRecord& v = cache.get(m, c);
      auto inside = sample_mask_pixels(v.mask, n, sample_rng);
      auto outside = sample_background_pixels(v.mask, v.w, n, sample_rng);
      Tape t(&params);
      Var loss =
          detail::view_loss(t, cfg, tc, ds.poses[m].keypoints, v, inside, outside);
      double lv = t.val(loss).item();
      if (!std::isfinite(lv))
        throw std::runtime_error("train_geometry: loss diverged at epoch " +
                                 std::to_string(epoch));
      train_loss += lv;
      t.backward(loss);
      grads = ParamSet::zeros_like(params);
      t.add_param_grads(grads);
      opt.step(params, grads, lr);
    }
    train_loss /= static_cast<double>(views.size());
    double val = validation_loss(params, cfg, tc, ds, cache, ds.val_split);
    res.log.push_back({epoch, train_loss, val, lr});
    if (res.best_epoch < 0 || val < res.best_val) {
      res.best_epoch = epoch;
      res.best_val = val;
      res.best_params = params;
    }
  }
  return res;
}

/// Metrics over a pose split, rendered at full resolution (texture 0 ground
/// truth, known cameras).
inline GeometryMetrics eval_geometry(const ParamSet& params,
                                     const ModelConfig& cfg, const Dataset& ds,
                                     const std::vector<int>& split) {
  if (split.empty()) throw std::invalid_argument("eval_geometry: empty split");
  GeometryMetrics acc;
  for (int m : split) {
    for (int c = 0; c < ds.config.known_cameras(); ++c) {
      ViewRecord v = ds.load_view(0, m, c);
      GeometryFrame fr = render_frame(params, cfg, ds.poses[m].keypoints,
                                      v.camera, v.w, v.h);
      accumulate_metrics(fr, v.nnopcs, v.depth, v.mask, acc);
    }
  }
  return finalize_metrics(acc);
}

}  // namespace texpup::geomnet
