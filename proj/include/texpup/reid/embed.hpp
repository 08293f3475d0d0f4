#pragma once

#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "texpup/geomnet/model.hpp"
#include "texpup/synth/dataset.hpp"
#include "texpup/texnet/train.hpp"

namespace texpup::reid {

using synth::Dataset;
using synth::ViewRecord;
using texnet::TexArch;

struct EmbeddingRecord {
  int m = 0, c = 0, t = 0;
  std::string source;          // clean | novel-view | occluded-...
  std::vector<double> code;    // d_z, latent mean by default
};

struct EmbeddingSet {
  std::vector<EmbeddingRecord> records;
  std::uint64_t config_hash = 0;

  void add(EmbeddingRecord r) {
    for (double v : r.code)
      if (!std::isfinite(v))
        throw std::invalid_argument("embedding: non-finite code");
    for (const auto& e : records)
      if (e.m == r.m && e.c == r.c && e.t == r.t && e.source == r.source)
        throw std::invalid_argument("embedding: duplicate (m,c,t,source) key");
    records.push_back(std::move(r));
  }
};

// ---- serialization (JSON lines; first line carries set metadata) -----------

inline void write_embeddings(const EmbeddingSet& set, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << nlohmann::json{{"meta", true}, {"config_hash", set.config_hash}}.dump()
    << "\n";
  for (const auto& r : set.records)
    f << nlohmann::json{{"m", r.m}, {"c", r.c}, {"t", r.t},
                        {"source", r.source}, {"code", r.code}}
             .dump()
      << "\n";
}

inline EmbeddingSet read_embeddings(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path);
  EmbeddingSet set;
  std::string line;
  bool first = true;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line);
    if (first && j.value("meta", false)) {
      set.config_hash = j.at("config_hash");
      first = false;
      continue;
    }
    first = false;
    set.add({j.at("m"), j.at("c"), j.at("t"), j.at("source"),
             j.at("code").get<std::vector<double>>()});
  }
  return set;
}

// ---- encoder input assembly --------------------------------------------------

struct EncoderInput {
  std::vector<float> rgb;     // masked
  std::vector<float> nnopcs;  // masked
};

/// Ground-truth path: the dataset buffers are already zero outside the mask.
inline EncoderInput encoder_input_gt(const ViewRecord& v) {
  return {v.rgb, v.nnopcs};
}

/// Deployment path: geometry is rendered by the network; the observed RGB and
/// the predicted coordinate map are masked by the predicted silhouette.
inline EncoderInput encoder_input_predicted(const ParamSet& params,
                                            const ModelConfig& cfg,
                                            const std::vector<Eigen::Vector3d>& kp,
                                            const ViewRecord& v) {
  geomnet::GeometryFrame fr =
      geomnet::render_frame(params, cfg, kp, v.camera, v.w, v.h);
  EncoderInput in;
  std::size_t hw = static_cast<std::size_t>(v.w) * v.h;
  in.rgb.assign(hw * 3, 0.0f);
  in.nnopcs.assign(hw * 3, 0.0f);
  for (std::size_t p = 0; p < hw; ++p) {
    if (fr.sil_logits[p] <= 0.0) continue;
    for (int ch = 0; ch < 3; ++ch) {
      in.rgb[p * 3 + ch] = v.rgb[p * 3 + ch];
      in.nnopcs[p * 3 + ch] = static_cast<float>(fr.nnopcs[p * 3 + ch]);
    }
  }
  return in;
}

/// One embedding per (texture, pose, camera). `sample_seed >= 0` draws
/// z = mu + sigma*eps instead of the deterministic mean.
inline EmbeddingSet extract_embeddings(const ParamSet& params,
                                       const ModelConfig& cfg,
                                       const TexArch& arch, const Dataset& ds,
                                       const std::vector<int>& split,
                                       const std::vector<int>& camera_ids,
                                       bool use_predicted_geometry,
                                       const std::string& source,
                                       long long sample_seed = -1) {
  EmbeddingSet set;
  set.config_hash = params.hash();
  Rng sample_rng(sample_seed < 0 ? 0 : static_cast<std::uint64_t>(sample_seed));
  for (int tex = 0; tex < ds.config.textures; ++tex) {
    for (int m : split) {
      for (int c : camera_ids) {
        ViewRecord v = ds.load_view(tex, m, c);
        EncoderInput in =
            use_predicted_geometry
                ? encoder_input_predicted(params, cfg, ds.poses[m].keypoints, v)
                : encoder_input_gt(v);
        texnet::ViewCode code =
            texnet::embed_view(params, cfg, arch, in.rgb, in.nnopcs);
        EmbeddingRecord r{m, c, tex, source, code.mu.data};
        if (sample_seed >= 0)
          for (std::size_t i = 0; i < r.code.size(); ++i)
            r.code[i] += std::sqrt(code.sigma2[i]) * sample_rng.normal();
        set.add(std::move(r));
      }
    }
  }
  return set;
}

// ---- nearest-centroid classification ----------------------------------------

inline std::map<int, std::vector<double>> texture_centroids(
    const EmbeddingSet& train) {
  if (train.records.empty())
    throw std::invalid_argument("centroids: empty embedding set");
  std::map<int, std::vector<double>> sum;
  std::map<int, std::size_t> count;
  for (const auto& r : train.records) {
    auto& s = sum[r.t];
    if (s.empty()) s.assign(r.code.size(), 0.0);
    for (std::size_t i = 0; i < r.code.size(); ++i) s[i] += r.code[i];
    ++count[r.t];
  }
  for (auto& [t, s] : sum)
    for (double& v : s) v /= static_cast<double>(count[t]);
  return sum;
}

/// Euclidean nearest centroid; ties resolve to the lowest texture id (map
/// iteration order is ascending).
inline int classify(const std::map<int, std::vector<double>>& centroids,
                    const std::vector<double>& code) {
  int best = -1;
  double best_d = 0.0;
  for (const auto& [t, c] : centroids) {
    if (c.size() != code.size())
      throw std::invalid_argument("classify: code width mismatch");
    double d = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) {
      double r = code[i] - c[i];
      d += r * r;
    }
    if (best < 0 || d < best_d) {
      best = t;
      best_d = d;
    }
  }
  return best;
}

struct ReidReport {
  double accuracy = 0.0;
  // confusion[(true, predicted)] = count
  std::map<std::pair<int, int>, std::size_t> confusion;
};

inline ReidReport nearest_centroid_report(const EmbeddingSet& train,
                                          const EmbeddingSet& test) {
  if (test.records.empty())
    throw std::invalid_argument("reid: empty test set");
  auto centroids = texture_centroids(train);
  std::set<int> test_ids;
  for (const auto& r : test.records) test_ids.insert(r.t);
  for (int t : test_ids)
    if (!centroids.count(t))
      throw std::invalid_argument("reid: train set missing texture id " +
                                  std::to_string(t));
  ReidReport rep;
  std::size_t correct = 0;
  for (const auto& r : test.records) {
    int pred = classify(centroids, r.code);
    ++rep.confusion[{r.t, pred}];
    correct += pred == r.t;
  }
  rep.accuracy = static_cast<double>(correct) / test.records.size();
  return rep;
}

inline double nearest_centroid_accuracy(const EmbeddingSet& train,
                                        const EmbeddingSet& test) {
  return nearest_centroid_report(train, test).accuracy;
}

// ---- occlusion evaluation -----------------------------------------------------

enum class OcclusionMode { complete_mask, occluded_mask };

struct OcclusionResult {
  int instance = 0;
  int true_texture = 0;
  int predicted = 0;
  bool correct = false;
};

struct OcclusionReport {
  std::vector<OcclusionResult> results;
  double accuracy = 0.0;
};

/// Embeds each occluded view of the subject (the far creature) under the
/// chosen mask and classifies it against clean-training centroids. The
/// complete mask covers the subject's full projection, so occluder pixels
/// enter the RGB input; the occluded mask keeps only visible subject pixels.
inline OcclusionReport occlusion_eval(const ParamSet& params,
                                      const ModelConfig& cfg,
                                      const TexArch& arch, const Dataset& ds,
                                      const EmbeddingSet& clean_train,
                                      OcclusionMode mode) {
  if (ds.occlusions.empty())
    throw std::invalid_argument("occlusion_eval: no occlusion instances");
  auto centroids = texture_centroids(clean_train);
  OcclusionReport rep;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < ds.occlusions.size(); ++i) {
    const auto& inst = ds.occlusions[i];
    ViewRecord v = ds.load_occlusion(static_cast<int>(i));
    const std::vector<std::uint8_t>& mask =
        mode == OcclusionMode::complete_mask ? v.complete_mask : v.mask;
    if (mask.empty())
      throw std::runtime_error("occlusion_eval: missing mask for instance " +
                               std::to_string(i));
    std::size_t hw = static_cast<std::size_t>(v.w) * v.h;
    std::vector<float> rgb(hw * 3, 0.0f), nn(hw * 3, 0.0f);
    for (std::size_t p = 0; p < hw; ++p) {
      if (!mask[p]) continue;
      for (int ch = 0; ch < 3; ++ch) {
        rgb[p * 3 + ch] = v.rgb[p * 3 + ch];
        nn[p * 3 + ch] = v.nnopcs[p * 3 + ch];
      }
    }
    texnet::ViewCode code = texnet::embed_view(params, cfg, arch, rgb, nn);
    int pred = classify(centroids, code.mu.data);
    bool ok = pred == inst.far_texture;
    correct += ok;
    rep.results.push_back({inst.index, inst.far_texture, pred, ok});
  }
  rep.accuracy = static_cast<double>(correct) / rep.results.size();
  return rep;
}

// ---- throughput benchmark ------------------------------------------------------

struct BenchReport {
  int w = 0, h = 0;
  int frames = 0;
  double render_s = 0.0;  // predicted mask + coordinate map
  double encode_s = 0.0;  // texture encoder forward
  double total_s = 0.0;
  double fps = 0.0;
};

/// End-to-end embedding throughput at a given resolution, batch size 1:
/// render the predicted silhouette and coordinate map densely, then encode.
/// Uses freshly initialized weights sized for the resolution; timing does not
/// depend on the values.
inline BenchReport bench_embedding_throughput(const ModelConfig& base, int w,
                                              int h, int n_frames,
                                              std::uint64_t seed = 99) {
  if (n_frames < 10)
    throw std::invalid_argument("bench: n_frames >= 10 for a stable measurement");
  ModelConfig cfg = base;
  cfg.image_w = w;
  cfg.image_h = h;
  cfg.validate();
  TexArch arch;
  arch.input_w = w;
  arch.input_h = h;

  Rng rng(seed);
  ParamSet params;
  geomnet::init_params(cfg, params, rng);
  texnet::init_params(cfg, arch, params, rng);

  synth::Skeleton sk = synth::make_quadruped();
  Eigen::Vector3d lo, hi;
  sk.neutral_bbox(lo, hi);
  synth::RigIntrinsics intr = synth::default_intrinsics(w, h);
  synth::Camera cam = synth::look_at(Eigen::Vector3d(4.2, 1.6, 0.0),
                                     0.5 * (lo + hi), intr.fx, intr.fy,
                                     intr.cx, intr.cy);
  std::vector<float> rgb(static_cast<std::size_t>(w) * h * 3, 0.25f);

  using clock = std::chrono::steady_clock;
  BenchReport rep;
  rep.w = w;
  rep.h = h;
  rep.frames = n_frames;
  for (int f = 0; f < n_frames; ++f) {
    Rng pose_rng = Rng(seed).fork(0xbe0 + f);
    synth::PoseSample pose = synth::sample_pose(sk, f, pose_rng);

    auto t0 = clock::now();
    geomnet::GeometryFrame fr =
        geomnet::render_frame(params, cfg, pose.keypoints, cam, w, h);
    auto t1 = clock::now();

    std::size_t hw = static_cast<std::size_t>(w) * h;
    std::vector<float> in_rgb(hw * 3, 0.0f), in_nn(hw * 3, 0.0f);
    for (std::size_t p = 0; p < hw; ++p) {
      if (fr.sil_logits[p] <= 0.0) continue;
      for (int ch = 0; ch < 3; ++ch) {
        in_rgb[p * 3 + ch] = rgb[p * 3 + ch];
        in_nn[p * 3 + ch] = static_cast<float>(fr.nnopcs[p * 3 + ch]);
      }
    }
    texnet::ViewCode code = texnet::embed_view(params, cfg, arch, in_rgb, in_nn);
    (void)code;
    auto t2 = clock::now();

    rep.render_s += std::chrono::duration<double>(t1 - t0).count();
    rep.encode_s += std::chrono::duration<double>(t2 - t1).count();
    rep.total_s += std::chrono::duration<double>(t2 - t0).count();
  }
  rep.fps = rep.frames / rep.total_s;
  return rep;
}

}  // namespace texpup::reid
