#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "texpup/cli/config.hpp"
#include "texpup/cli/experiment.hpp"
#include "texpup/geomnet/train.hpp"
#include "texpup/io/f32.hpp"
#include "texpup/io/png.hpp"
#include "texpup/reid/embed.hpp"
#include "texpup/reid/kde.hpp"
#include "texpup/reid/tsne.hpp"
#include "texpup/texnet/train.hpp"

namespace texpup::cli {

inline std::string geom_ckpt_path(const ExperimentConfig& cfg) {
  return cfg.run_dir() + "/checkpoints/geom.ckpt";
}
inline std::string tex_ckpt_path(const ExperimentConfig& cfg,
                                 texnet::Variant v) {
  return cfg.run_dir() + "/checkpoints/tex_" + texnet::variant_name(v) + ".ckpt";
}

inline synth::Dataset open_dataset(const ExperimentConfig& cfg) {
  std::string manifest = cfg.dataset_dir() + "/manifest.json";
  if (!fs::exists(manifest))
    throw MissingPrereq("dataset manifest not found at " + manifest +
                        "; run gen-data first");
  return synth::load_dataset(cfg.dataset_dir());
}

inline Checkpoint open_checkpoint(const std::string& path,
                                  const std::string& stage_hint) {
  if (!fs::exists(path))
    throw MissingPrereq("checkpoint not found at " + path + "; run " +
                        stage_hint + " first");
  return Checkpoint::load(path);
}

inline texnet::TexArch arch_from_checkpoint(const Checkpoint& ck) {
  if (!ck.extra.contains("arch"))
    throw ValidationError("checkpoint has no texture architecture metadata");
  return texnet::TexArch::from_json(ck.extra.at("arch"));
}

template <typename Log>
inline void write_epoch_csv(const std::string& path, const Log& log,
                            bool append) {
  std::ofstream f(path, append ? std::ios::app : std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path);
  if (!append) f << "epoch,train_loss,val_loss,lr\n";
  f.precision(17);
  for (const auto& e : log)
    f << e.epoch << "," << e.train_loss << "," << e.val_loss << "," << e.lr
      << "\n";
}

// ---- commands ---------------------------------------------------------------

inline nlohmann::json cmd_gen_data(const ExperimentConfig& cfg,
                                   std::optional<std::uint64_t> seed) {
  ensure_run_layout(cfg);
  RunLock lock(cfg.run_dir());
  Stopwatch watch;
  synth::DatasetConfig dc = cfg.dataset;
  if (seed) dc.seed = *seed;
  synth::Dataset ds;
  try {
    ds = synth::generate_dataset(dc);
  } catch (const std::invalid_argument& e) {
    throw ValidationError(e.what());
  }
  ExperimentRecord rec;
  rec.command = "gen-data";
  rec.seed = dc.seed;
  rec.artifacts = {dc.out_dir + "/manifest.json"};
  rec.wall_seconds = watch.seconds();
  rec.write(cfg);
  return {{"views", ds.config.textures * (ds.config.total_poses() *
                                              ds.config.known_cameras() +
                                          ds.config.test_poses *
                                              ds.config.novel_cameras)},
          {"occlusions", ds.occlusions.size()},
          {"out_dir", dc.out_dir}};
}

inline nlohmann::json cmd_train_geom(const ExperimentConfig& cfg,
                                     std::optional<std::uint64_t> seed,
                                     bool resume = false) {
  ensure_run_layout(cfg);
  RunLock lock(cfg.run_dir());
  Stopwatch watch;
  synth::Dataset ds = open_dataset(cfg);
  geomnet::TrainConfig tc = cfg.train_geom;
  if (seed) tc.seed = *seed;

  ParamSet warm;
  int epoch_offset = 0;
  if (resume) {
    Checkpoint prev = open_checkpoint(geom_ckpt_path(cfg), "train-geom");
    warm = prev.params;
    epoch_offset = prev.extra.value("epochs_done", 0);
  }

  geomnet::TrainResult res;
  try {
    res = geomnet::train_geometry(ds, cfg.model, tc, resume ? &warm : nullptr);
  } catch (const std::runtime_error& e) {
    throw NumericalFailure(e.what());
  }
  for (auto& e : res.log) e.epoch += epoch_offset;

  Checkpoint ck;
  ck.config = cfg.model;
  ck.extra = {{"stage", "geometry"},
              {"epochs_done", epoch_offset + tc.epochs},
              {"best_epoch", res.best_epoch + epoch_offset},
              {"best_val", res.best_val},
              {"seed", tc.seed}};
  ck.params = res.best_params;
  ck.save(geom_ckpt_path(cfg));
  write_epoch_csv(cfg.run_dir() + "/logs/train_geom.csv", res.log, resume);

  ExperimentRecord rec;
  rec.command = "train-geom";
  rec.seed = tc.seed;
  rec.artifacts = {geom_ckpt_path(cfg), cfg.run_dir() + "/logs/train_geom.csv"};
  rec.wall_seconds = watch.seconds();
  rec.write(cfg);
  return {{"best_epoch", res.best_epoch + epoch_offset},
          {"best_val", res.best_val},
          {"checkpoint", geom_ckpt_path(cfg)}};
}

inline nlohmann::json cmd_train_tex(const ExperimentConfig& cfg,
                                    std::optional<std::uint64_t> seed,
                                    bool resume = false) {
  ensure_run_layout(cfg);
  RunLock lock(cfg.run_dir());
  Stopwatch watch;
  synth::Dataset ds = open_dataset(cfg);
  Checkpoint geom = open_checkpoint(geom_ckpt_path(cfg), "train-geom");

  texnet::TexTrainConfig tc = cfg.train_tex;
  if (seed) tc.seed = *seed;
  texnet::TexArch arch;
  arch.input_w = cfg.model.image_w;
  arch.input_h = cfg.model.image_h;
  arch.variant = tc.variant;

  ParamSet warm;
  int epoch_offset = 0;
  std::string ckpt = tex_ckpt_path(cfg, tc.variant);
  if (resume) {
    Checkpoint prev = open_checkpoint(ckpt, "train-tex");
    warm = prev.params;
    epoch_offset = prev.extra.value("epochs_done", 0);
    arch = arch_from_checkpoint(prev);
  }

  texnet::TexTrainResult res;
  try {
    res = texnet::train_texture(ds, cfg.model, geom.params, arch, tc,
                                resume ? &warm : nullptr);
  } catch (const std::runtime_error& e) {
    throw NumericalFailure(e.what());
  }
  for (auto& e : res.log) e.epoch += epoch_offset;

  Checkpoint ck;
  ck.config = cfg.model;
  ck.extra = {{"stage", "texture"},
              {"arch", arch.to_json()},
              {"epochs_done", epoch_offset + tc.epochs},
              {"best_epoch", res.best_epoch + epoch_offset},
              {"best_val", res.best_val},
              {"geometry_hash", geom.params.hash_group("geom.")},
              {"seed", tc.seed}};
  ck.params = res.best_params;
  ck.save(ckpt);
  std::string csv = cfg.run_dir() + "/logs/train_tex_" +
                    texnet::variant_name(tc.variant) + ".csv";
  write_epoch_csv(csv, res.log, resume);

  ExperimentRecord rec;
  rec.command = "train-tex";
  rec.seed = tc.seed;
  rec.artifacts = {ckpt, csv};
  rec.wall_seconds = watch.seconds();
  rec.write(cfg);
  return {{"best_epoch", res.best_epoch + epoch_offset},
          {"best_val", res.best_val},
          {"checkpoint", ckpt}};
}

inline nlohmann::json cmd_eval_geom(const ExperimentConfig& cfg) {
  ensure_run_layout(cfg);
  RunLock lock(cfg.run_dir());
  synth::Dataset ds = open_dataset(cfg);
  Checkpoint geom = open_checkpoint(geom_ckpt_path(cfg), "train-geom");
  geomnet::GeometryMetrics m =
      geomnet::eval_geometry(geom.params, geom.config, ds, ds.test_split);
  nlohmann::json j{{"nnopcs_mse", m.nnopcs_mse},
                   {"nnopcs_mse_masked", m.nnopcs_mse_masked},
                   {"depth_mae", m.depth_mae},
                   {"sil_iou", m.sil_iou},
                   {"views", m.views},
                   {"config_hash", geom.params.hash()}};
  write_json(cfg.run_dir() + "/metrics/geom.json", j);
  return j;
}

inline nlohmann::json cmd_eval_psnr(const ExperimentConfig& cfg) {
  ensure_run_layout(cfg);
  RunLock lock(cfg.run_dir());
  synth::Dataset ds = open_dataset(cfg);
  Checkpoint tex =
      open_checkpoint(tex_ckpt_path(cfg, cfg.train_tex.variant), "train-tex");
  texnet::TexArch arch = arch_from_checkpoint(tex);
  std::vector<int> known;
  for (int c = 0; c < ds.config.known_cameras(); ++c) known.push_back(c);
  texnet::PsnrReport rep =
      texnet::eval_psnr(tex.params, tex.config, arch, ds, ds.test_split, known);
  nlohmann::json j{{"variant", texnet::variant_name(arch.variant)},
                   {"psnr_masked", rep.masked},
                   {"psnr_full_frame", rep.full_frame},
                   {"mode", cfg.psnr_mode},
                   {"psnr", cfg.psnr_mode == "masked" ? rep.masked
                                                      : rep.full_frame},
                   {"views", rep.views},
                   {"config_hash", tex.params.hash()}};
  write_json(cfg.run_dir() + "/metrics/psnr_" +
                 texnet::variant_name(arch.variant) + ".json",
             j);
  return j;
}

/// Clean embedding sets used by reid/occlusion evaluation: centroids come
/// from train poses, accuracy from held-out test poses; both use the
/// deployment path (predicted geometry).
struct ReidSets {
  reid::EmbeddingSet train, test_known, test_novel;
};

inline ReidSets build_reid_sets(const synth::Dataset& ds, const Checkpoint& tex,
                                const texnet::TexArch& arch,
                                long long sample_seed = -1) {
  std::vector<int> known, novel;
  for (int c = 0; c < ds.config.known_cameras(); ++c) known.push_back(c);
  for (int c = ds.config.known_cameras(); c < ds.config.total_cameras(); ++c)
    novel.push_back(c);
  ReidSets s;
  s.train = reid::extract_embeddings(tex.params, tex.config, arch, ds,
                                     ds.train_split, known,
                                     /*use_predicted_geometry=*/true, "clean",
                                     sample_seed);
  s.test_known = reid::extract_embeddings(tex.params, tex.config, arch, ds,
                                          ds.test_split, known, true, "clean",
                                          sample_seed);
  s.test_novel = reid::extract_embeddings(tex.params, tex.config, arch, ds,
                                          ds.test_split, novel, true,
                                          "novel-view", sample_seed);
  return s;
}

inline nlohmann::json cmd_embed(const ExperimentConfig& cfg,
                                bool sample = false,
                                std::uint64_t sample_seed = 0) {
  ensure_run_layout(cfg);
  RunLock lock(cfg.run_dir());
  synth::Dataset ds = open_dataset(cfg);
  Checkpoint tex =
      open_checkpoint(tex_ckpt_path(cfg, cfg.train_tex.variant), "train-tex");
  texnet::TexArch arch = arch_from_checkpoint(tex);
  ReidSets s = build_reid_sets(ds, tex, arch,
                               sample ? static_cast<long long>(sample_seed)
                                      : -1);
  std::string base = cfg.run_dir() + "/metrics/embeddings_";
  reid::write_embeddings(s.train, base + "train.jsonl");
  reid::write_embeddings(s.test_known, base + "test_known.jsonl");
  reid::write_embeddings(s.test_novel, base + "test_novel.jsonl");
  return {{"train", s.train.records.size()},
          {"test_known", s.test_known.records.size()},
          {"test_novel", s.test_novel.records.size()}};
}

inline nlohmann::json cmd_eval_reid(const ExperimentConfig& cfg,
                                    std::uint64_t tsne_seed = 17) {
  ensure_run_layout(cfg);
  RunLock lock(cfg.run_dir());
  synth::Dataset ds = open_dataset(cfg);
  Checkpoint tex =
      open_checkpoint(tex_ckpt_path(cfg, cfg.train_tex.variant), "train-tex");
  texnet::TexArch arch = arch_from_checkpoint(tex);
  ReidSets s = build_reid_sets(ds, tex, arch);

  reid::ReidReport known = reid::nearest_centroid_report(s.train, s.test_known);
  reid::ReidReport novel = reid::nearest_centroid_report(s.train, s.test_novel);

  // Layout of all clean + novel test codes for plotting.
  std::vector<double> pts;
  std::vector<int> labels;
  std::size_t dz = s.train.records.front().code.size();
  auto push_set = [&](const reid::EmbeddingSet& set) {
    for (const auto& r : set.records) {
      pts.insert(pts.end(), r.code.begin(), r.code.end());
      labels.push_back(r.t);
    }
  };
  push_set(s.test_known);
  push_set(s.test_novel);
  reid::TsneConfig tsc;
  tsc.seed = tsne_seed;
  std::size_t npts = labels.size();
  tsc.perplexity = std::min(30.0, (static_cast<double>(npts) - 1.0) / 3.5);
  std::vector<double> layout = reid::tsne_project(pts, npts, dz, tsc);

  std::vector<float> layout_f(layout.begin(), layout.end());
  io::write_f32(cfg.run_dir() + "/metrics/tsne_layout.f32", layout_f,
                {npts, 2}, "tsne layout (x,y) per embedding");
  nlohmann::json label_j = labels;
  write_json(cfg.run_dir() + "/metrics/tsne_labels.json", label_j);

  double bw = reid::scott_bandwidth(layout);
  nlohmann::json kde_meta = nlohmann::json::array();
  for (int t = 0; t < ds.config.textures; ++t) {
    std::vector<double> sub;
    for (std::size_t i = 0; i < npts; ++i)
      if (labels[i] == t) {
        sub.push_back(layout[i * 2]);
        sub.push_back(layout[i * 2 + 1]);
      }
    if (sub.empty()) continue;
    reid::KdeGrid g = reid::kde_grid(sub, bw, 64);
    std::vector<float> gf(g.density.begin(), g.density.end());
    std::string p = cfg.run_dir() + "/metrics/kde_t" + std::to_string(t) + ".f32";
    io::write_f32(p, gf, {g.ny, g.nx}, "kde density grid");
    kde_meta.push_back({{"texture", t},
                        {"path", p},
                        {"x0", g.x0},
                        {"y0", g.y0},
                        {"dx", g.dx},
                        {"dy", g.dy},
                        {"integral", g.integral()}});
  }

  nlohmann::json conf = nlohmann::json::array();
  for (const auto& [key, count] : known.confusion)
    conf.push_back({{"true", key.first}, {"pred", key.second}, {"count", count}});
  nlohmann::json j{{"accuracy_known", known.accuracy},
                   {"accuracy_novel", novel.accuracy},
                   {"confusion_known", conf},
                   {"kde", kde_meta},
                   {"tsne_bandwidth", bw},
                   {"config_hash", tex.params.hash()}};
  write_json(cfg.run_dir() + "/metrics/reid.json", j);
  return j;
}

inline nlohmann::json cmd_eval_occlusion(const ExperimentConfig& cfg) {
  ensure_run_layout(cfg);
  RunLock lock(cfg.run_dir());
  synth::Dataset ds = open_dataset(cfg);
  Checkpoint tex =
      open_checkpoint(tex_ckpt_path(cfg, cfg.train_tex.variant), "train-tex");
  texnet::TexArch arch = arch_from_checkpoint(tex);
  if (ds.occlusions.empty())
    throw MissingPrereq("dataset has no occlusion instances");
  ReidSets s = build_reid_sets(ds, tex, arch);

  auto complete = reid::occlusion_eval(tex.params, tex.config, arch, ds,
                                       s.train, reid::OcclusionMode::complete_mask);
  auto occluded = reid::occlusion_eval(tex.params, tex.config, arch, ds,
                                       s.train, reid::OcclusionMode::occluded_mask);
  auto detail_of = [](const reid::OcclusionReport& r) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& e : r.results)
      a.push_back({{"instance", e.instance},
                   {"true", e.true_texture},
                   {"pred", e.predicted},
                   {"correct", e.correct}});
    return a;
  };
  nlohmann::json j{{"accuracy_complete_mask", complete.accuracy},
                   {"accuracy_occluded_mask", occluded.accuracy},
                   {"complete_mask", detail_of(complete)},
                   {"occluded_mask", detail_of(occluded)},
                   {"config_hash", tex.params.hash()}};
  write_json(cfg.run_dir() + "/metrics/occlusion.json", j);
  return j;
}

inline nlohmann::json cmd_bench(const ExperimentConfig& cfg, int n_frames = 10) {
  ensure_run_layout(cfg);
  RunLock lock(cfg.run_dir());
  auto report_of = [](const reid::BenchReport& r) {
    return nlohmann::json{{"w", r.w},
                          {"h", r.h},
                          {"frames", r.frames},
                          {"render_s", r.render_s},
                          {"encode_s", r.encode_s},
                          {"total_s", r.total_s},
                          {"fps", r.fps}};
  };
  reid::BenchReport base = reid::bench_embedding_throughput(
      cfg.model, cfg.model.image_w, cfg.model.image_h, n_frames);
  reid::BenchReport big = reid::bench_embedding_throughput(
      cfg.model, cfg.model.image_w * 2, cfg.model.image_h * 2, n_frames);
  nlohmann::json j{{"base", report_of(base)},
                   {"double_resolution", report_of(big)},
                   {"reference_fps_fullscale", 0.5}};
  write_json(cfg.run_dir() + "/metrics/bench.json", j);
  return j;
}

// ---- render command ----------------------------------------------------------

inline io::Image8 frame_to_image(const std::vector<float>& rgb, int w, int h) {
  io::Image8 img;
  img.w = w;
  img.h = h;
  img.channels = 3;
  img.pixels.resize(rgb.size());
  for (std::size_t i = 0; i < rgb.size(); ++i)
    img.pixels[i] = static_cast<std::uint8_t>(
        std::lround(std::clamp(rgb[i], 0.0f, 1.0f) * 255.0f));
  return img;
}

inline nlohmann::json cmd_render(const ExperimentConfig& cfg, int pose_id,
                                 int camera_id, int texture_id,
                                 const std::string& latent_file = "",
                                 const std::string& save_latent = "") {
  ensure_run_layout(cfg);
  RunLock lock(cfg.run_dir());
  synth::Dataset ds = open_dataset(cfg);
  Checkpoint tex =
      open_checkpoint(tex_ckpt_path(cfg, cfg.train_tex.variant), "train-tex");
  texnet::TexArch arch = arch_from_checkpoint(tex);
  const ModelConfig& mc = tex.config;
  if (pose_id < 0 || pose_id >= ds.config.total_poses())
    throw ValidationError("render: unknown pose id");
  if (camera_id < 0 || camera_id >= ds.config.total_cameras())
    throw ValidationError("render: unknown camera id");

  // Texture latent: decoded from a saved file, or encoded from a reference
  // view of the requested texture id.
  Tensor z({1, static_cast<std::size_t>(mc.d_z)});
  if (!latent_file.empty()) {
    std::vector<float> loaded = io::read_f32(latent_file);
    if (loaded.size() != z.size())
      throw ValidationError("render: latent width mismatch");
    for (std::size_t i = 0; i < loaded.size(); ++i) z[i] = loaded[i];
  } else {
    if (texture_id < 0 || texture_id >= ds.config.textures)
      throw ValidationError("render: unknown texture id");
    synth::ViewRecord ref = ds.load_view(texture_id, ds.train_split.front(), 0);
    texnet::ViewCode code =
        texnet::embed_view(tex.params, mc, arch, ref.rgb, ref.nnopcs);
    z = code.mu;
  }
  if (!save_latent.empty()) {
    std::vector<float> zf(z.data.begin(), z.data.end());
    io::write_f32(save_latent, zf, z.shape, "texture latent code");
  }

  const auto& kp = ds.poses[pose_id].keypoints;
  const synth::Camera& cam = ds.cameras[camera_id];
  geomnet::GeometryFrame geo = geomnet::render_frame(
      tex.params, mc, kp, cam, mc.image_w, mc.image_h);
  texnet::ColorFrame col = texnet::render_color_frame(
      tex.params, mc, arch, kp, z, cam, mc.image_w, mc.image_h);

  std::size_t hw = static_cast<std::size_t>(mc.image_w) * mc.image_h;
  std::vector<float> rgb(hw * 3, 0.0f), nn(hw * 3, 0.0f), sil(hw * 3, 0.0f);
  double dmin = 1e300, dmax = -1e300;
  for (std::size_t p = 0; p < hw; ++p)
    if (geo.sil_logits[p] > 0.0) {
      dmin = std::min(dmin, geo.depth[p]);
      dmax = std::max(dmax, geo.depth[p]);
    }
  std::vector<float> depth(hw * 3, 0.0f);
  for (std::size_t p = 0; p < hw; ++p) {
    bool in = geo.sil_logits[p] > 0.0;
    for (int c = 0; c < 3; ++c) {
      rgb[p * 3 + c] = in ? col.rgb[p * 3 + c] : 0.0f;
      nn[p * 3 + c] = in ? static_cast<float>(geo.nnopcs[p * 3 + c]) : 0.0f;
      sil[p * 3 + c] = in ? 1.0f : 0.0f;
      if (in && dmax > dmin)
        depth[p * 3 + c] =
            static_cast<float>((geo.depth[p] - dmin) / (dmax - dmin));
    }
  }
  std::string stem = cfg.run_dir() + "/renders/p" + std::to_string(pose_id) +
                     "_c" + std::to_string(camera_id);
  io::write_png(stem + "_rgb.png", frame_to_image(rgb, mc.image_w, mc.image_h));
  io::write_png(stem + "_nnopcs.png", frame_to_image(nn, mc.image_w, mc.image_h));
  io::write_png(stem + "_sil.png", frame_to_image(sil, mc.image_w, mc.image_h));
  io::write_png(stem + "_depth.png",
                frame_to_image(depth, mc.image_w, mc.image_h));
  return {{"stem", stem}};
}

}  // namespace texpup::cli
