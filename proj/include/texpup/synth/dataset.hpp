#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "texpup/core/rng.hpp"
#include "texpup/io/f32.hpp"
#include "texpup/io/png.hpp"
#include "texpup/synth/raycast.hpp"
#include "texpup/synth/rig.hpp"
#include "texpup/synth/skeleton.hpp"
#include "texpup/synth/texture_spec.hpp"

namespace texpup::synth {

namespace fs = std::filesystem;

/// One rendered view with its ground truth. RGB and the coordinate map are
/// exactly zero outside the silhouette; depth is zero outside, positive
/// inside (camera-space z, scene units).
struct ViewRecord {
  int w = 0, h = 0;
  int pose_id = 0, camera_id = 0, texture_id = 0;
  Camera camera;
  std::vector<float> rgb;      // h*w*3 in [0,1]
  std::vector<std::uint8_t> mask;  // h*w in {0,1}
  std::vector<float> depth;    // h*w
  std::vector<float> nnopcs;   // h*w*3 in [0,1]
  // Occlusion instances only: the subject's full (unoccluded) projection.
  std::vector<std::uint8_t> complete_mask;

  std::size_t px(int y, int x) const {
    return static_cast<std::size_t>(y) * w + x;
  }
};

/// Renders one view of a creature set with exact per-pixel ground truth.
/// `subject` selects which creature contributes to `mask`; -1 means every
/// creature (the standard single-creature case).
inline ViewRecord raycast_scene(const std::vector<CreatureInstance>& creatures,
                                const Camera& camera, const Vector3d& bbox_lo,
                                const Vector3d& bbox_hi, int w, int h,
                                int subject = -1) {
  if (w < 8 || h < 8) throw std::invalid_argument("raycast: resolution >= 8x8");
  camera.validate();
  ViewRecord v;
  v.w = w;
  v.h = h;
  v.camera = camera;
  v.rgb.assign(static_cast<std::size_t>(w) * h * 3, 0.0f);
  v.mask.assign(static_cast<std::size_t>(w) * h, 0);
  v.depth.assign(static_cast<std::size_t>(w) * h, 0.0f);
  v.nnopcs.assign(static_cast<std::size_t>(w) * h * 3, 0.0f);

  Vector3d origin = camera.center();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      Vector3d dir = camera.ray_dir(x + 0.5, y + 0.5);
      RayHit hit = cast_ray(origin, dir, creatures);
      if (!ray_hits(hit)) continue;
      if (subject >= 0 && hit.creature != subject) continue;
      const CreatureInstance& cr = creatures[hit.creature];
      Vector3d world_pt = origin + hit.t * dir;
      Vector3d u = nnopcs_of(hit.neutral_point, bbox_lo, bbox_hi);
      Vector3d col = cr.texture->color(u) * lambert_term(hit.world_normal);
      std::size_t p = v.px(y, x);
      v.mask[p] = 1;
      v.depth[p] = static_cast<float>(camera.to_camera(world_pt).z());
      for (int c = 0; c < 3; ++c) {
        v.nnopcs[p * 3 + c] = static_cast<float>(u[c]);
        v.rgb[p * 3 + c] =
            static_cast<float>(std::clamp(col[c], 0.0, 1.0));
      }
    }
  }
  return v;
}

/// Single-creature view (the standard dataset sample).
inline ViewRecord raycast_view(const Skeleton& skel, const PoseSample& pose,
                               const Camera& camera, const TextureSpec& tex,
                               int w, int h) {
  CreatureInstance cr;
  cr.skeleton = &skel;
  cr.joints = joint_transforms(skel, pose.rotations);
  cr.texture = &tex;
  Vector3d lo, hi;
  skel.neutral_bbox(lo, hi);
  return raycast_scene({cr}, camera, lo, hi, w, h);
}

// ---------------------------------------------------------------------------
// Dataset generation

struct DatasetConfig {
  std::string out_dir;
  std::uint64_t seed = 7;
  int train_poses = 64, val_poses = 8, test_poses = 16;
  int rings = 2, per_ring = 4;       // known cameras = rings * per_ring
  int novel_cameras = 4;             // extra ring, held out of training
  double cam_radius = 4.2;
  std::vector<double> ring_heights = {1.0, 2.2};
  double novel_height = 1.6;
  int textures = 4;                  // includes one near-duplicate pair
  int spot_count = 9;
  double spot_radius = 0.16;
  int width = 96, height = 72;
  int occlusion_instances = 12;
  int occlusion_cameras = 2;
  double joint_limit = 0.45;

  int total_poses() const { return train_poses + val_poses + test_poses; }
  int known_cameras() const { return rings * per_ring; }
  int total_cameras() const { return known_cameras() + novel_cameras; }

  nlohmann::json to_json() const;
  static DatasetConfig from_json(const nlohmann::json& j);
};

inline nlohmann::json DatasetConfig::to_json() const {
  return {{"out_dir", out_dir},
          {"seed", seed},
          {"train_poses", train_poses},
          {"val_poses", val_poses},
          {"test_poses", test_poses},
          {"rings", rings},
          {"per_ring", per_ring},
          {"novel_cameras", novel_cameras},
          {"cam_radius", cam_radius},
          {"ring_heights", ring_heights},
          {"novel_height", novel_height},
          {"textures", textures},
          {"spot_count", spot_count},
          {"spot_radius", spot_radius},
          {"width", width},
          {"height", height},
          {"occlusion_instances", occlusion_instances},
          {"occlusion_cameras", occlusion_cameras},
          {"joint_limit", joint_limit}};
}

inline DatasetConfig DatasetConfig::from_json(const nlohmann::json& j) {
  DatasetConfig c;
  c.out_dir = j.value("out_dir", c.out_dir);
  c.seed = j.value("seed", c.seed);
  c.train_poses = j.value("train_poses", c.train_poses);
  c.val_poses = j.value("val_poses", c.val_poses);
  c.test_poses = j.value("test_poses", c.test_poses);
  c.rings = j.value("rings", c.rings);
  c.per_ring = j.value("per_ring", c.per_ring);
  c.novel_cameras = j.value("novel_cameras", c.novel_cameras);
  c.cam_radius = j.value("cam_radius", c.cam_radius);
  c.ring_heights = j.value("ring_heights", c.ring_heights);
  c.novel_height = j.value("novel_height", c.novel_height);
  c.textures = j.value("textures", c.textures);
  c.spot_count = j.value("spot_count", c.spot_count);
  c.spot_radius = j.value("spot_radius", c.spot_radius);
  c.width = j.value("width", c.width);
  c.height = j.value("height", c.height);
  c.occlusion_instances = j.value("occlusion_instances", c.occlusion_instances);
  c.occlusion_cameras = j.value("occlusion_cameras", c.occlusion_cameras);
  c.joint_limit = j.value("joint_limit", c.joint_limit);
  return c;
}

inline RigIntrinsics default_intrinsics(int w, int h) {
  double f = 1.05 * w;  // creature fills most of the frame at cam_radius
  return {f, f, w / 2.0, h / 2.0};
}

inline std::vector<Camera> build_rig(const DatasetConfig& cfg,
                                     const Vector3d& target) {
  RigIntrinsics intr = default_intrinsics(cfg.width, cfg.height);
  auto cams = sample_camera_rig(cfg.rings, cfg.per_ring, cfg.cam_radius,
                                cfg.ring_heights, intr, target);
  if (cfg.novel_cameras > 0) {
    // Held-out ring at a different height, offset in azimuth so no novel
    // camera coincides with a known one.
    auto novel = sample_camera_rig(1, cfg.novel_cameras, cfg.cam_radius,
                                   {cfg.novel_height}, intr, target,
                                   M_PI / (2.0 * cfg.per_ring));
    cams.insert(cams.end(), novel.begin(), novel.end());
  }
  return cams;
}

inline std::vector<TextureSpec> build_textures(const DatasetConfig& cfg) {
  std::vector<TextureSpec> specs;
  for (int t = 0; t + 1 < cfg.textures; ++t)
    specs.push_back(make_texture_spec(t, cfg.seed * 1000 + 17 * t + 3,
                                      cfg.spot_count, cfg.spot_radius));
  // Last texture is a near-duplicate of texture 1 (or 0 when T < 3).
  if (cfg.textures >= 1) {
    int src = cfg.textures >= 3 ? 1 : 0;
    if (cfg.textures == 1) {
      specs.push_back(make_texture_spec(0, cfg.seed * 1000 + 3, cfg.spot_count,
                                        cfg.spot_radius));
    } else {
      specs.push_back(make_near_duplicate(specs[src], cfg.textures - 1,
                                          cfg.seed * 1000 + 99));
    }
  }
  return specs;
}

inline std::vector<PoseSample> build_poses(const DatasetConfig& cfg,
                                           const Skeleton& skel) {
  std::vector<PoseSample> poses;
  for (int m = 0; m < cfg.total_poses(); ++m) {
    Rng rng = Rng(cfg.seed).fork(0x9000 + m);
    poses.push_back(sample_pose(skel, m, rng, cfg.joint_limit));
  }
  return poses;
}

inline std::string view_dir(const std::string& root, int t, int m) {
  return root + "/views/t" + std::to_string(t) + "/m" + std::to_string(m);
}
inline std::string view_stem(const std::string& root, int t, int m, int c) {
  return view_dir(root, t, m) + "/c" + std::to_string(c);
}

inline void write_view(const std::string& stem, const ViewRecord& v) {
  io::Image8 rgb{v.w, v.h, 3, {}};
  rgb.pixels.resize(static_cast<std::size_t>(v.w) * v.h * 3);
  for (std::size_t i = 0; i < rgb.pixels.size(); ++i)
    rgb.pixels[i] = static_cast<std::uint8_t>(
        std::lround(std::clamp(v.rgb[i], 0.0f, 1.0f) * 255.0f));
  io::Image8 mask{v.w, v.h, 1, {}};
  mask.pixels.resize(static_cast<std::size_t>(v.w) * v.h);
  for (std::size_t i = 0; i < mask.pixels.size(); ++i)
    mask.pixels[i] = v.mask[i] ? 255 : 0;

  io::write_png(stem + ".rgb.png", rgb);
  io::write_png(stem + ".mask.png", mask);
  io::write_f32(stem + ".depth.f32", v.depth,
                {static_cast<std::size_t>(v.h), static_cast<std::size_t>(v.w)},
                "depth");
  io::write_f32(stem + ".nnopcs.f32", v.nnopcs,
                {static_cast<std::size_t>(v.h), static_cast<std::size_t>(v.w), 3},
                "nnopcs");
  nlohmann::json meta = {{"pose", v.pose_id},
                         {"camera", v.camera_id},
                         {"texture", v.texture_id},
                         {"width", v.w},
                         {"height", v.h},
                         {"camera_model", v.camera.to_json()},
                         {"buffers",
                          {{"depth", {{"shape", {v.h, v.w}}, {"dtype", "f32le"}}},
                           {"nnopcs",
                            {{"shape", {v.h, v.w, 3}}, {"dtype", "f32le"}}}}}};
  if (!v.complete_mask.empty()) meta["has_complete_mask"] = true;
  std::ofstream mf(stem + ".meta.json", std::ios::trunc);
  mf << meta.dump(2) << "\n";
  if (!mf) throw std::runtime_error("dataset: meta write failed " + stem);
}

inline ViewRecord read_view(const std::string& stem) {
  std::ifstream mf(stem + ".meta.json");
  if (!mf) throw std::runtime_error("dataset: missing view " + stem);
  nlohmann::json meta = nlohmann::json::parse(mf);
  ViewRecord v;
  v.w = meta.at("width");
  v.h = meta.at("height");
  v.pose_id = meta.at("pose");
  v.camera_id = meta.at("camera");
  v.texture_id = meta.at("texture");
  v.camera = Camera::from_json(meta.at("camera_model"));

  io::Image8 rgb = io::read_png(stem + ".rgb.png");
  io::Image8 mask = io::read_png(stem + ".mask.png");
  if (rgb.w != v.w || rgb.h != v.h || mask.w != v.w)
    throw std::runtime_error("dataset: size mismatch in " + stem);
  v.rgb.resize(rgb.pixels.size());
  for (std::size_t i = 0; i < rgb.pixels.size(); ++i)
    v.rgb[i] = rgb.pixels[i] / 255.0f;
  v.mask.resize(mask.pixels.size());
  for (std::size_t i = 0; i < mask.pixels.size(); ++i)
    v.mask[i] = mask.pixels[i] >= 128 ? 1 : 0;
  v.depth = io::read_f32(stem + ".depth.f32");
  v.nnopcs = io::read_f32(stem + ".nnopcs.f32");
  if (fs::exists(stem + ".mask_complete.png")) {
    io::Image8 cm = io::read_png(stem + ".mask_complete.png");
    v.complete_mask.resize(cm.pixels.size());
    for (std::size_t i = 0; i < cm.pixels.size(); ++i)
      v.complete_mask[i] = cm.pixels[i] >= 128 ? 1 : 0;
  }
  return v;
}

struct OcclusionInstance {
  int index = 0;
  int camera_id = 0;
  int near_texture = 0, far_texture = 0;
  int near_pose = 0, far_pose = 0;
  bool overlapping = true;
  std::string stem;  // relative to dataset root
};

/// Occlusion pairs: the first texture's creature stands between the camera
/// and the last texture's creature. The far creature is the subject; its
/// occluded mask uses depth compositing and its complete mask comes from a
/// solo render.
inline std::vector<OcclusionInstance> make_occlusion_instances(
    const DatasetConfig& cfg, const Skeleton& skel,
    const std::vector<PoseSample>& poses, const std::vector<Camera>& cameras,
    const std::vector<TextureSpec>& textures) {
  if (cfg.occlusion_instances == 0) return {};
  if (cfg.textures < 2)
    throw std::invalid_argument("occlusions: need two texture ids");
  fs::create_directories(cfg.out_dir + "/occlusions");
  Vector3d lo, hi;
  skel.neutral_bbox(lo, hi);
  Vector3d centroid = 0.5 * (lo + hi);

  std::vector<OcclusionInstance> out;
  int near_tex = 0, far_tex = cfg.textures - 1;
  for (int i = 0; i < cfg.occlusion_instances; ++i) {
    Rng rng = Rng(cfg.seed).fork(0xacc0 + i);
    int cam_id = static_cast<int>(rng.below(
        std::min<std::uint64_t>(cfg.occlusion_cameras, cameras.size())));
    const Camera& cam = cameras[cam_id];
    int far_pose = static_cast<int>(rng.below(poses.size()));
    int near_pose = static_cast<int>(rng.below(poses.size()));

    CreatureInstance far;
    far.skeleton = &skel;
    far.joints = joint_transforms(skel, poses[far_pose].rotations);
    far.texture = &textures[far_tex];

    // Place the near creature part-way along the camera axis with lateral
    // jitter so it typically covers part of the far one.
    Vector3d toward = (cam.center() - centroid).normalized();
    Vector3d lateral = toward.cross(Vector3d::UnitZ()).normalized();
    CreatureInstance near = far;
    near.texture = &textures[near_tex];
    near.joints = joint_transforms(skel, poses[near_pose].rotations);
    near.world = Isometry3d::Identity();
    near.world.translate(Vector3d(0.45 * cfg.cam_radius * toward +
                                  rng.uniform(-0.9, 0.9) * lateral));

    ViewRecord composite = raycast_scene({far, near}, cam, lo, hi, cfg.width,
                                         cfg.height, /*subject=*/-1);
    ViewRecord occluded = raycast_scene({far, near}, cam, lo, hi, cfg.width,
                                        cfg.height, /*subject=*/0);
    ViewRecord solo = raycast_scene({far}, cam, lo, hi, cfg.width, cfg.height);

    ViewRecord rec = composite;  // RGB/NNOPCS/depth of the whole scene
    rec.mask = occluded.mask;    // visible pixels of the far creature
    rec.complete_mask = solo.mask;
    rec.pose_id = far_pose;
    rec.camera_id = cam_id;
    rec.texture_id = far_tex;

    OcclusionInstance inst;
    inst.index = i;
    inst.camera_id = cam_id;
    inst.near_texture = near_tex;
    inst.far_texture = far_tex;
    inst.near_pose = near_pose;
    inst.far_pose = far_pose;
    inst.stem = "occlusions/i" + std::to_string(i);

    std::size_t occ_count = 0, full_count = 0;
    for (std::size_t p = 0; p < rec.mask.size(); ++p) {
      occ_count += rec.mask[p];
      full_count += rec.complete_mask[p];
    }
    inst.overlapping = occ_count < full_count;

    std::string stem = cfg.out_dir + "/" + inst.stem;
    write_view(stem, rec);
    io::Image8 cm{cfg.width, cfg.height, 1, {}};
    cm.pixels.resize(rec.complete_mask.size());
    for (std::size_t p = 0; p < cm.pixels.size(); ++p)
      cm.pixels[p] = rec.complete_mask[p] ? 255 : 0;
    io::write_png(stem + ".mask_complete.png", cm);
    out.push_back(inst);
  }
  return out;
}

/// Generated dataset handle: manifest plus loaded pose/camera/texture tables.
struct Dataset {
  DatasetConfig config;
  Skeleton skeleton;
  std::vector<PoseSample> poses;
  std::vector<Camera> cameras;
  std::vector<TextureSpec> textures;
  Vector3d bbox_lo, bbox_hi;
  std::vector<int> train_split, val_split, test_split;
  std::vector<OcclusionInstance> occlusions;
  std::string root;

  ViewRecord load_view(int t, int m, int c) const {
    return read_view(view_stem(root, t, m, c));
  }
  ViewRecord load_occlusion(int i) const {
    return read_view(root + "/" + occlusions.at(i).stem);
  }
};

inline void write_manifest(const Dataset& ds, const std::string& path);
inline Dataset load_dataset(const std::string& root);

/// Renders and writes the full dataset. Deterministic for a fixed seed.
/// Known cameras get every pose; novel cameras only test poses.
inline Dataset generate_dataset(const DatasetConfig& cfg) {
  if (cfg.out_dir.empty()) throw std::invalid_argument("dataset: out_dir");
  Dataset ds;
  ds.config = cfg;
  ds.root = cfg.out_dir;
  ds.skeleton = make_quadruped();
  ds.skeleton.neutral_bbox(ds.bbox_lo, ds.bbox_hi);
  ds.poses = build_poses(cfg, ds.skeleton);
  ds.cameras = build_rig(cfg, 0.5 * (ds.bbox_lo + ds.bbox_hi));
  ds.textures = build_textures(cfg);
  for (int m = 0; m < cfg.train_poses; ++m) ds.train_split.push_back(m);
  for (int m = 0; m < cfg.val_poses; ++m)
    ds.val_split.push_back(cfg.train_poses + m);
  for (int m = 0; m < cfg.test_poses; ++m)
    ds.test_split.push_back(cfg.train_poses + cfg.val_poses + m);

  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec) throw std::runtime_error("dataset: cannot create " + cfg.out_dir);

  for (int t = 0; t < cfg.textures; ++t) {
    for (int m = 0; m < cfg.total_poses(); ++m) {
      fs::create_directories(view_dir(cfg.out_dir, t, m));
      bool test_pose = m >= cfg.train_poses + cfg.val_poses;
      for (int c = 0; c < cfg.total_cameras(); ++c) {
        bool novel = c >= cfg.known_cameras();
        if (novel && !test_pose) continue;
        ViewRecord v = raycast_view(ds.skeleton, ds.poses[m], ds.cameras[c],
                                    ds.textures[t], cfg.width, cfg.height);
        v.pose_id = m;
        v.camera_id = c;
        v.texture_id = t;
        write_view(view_stem(cfg.out_dir, t, m, c), v);
      }
    }
  }

  ds.occlusions = make_occlusion_instances(cfg, ds.skeleton, ds.poses,
                                           ds.cameras, ds.textures);
  write_manifest(ds, cfg.out_dir + "/manifest.json");
  return ds;
}

inline void write_manifest(const Dataset& ds, const std::string& path) {
  nlohmann::json j;
  j["format_version"] = 1;
  // The root directory is implicit (load_dataset takes it as an argument);
  // keeping it out of the manifest makes same-seed generations byte-equal.
  nlohmann::json cfg_j = ds.config.to_json();
  cfg_j.erase("out_dir");
  j["config"] = cfg_j;
  j["bbox"] = {{"lo", {ds.bbox_lo.x(), ds.bbox_lo.y(), ds.bbox_lo.z()}},
               {"hi", {ds.bbox_hi.x(), ds.bbox_hi.y(), ds.bbox_hi.z()}}};
  j["splits"] = {{"train", ds.train_split},
                 {"val", ds.val_split},
                 {"test", ds.test_split}};
  auto& sk = j["skeleton"];
  for (std::size_t k = 0; k < ds.skeleton.joint_count(); ++k) {
    sk["neutral"].push_back({ds.skeleton.neutral[k].x(),
                             ds.skeleton.neutral[k].y(),
                             ds.skeleton.neutral[k].z()});
    sk["parent"].push_back(ds.skeleton.parent[k]);
    sk["radii"].push_back(ds.skeleton.radii[k]);
  }
  for (std::size_t c = 0; c < ds.cameras.size(); ++c) {
    nlohmann::json cj = ds.cameras[c].to_json();
    cj["id"] = c;
    cj["novel"] = c >= static_cast<std::size_t>(ds.config.known_cameras());
    j["cameras"].push_back(cj);
  }
  for (const auto& t : ds.textures) j["textures"].push_back(t.to_json());
  for (const auto& p : ds.poses) {
    nlohmann::json pj;
    pj["id"] = p.id;
    for (const auto& q : p.rotations)
      pj["rotations"].push_back({q.w(), q.x(), q.y(), q.z()});
    for (const auto& x : p.keypoints)
      pj["keypoints"].push_back({x.x(), x.y(), x.z()});
    j["poses"].push_back(pj);
  }
  for (const auto& o : ds.occlusions) {
    j["occlusions"].push_back({{"index", o.index},
                               {"camera", o.camera_id},
                               {"near_texture", o.near_texture},
                               {"far_texture", o.far_texture},
                               {"near_pose", o.near_pose},
                               {"far_pose", o.far_pose},
                               {"overlapping", o.overlapping},
                               {"stem", o.stem}});
  }
  std::ofstream f(path, std::ios::trunc);
  f << j.dump(2) << "\n";
  if (!f) throw std::runtime_error("dataset: manifest write failed " + path);
}

inline Dataset load_dataset(const std::string& root) {
  std::ifstream f(root + "/manifest.json");
  if (!f) throw std::runtime_error("dataset: missing manifest in " + root);
  nlohmann::json j = nlohmann::json::parse(f);
  Dataset ds;
  ds.root = root;
  ds.config = DatasetConfig::from_json(j.at("config"));
  ds.config.out_dir = root;
  for (int k = 0; k < 3; ++k) {
    ds.bbox_lo[k] = j.at("bbox").at("lo")[k];
    ds.bbox_hi[k] = j.at("bbox").at("hi")[k];
  }
  ds.train_split = j.at("splits").at("train").get<std::vector<int>>();
  ds.val_split = j.at("splits").at("val").get<std::vector<int>>();
  ds.test_split = j.at("splits").at("test").get<std::vector<int>>();
  const auto& sk = j.at("skeleton");
  for (std::size_t k = 0; k < sk.at("parent").size(); ++k) {
    ds.skeleton.neutral.emplace_back(sk["neutral"][k][0], sk["neutral"][k][1],
                                     sk["neutral"][k][2]);
    ds.skeleton.parent.push_back(sk["parent"][k]);
    ds.skeleton.radii.push_back(sk["radii"][k]);
  }
  ds.skeleton.validate();
  for (const auto& cj : j.at("cameras")) ds.cameras.push_back(Camera::from_json(cj));
  for (const auto& tj : j.at("textures"))
    ds.textures.push_back(TextureSpec::from_json(tj));
  for (const auto& pj : j.at("poses")) {
    PoseSample p;
    p.id = pj.at("id");
    for (const auto& q : pj.at("rotations"))
      p.rotations.emplace_back(q[0].get<double>(), q[1].get<double>(),
                               q[2].get<double>(), q[3].get<double>());
    for (const auto& x : pj.at("keypoints"))
      p.keypoints.emplace_back(x[0].get<double>(), x[1].get<double>(),
                               x[2].get<double>());
    ds.poses.push_back(std::move(p));
  }
  if (j.contains("occlusions"))
    for (const auto& oj : j["occlusions"]) {
      OcclusionInstance o;
      o.index = oj.at("index");
      o.camera_id = oj.at("camera");
      o.near_texture = oj.at("near_texture");
      o.far_texture = oj.at("far_texture");
      o.near_pose = oj.at("near_pose");
      o.far_pose = oj.at("far_pose");
      o.overlapping = oj.at("overlapping");
      o.stem = oj.at("stem");
      ds.occlusions.push_back(std::move(o));
    }
  return ds;
}

}  // namespace texpup::synth
