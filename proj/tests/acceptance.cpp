// Acceptance gate: one PASS/FAIL line per criterion. Builds the desk-scale
// dataset once, trains the geometry stage once and the texture stage three
// times (one per variant), and reuses those artifacts across criteria.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "texpup/core/gradcheck.hpp"
#include "texpup/geomnet/train.hpp"
#include "texpup/reid/embed.hpp"
#include "texpup/texnet/train.hpp"

using namespace texpup;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double cpu_s() {
  return static_cast<double>(std::clock()) / CLOCKS_PER_SEC;
}

double now_s() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

// ---- shared artifacts -------------------------------------------------------

struct Shared {
  synth::Dataset ds;
  ModelConfig model;        // desk defaults
  ParamSet geom_params;     // best geometry checkpoint
  double geom_mse = 0.0, geom_mse_masked = 0.0, geom_iou = 0.0,
         geom_minutes = 0.0;
  bool geom_ready = false;

  std::map<texnet::Variant, ParamSet> tex_params;
  std::map<texnet::Variant, double> tex_psnr;
  texnet::TexArch arch;
};

Shared& shared() {
  static Shared s;
  return s;
}

void build_dataset() {
  Shared& s = shared();
  if (!s.ds.poses.empty()) return;
  synth::DatasetConfig cfg;  // desk-scale defaults
  cfg.out_dir = "acceptance_data";
  if (fs::exists(cfg.out_dir + "/manifest.json")) {
    s.ds = synth::load_dataset(cfg.out_dir);
  } else {
    s.ds = synth::generate_dataset(cfg);
  }
  s.model = ModelConfig{};  // matches the dataset resolution and K
  s.arch.input_w = s.model.image_w;
  s.arch.input_h = s.model.image_h;
}

void train_geometry_once() {
  Shared& s = shared();
  if (s.geom_ready) return;
  build_dataset();
  double t0 = cpu_s();  // budget is CPU time, not wall time
  geomnet::TrainConfig tc;
  auto res = geomnet::train_geometry(s.ds, s.model, tc);
  s.geom_params = res.best_params;
  s.geom_minutes = (cpu_s() - t0) / 60.0;
  auto m = geomnet::eval_geometry(s.geom_params, s.model, s.ds, s.ds.test_split);
  s.geom_mse = m.nnopcs_mse;
  s.geom_mse_masked = m.nnopcs_mse_masked;
  s.geom_iou = m.sil_iou;
  s.geom_ready = true;
}

const ParamSet& texture_run(texnet::Variant v) {
  Shared& s = shared();
  auto it = s.tex_params.find(v);
  if (it != s.tex_params.end()) return it->second;
  train_geometry_once();
  texnet::TexTrainConfig tc;
  tc.variant = v;
  texnet::TexArch arch = s.arch;
  arch.variant = v;
  auto res = texnet::train_texture(s.ds, s.model, s.geom_params, arch, tc);
  texnet::PsnrReport rep = texnet::eval_psnr(res.best_params, s.model, arch,
                                             s.ds, s.ds.test_split,
                                             [&] {
                                               std::vector<int> c;
                                               for (int i = 0;
                                                    i < s.ds.config.known_cameras();
                                                    ++i)
                                                 c.push_back(i);
                                               return c;
                                             }());
  s.tex_psnr[v] = rep.masked;
  return s.tex_params.emplace(v, std::move(res.best_params)).first->second;
}

// ---- criterion 1: loss-term oracle equivalence --------------------------------

Outcome criterion1() {
  ParamSet empty;
  Rng rng(101);
  double worst = 0.0;
  auto rel = [&](double a, double b) {
    double r = std::fabs(a - b) / std::max(1e-300, std::fabs(a) + std::fabs(b));
    worst = std::max(worst, r);
    return r;
  };

  // Sum-of-squares map loss vs a scalar double loop.
  std::size_t P = 37;
  Tensor gt({P, 3}), pr({P, 3});
  double oracle = 0.0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    gt[i] = rng.uniform(0, 1);
    pr[i] = rng.uniform(0, 1);
    oracle += (pr[i] - gt[i]) * (pr[i] - gt[i]);
  }
  Tape t1(&empty);
  if (rel(t1.val(geomnet::loss_map_sum(t1, t1.constant(pr), gt)).item(),
          oracle) > 1e-10)
    return {false, "map loss mismatch"};

  // Depth 2-norm vs sqrt of a scalar sum.
  Tensor gd({P, 1}), pd({P, 1});
  double ss = 0.0;
  for (std::size_t i = 0; i < P; ++i) {
    gd[i] = rng.normal();
    pd[i] = rng.normal();
    ss += (pd[i] - gd[i]) * (pd[i] - gd[i]);
  }
  Tape t2(&empty);
  if (rel(t2.val(geomnet::loss_depth_norm(t2, t2.constant(pd), gd)).item(),
          std::sqrt(ss)) > 1e-10)
    return {false, "depth norm mismatch"};

  // Silhouette BCE vs scalar sigmoid/log loop.
  Tensor lg({P, 1}), gm({P, 1});
  double bce = 0.0;
  for (std::size_t i = 0; i < P; ++i) {
    lg[i] = rng.uniform(-4, 4);
    gm[i] = rng.below(2);
    double p = 1.0 / (1.0 + std::exp(-lg[i]));
    bce += -(gm[i] * std::log(p) + (1.0 - gm[i]) * std::log(1.0 - p));
  }
  bce /= static_cast<double>(P);
  Tape t3(&empty);
  if (rel(t3.val(geomnet::loss_silhouette(t3, t3.constant(lg), gm)).item(),
          bce) > 1e-10)
    return {false, "silhouette BCE mismatch"};

  // KLD closed form on the tape vs the scalar form, and the scalar form vs a
  // 1e6-sample Monte-Carlo estimate.
  std::vector<double> mu = {0.6, -0.3, 0.9}, s2 = {0.7, 1.4, 0.5};
  Tensor mt({1, 3}), lv({1, 3});
  for (int i = 0; i < 3; ++i) {
    mt[i] = mu[i];
    lv[i] = std::log(s2[i]);
  }
  Tape t4(&empty);
  texnet::TextureLatent lat;
  lat.mu = t4.leaf(std::move(mt));
  lat.logvar = t4.leaf(std::move(lv));
  lat.sigma2 = t4.exp_(lat.logvar);
  double closed = texnet::kld_value(mu, s2);
  if (rel(t4.val(texnet::loss_kld(t4, lat)).item(), closed) > 1e-10)
    return {false, "KLD tape/scalar mismatch"};

  std::size_t n = 1000000;
  Rng mc(102);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t d = 0; d < mu.size(); ++d) {
      double eps = mc.normal();
      double z = mu[d] + std::sqrt(s2[d]) * eps;
      acc += -0.5 * std::log(s2[d]) - 0.5 * eps * eps + 0.5 * z * z;
    }
  double mc_rel = std::fabs(acc / n - closed) / std::fabs(closed);
  if (mc_rel > 1e-3) return {false, fmt("MC KLD rel err %.2e", mc_rel)};

  return {true, fmt("max scalar-loop rel err %.2e, MC KLD rel err %.2e",
                    worst, mc_rel)};
}

// ---- criterion 2: gradient correctness on micro-models -------------------------

Outcome criterion2() {
  ModelConfig cfg;
  cfg.d_f = 4;
  cfg.d_z = 8;
  cfg.keypoints = 3;
  cfg.vca_neighbors = 2;
  cfg.fourier_bands = 2;
  cfg.image_w = 8;
  cfg.image_h = 8;
  std::vector<Eigen::Vector3d> kp = {Eigen::Vector3d(0.0, 0.0, 2.0),
                                     Eigen::Vector3d(0.3, 0.1, 2.2),
                                     Eigen::Vector3d(-0.2, 0.2, 2.4)};
  synth::Camera cam = synth::look_at(Eigen::Vector3d(0, 0, 0),
                                     Eigen::Vector3d(0, 0, 2), 8.0, 8.0, 4.0,
                                     4.0);

  // Geometry objective.
  ParamSet gp;
  Rng grng(103);
  geomnet::init_params(cfg, gp, grng);
  synth::ViewRecord v;
  v.w = 8;
  v.h = 8;
  v.camera = cam;
  v.mask.assign(64, 0);
  v.nnopcs.assign(64 * 3, 0.0f);
  v.depth.assign(64, 0.0f);
  v.rgb.assign(64 * 3, 0.0f);
  Rng vr(104);
  for (std::size_t p = 20; p < 44; ++p) {
    v.mask[p] = 1;
    v.depth[p] = static_cast<float>(vr.uniform(1.5, 2.5));
    for (int c = 0; c < 3; ++c) {
      v.nnopcs[p * 3 + c] = static_cast<float>(vr.uniform(0.1, 0.9));
      v.rgb[p * 3 + c] = static_cast<float>(vr.uniform(0.1, 0.9));
    }
  }
  Rng sr(105);
  auto inside = geomnet::sample_mask_pixels(v.mask, 8, sr);
  auto outside = geomnet::sample_mask_pixels(v.mask, 8, sr, true);
  geomnet::TrainConfig gtc;
  double geom_err = grad_check(
      [&](const ParamSet& p, ParamSet* grads) {
        Tape t(&p);
        Var loss = geomnet::detail::view_loss(t, cfg, gtc, kp, v, inside, outside);
        double val = t.val(loss).item();
        if (grads) {
          t.backward(loss);
          t.add_param_grads(*grads);
        }
        return val;
      },
      gp, 1e-5);
  if (geom_err > 1e-4) return {false, fmt("geometry grad err %.2e", geom_err)};

  // Texture objective (reparametrized path with a fixed noise draw).
  texnet::TexArch arch;
  arch.input_w = 8;
  arch.input_h = 8;
  arch.channels = {2, 2};
  arch.strides = {2, 2};
  arch.dense_hidden = 6;
  arch.decoder_hidden = 5;
  ParamSet tp;
  Rng trng(106);
  geomnet::init_params(cfg, tp, trng);
  texnet::init_params(cfg, arch, tp, trng);
  std::vector<net::Vector2d> queries = {{3.5, 3.5}, {4.5, 3.5}, {3.5, 4.5},
                                        {5.5, 5.5}, {2.5, 2.5}, {4.5, 5.5},
                                        {5.5, 2.5}, {2.5, 5.5}};
  Tensor gt({queries.size(), 3});
  for (std::size_t i = 0; i < gt.size(); ++i) gt[i] = vr.uniform(0, 1);
  Rng er(107);
  Tensor eps = texnet::standard_normal_row(static_cast<std::size_t>(cfg.d_z), er);
  double tex_err = grad_check(
      [&](const ParamSet& p, ParamSet* grads) {
        Tape t(&p);
        texnet::TextureLatent lat =
            texnet::encode_texture(t, cfg, arch, v.rgb, v.nnopcs, true);
        Var z = texnet::sample_latent(t, lat, eps);
        Var f = texnet::decode_texture(t, cfg, z);
        auto geo = geomnet::encode_pose(t, cfg, kp);
        Var pred = texnet::render_color(t, cfg, arch.variant, kp, geo, f, z,
                                        cam, queries);
        Var col = t.scale(geomnet::loss_map_sum(t, pred, gt),
                          1.0 / (3.0 * static_cast<double>(queries.size())));
        Var loss =
            texnet::total_texture_loss(t, col, texnet::loss_kld(t, lat), 5.0, 1e-3);
        double val = t.val(loss).item();
        if (grads) {
          t.backward(loss);
          t.add_param_grads(*grads);
        }
        return val;
      },
      tp, 1e-5);
  if (tex_err > 1e-4) return {false, fmt("texture grad err %.2e", tex_err)};
  return {true, fmt("geometry %.2e, texture %.2e", geom_err, tex_err)};
}

// ---- criterion 3: ground-truth invariance --------------------------------------

Outcome criterion3() {
  synth::Skeleton sk = synth::make_quadruped();
  Eigen::Vector3d lo, hi;
  sk.neutral_bbox(lo, hi);
  Eigen::Vector3d centroid = 0.5 * (lo + hi);
  synth::RigIntrinsics in = synth::default_intrinsics(96, 72);

  struct Probe {
    int bone;
    Eigen::Vector3d neutral, expected;
  };
  std::vector<Probe> probes;
  Rng prng(108);
  for (int bone : {1, 2, 3, 4, 6}) {
    Eigen::Vector3d a = sk.neutral[sk.parent[bone]], b = sk.neutral[bone];
    Eigen::Vector3d axis_pt = a + prng.uniform(0.2, 0.8) * (b - a);
    Eigen::Vector3d u = (b - a).normalized();
    Eigen::Vector3d ortho = u.cross(Eigen::Vector3d::UnitZ());
    if (ortho.norm() < 1e-6) ortho = u.cross(Eigen::Vector3d::UnitX());
    ortho.normalize();
    Eigen::Vector3d p = axis_pt + sk.radii[bone] * ortho;
    probes.push_back({bone, p, synth::nnopcs_of(p, lo, hi)});
  }

  double worst = 0.0;
  int checked = 0;
  for (int pi = 0; pi < 12; ++pi) {
    Rng rng(900 + pi);
    synth::PoseSample pose = synth::sample_pose(sk, pi, rng);
    auto g = synth::joint_transforms(sk, pose.rotations);
    synth::CreatureInstance cr;
    cr.skeleton = &sk;
    cr.joints = g;
    for (int ci = 0; ci < 5; ++ci) {
      double az = 2.0 * M_PI * ci / 5.0 + 0.21;
      synth::Camera cam = synth::look_at(
          centroid + Eigen::Vector3d(4.2 * std::cos(az), 4.2 * std::sin(az),
                                     1.1),
          centroid, in.fx, in.fy, in.cx, in.cy);
      for (const auto& pr : probes) {
        Eigen::Vector3d world = synth::bone_transform(sk, g, pr.bone) * pr.neutral;
        Eigen::Vector3d o = cam.center();
        Eigen::Vector3d d = (world - o).normalized();
        synth::RayHit h = synth::cast_ray(o, d, {cr});
        if (!synth::ray_hits(h)) continue;
        if (std::fabs(h.t - (world - o).norm()) > 1e-7) continue;
        Eigen::Vector3d nn = synth::nnopcs_of(h.neutral_point, lo, hi);
        worst = std::max(worst, (nn - pr.expected).norm());
        ++checked;
      }
    }
  }
  if (checked < 60) return {false, fmt("only %d probe observations", checked)};
  if (worst > 1e-6) return {false, fmt("probe deviation %.2e", worst)};

  // Per-view range and zero-outside contracts on real dataset views.
  build_dataset();
  const synth::Dataset& ds = shared().ds;
  for (int tex : {0, ds.config.textures - 1}) {
    for (int c = 0; c < 2; ++c) {
      synth::ViewRecord v = ds.load_view(tex, ds.test_split[0], c);
      for (std::size_t p = 0; p < v.mask.size(); ++p) {
        for (int ch = 0; ch < 3; ++ch) {
          float n = v.nnopcs[p * 3 + ch];
          if (n < 0.0f || n > 1.0f) return {false, "coordinate out of range"};
          if (!v.mask[p] && (n != 0.0f || v.rgb[p * 3 + ch] != 0.0f))
            return {false, "nonzero value outside the silhouette"};
        }
      }
    }
  }
  return {true, fmt("%d probe observations, max deviation %.2e", checked, worst)};
}

// ---- criterion 4: desk-scale geometry training ----------------------------------

Outcome criterion4() {
  train_geometry_once();
  Shared& s = shared();
  bool pass = s.geom_mse <= 5e-3 && s.geom_iou >= 0.85 && s.geom_minutes <= 30.0;
  return {pass, fmt("NNOPCS MSE %.3e (<= 5e-3; masked %.3e), IoU %.3f "
                    "(>= 0.85), %.1f CPU-min (<= 30)",
                    s.geom_mse, s.geom_mse_masked, s.geom_iou,
                    s.geom_minutes)};
}

// ---- criterion 5: ablation orderings --------------------------------------------

Outcome criterion5() {
  texture_run(texnet::Variant::full);
  texture_run(texnet::Variant::no_nnopcs);
  texture_run(texnet::Variant::no_f_texture);
  Shared& s = shared();
  double full = s.tex_psnr[texnet::Variant::full];
  double gap_map = full - s.tex_psnr[texnet::Variant::no_nnopcs];
  double gap_feat = full - s.tex_psnr[texnet::Variant::no_f_texture];
  bool pass = gap_map >= 2.0 && gap_feat >= 2.0;
  return {pass, fmt("masked PSNR full %.2f dB; gaps: vs no_nnopcs %+.2f dB, "
                    "vs no_f_texture %+.2f dB (each >= +2)",
                    full, gap_map, gap_feat)};
}

// ---- criterion 6: re-identification ------------------------------------------

Outcome criterion6() {
  const ParamSet& params = texture_run(texnet::Variant::full);
  Shared& s = shared();
  texnet::TexArch arch = s.arch;
  arch.variant = texnet::Variant::full;

  std::vector<int> known, novel;
  for (int c = 0; c < s.ds.config.known_cameras(); ++c) known.push_back(c);
  for (int c = 0; c < s.ds.config.novel_cameras; ++c)
    novel.push_back(s.ds.config.known_cameras() + c);

  reid::EmbeddingSet train = reid::extract_embeddings(
      params, s.model, arch, s.ds, s.ds.train_split, known, true, "clean");
  reid::EmbeddingSet test_known = reid::extract_embeddings(
      params, s.model, arch, s.ds, s.ds.test_split, known, true, "clean");
  reid::EmbeddingSet test_novel = reid::extract_embeddings(
      params, s.model, arch, s.ds, s.ds.test_split, novel, true, "novel-view");

  double acc_known = reid::nearest_centroid_accuracy(train, test_known);
  double acc_novel = reid::nearest_centroid_accuracy(train, test_novel);
  double occ_complete =
      reid::occlusion_eval(params, s.model, arch, s.ds, train,
                           reid::OcclusionMode::complete_mask)
          .accuracy;
  double occ_visible =
      reid::occlusion_eval(params, s.model, arch, s.ds, train,
                           reid::OcclusionMode::occluded_mask)
          .accuracy;
  bool pass = acc_known >= 0.95 && acc_novel >= 0.90 && occ_complete >= 0.90 &&
              occ_visible >= 0.90;
  return {pass, fmt("known %.1f%% (>= 95), novel %.1f%% (>= 90), occlusion "
                    "complete %.1f%% / visible %.1f%% (>= 90)",
                    100 * acc_known, 100 * acc_novel, 100 * occ_complete,
                    100 * occ_visible)};
}

// ---- criterion 7: throughput scaling -------------------------------------------

Outcome criterion7() {
  ModelConfig base;  // desk defaults
  reid::BenchReport lo = reid::bench_embedding_throughput(base, 96, 72, 10);
  reid::BenchReport hi = reid::bench_embedding_throughput(base, 192, 144, 10);
  double per_lo = lo.total_s / lo.frames;
  double per_hi = hi.total_s / hi.frames;
  double px_ratio = (192.0 * 144.0) / (96.0 * 72.0);
  double t_ratio = per_hi / per_lo;
  bool pass = t_ratio <= 1.5 * px_ratio && t_ratio >= px_ratio / 1.5;
  return {pass, fmt("96x72 %.2f fps (render %.0f%%, encode %.0f%%); 192x144 "
                    "%.2f fps; time ratio %.2f vs pixel ratio %.1f "
                    "(within x1.5)",
                    lo.fps, 100 * lo.render_s / lo.total_s,
                    100 * lo.encode_s / lo.total_s, hi.fps, t_ratio, px_ratio)};
}

// ---- criterion 8: determinism ---------------------------------------------------

std::string file_bytes(const std::string& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

Outcome criterion8() {
  synth::DatasetConfig dc;
  dc.out_dir = "acceptance_det_a";
  dc.train_poses = 2;
  dc.val_poses = 1;
  dc.test_poses = 1;
  dc.rings = 1;
  dc.ring_heights = {1.2};
  dc.per_ring = 2;
  dc.novel_cameras = 1;
  dc.textures = 2;
  dc.width = 48;
  dc.height = 36;
  dc.occlusion_instances = 1;
  dc.occlusion_cameras = 1;
  fs::remove_all(dc.out_dir);
  synth::Dataset da = synth::generate_dataset(dc);
  synth::DatasetConfig dc2 = dc;
  dc2.out_dir = "acceptance_det_b";
  fs::remove_all(dc2.out_dir);
  synth::generate_dataset(dc2);
  for (const char* suffix :
       {".rgb.png", ".mask.png", ".depth.f32", ".nnopcs.f32"})
    if (file_bytes(synth::view_stem(dc.out_dir, 1, 1, 1) + suffix) !=
        file_bytes(synth::view_stem(dc2.out_dir, 1, 1, 1) + suffix))
      return {false, std::string("dataset payload differs: ") + suffix};
  if (file_bytes(dc.out_dir + "/manifest.json") !=
      file_bytes(dc2.out_dir + "/manifest.json"))
    return {false, "dataset manifest differs"};

  ModelConfig mc;
  mc.d_f = 8;
  mc.d_z = 8;
  mc.vca_neighbors = 3;
  mc.fourier_bands = 3;
  mc.image_w = 48;
  mc.image_h = 36;
  geomnet::TrainConfig gtc;
  gtc.epochs = 2;
  gtc.pixels_per_iter = 32;
  auto ga = geomnet::train_geometry(da, mc, gtc);
  auto gb = geomnet::train_geometry(da, mc, gtc);
  for (std::size_t i = 0; i < ga.log.size(); ++i)
    if (ga.log[i].train_loss != gb.log[i].train_loss ||
        ga.log[i].val_loss != gb.log[i].val_loss)
      return {false, "geometry training log differs between runs"};
  if (ga.best_params.hash() != gb.best_params.hash())
    return {false, "geometry checkpoint differs between runs"};

  texnet::TexArch arch;
  arch.input_w = 48;
  arch.input_h = 36;
  arch.channels = {4, 4, 8, 8};
  arch.strides = {2, 1, 2, 1};
  arch.dense_hidden = 24;
  arch.decoder_hidden = 16;
  ParamSet tex = ga.best_params;
  Rng trng(109);
  texnet::init_params(mc, arch, tex, trng);
  reid::EmbeddingSet ea = reid::extract_embeddings(tex, mc, arch, da,
                                                   da.test_split, {0, 1}, true,
                                                   "clean");
  reid::EmbeddingSet eb = reid::extract_embeddings(tex, mc, arch, da,
                                                   da.test_split, {0, 1}, true,
                                                   "clean");
  for (std::size_t i = 0; i < ea.records.size(); ++i)
    if (ea.records[i].code != eb.records[i].code)
      return {false, "embedding extraction differs between runs"};

  fs::remove_all(dc.out_dir);
  fs::remove_all(dc2.out_dir);
  return {true, "dataset payloads, training logs, and embeddings bit-identical"};
}

}  // namespace

int main() {
  struct Entry {
    int id;
    const char* name;
    Outcome (*fn)();
  };
  const Entry entries[] = {
      {1, "loss-term oracle equivalence", criterion1},
      {2, "gradient correctness", criterion2},
      {3, "coordinate-map ground-truth invariance", criterion3},
      {4, "desk-scale geometry training", criterion4},
      {5, "ablation PSNR orderings", criterion5},
      {6, "re-identification accuracy", criterion6},
      {7, "throughput scaling", criterion7},
      {8, "bit-reproducibility", criterion8},
  };
  int failures = 0;
  for (const Entry& e : entries) {
    double t0 = now_s();
    Outcome o;
    try {
      o = e.fn();
    } catch (const std::exception& ex) {
      o = {false, std::string("exception: ") + ex.what()};
    }
    failures += !o.pass;
    std::printf("criterion %d (%s): %s — %s [%.1fs]\n", e.id, e.name,
                o.pass ? "PASS" : "FAIL", o.detail.c_str(), now_s() - t0);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
