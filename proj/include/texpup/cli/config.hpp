#pragma once

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "texpup/core/config.hpp"
#include "texpup/geomnet/train.hpp"
#include "texpup/synth/dataset.hpp"
#include "texpup/texnet/train.hpp"

namespace texpup::cli {

/// Config/argument problems → exit code 2.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
/// Missing dataset/checkpoint prerequisites → exit code 3.
struct MissingPrereq : std::runtime_error {
  using std::runtime_error::runtime_error;
};
/// Diverged or non-finite computation → exit code 4.
struct NumericalFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void require_keys(const nlohmann::json& j, const std::string& section,
                         const std::set<std::string>& allowed) {
  if (!j.is_object())
    throw ValidationError("config: section '" + section + "' must be an object");
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k))
      throw ValidationError("config: unknown key '" + section + "." + k + "'");
}

template <typename T>
T get(const nlohmann::json& j, const std::string& key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

}  // namespace detail

/// Full experiment description: dataset, model, both training stages, and
/// evaluation options. Unknown keys anywhere are rejected.
struct ExperimentConfig {
  std::string run_name = "run";
  std::string runs_root = "runs";
  synth::DatasetConfig dataset;
  ModelConfig model;
  geomnet::TrainConfig train_geom;
  texnet::TexTrainConfig train_tex;
  std::string psnr_mode = "masked";  // masked | full
  std::string raw_text;              // byte-exact snapshot of the input

  std::string run_dir() const { return runs_root + "/" + run_name; }
  std::string dataset_dir() const { return dataset.out_dir; }

  void validate() const {
    try {
      model.validate();
    } catch (const std::exception& e) {
      throw ValidationError(std::string("config: model: ") + e.what());
    }
    if (run_name.empty() || run_name.find('/') != std::string::npos)
      throw ValidationError("config: run.name must be a plain directory name");
    if (dataset.out_dir.empty())
      throw ValidationError("config: dataset.out_dir is required");
    if (psnr_mode != "masked" && psnr_mode != "full")
      throw ValidationError("config: eval.psnr_mode must be masked|full");
    if (train_geom.lambda_nnopcs < 0 || train_geom.lambda_sil < 0 ||
        train_geom.lambda_depth < 0 || train_tex.lambda_col < 0 ||
        train_tex.lambda_kld < 0)
      throw ValidationError("config: loss weights must be >= 0");
    if (train_geom.pixels_per_iter < 1 || train_tex.pixels_per_iter < 1)
      throw ValidationError("config: pixels_per_iter must be >= 1");
    if (train_geom.epochs < 1 || train_tex.epochs < 1)
      throw ValidationError("config: epochs must be >= 1");
    if (dataset.width != model.image_w || dataset.height != model.image_h)
      throw ValidationError("config: dataset resolution must match model");
  }
};

inline ExperimentConfig parse_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    throw ValidationError(std::string("config: not valid JSON: ") + e.what());
  }
  detail::require_keys(j, "<root>",
                       {"run", "dataset", "model", "train_geom", "train_tex",
                        "eval"});
  ExperimentConfig c;
  c.raw_text = text;

  if (j.contains("run")) {
    const auto& r = j.at("run");
    detail::require_keys(r, "run", {"name", "root"});
    c.run_name = detail::get<std::string>(r, "name", c.run_name);
    c.runs_root = detail::get<std::string>(r, "root", c.runs_root);
  }
  if (j.contains("dataset")) {
    const auto& d = j.at("dataset");
    detail::require_keys(
        d, "dataset",
        {"out_dir", "seed", "train_poses", "val_poses", "test_poses", "rings",
         "per_ring", "novel_cameras", "cam_radius", "ring_heights",
         "novel_height", "textures", "spot_count", "spot_radius", "width",
         "height", "occlusion_instances", "occlusion_cameras", "joint_limit"});
    c.dataset = synth::DatasetConfig::from_json(d);
  }
  if (j.contains("model")) {
    const auto& m = j.at("model");
    detail::require_keys(m, "model",
                         {"d_f", "d_z", "keypoints", "vca_neighbors",
                          "fourier_bands", "image_w", "image_h"});
    c.model = ModelConfig::from_json(m);
  } else {
    c.model.image_w = c.dataset.width;
    c.model.image_h = c.dataset.height;
  }
  if (j.contains("train_geom")) {
    const auto& t = j.at("train_geom");
    detail::require_keys(t, "train_geom",
                         {"epochs", "lr", "lr_decay", "lr_decay_every",
                          "pixels_per_iter", "lambda_nnopcs", "lambda_sil",
                          "lambda_depth", "seed"});
    auto& g = c.train_geom;
    g.epochs = detail::get(t, "epochs", g.epochs);
    g.lr = detail::get(t, "lr", g.lr);
    g.lr_decay = detail::get(t, "lr_decay", g.lr_decay);
    g.lr_decay_every = detail::get(t, "lr_decay_every", g.lr_decay_every);
    g.pixels_per_iter = detail::get(t, "pixels_per_iter", g.pixels_per_iter);
    g.lambda_nnopcs = detail::get(t, "lambda_nnopcs", g.lambda_nnopcs);
    g.lambda_sil = detail::get(t, "lambda_sil", g.lambda_sil);
    g.lambda_depth = detail::get(t, "lambda_depth", g.lambda_depth);
    g.seed = detail::get(t, "seed", g.seed);
  }
  if (j.contains("train_tex")) {
    const auto& t = j.at("train_tex");
    detail::require_keys(t, "train_tex",
                         {"epochs", "lr", "lr_decay", "lr_decay_every",
                          "pixels_per_iter", "lambda_col", "lambda_kld",
                          "bn_momentum", "seed", "variant"});
    auto& x = c.train_tex;
    x.epochs = detail::get(t, "epochs", x.epochs);
    x.lr = detail::get(t, "lr", x.lr);
    x.lr_decay = detail::get(t, "lr_decay", x.lr_decay);
    x.lr_decay_every = detail::get(t, "lr_decay_every", x.lr_decay_every);
    x.pixels_per_iter = detail::get(t, "pixels_per_iter", x.pixels_per_iter);
    x.lambda_col = detail::get(t, "lambda_col", x.lambda_col);
    x.lambda_kld = detail::get(t, "lambda_kld", x.lambda_kld);
    x.bn_momentum = detail::get(t, "bn_momentum", x.bn_momentum);
    x.seed = detail::get(t, "seed", x.seed);
    if (t.contains("variant"))
      x.variant = texnet::variant_from_name(t.at("variant"));
  }
  if (j.contains("eval")) {
    const auto& e = j.at("eval");
    detail::require_keys(e, "eval", {"psnr_mode"});
    c.psnr_mode = detail::get<std::string>(e, "psnr_mode", c.psnr_mode);
  }
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ValidationError("config: cannot read " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

}  // namespace texpup::cli
