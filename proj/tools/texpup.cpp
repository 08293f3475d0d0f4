// Command-line front end: dataset generation, two-stage training, evaluation,
// embedding extraction, and benchmarking over a shared experiment directory.

#include <cstdio>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "texpup/cli/commands.hpp"

namespace {

using texpup::cli::ExperimentConfig;

struct GlobalArgs {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;  // overrides dataset out_dir / runs root where relevant
};

ExperimentConfig load(const GlobalArgs& g) {
  if (g.config_path.empty())
    throw texpup::cli::ValidationError("--config is required");
  ExperimentConfig cfg = texpup::cli::load_config(g.config_path);
  if (!g.out.empty()) cfg.runs_root = g.out;
  return cfg;
}

void print_json(const nlohmann::json& j) { std::printf("%s\n", j.dump(2).c_str()); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"neural texture puppeteer pipeline"};
  app.require_subcommand(1);

  GlobalArgs g;
  app.add_option("--config", g.config_path, "experiment config (JSON)");
  std::uint64_t seed_val = 0;
  auto* seed_opt = app.add_option("--seed", seed_val, "seed override");
  app.add_option("--out", g.out, "output root override (runs directory)");

  bool resume = false;
  int pose_id = 0, camera_id = 0, texture_id = -1, bench_frames = 10;
  bool embed_sample = false;
  std::string latent_file, save_latent;

  auto* gen = app.add_subcommand("gen-data", "generate the synthetic dataset");
  auto* tg = app.add_subcommand("train-geom", "train the geometry stage");
  tg->add_flag("--resume", resume, "continue from the saved checkpoint");
  auto* tt = app.add_subcommand("train-tex", "train the texture stage");
  tt->add_flag("--resume", resume, "continue from the saved checkpoint");
  auto* rd = app.add_subcommand("render", "render one view from checkpoints");
  rd->add_option("--pose", pose_id, "pose id")->required();
  rd->add_option("--camera", camera_id, "camera id")->required();
  rd->add_option("--texture", texture_id, "texture id (encodes a reference view)");
  rd->add_option("--latent", latent_file, "load texture latent from file");
  rd->add_option("--save-latent", save_latent, "save the used latent to file");
  auto* eg = app.add_subcommand("eval-geom", "geometry metrics on the test split");
  auto* ep = app.add_subcommand("eval-psnr", "reconstruction PSNR on the test split");
  auto* em = app.add_subcommand("embed", "extract texture embeddings");
  em->add_flag("--sample", embed_sample, "sample the latent instead of the mean");
  auto* er = app.add_subcommand("eval-reid", "re-identification evaluation");
  auto* eo = app.add_subcommand("eval-occlusion", "occlusion robustness evaluation");
  auto* eb = app.add_subcommand("bench", "embedding throughput benchmark");
  eb->add_option("--frames", bench_frames, "frames per measurement (>= 10)");

  CLI11_PARSE(app, argc, argv);
  if (!seed_opt->empty()) g.seed = seed_val;

  try {
    ExperimentConfig cfg = load(g);
    if (gen->parsed()) {
      if (!g.out.empty()) cfg.dataset.out_dir = g.out;
      print_json(texpup::cli::cmd_gen_data(cfg, g.seed));
    } else if (tg->parsed()) {
      print_json(texpup::cli::cmd_train_geom(cfg, g.seed, resume));
    } else if (tt->parsed()) {
      print_json(texpup::cli::cmd_train_tex(cfg, g.seed, resume));
    } else if (rd->parsed()) {
      if (texture_id < 0 && latent_file.empty())
        throw texpup::cli::ValidationError(
            "render: give --texture or --latent");
      print_json(texpup::cli::cmd_render(cfg, pose_id, camera_id, texture_id,
                                         latent_file, save_latent));
    } else if (eg->parsed()) {
      print_json(texpup::cli::cmd_eval_geom(cfg));
    } else if (ep->parsed()) {
      print_json(texpup::cli::cmd_eval_psnr(cfg));
    } else if (em->parsed()) {
      print_json(texpup::cli::cmd_embed(cfg, embed_sample,
                                        g.seed.value_or(0)));
    } else if (er->parsed()) {
      print_json(texpup::cli::cmd_eval_reid(cfg, g.seed.value_or(17)));
    } else if (eo->parsed()) {
      print_json(texpup::cli::cmd_eval_occlusion(cfg));
    } else if (eb->parsed()) {
      print_json(texpup::cli::cmd_bench(cfg, bench_frames));
    }
  } catch (const texpup::cli::ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const texpup::cli::MissingPrereq& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const texpup::cli::NumericalFailure& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
