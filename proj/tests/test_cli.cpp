#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "texpup/cli/experiment.hpp"

using namespace texpup;
using namespace texpup::cli;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  REQUIRE(f.good());
  return std::string((std::istreambuf_iterator<char>(f)),
                     std::istreambuf_iterator<char>());
}

struct CliRun {
  int code = -1;
  std::string stderr_text;
};

CliRun run_cli(const std::string& args) {
  fs::path err = fs::temp_directory_path() / "texpup_cli_stderr.txt";
  std::string cmd = std::string(TEXPUP_CLI_BIN) + " " + args +
                    " >/dev/null 2>" + err.string();
  int rc = std::system(cmd.c_str());
  CliRun r;
  r.code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  std::ifstream f(err);
  std::ostringstream ss;
  ss << f.rdbuf();
  r.stderr_text = ss.str();
  return r;
}

std::string tiny_config_text(const fs::path& base) {
  nlohmann::json j = {
      {"run", {{"name", "t"}, {"root", (base / "runs").string()}}},
      {"dataset",
       {{"out_dir", (base / "data").string()},
        {"seed", 91},
        {"train_poses", 2},
        {"val_poses", 1},
        {"test_poses", 1},
        {"rings", 1},
        {"ring_heights", {1.2}},
        {"per_ring", 2},
        {"novel_cameras", 1},
        {"textures", 2},
        {"width", 48},
        {"height", 36},
        {"occlusion_instances", 1},
        {"occlusion_cameras", 1}}},
      {"model",
       {{"d_f", 6},
        {"d_z", 8},
        {"keypoints", 8},
        {"vca_neighbors", 3},
        {"fourier_bands", 3},
        {"image_w", 48},
        {"image_h", 36}}},
      {"train_geom", {{"epochs", 1}, {"pixels_per_iter", 24}}},
      {"train_tex", {{"epochs", 1}, {"pixels_per_iter", 24}}}};
  return j.dump(2);
}

fs::path write_config(const fs::path& base, const std::string& text) {
  fs::create_directories(base);
  fs::path p = base / "config.json";
  std::ofstream f(p, std::ios::binary);
  f << text;
  return p;
}

}  // namespace

TEST_CASE("config parsing") {
  fs::path base = fs::temp_directory_path() / "texpup_cfg";
  std::string text = tiny_config_text(base);

  SECTION("a valid config round-trips with the raw text preserved") {
    ExperimentConfig cfg = parse_config(text);
    CHECK(cfg.run_name == "t");
    CHECK(cfg.dataset.textures == 2);
    CHECK(cfg.train_geom.epochs == 1);
    CHECK(cfg.raw_text == text);
    CHECK(cfg.run_dir() == (base / "runs").string() + "/t");
  }

  SECTION("unknown keys are rejected and named") {
    nlohmann::json j = nlohmann::json::parse(text);
    j["train_geom"]["learning_rate"] = 0.1;
    try {
      parse_config(j.dump());
      FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("train_geom.learning_rate") !=
            std::string::npos);
    }
    nlohmann::json top = nlohmann::json::parse(text);
    top["optimzer"] = nlohmann::json::object();
    CHECK_THROWS_AS(parse_config(top.dump()), ValidationError);
  }

  SECTION("invalid JSON and semantic violations raise ValidationError") {
    CHECK_THROWS_AS(parse_config("{ nope"), ValidationError);

    nlohmann::json j = nlohmann::json::parse(text);
    j["eval"] = {{"psnr_mode", "sideways"}};
    CHECK_THROWS_AS(parse_config(j.dump()), ValidationError);

    j = nlohmann::json::parse(text);
    j["model"]["image_w"] = 96;  // no longer matches the dataset
    CHECK_THROWS_AS(parse_config(j.dump()), ValidationError);

    j = nlohmann::json::parse(text);
    j["train_tex"]["lambda_col"] = -1.0;
    CHECK_THROWS_AS(parse_config(j.dump()), ValidationError);

    j = nlohmann::json::parse(text);
    j["run"]["name"] = "a/b";
    CHECK_THROWS_AS(parse_config(j.dump()), ValidationError);
  }
}

TEST_CASE("experiment directory protocol") {
  fs::path base = fs::temp_directory_path() / "texpup_rundir";
  fs::remove_all(base);
  ExperimentConfig cfg = parse_config(tiny_config_text(base));

  SECTION("layout creation and byte-exact config snapshot") {
    ensure_run_layout(cfg);
    for (const char* d : {"checkpoints", "logs", "metrics", "renders"})
      CHECK(fs::is_directory(fs::path(cfg.run_dir()) / d));
    CHECK(slurp(fs::path(cfg.run_dir()) / "config.json") == cfg.raw_text);

    // Re-running with the identical config is fine.
    CHECK_NOTHROW(ensure_run_layout(cfg));

    // A different config for the same run directory is refused.
    nlohmann::json j = nlohmann::json::parse(cfg.raw_text);
    j["train_geom"]["epochs"] = 7;
    ExperimentConfig other = parse_config(j.dump());
    CHECK_THROWS_AS(ensure_run_layout(other), ValidationError);
  }

  SECTION("run lock is exclusive and released on destruction") {
    ensure_run_layout(cfg);
    {
      RunLock lock(cfg.run_dir());
      CHECK_THROWS_AS(RunLock(cfg.run_dir()), ValidationError);
    }
    CHECK_NOTHROW(RunLock(cfg.run_dir()));
  }

  SECTION("experiment records are complete and atomic") {
    ensure_run_layout(cfg);
    ExperimentRecord rec;
    rec.command = "unit-test";
    rec.seed = 42;
    rec.artifacts = {"a.bin"};
    rec.wall_seconds = 1.5;
    rec.write(cfg);
    fs::path p = fs::path(cfg.run_dir()) / "logs/record_unit-test.json";
    REQUIRE(fs::exists(p));
    CHECK(!fs::exists(p.string() + ".tmp"));
    nlohmann::json j = nlohmann::json::parse(slurp(p));
    CHECK(j.at("command") == "unit-test");
    CHECK(j.at("seed") == 42);
    CHECK(j.at("config_snapshot") == cfg.raw_text);
  }

  fs::remove_all(base);
}

TEST_CASE("command-line exit codes and reproducibility") {
  fs::path base = fs::temp_directory_path() / "texpup_cli_e2e";
  fs::remove_all(base);
  fs::path cfg_path = write_config(base, tiny_config_text(base));
  std::string cfg_arg = "--config " + cfg_path.string();

  SECTION("validation failures exit with code 2") {
    nlohmann::json j = nlohmann::json::parse(tiny_config_text(base));
    j["dataset"]["resolutionn"] = 12;
    fs::path bad = write_config(base / "bad", j.dump());
    CliRun r = run_cli("--config " + bad.string() + " gen-data");
    CHECK(r.code == 2);
    CHECK(r.stderr_text.find("dataset.resolutionn") != std::string::npos);
    CHECK(run_cli("gen-data").code == 2);  // --config missing
  }

  SECTION("missing prerequisites exit with code 3") {
    CliRun r = run_cli(cfg_arg + " train-geom");
    CHECK(r.code == 3);  // dataset not generated yet
    CHECK(r.stderr_text.find("gen-data") != std::string::npos);

    REQUIRE(run_cli(cfg_arg + " gen-data").code == 0);
    CliRun t = run_cli(cfg_arg + " train-tex");
    CHECK(t.code == 3);  // geometry stage missing
    CHECK(t.stderr_text.find("train-geom") != std::string::npos);
    CHECK(run_cli(cfg_arg + " eval-geom").code == 3);
  }

  SECTION("dataset generation is reproducible byte for byte") {
    REQUIRE(run_cli(cfg_arg + " gen-data").code == 0);
    std::string manifest = slurp(base / "data" / "manifest.json");
    fs::remove_all(base / "data");
    REQUIRE(run_cli(cfg_arg + " gen-data").code == 0);
    CHECK(slurp(base / "data" / "manifest.json") == manifest);
  }

  SECTION("training pipeline: csv logs, resume, texture stage") {
    REQUIRE(run_cli(cfg_arg + " gen-data").code == 0);
    REQUIRE(run_cli(cfg_arg + " train-geom").code == 0);
    fs::path run_dir = base / "runs" / "t";
    REQUIRE(fs::exists(run_dir / "checkpoints/geom.ckpt"));

    // One CSV row per epoch plus the header.
    auto rows = [&](const fs::path& p) {
      std::istringstream ss(slurp(p));
      std::string line;
      std::vector<std::string> out;
      while (std::getline(ss, line))
        if (!line.empty()) out.push_back(line);
      return out;
    };
    auto csv = rows(run_dir / "logs/train_geom.csv");
    REQUIRE(csv.size() == 2);
    CHECK(csv[0] == "epoch,train_loss,val_loss,lr");
    CHECK(csv[1].rfind("0,", 0) == 0);

    // Resume appends strictly increasing epoch numbers.
    REQUIRE(run_cli(cfg_arg + " train-geom --resume").code == 0);
    csv = rows(run_dir / "logs/train_geom.csv");
    REQUIRE(csv.size() == 3);
    CHECK(csv[2].rfind("1,", 0) == 0);

    REQUIRE(run_cli(cfg_arg + " train-tex").code == 0);
    REQUIRE(fs::exists(run_dir / "checkpoints/tex_full.ckpt"));
    CHECK(rows(run_dir / "logs/train_tex_full.csv").size() == 2);

    // Embedding extraction emits the three JSONL sets deterministically.
    REQUIRE(run_cli(cfg_arg + " embed").code == 0);
    fs::path emb = run_dir / "metrics/embeddings_train.jsonl";
    REQUIRE(fs::exists(emb));
    std::string first = slurp(emb);
    REQUIRE(run_cli(cfg_arg + " embed").code == 0);
    CHECK(slurp(emb) == first);
    CHECK(fs::exists(run_dir / "metrics/embeddings_test_known.jsonl"));
    CHECK(fs::exists(run_dir / "metrics/embeddings_test_novel.jsonl"));
  }

  fs::remove_all(base);
}
