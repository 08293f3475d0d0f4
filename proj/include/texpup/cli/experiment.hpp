#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "texpup/cli/config.hpp"

namespace texpup::cli {

namespace fs = std::filesystem;

/// runs/<name>/{config.json, checkpoints/, logs/, metrics/, renders/}.
inline void ensure_run_layout(const ExperimentConfig& cfg) {
  fs::create_directories(cfg.run_dir() + "/checkpoints");
  fs::create_directories(cfg.run_dir() + "/logs");
  fs::create_directories(cfg.run_dir() + "/metrics");
  fs::create_directories(cfg.run_dir() + "/renders");
  // Config snapshot, byte for byte. Never overwrite a differing snapshot:
  // completed experiment directories are append-only.
  std::string snap = cfg.run_dir() + "/config.json";
  if (fs::exists(snap)) {
    std::ifstream f(snap, std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    if (ss.str() != cfg.raw_text)
      throw ValidationError("run dir " + cfg.run_dir() +
                            " was created with a different config");
  } else {
    std::ofstream f(snap, std::ios::binary);
    f << cfg.raw_text;
  }
}

/// One command per experiment directory at a time.
class RunLock {
 public:
  explicit RunLock(const std::string& run_dir) : path_(run_dir + "/.lock") {
    std::error_code ec;
    fs::create_directories(run_dir, ec);
    if (fs::exists(path_))
      throw ValidationError("experiment is locked (remove " + path_ +
                            " if no other command is running)");
    std::ofstream f(path_, std::ios::binary);
    f << "pid unknown\n";
  }
  ~RunLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  std::string path_;
};

struct ExperimentRecord {
  std::string command;
  std::string code_version = "0.1.0";
  std::uint64_t seed = 0;
  std::vector<std::string> artifacts;
  double wall_seconds = 0.0;

  /// Written atomically (temp file + rename) next to the other records.
  void write(const ExperimentConfig& cfg) const {
    nlohmann::json j{{"command", command},
                     {"code_version", code_version},
                     {"seed", seed},
                     {"artifacts", artifacts},
                     {"wall_seconds", wall_seconds},
                     {"config_snapshot", cfg.raw_text}};
    std::string final_path = cfg.run_dir() + "/logs/record_" + command + ".json";
    std::string tmp = final_path + ".tmp";
    {
      std::ofstream f(tmp, std::ios::binary);
      f << j.dump(2) << "\n";
      if (!f) throw std::runtime_error("record: write failed " + tmp);
    }
    fs::rename(tmp, final_path);
  }
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_ =
      std::chrono::steady_clock::now();
};

inline void write_json(const std::string& path, const nlohmann::json& j) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary);
    f << j.dump(2) << "\n";
    if (!f) throw std::runtime_error("cannot write " + path);
  }
  fs::rename(tmp, path);
}

}  // namespace texpup::cli
