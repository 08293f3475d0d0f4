#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "texpup/core/config.hpp"
#include "texpup/core/params.hpp"

namespace texpup {

/// Checkpoint container. Layout:
///   bytes 0..3   magic "TPUP"
///   u32 LE       format version (currently 1)
///   u32 LE       header length in bytes
///   header       JSON: {"config": ..., "extra": ..., "entries":
///                [{"name": ..., "shape": [...]}, ...]}
///   payload      entries in header order, row-major little-endian f32
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  ModelConfig config;
  nlohmann::json extra;  // network-specific metadata (variant, resolution, ...)
  ParamSet params;

  void save(const std::string& path) const {
    nlohmann::json header;
    header["config"] = config.to_json();
    header["extra"] = extra;
    auto& entries = header["entries"] = nlohmann::json::array();
    for (const auto& [name, t] : params) {
      entries.push_back({{"name", name}, {"shape", t.shape}});
    }
    std::string hs = header.dump();

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("checkpoint: cannot write " + path);
    f.write("TPUP", 4);
    write_u32(f, kVersion);
    write_u32(f, static_cast<std::uint32_t>(hs.size()));
    f.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    for (const auto& [name, t] : params) {
      std::vector<float> buf(t.size());
      for (std::size_t i = 0; i < t.size(); ++i)
        buf[i] = static_cast<float>(t[i]);
      f.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(float)));
    }
    if (!f) throw std::runtime_error("checkpoint: write failed " + path);
  }

  static Checkpoint load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("checkpoint: cannot read " + path);
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, "TPUP", 4) != 0)
      throw std::runtime_error("checkpoint: bad magic in " + path);
    std::uint32_t version = read_u32(f);
    if (version != kVersion)
      throw std::runtime_error("checkpoint: unsupported version " +
                               std::to_string(version));
    std::uint32_t hlen = read_u32(f);
    std::string hs(hlen, '\0');
    f.read(hs.data(), hlen);
    nlohmann::json header = nlohmann::json::parse(hs);

    Checkpoint ck;
    ck.config = ModelConfig::from_json(header.at("config"));
    ck.extra = header.value("extra", nlohmann::json::object());
    for (const auto& e : header.at("entries")) {
      std::vector<std::size_t> shape = e.at("shape");
      Tensor t(shape);
      std::vector<float> buf(t.size());
      f.read(reinterpret_cast<char*>(buf.data()),
             static_cast<std::streamsize>(buf.size() * sizeof(float)));
      if (!f) throw std::runtime_error("checkpoint: truncated " + path);
      for (std::size_t i = 0; i < t.size(); ++i)
        t[i] = static_cast<double>(buf[i]);
      ck.params.add(e.at("name"), std::move(t));
    }
    return ck;
  }

 private:
  static void write_u32(std::ofstream& f, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    f.write(reinterpret_cast<const char*>(b), 4);
  }
  static std::uint32_t read_u32(std::ifstream& f) {
    unsigned char b[4];
    f.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) |
           (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) |
           (static_cast<std::uint32_t>(b[3]) << 24);
  }
};

}  // namespace texpup
