#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace texpup::io {

static_assert(std::endian::native == std::endian::little,
              "raw float buffers are written in native order and the formats "
              "are specified little-endian");

/// Raw row-major little-endian f32 buffer with a JSON sidecar at
/// `path + ".json"` describing shape, dtype and role.
inline void write_f32(const std::string& path, const std::vector<float>& data,
                      const std::vector<std::size_t>& shape,
                      const std::string& role) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  if (n != data.size()) throw std::invalid_argument("f32: shape mismatch");
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("f32: cannot write " + path);
  f.write(reinterpret_cast<const char*>(data.data()),
          static_cast<std::streamsize>(data.size() * sizeof(float)));
  if (!f) throw std::runtime_error("f32: write failed " + path);

  nlohmann::json side = {{"shape", shape}, {"dtype", "f32le"}, {"role", role}};
  std::ofstream sf(path + ".json", std::ios::trunc);
  sf << side.dump(2) << "\n";
  if (!sf) throw std::runtime_error("f32: sidecar write failed " + path);
}

inline std::vector<float> read_f32(const std::string& path,
                                   std::vector<std::size_t>* shape = nullptr,
                                   std::string* role = nullptr) {
  std::ifstream sf(path + ".json");
  if (!sf) throw std::runtime_error("f32: missing sidecar for " + path);
  nlohmann::json side = nlohmann::json::parse(sf);
  std::vector<std::size_t> s = side.at("shape").get<std::vector<std::size_t>>();
  if (side.at("dtype") != "f32le")
    throw std::runtime_error("f32: unexpected dtype in " + path);
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;

  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("f32: cannot read " + path);
  std::vector<float> data(n);
  f.read(reinterpret_cast<char*>(data.data()),
         static_cast<std::streamsize>(n * sizeof(float)));
  if (!f) throw std::runtime_error("f32: truncated " + path);
  if (shape) *shape = std::move(s);
  if (role) *role = side.at("role");
  return data;
}

}  // namespace texpup::io
