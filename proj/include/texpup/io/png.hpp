#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <zlib.h>

namespace texpup::io {

/// 8-bit image, row-major, channels interleaved (1 = gray, 3 = RGB).
struct Image8 {
  int w = 0, h = 0, channels = 0;
  std::vector<std::uint8_t> pixels;

  std::uint8_t at(int y, int x, int c) const {
    return pixels[(static_cast<std::size_t>(y) * w + x) * channels + c];
  }
  std::uint8_t& at(int y, int x, int c) {
    return pixels[(static_cast<std::size_t>(y) * w + x) * channels + c];
  }
};

namespace detail {

inline void put_u32(std::vector<std::uint8_t>& v, std::uint32_t x) {
  v.push_back((x >> 24) & 0xff);
  v.push_back((x >> 16) & 0xff);
  v.push_back((x >> 8) & 0xff);
  v.push_back(x & 0xff);
}

inline std::uint32_t crc32_of(const std::uint8_t* p, std::size_t n) {
  return static_cast<std::uint32_t>(
      ::crc32(::crc32(0L, nullptr, 0), p, static_cast<uInt>(n)));
}

inline void put_chunk(std::vector<std::uint8_t>& out, const char type[4],
                      const std::vector<std::uint8_t>& data) {
  put_u32(out, static_cast<std::uint32_t>(data.size()));
  std::size_t start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data.begin(), data.end());
  put_u32(out, crc32_of(out.data() + start, out.size() - start));
}

inline int paeth(int a, int b, int c) {
  int p = a + b - c;
  int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

}  // namespace detail

/// Writes an 8-bit gray or RGB PNG (filter 0 on every row).
inline void write_png(const std::string& path, const Image8& img) {
  if (img.channels != 1 && img.channels != 3)
    throw std::invalid_argument("png: channels must be 1 or 3");
  if (img.pixels.size() !=
      static_cast<std::size_t>(img.w) * img.h * img.channels)
    throw std::invalid_argument("png: pixel buffer size");

  std::size_t stride = static_cast<std::size_t>(img.w) * img.channels;
  std::vector<std::uint8_t> raw;
  raw.reserve((stride + 1) * img.h);
  for (int y = 0; y < img.h; ++y) {
    raw.push_back(0);  // filter type none
    raw.insert(raw.end(), img.pixels.begin() + y * stride,
               img.pixels.begin() + (y + 1) * stride);
  }
  uLongf zlen = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> z(zlen);
  if (compress2(z.data(), &zlen, raw.data(), static_cast<uLong>(raw.size()),
                6) != Z_OK)
    throw std::runtime_error("png: deflate failed");
  z.resize(zlen);

  std::vector<std::uint8_t> out = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
  std::vector<std::uint8_t> ihdr;
  detail::put_u32(ihdr, static_cast<std::uint32_t>(img.w));
  detail::put_u32(ihdr, static_cast<std::uint32_t>(img.h));
  ihdr.push_back(8);                                // bit depth
  ihdr.push_back(img.channels == 3 ? 2 : 0);        // color type
  ihdr.push_back(0);
  ihdr.push_back(0);
  ihdr.push_back(0);
  detail::put_chunk(out, "IHDR", ihdr);
  detail::put_chunk(out, "IDAT", z);
  detail::put_chunk(out, "IEND", {});

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("png: cannot write " + path);
  f.write(reinterpret_cast<const char*>(out.data()),
          static_cast<std::streamsize>(out.size()));
  if (!f) throw std::runtime_error("png: write failed " + path);
}

/// Reads 8-bit gray or RGB non-interlaced PNGs (the subset this project
/// writes; all five row filters are handled).
inline Image8 read_png(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("png: cannot read " + path);
  std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(f)),
                                std::istreambuf_iterator<char>());
  static const std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
  if (buf.size() < 8 || std::memcmp(buf.data(), sig, 8) != 0)
    throw std::runtime_error("png: bad signature in " + path);

  auto u32 = [&buf](std::size_t off) {
    return (static_cast<std::uint32_t>(buf[off]) << 24) |
           (static_cast<std::uint32_t>(buf[off + 1]) << 16) |
           (static_cast<std::uint32_t>(buf[off + 2]) << 8) |
           static_cast<std::uint32_t>(buf[off + 3]);
  };

  Image8 img;
  std::vector<std::uint8_t> idat;
  std::size_t off = 8;
  while (off + 8 <= buf.size()) {
    std::uint32_t len = u32(off);
    std::string type(reinterpret_cast<const char*>(&buf[off + 4]), 4);
    std::size_t data = off + 8;
    if (data + len > buf.size()) throw std::runtime_error("png: truncated " + path);
    if (type == "IHDR") {
      img.w = static_cast<int>(u32(data));
      img.h = static_cast<int>(u32(data + 4));
      int depth = buf[data + 8], color = buf[data + 9];
      if (depth != 8 || (color != 0 && color != 2) || buf[data + 12] != 0)
        throw std::runtime_error("png: unsupported format in " + path);
      img.channels = color == 2 ? 3 : 1;
    } else if (type == "IDAT") {
      idat.insert(idat.end(), buf.begin() + data, buf.begin() + data + len);
    } else if (type == "IEND") {
      break;
    }
    off = data + len + 4;  // skip CRC
  }
  if (img.w <= 0 || img.h <= 0) throw std::runtime_error("png: no IHDR in " + path);

  std::size_t stride = static_cast<std::size_t>(img.w) * img.channels;
  std::vector<std::uint8_t> raw((stride + 1) * img.h);
  uLongf rlen = static_cast<uLongf>(raw.size());
  if (uncompress(raw.data(), &rlen, idat.data(), static_cast<uLong>(idat.size())) !=
          Z_OK ||
      rlen != raw.size())
    throw std::runtime_error("png: inflate failed for " + path);

  img.pixels.assign(stride * img.h, 0);
  int bpp = img.channels;
  for (int y = 0; y < img.h; ++y) {
    std::uint8_t filter = raw[y * (stride + 1)];
    const std::uint8_t* src = &raw[y * (stride + 1) + 1];
    std::uint8_t* dst = &img.pixels[y * stride];
    const std::uint8_t* up = y > 0 ? &img.pixels[(y - 1) * stride] : nullptr;
    for (std::size_t x = 0; x < stride; ++x) {
      int a = x >= static_cast<std::size_t>(bpp) ? dst[x - bpp] : 0;
      int b = up ? up[x] : 0;
      int c = (up && x >= static_cast<std::size_t>(bpp)) ? up[x - bpp] : 0;
      int v = src[x];
      switch (filter) {
        case 0: break;
        case 1: v += a; break;
        case 2: v += b; break;
        case 3: v += (a + b) / 2; break;
        case 4: v += detail::paeth(a, b, c); break;
        default: throw std::runtime_error("png: bad filter in " + path);
      }
      dst[x] = static_cast<std::uint8_t>(v & 0xff);
    }
  }
  return img;
}

}  // namespace texpup::io
