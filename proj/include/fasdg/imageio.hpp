#ifndef FASDG_IMAGEIO_HPP_
#define FASDG_IMAGEIO_HPP_

#include "fasdg/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace fasdg {

inline unsigned char to_byte(double v) {
  return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

/// Binary PPM (3 channels) or PGM (1 channel), 8 bits per sample.
inline void write_netpbm(const std::filesystem::path& path, const Image& im) {
  if (im.channels != 1 && im.channels != 3) {
    throw UsageError("netpbm output needs 1 or 3 channels, got " + std::to_string(im.channels));
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write " + path.string());
  os << (im.channels == 3 ? "P6" : "P5") << "\n" << im.width << " " << im.height << "\n255\n";
  std::vector<unsigned char> buf(static_cast<std::size_t>(im.width * im.height * im.channels));
  std::size_t k = 0;
  for (int y = 0; y < im.height; ++y) {
    for (int x = 0; x < im.width; ++x) {
      for (int c = 0; c < im.channels; ++c) buf[k++] = to_byte(im.at(c, y, x));
    }
  }
  os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!os) throw DataError("short write to " + path.string());
}

inline Image read_netpbm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot read " + path.string());
  std::string magic;
  int w = 0;
  int h = 0;
  int maxval = 0;
  is >> magic >> w >> h >> maxval;
  if ((magic != "P6" && magic != "P5") || w <= 0 || h <= 0 || maxval != 255) {
    throw DataError("unsupported image header in " + path.string());
  }
  is.get();
  const int channels = magic == "P6" ? 3 : 1;
  std::vector<unsigned char> buf(static_cast<std::size_t>(w * h * channels));
  is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!is) throw DataError("truncated image " + path.string());
  Image im(channels, h, w);
  std::size_t k = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < channels; ++c) im.at(c, y, x) = buf[k++] / 255.0;
    }
  }
  return im;
}

}  // namespace fasdg

#endif  // FASDG_IMAGEIO_HPP_
