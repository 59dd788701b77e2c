#pragma once

#include <string>
#include <vector>

#include "surfreg/common.hpp"

namespace surfreg {

/// Row-major RGB image with channels in [0, 1].
struct Image {
  int width = 0;
  int height = 0;
  std::vector<Vec3> pixels;

  Vec3& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  const Vec3& at(int x, int y) const {
    return pixels[static_cast<std::size_t>(y) * width + x];
  }
  static Image filled(int w, int h, const Vec3& v = Vec3::Zero()) {
    Image img;
    img.width = w;
    img.height = h;
    img.pixels.assign(static_cast<std::size_t>(w) * h, v);
    return img;
  }
};

void write_ppm(const std::string& path, const Image& img);
Image read_ppm(const std::string& path);

/// Flat little-endian float32 blobs (W*H scalars or W*H*3 vectors, row-major).
void write_float_map(const std::string& path, const std::vector<float>& data);
std::vector<float> read_float_map(const std::string& path);

std::vector<float> scalars_to_float(const std::vector<double>& v);
std::vector<float> vectors_to_float(const std::vector<Vec3>& v);

}  // namespace surfreg
