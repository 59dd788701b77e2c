#include "surfreg/image_io.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>

namespace surfreg {

namespace {
std::uint8_t quantize(double v) {
  const double c = std::min(1.0, std::max(0.0, v));
  return static_cast<std::uint8_t>(std::lround(c * 255.0));
}
}  // namespace

void write_ppm(const std::string& path, const Image& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write ppm: " + path);
  out << "P6\n" << img.width << ' ' << img.height << "\n255\n";
  for (const Vec3& p : img.pixels) {
    const std::uint8_t rgb[3] = {quantize(p.x()), quantize(p.y()), quantize(p.z())};
    out.write(reinterpret_cast<const char*>(rgb), 3);
  }
}

Image read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read ppm: " + path);
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  if (magic != "P6" || maxval != 255)
    throw ConfigError("unsupported ppm (want binary P6, maxval 255): " + path);
  in.get();  // single whitespace after header
  Image img = Image::filled(w, h);
  std::vector<std::uint8_t> raw(static_cast<std::size_t>(w) * h * 3);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!in) throw ConfigError("truncated ppm: " + path);
  for (std::size_t i = 0; i < img.pixels.size(); ++i)
    img.pixels[i] = Vec3(raw[3 * i], raw[3 * i + 1], raw[3 * i + 2]) / 255.0;
  return img;
}

void write_float_map(const std::string& path, const std::vector<float>& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write float map: " + path);
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(float)));
}

std::vector<float> read_float_map(const std::string& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw ConfigError("cannot read float map: " + path);
  const auto bytes = static_cast<std::size_t>(in.tellg());
  if (bytes % sizeof(float) != 0) throw ConfigError("float map size not a multiple of 4: " + path);
  std::vector<float> data(bytes / sizeof(float));
  in.seekg(0);
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(bytes));
  return data;
}

std::vector<float> scalars_to_float(const std::vector<double>& v) {
  std::vector<float> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i]);
  return out;
}

std::vector<float> vectors_to_float(const std::vector<Vec3>& v) {
  std::vector<float> out(v.size() * 3);
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[3 * i] = static_cast<float>(v[i].x());
    out[3 * i + 1] = static_cast<float>(v[i].y());
    out[3 * i + 2] = static_cast<float>(v[i].z());
  }
  return out;
}

}  // namespace surfreg
