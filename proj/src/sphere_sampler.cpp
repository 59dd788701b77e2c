#include "surfreg/sphere_sampler.hpp"

#include <cmath>
#include <stdexcept>

namespace surfreg {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
// 1/Phi with Phi the golden ratio.
const double kInvGolden = (std::sqrt(5.0) - 1.0) / 2.0;
}  // namespace

std::vector<Vec3> fibonacci_sphere(int n_samples) {
  if (n_samples < 1) throw std::invalid_argument("fibonacci_sphere: n_samples must be >= 1");
  const double n = static_cast<double>(n_samples);
  std::vector<Vec3> dirs;
  dirs.reserve(n_samples);
  for (int j = 0; j < n_samples; ++j) {
    const double i = static_cast<double>(j + 1);  // 1-based lattice index
    const double w = (n - 2.0 * i + 1.0) / n;
    const double rho = std::sqrt(std::max(0.0, 1.0 - w * w));
    const double azimuth = kTwoPi * i * kInvGolden;
    dirs.emplace_back(w, rho * std::cos(azimuth), rho * std::sin(azimuth));
  }
  return dirs;
}

std::vector<double> shell_radii(int n_samples) {
  if (n_samples < 2 || !is_power_of_two(static_cast<std::uint64_t>(n_samples)))
    throw std::invalid_argument("shell_radii: n_samples must be a power of two >= 2");
  const int shells = integer_log2(static_cast<std::uint64_t>(n_samples));
  std::vector<double> radii(n_samples);
  for (int j = 0; j < n_samples; ++j)
    radii[j] = (1.0 + static_cast<double>(j % shells)) / static_cast<double>(shells);
  return radii;
}

std::vector<Vec3> ball_partition(const std::vector<Vec3>& directions) {
  const auto radii = shell_radii(static_cast<int>(directions.size()));
  std::vector<Vec3> points(directions.size());
  for (std::size_t j = 0; j < directions.size(); ++j) points[j] = radii[j] * directions[j];
  return points;
}

Mat3 rotation_from_uniforms(double u1, double u2, double u3) {
  const double theta = kTwoPi * u1;
  Mat3 rz;
  rz << std::cos(theta), std::sin(theta), 0.0,
      -std::sin(theta), std::cos(theta), 0.0,
      0.0, 0.0, 1.0;
  const double phi = kTwoPi * u2;
  const double s = std::sqrt(u3);
  const Vec3 v(std::cos(phi) * s, std::sin(phi) * s, std::sqrt(1.0 - u3));
  const Mat3 h = 2.0 * v * v.transpose() - Mat3::Identity();
  return h * rz;
}

Mat3 random_rotation(Rng& rng) {
  const double u1 = rng.next_double();
  const double u2 = rng.next_double();
  const double u3 = rng.next_double();
  return rotation_from_uniforms(u1, u2, u3);
}

Mat3 rotation_for(std::uint64_t seed, std::uint64_t iteration, std::uint64_t ray) {
  Rng rng = keyed_rng(seed, iteration, ray);
  return random_rotation(rng);
}

SampleSphere make_sample_sphere(const LatticeConfig& config) {
  if (config.n_samples < 2 || !is_power_of_two(static_cast<std::uint64_t>(config.n_samples)))
    throw std::invalid_argument("make_sample_sphere: n_samples must be a power of two >= 2");
  SampleSphere sphere;
  sphere.directions = fibonacci_sphere(config.n_samples);
  sphere.radii = shell_radii(config.n_samples);
  sphere.rotation = Mat3::Identity();
  return sphere;
}

SampleSphere rotated(const SampleSphere& sphere, const Mat3& rot) {
  SampleSphere out;
  out.directions.reserve(sphere.directions.size());
  for (const Vec3& d : sphere.directions) out.directions.push_back(rot * d);
  out.radii = sphere.radii;
  out.rotation = rot * sphere.rotation;
  return out;
}

}  // namespace surfreg
