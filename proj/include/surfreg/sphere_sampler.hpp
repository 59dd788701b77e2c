#pragma once

#include <cstdint>
#include <vector>

#include "surfreg/common.hpp"

namespace surfreg {

/// Configuration of the deterministic sphere lattice.
struct LatticeConfig {
  int n_samples = 32;      // must be a power of two >= 2
  std::uint64_t seed = 0;  // rotation stream seed
};

/// N deterministic near-uniform directions on the unit sphere plus shell
/// radii covering the unit ball. `directions` already carry `rotation`;
/// ball_point(i) = radii[i] * directions[i].
struct SampleSphere {
  std::vector<Vec3> directions;
  std::vector<double> radii;
  Mat3 rotation = Mat3::Identity();

  int size() const { return static_cast<int>(directions.size()); }
  Vec3 ball_point(int i) const { return radii[i] * directions[i]; }
};

/// Golden-ratio lattice directions on the unit sphere.
///
/// Polar coordinate w_i = (N - 2i + 1)/N for i in {1,...,N} (the uniform
/// kappa->0 limit of the von Mises-Fisher lattice), azimuth 2*pi*i/Phi with
/// 1/Phi = (sqrt(5)-1)/2. The returned vectors are exactly unit norm.
std::vector<Vec3> fibonacci_sphere(int n_samples);

/// Shell radius per sample index: (1/log2(N)) * (1 + (i mod log2(N))),
/// i = 0,...,N-1. Throws std::invalid_argument unless N is a power of two
/// with N >= 2 (shells would be uneven otherwise).
std::vector<double> shell_radii(int n_samples);

/// Scales lattice directions onto log2(N) concentric shells of the unit
/// ball. Directions are preserved exactly: x_i / |x_i| == directions[i].
std::vector<Vec3> ball_partition(const std::vector<Vec3>& directions);

/// Uniform SO(3) rotation from three uniform [0,1) variates (Arvo's method):
/// a rotation about z composed with a rotation by pi about a random axis.
Mat3 rotation_from_uniforms(double u1, double u2, double u3);

/// Uniform random rotation from a seeded stream.
Mat3 random_rotation(Rng& rng);

/// Counter-based rotation draw keyed on (seed, iteration, ray). Identical
/// keys give identical matrices; distinct keys give independent draws, so
/// concurrent ray workers need no shared state.
Mat3 rotation_for(std::uint64_t seed, std::uint64_t iteration, std::uint64_t ray);

/// Builds the unrotated lattice (rotation = identity).
SampleSphere make_sample_sphere(const LatticeConfig& config);

/// Returns a copy of the sphere with `rot` composed onto it.
SampleSphere rotated(const SampleSphere& sphere, const Mat3& rot);

}  // namespace surfreg
