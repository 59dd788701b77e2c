#pragma once

#include <vector>

#include "surfreg/common.hpp"
#include "surfreg/sphere_sampler.hpp"

namespace surfreg {

/// A pixel cone: origin, unit direction and the footprint radius growth rate
/// per unit distance along the ray.
struct Ray {
  Vec3 origin = Vec3::Zero();
  Vec3 direction = Vec3(0.0, 0.0, 1.0);
  double radius_rate = 1e-3;
};

/// Gaussian approximation of a conical frustum: along-ray moments plus the
/// lifted 3D mean/covariance.
struct ConicalGaussian {
  double t_mu = 0.0;      // mean distance along the ray
  double sigma_t2 = 0.0;  // along-ray variance
  double sigma_r2 = 0.0;  // radial variance
  Vec3 mean3 = Vec3::Zero();
  Mat3 cov3 = Mat3::Zero();
};

struct FrustumMoments {
  double t_mu = 0.0;
  double sigma_t2 = 0.0;
  double sigma_r2 = 0.0;
};

/// Virtual rays rotated about a surface point: each keeps the original
/// distance to the surface and a similarity-transformed covariance.
struct VirtualRayBatch {
  std::vector<Vec3> origins;
  std::vector<Vec3> directions;
  std::vector<Mat3> covariances;
  std::vector<Mat3> rotations;

  int size() const { return static_cast<int>(origins.size()); }
};

/// Conical-frustum Gaussian moments over [t0, t1] in the numerically stable
/// difference form; the naive moment expressions cancel catastrophically as
/// t1 -> t0, which is exactly the regime converged samples live in. Limits:
/// t_mu -> t0, sigma_t2 -> 0, sigma_r2 -> radius_rate^2 * t_mu^2 / 4.
/// Throws std::invalid_argument on t0 <= 0 or t1 < t0.
FrustumMoments frustum_moments(double t0, double t1, double radius_rate);

/// Lifts along-ray moments to a world-space Gaussian:
/// mean = o + t_mu d, cov = sigma_t2 d d^T + sigma_r2 (I - d d^T).
ConicalGaussian lift_gaussian(const Ray& ray, const FrustumMoments& m);

/// Minimal-angle rotation taking d_from to d_to (axis = d_from x d_to).
/// The antiparallel case returns a 180-degree rotation about a deterministic
/// axis orthogonal to d_from.
Mat3 rotation_between(const Vec3& d_from, const Vec3& d_to);

/// For each sphere direction d_s, rotates the ray about x_star:
/// o_s = R (o - x_star) + x_star, cov_s = R cov_star R^T, with
/// R = rotation_between(ray.direction, d_s). All virtual rays sit at the
/// original distance from the surface point.
VirtualRayBatch build_virtual_rays(const Ray& ray, const Vec3& x_star,
                                   const Mat3& cov_star, const SampleSphere& sphere);

}  // namespace surfreg
