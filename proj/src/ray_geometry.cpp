#include "surfreg/ray_geometry.hpp"

#include <cmath>
#include <stdexcept>

namespace surfreg {

FrustumMoments frustum_moments(double t0, double t1, double radius_rate) {
  if (t0 <= 0.0) throw std::invalid_argument("frustum_moments: t0 must be > 0");
  if (t1 < t0) throw std::invalid_argument("frustum_moments: t1 must be >= t0");
  if (radius_rate <= 0.0) throw std::invalid_argument("frustum_moments: radius_rate must be > 0");

  const double tm = 0.5 * (t0 + t1);
  const double td = 0.5 * (t1 - t0);
  const double tm2 = tm * tm;
  const double td2 = td * td;
  const double denom = 3.0 * tm2 + td2;

  FrustumMoments m;
  m.t_mu = tm + 2.0 * tm * td2 / denom;
  m.sigma_t2 = td2 / 3.0 - (4.0 * td2 * td2 * (12.0 * tm2 - td2)) / (15.0 * denom * denom);
  m.sigma_r2 = radius_rate * radius_rate *
               (tm2 / 4.0 + 5.0 * td2 / 12.0 - 4.0 * td2 * td2 / (15.0 * denom));
  // Tiny negatives from rounding are clamped; the analytic values are >= 0.
  m.sigma_t2 = std::max(m.sigma_t2, 0.0);
  m.sigma_r2 = std::max(m.sigma_r2, 0.0);
  return m;
}

ConicalGaussian lift_gaussian(const Ray& ray, const FrustumMoments& m) {
  ConicalGaussian g;
  g.t_mu = m.t_mu;
  g.sigma_t2 = m.sigma_t2;
  g.sigma_r2 = m.sigma_r2;
  g.mean3 = ray.origin + m.t_mu * ray.direction;
  const Mat3 outer = ray.direction * ray.direction.transpose();
  g.cov3 = m.sigma_t2 * outer + m.sigma_r2 * (Mat3::Identity() - outer);
  return g;
}

namespace {

// Axis orthogonal to d, built from the least-aligned canonical basis vector
// so the antiparallel branch is deterministic.
Vec3 orthogonal_axis(const Vec3& d) {
  int least = 0;
  double best = std::abs(d.x());
  if (std::abs(d.y()) < best) {
    least = 1;
    best = std::abs(d.y());
  }
  if (std::abs(d.z()) < best) least = 2;
  Vec3 e = Vec3::Zero();
  e[least] = 1.0;
  return d.cross(e).normalized();
}

}  // namespace

Mat3 rotation_between(const Vec3& d_from, const Vec3& d_to) {
  // Two reflections: through the bisector plane, then through d_to's plane.
  // This fixes the axis d_from x d_to (minimal-angle rotation) and maps
  // d_from to d_to at machine precision even for nearly antiparallel pairs.
  const Vec3 sum = d_from + d_to;
  const double sn = sum.norm();
  if (sn < 1e-12) {
    const Vec3 axis = orthogonal_axis(d_from);
    return 2.0 * axis * axis.transpose() - Mat3::Identity();
  }
  const Vec3 m = sum / sn;
  const double bm = d_to.dot(m);
  return Mat3::Identity() - 2.0 * (m * m.transpose()) - 2.0 * (d_to * d_to.transpose()) +
         4.0 * bm * (d_to * m.transpose());
}

VirtualRayBatch build_virtual_rays(const Ray& ray, const Vec3& x_star,
                                   const Mat3& cov_star, const SampleSphere& sphere) {
  VirtualRayBatch batch;
  const int n = sphere.size();
  batch.origins.reserve(n);
  batch.directions.reserve(n);
  batch.covariances.reserve(n);
  batch.rotations.reserve(n);
  const Vec3 arm = ray.origin - x_star;
  for (int j = 0; j < n; ++j) {
    const Vec3& ds = sphere.directions[j];
    const Mat3 rot = rotation_between(ray.direction, ds);
    batch.rotations.push_back(rot);
    batch.directions.push_back(ds);
    batch.origins.push_back(rot * arm + x_star);
    batch.covariances.push_back(rot * cov_star * rot.transpose());
  }
  return batch;
}

}  // namespace surfreg
