#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>

#include "surfreg/ray_geometry.hpp"

using namespace surfreg;

namespace {
Vec3 random_direction(Rng& rng) {
  const double z = rng.next_double(-1.0, 1.0);
  const double phi = rng.next_double(0.0, 2.0 * M_PI);
  const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
  return Vec3(r * std::cos(phi), r * std::sin(phi), z);
}
}  // namespace

TEST_CASE("degenerate frustum collapses to the planar isotropic Gaussian") {
  const auto m = frustum_moments(2.0, 2.0, 0.1);
  CHECK(m.t_mu == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(m.sigma_t2 == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(m.sigma_r2 == doctest::Approx(0.01).epsilon(1e-12));
}

TEST_CASE("thin frustum is within 1e-4 of the degenerate limit") {
  const double t0 = 1.0;
  const double t1 = t0 * (1.0 + 1e-6);
  const double rr = 0.2;
  const auto m = frustum_moments(t0, t1, rr);
  CHECK(std::abs(m.t_mu - t0) / t0 < 1e-4);
  CHECK(std::abs(m.sigma_t2) / (t0 * t0) < 1e-4);
  const double limit = rr * rr * m.t_mu * m.t_mu / 4.0;
  CHECK(std::abs(m.sigma_r2 - limit) / limit < 1e-4);
}

TEST_CASE("frustum mean stays inside the interval") {
  Rng rng(3);
  for (int k = 0; k < 500; ++k) {
    const double t0 = rng.next_double(0.05, 5.0);
    const double t1 = t0 + rng.next_double(0.0, 3.0);
    const auto m = frustum_moments(t0, t1, rng.next_double(1e-4, 0.5));
    CHECK(m.t_mu >= t0 - 1e-12);
    CHECK(m.t_mu <= t1 + 1e-12);
    CHECK(m.sigma_t2 >= 0.0);
    CHECK(m.sigma_r2 >= 0.0);
  }
}

TEST_CASE("moments converge monotonically to the limits") {
  const double t0 = 2.0;
  const double rr = 0.1;
  double prev_t = 1e300, prev_r = 1e300;
  for (int e = 1; e <= 8; ++e) {
    const double gap = std::pow(10.0, -e);
    const auto m = frustum_moments(t0, t0 + gap, rr);
    const double rel_t = m.sigma_t2 / (m.t_mu * m.t_mu);
    const double limit = rr * rr * m.t_mu * m.t_mu / 4.0;
    const double rel_r = std::abs(m.sigma_r2 - limit) / limit;
    CHECK(rel_t < prev_t);
    CHECK(rel_r <= prev_r);
    prev_t = rel_t;
    prev_r = rel_r;
  }
  CHECK(prev_t < 1e-6);
  CHECK(prev_r < 1e-6);
}

TEST_CASE("frustum rejects invalid intervals") {
  CHECK_THROWS_AS(frustum_moments(0.0, 1.0, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(frustum_moments(-1.0, 1.0, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(frustum_moments(2.0, 1.0, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(frustum_moments(1.0, 2.0, 0.0), std::invalid_argument);
}

TEST_CASE("lifted Gaussian along z has the projector structure") {
  Ray ray;
  ray.direction = Vec3(0.0, 0.0, 1.0);
  FrustumMoments m;
  m.t_mu = 1.5;
  m.sigma_t2 = 0.0;
  m.sigma_r2 = 0.3;
  const auto g = lift_gaussian(ray, m);
  CHECK((g.mean3 - Vec3(0.0, 0.0, 1.5)).norm() < 1e-15);
  Mat3 expected = Mat3::Zero();
  expected(0, 0) = 0.3;
  expected(1, 1) = 0.3;
  CHECK((g.cov3 - expected).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("lifted Gaussian trace identity and eigenstructure") {
  Rng rng(17);
  for (int k = 0; k < 100; ++k) {
    Ray ray;
    ray.origin = Vec3(rng.next_normal(), rng.next_normal(), rng.next_normal());
    ray.direction = random_direction(rng);
    FrustumMoments m;
    m.t_mu = rng.next_double(0.1, 4.0);
    m.sigma_t2 = rng.next_double(0.0, 0.5);
    m.sigma_r2 = rng.next_double(0.0, 0.5);
    const auto g = lift_gaussian(ray, m);
    CHECK(g.cov3.trace() == doctest::Approx(m.sigma_t2 + 2.0 * m.sigma_r2).epsilon(1e-12));
    CHECK((g.cov3 * ray.direction - m.sigma_t2 * ray.direction).norm() < 1e-12);
    CHECK((g.cov3 - g.cov3.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("rotation_between handles identity, quarter turn and antiparallel") {
  CHECK((rotation_between(Vec3(0, 0, 1), Vec3(0, 0, 1)) - Mat3::Identity())
            .cwiseAbs()
            .maxCoeff() < 1e-15);

  const Mat3 quarter = rotation_between(Vec3(1, 0, 0), Vec3(0, 1, 0));
  Mat3 expected;
  expected << 0, -1, 0, 1, 0, 0, 0, 0, 1;  // 90 degrees about z
  CHECK((quarter - expected).cwiseAbs().maxCoeff() < 1e-12);

  Rng rng(31);
  for (int k = 0; k < 50; ++k) {
    const Vec3 d = random_direction(rng);
    const Mat3 r = rotation_between(d, -d);
    CHECK((r * d + d).norm() < 1e-12);
    CHECK(std::abs(r.determinant() - 1.0) < 1e-12);
    CHECK((r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("rotation_between maps nearly antiparallel directions accurately") {
  Rng rng(77);
  for (int k = 0; k < 100; ++k) {
    const Vec3 a = random_direction(rng);
    Vec3 b = (-a + 1e-7 * random_direction(rng)).normalized();
    const Mat3 r = rotation_between(a, b);
    CHECK((r * a - b).norm() < 1e-10);
  }
}

TEST_CASE("rotation_between is the minimal-angle rotation") {
  Rng rng(13);
  for (int k = 0; k < 200; ++k) {
    const Vec3 a = random_direction(rng);
    const Vec3 b = random_direction(rng);
    const Mat3 r = rotation_between(a, b);
    CHECK((r * a - b).norm() < 1e-10);
    const double angle = std::acos(std::min(1.0, std::max(-1.0, (r.trace() - 1.0) / 2.0)));
    const double expected = std::acos(std::min(1.0, std::max(-1.0, a.dot(b))));
    CHECK(std::abs(angle - expected) < 1e-9);
  }
}

TEST_CASE("virtual rays preserve surface distance and covariance spectrum") {
  Rng rng(7);
  Ray ray;
  ray.origin = Vec3(0.3, -1.2, 2.0);
  ray.direction = random_direction(rng);
  const Vec3 x_star = ray.origin + 1.7 * ray.direction;

  // random symmetric PSD covariance
  Mat3 a;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) a(i, j) = rng.next_normal();
  const Mat3 cov = a * a.transpose();

  const SampleSphere sphere = rotated(make_sample_sphere({32, 0}), rotation_for(9, 0, 0));
  const VirtualRayBatch batch = build_virtual_rays(ray, x_star, cov, sphere);
  REQUIRE(batch.size() == 32);

  const double arm = (ray.origin - x_star).norm();
  Eigen::SelfAdjointEigenSolver<Mat3> base_eig(cov);
  for (int j = 0; j < batch.size(); ++j) {
    CHECK(std::abs((batch.origins[j] - x_star).norm() - arm) < 1e-9);
    CHECK((batch.rotations[j] * ray.direction - batch.directions[j]).norm() < 1e-10);
    Eigen::SelfAdjointEigenSolver<Mat3> eig(batch.covariances[j]);
    CHECK((eig.eigenvalues() - base_eig.eigenvalues()).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("virtual ray along the original direction is the original ray") {
  Ray ray;
  ray.origin = Vec3(1.0, 2.0, 3.0);
  ray.direction = Vec3(0.0, 1.0, 0.0);
  const Vec3 x_star = ray.origin + 2.0 * ray.direction;
  SampleSphere sphere;
  sphere.directions = {ray.direction};
  sphere.radii = {1.0};
  Mat3 cov = Mat3::Identity() * 0.2;
  const VirtualRayBatch batch = build_virtual_rays(ray, x_star, cov, sphere);
  CHECK((batch.origins[0] - ray.origin).norm() < 1e-12);
  CHECK((batch.covariances[0] - cov).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("isotropic covariance is invariant under the virtual-ray rotation") {
  Ray ray;
  ray.direction = Vec3(0.0, 0.0, 1.0);
  const Vec3 x_star(0.0, 0.0, 2.0);
  const Mat3 cov = 0.7 * Mat3::Identity();
  const SampleSphere sphere = make_sample_sphere({8, 0});
  const VirtualRayBatch batch = build_virtual_rays(ray, x_star, cov, sphere);
  for (int j = 0; j < batch.size(); ++j)
    CHECK((batch.covariances[j] - cov).cwiseAbs().maxCoeff() < 1e-12);
}
