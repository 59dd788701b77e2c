#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>

#include "surfreg/sphere_sampler.hpp"

using namespace surfreg;

namespace {

Vec3 random_direction(Rng& rng) {
  const double z = rng.next_double(-1.0, 1.0);
  const double phi = rng.next_double(0.0, 2.0 * M_PI);
  const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
  return Vec3(r * std::cos(phi), r * std::sin(phi), z);
}

// w(kappa) of the lattice polar coordinate before the uniform limit;
// evaluated at tiny kappa it must approach the closed-form limit.
double vmf_w(double kappa, int i, int n) {
  return 1.0 + std::log1p((2.0 * i - 1.0) / (2.0 * n) * std::expm1(-2.0 * kappa)) / kappa;
}

double min_pairwise_angle(const std::vector<Vec3>& dirs) {
  double min_angle = M_PI;
  for (std::size_t a = 0; a < dirs.size(); ++a)
    for (std::size_t b = a + 1; b < dirs.size(); ++b) {
      const double d = std::min(1.0, std::max(-1.0, dirs[a].dot(dirs[b])));
      min_angle = std::min(min_angle, std::acos(d));
    }
  return min_angle;
}

}  // namespace

TEST_CASE("fibonacci lattice polar coordinates for n=4") {
  const auto dirs = fibonacci_sphere(4);
  REQUIRE(dirs.size() == 4);
  CHECK(dirs[0].x() == doctest::Approx(0.75).epsilon(1e-14));
  CHECK(dirs[1].x() == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(dirs[2].x() == doctest::Approx(-0.25).epsilon(1e-14));
  CHECK(dirs[3].x() == doctest::Approx(-0.75).epsilon(1e-14));
}

TEST_CASE("fibonacci lattice directions are unit norm") {
  for (int n : {1, 2, 4, 32, 33, 128}) {
    for (const Vec3& d : fibonacci_sphere(n)) CHECK(std::abs(d.norm() - 1.0) < 1e-12);
  }
}

TEST_CASE("single sample sits on the equator at the golden azimuth") {
  const auto dirs = fibonacci_sphere(1);
  const double azimuth = 2.0 * M_PI * (std::sqrt(5.0) - 1.0) / 2.0;
  CHECK(dirs[0].x() == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(dirs[0].y() == doctest::Approx(std::cos(azimuth)).epsilon(1e-12));
  CHECK(dirs[0].z() == doctest::Approx(std::sin(azimuth)).epsilon(1e-12));
}

TEST_CASE("closed-form polar coordinate matches the numeric vMF limit") {
  const int n = 32;
  const auto dirs = fibonacci_sphere(n);
  for (int i = 1; i <= n; ++i) {
    const double numeric = vmf_w(1e-8, i, n);
    CHECK(std::abs(dirs[i - 1].x() - numeric) < 1e-6);
  }
}

TEST_CASE("ball partition: n=32 shell radii and multiplicities") {
  const auto radii = shell_radii(32);
  std::map<long, int> counts;  // radius scaled to avoid float keys
  for (double r : radii) counts[std::lround(r * 10)]++;
  REQUIRE(counts.size() == 5);
  CHECK(counts[2] == 7);
  CHECK(counts[4] == 7);
  CHECK(counts[6] == 6);
  CHECK(counts[8] == 6);
  CHECK(counts[10] == 6);
}

TEST_CASE("ball partition: n=4 radii alternate with index parity") {
  const auto radii = shell_radii(4);
  CHECK(radii[0] == doctest::Approx(0.5));
  CHECK(radii[1] == doctest::Approx(1.0));
  CHECK(radii[2] == doctest::Approx(0.5));
  CHECK(radii[3] == doctest::Approx(1.0));
}

TEST_CASE("ball partition stays in the unit ball and preserves directions") {
  const auto dirs = fibonacci_sphere(64);
  const auto points = ball_partition(dirs);
  for (std::size_t i = 0; i < points.size(); ++i) {
    CHECK(points[i].norm() <= 1.0 + 1e-12);
    CHECK((points[i] / points[i].norm() - dirs[i]).norm() < 1e-14);
  }
}

TEST_CASE("ball partition rejects sizes that are not powers of two") {
  CHECK_THROWS_AS(shell_radii(12), std::invalid_argument);
  CHECK_THROWS_AS(shell_radii(1), std::invalid_argument);
  CHECK_THROWS_AS(shell_radii(0), std::invalid_argument);
  CHECK_THROWS_AS(make_sample_sphere({24, 0}), std::invalid_argument);
}

TEST_CASE("random rotations are orthonormal with determinant +1") {
  Rng rng(7);
  for (int k = 0; k < 200; ++k) {
    const Mat3 r = random_rotation(rng);
    CHECK((r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(std::abs(r.determinant() - 1.0) < 1e-12);
    const Vec3 v = random_direction(rng) * rng.next_double(0.1, 5.0);
    CHECK(std::abs((r * v).norm() - v.norm()) < 1e-12);
  }
}

TEST_CASE("counter-based rotations replay exactly and differ across keys") {
  const Mat3 a = rotation_for(42, 3, 17);
  const Mat3 b = rotation_for(42, 3, 17);
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
  CHECK((rotation_for(42, 3, 18) - a).cwiseAbs().maxCoeff() > 1e-6);
  CHECK((rotation_for(42, 4, 17) - a).cwiseAbs().maxCoeff() > 1e-6);
  CHECK((rotation_for(43, 3, 17) - a).cwiseAbs().maxCoeff() > 1e-6);
}

TEST_CASE("rotation images of a fixed vector are uniform over caps") {
  const int draws = 100000;
  Rng rng(123);
  const double caps[] = {-0.5, 0.0, 0.5, 0.9};
  int counts[4] = {0, 0, 0, 0};
  for (int k = 0; k < draws; ++k) {
    const Vec3 img = random_rotation(rng) * Vec3(0.0, 0.0, 1.0);
    for (int c = 0; c < 4; ++c)
      if (img.z() > caps[c]) ++counts[c];
  }
  for (int c = 0; c < 4; ++c) {
    const double f = 0.5 * (1.0 - caps[c]);  // cap area fraction
    const double sigma = std::sqrt(draws * f * (1.0 - f));
    CHECK(std::abs(counts[c] - draws * f) <= 3.0 * sigma);
  }
}

TEST_CASE("rotated lattice cap occupancy averages to the cap area") {
  const SampleSphere base = make_sample_sphere({32, 0});
  Rng rng(99);
  const double fractions[] = {0.1, 0.25, 0.5};
  for (double f : fractions) {
    const double z_min = 1.0 - 2.0 * f;
    const Vec3 axis = random_direction(rng);
    double occupancy = 0.0;
    const int rotations = 1500;
    for (int k = 0; k < rotations; ++k) {
      const Mat3 r = random_rotation(rng);
      int in_cap = 0;
      for (const Vec3& d : base.directions)
        if ((r * d).dot(axis) > z_min) ++in_cap;
      occupancy += static_cast<double>(in_cap) / base.size();
    }
    occupancy /= rotations;
    CHECK(std::abs(occupancy - f) < 0.02);
  }
}

TEST_CASE("lattice avoids the clustering of uniform random direction sets") {
  const auto lattice = fibonacci_sphere(32);
  const double lattice_min = min_pairwise_angle(lattice);
  Rng rng(2024);
  double worst_random = M_PI;
  for (int draw = 0; draw < 1000; ++draw) {
    std::vector<Vec3> dirs(32);
    for (Vec3& d : dirs) d = random_direction(rng);
    worst_random = std::min(worst_random, min_pairwise_angle(dirs));
  }
  CHECK(lattice_min > worst_random);
}

TEST_CASE("rotation commutes with the shell partition") {
  const auto dirs = fibonacci_sphere(32);
  Rng rng(5);
  const Mat3 r = random_rotation(rng);
  std::vector<Vec3> rotated_dirs;
  for (const Vec3& d : dirs) rotated_dirs.push_back(r * d);
  const auto partition_then_rotate = ball_partition(dirs);
  const auto rotate_then_partition = ball_partition(rotated_dirs);
  for (std::size_t i = 0; i < dirs.size(); ++i)
    CHECK((r * partition_then_rotate[i] - rotate_then_partition[i]).norm() < 1e-12);
}

TEST_CASE("sample sphere carries its rotation") {
  const SampleSphere base = make_sample_sphere({32, 0});
  Rng rng(11);
  const Mat3 r = random_rotation(rng);
  const SampleSphere rot = rotated(base, r);
  CHECK((rot.rotation - r).cwiseAbs().maxCoeff() < 1e-15);
  for (int i = 0; i < base.size(); ++i) {
    CHECK((rot.directions[i] - r * base.directions[i]).norm() < 1e-15);
    CHECK(rot.radii[i] == base.radii[i]);
    CHECK(std::abs(rot.directions[i].norm() - 1.0) < 1e-12);
  }
}
