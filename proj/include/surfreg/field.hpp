#pragma once

#include <optional>

#include "surfreg/common.hpp"

namespace surfreg {

/// A single field probe: position, unit viewing direction and (optionally)
/// the sample covariance. The covariance is recorded for encodings that can
/// integrate over it; the bundled fields do not consume it.
struct FieldQuery {
  Vec3 position = Vec3::Zero();
  Vec3 direction = Vec3(0.0, 0.0, 1.0);
  std::optional<Mat3> covariance;
};

/// Field response at a point. `normal` is unit unless `degenerate_normal`
/// is set (density gradient below 1e-9). All color channels lie in [0, 1].
struct FieldOutput {
  double tau = 0.0;                 // density, 1/scene-units
  Vec3 normal = Vec3::Zero();       // -grad(tau)/|grad(tau)|
  bool degenerate_normal = true;
  Vec3 diffuse = Vec3::Zero();      // c_d
  Vec3 tint = Vec3::Zero();         // s
  Vec3 specular = Vec3::Zero();     // c_s, view dependent
};

/// Radiance field with a reflection-style appearance split: density tau(x),
/// diffuse color c_d(x), tint s(x) and view-dependent specular c_s(x, d).
/// The rendered color of a sample is clamp(c_d + s * c_s).
class RadianceField {
 public:
  virtual ~RadianceField() = default;
  virtual FieldOutput query(const FieldQuery& q) const = 0;
  virtual Aabb bounds() const = 0;
};

inline Vec3 composite_color(const FieldOutput& out) {
  return (out.diffuse + out.tint.cwiseProduct(out.specular))
      .cwiseMax(0.0)
      .cwiseMin(1.0);
}

}  // namespace surfreg
