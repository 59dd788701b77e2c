#pragma once

#include <memory>
#include <string>
#include <vector>

#include "surfreg/camera.hpp"
#include "surfreg/field.hpp"
#include "surfreg/image_io.hpp"

namespace surfreg {

enum class SceneKind { plane, sphere };

/// Closed-form test scene: a textured plane patch or sphere with a Gaussian
/// density ridge of width `ridge_sigma` about the surface and a specular
/// lobe around the mirror reflection of the view direction.
struct AnalyticScene {
  SceneKind kind = SceneKind::plane;

  // plane kind: square patch of half extent around `plane_point`
  Vec3 plane_point = Vec3::Zero();
  Vec3 plane_normal = Vec3(0.0, 0.0, 1.0);
  double plane_half_extent = 0.8;

  // sphere kind
  Vec3 sphere_center = Vec3::Zero();
  double sphere_radius = 0.5;

  // volumetric ridge used by the analytic field
  double ridge_tau0 = 8.0;
  double ridge_sigma = 0.03;

  // appearance
  Vec3 tint = Vec3(0.8, 0.8, 0.8);
  Vec3 lobe_color = Vec3(1.0, 1.0, 1.0);
  double lobe_amplitude = 1.0;  // 0 => pure-diffuse scene
  double lobe_sharpness = 60.0;
  Vec3 light_dir = Vec3(0.35, -0.25, 0.9).normalized();

  Aabb bounds{Vec3(-1.1, -1.1, -1.1), Vec3(1.1, 1.1, 1.1)};

  /// Unsigned distance from x to the surface.
  double surface_distance(const Vec3& x) const;
  /// Outward normal of the closest surface point (for the plane: its fixed
  /// normal everywhere).
  Vec3 surface_normal(const Vec3& x) const;
  /// Smooth position-dependent diffuse texture, channels in [0.1, 0.9].
  Vec3 diffuse_texture(const Vec3& x) const;
  /// Specular lobe: peaks when the mirror reflection of d about the normal
  /// points at the light.
  Vec3 specular_lobe(const Vec3& d, const Vec3& normal) const;

  static AnalyticScene make_default(SceneKind kind);
};

struct SurfaceHit {
  bool hit = false;
  double t = 0.0;
  Vec3 point = Vec3::Zero();
  Vec3 normal = Vec3::Zero();
};

/// First intersection of the ray with the scene surface (closed form).
SurfaceHit intersect(const AnalyticScene& scene, const Ray& ray);

/// Volumetric oracle field over the analytic scene. Density is the Gaussian
/// ridge tau0 * exp(-dist^2 / (2 sigma^2)); normals are the true surface
/// normals (never degenerate); appearance matches the ground-truth renderer.
class AnalyticSceneField : public RadianceField {
 public:
  explicit AnalyticSceneField(AnalyticScene scene) : scene_(std::move(scene)) {}

  FieldOutput query(const FieldQuery& q) const override;
  Aabb bounds() const override { return scene_.bounds; }
  const AnalyticScene& scene() const { return scene_; }

 private:
  AnalyticScene scene_;
};

/// Ground-truth view: exact first-surface shading plus depth and normal
/// maps; background pixels are flagged (depth -1, zero normal).
struct GroundTruthView {
  Image image;
  std::vector<double> depth;
  std::vector<Vec3> normal;
  std::vector<char> foreground;
};

GroundTruthView render_ground_truth(const AnalyticScene& scene, const Camera& camera);

/// Deterministic ring of cameras looking at the scene center from varied
/// azimuths and elevations; indices beyond n_views continue the pattern so
/// held-out views never coincide with training views.
std::vector<Camera> make_camera_rig(const AnalyticScene& scene, int first_view,
                                    int n_views, int width, int height);

struct Dataset {
  std::vector<Camera> cameras;
  std::vector<GroundTruthView> views;
};

Dataset make_dataset(const AnalyticScene& scene, int first_view, int n_views,
                     int width, int height);

void write_dataset(const std::string& dir, const Dataset& data);
Dataset read_dataset(const std::string& dir, int width, int height);

}  // namespace surfreg
