#include "surfreg/analytic_scene.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

namespace surfreg {

double AnalyticScene::surface_distance(const Vec3& x) const {
  if (kind == SceneKind::plane) {
    // Distance to the patch: out-of-plane offset plus in-plane overshoot.
    const double dn = (x - plane_point).dot(plane_normal);
    const Vec3 in_plane = (x - plane_point) - dn * plane_normal;
    const double ox = std::max(0.0, std::abs(in_plane.x()) - plane_half_extent);
    const double oy = std::max(0.0, std::abs(in_plane.y()) - plane_half_extent);
    return std::sqrt(dn * dn + ox * ox + oy * oy);
  }
  return std::abs((x - sphere_center).norm() - sphere_radius);
}

Vec3 AnalyticScene::surface_normal(const Vec3& x) const {
  if (kind == SceneKind::plane) return plane_normal;
  const Vec3 r = x - sphere_center;
  const double n = r.norm();
  if (n < 1e-12) return Vec3(0.0, 0.0, 1.0);
  return r / n;
}

Vec3 AnalyticScene::diffuse_texture(const Vec3& x) const {
  return Vec3(0.5 + 0.4 * std::sin(3.1 * x.x() + 1.3 * x.y()),
              0.5 + 0.4 * std::sin(2.3 * x.y() - 0.7 * x.z() + 1.1),
              0.5 + 0.4 * std::sin(1.7 * x.x() - 2.9 * x.y() + 2.3));
}

Vec3 AnalyticScene::specular_lobe(const Vec3& d, const Vec3& normal) const {
  if (lobe_amplitude <= 0.0) return Vec3::Zero();
  const Vec3 mirrored = d - 2.0 * d.dot(normal) * normal;
  const double a = lobe_amplitude * std::exp(lobe_sharpness * (mirrored.dot(light_dir) - 1.0));
  return a * lobe_color;
}

AnalyticScene AnalyticScene::make_default(SceneKind kind) {
  AnalyticScene scene;
  scene.kind = kind;
  return scene;
}

SurfaceHit intersect(const AnalyticScene& scene, const Ray& ray) {
  SurfaceHit hit;
  if (scene.kind == SceneKind::plane) {
    const double denom = ray.direction.dot(scene.plane_normal);
    if (std::abs(denom) < 1e-12) return hit;
    const double t = (scene.plane_point - ray.origin).dot(scene.plane_normal) / denom;
    if (t <= 1e-9) return hit;
    const Vec3 p = ray.origin + t * ray.direction;
    const Vec3 in_plane = (p - scene.plane_point) -
                          (p - scene.plane_point).dot(scene.plane_normal) * scene.plane_normal;
    if (std::abs(in_plane.x()) > scene.plane_half_extent ||
        std::abs(in_plane.y()) > scene.plane_half_extent)
      return hit;
    hit.hit = true;
    hit.t = t;
    hit.point = p;
    hit.normal = scene.plane_normal;
    return hit;
  }

  const Vec3 oc = ray.origin - scene.sphere_center;
  const double b = oc.dot(ray.direction);
  const double c = oc.squaredNorm() - scene.sphere_radius * scene.sphere_radius;
  const double disc = b * b - c;
  if (disc < 0.0) return hit;
  const double sq = std::sqrt(disc);
  double t = -b - sq;
  if (t <= 1e-9) t = -b + sq;
  if (t <= 1e-9) return hit;
  hit.hit = true;
  hit.t = t;
  hit.point = ray.origin + t * ray.direction;
  hit.normal = (hit.point - scene.sphere_center).normalized();
  return hit;
}

FieldOutput AnalyticSceneField::query(const FieldQuery& q) const {
  FieldOutput out;
  const double dist = scene_.surface_distance(q.position);
  out.tau = scene_.ridge_tau0 *
            std::exp(-dist * dist / (2.0 * scene_.ridge_sigma * scene_.ridge_sigma));
  out.normal = scene_.surface_normal(q.position);
  out.degenerate_normal = false;
  out.diffuse = scene_.diffuse_texture(q.position);
  out.tint = scene_.tint;
  out.specular = scene_.specular_lobe(q.direction, out.normal);
  return out;
}

GroundTruthView render_ground_truth(const AnalyticScene& scene, const Camera& camera) {
  GroundTruthView view;
  view.image = Image::filled(camera.width, camera.height);
  const std::size_t count = static_cast<std::size_t>(camera.width) * camera.height;
  view.depth.assign(count, -1.0);
  view.normal.assign(count, Vec3::Zero());
  view.foreground.assign(count, 0);

  for (int py = 0; py < camera.height; ++py) {
    for (int px = 0; px < camera.width; ++px) {
      const Ray ray = camera.pixel_ray(px, py);
      const SurfaceHit hit = intersect(scene, ray);
      if (!hit.hit) continue;
      const std::size_t idx = static_cast<std::size_t>(py) * camera.width + px;
      const Vec3 cs = scene.specular_lobe(ray.direction, hit.normal);
      const Vec3 color = (scene.diffuse_texture(hit.point) + scene.tint.cwiseProduct(cs))
                             .cwiseMax(0.0)
                             .cwiseMin(1.0);
      view.image.pixels[idx] = color;
      view.depth[idx] = hit.t;
      view.normal[idx] = hit.normal;
      view.foreground[idx] = 1;
    }
  }
  return view;
}

std::vector<Camera> make_camera_rig(const AnalyticScene& scene, int first_view,
                                    int n_views, int width, int height) {
  const Vec3 center = scene.kind == SceneKind::plane ? scene.plane_point : scene.sphere_center;
  std::vector<Camera> cameras;
  cameras.reserve(n_views);
  const double radius = 2.2;
  for (int k = first_view; k < first_view + n_views; ++k) {
    // Golden-angle azimuths with elevations cycling over three bands keep
    // neighbouring views well separated.
    const double azimuth = 2.0 * M_PI * std::fmod(0.618033988749895 * k + 0.15, 1.0);
    const double elevation = (28.0 + 16.0 * (k % 3)) * M_PI / 180.0;
    Camera cam;
    cam.view_id = k;
    cam.position = center + radius * Vec3(std::cos(azimuth) * std::cos(elevation),
                                          std::sin(azimuth) * std::cos(elevation),
                                          std::sin(elevation));
    cam.look_at = center;
    cam.up = Vec3(0.0, 0.0, 1.0);
    cam.fov_deg = 42.0;
    cam.width = width;
    cam.height = height;
    cameras.push_back(cam);
  }
  return cameras;
}

Dataset make_dataset(const AnalyticScene& scene, int first_view, int n_views,
                     int width, int height) {
  Dataset data;
  data.cameras = make_camera_rig(scene, first_view, n_views, width, height);
  data.views.reserve(data.cameras.size());
  for (const Camera& cam : data.cameras) data.views.push_back(render_ground_truth(scene, cam));
  return data;
}

namespace {
std::string view_stem(const std::string& dir, int view_id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "view_%03d", view_id);
  return dir + "/" + buf;
}
}  // namespace

void write_dataset(const std::string& dir, const Dataset& data) {
  std::filesystem::create_directories(dir);
  write_cameras_csv(dir + "/cameras.csv", data.cameras);
  for (std::size_t i = 0; i < data.views.size(); ++i) {
    const std::string stem = view_stem(dir, data.cameras[i].view_id);
    write_ppm(stem + ".ppm", data.views[i].image);
    write_float_map(stem + "_depth.f32", scalars_to_float(data.views[i].depth));
    write_float_map(stem + "_normal.f32", vectors_to_float(data.views[i].normal));
  }
}

Dataset read_dataset(const std::string& dir, int width, int height) {
  Dataset data;
  data.cameras = read_cameras_csv(dir + "/cameras.csv", width, height);
  for (const Camera& cam : data.cameras) {
    const std::string stem = view_stem(dir, cam.view_id);
    GroundTruthView view;
    view.image = read_ppm(stem + ".ppm");
    const auto depth = read_float_map(stem + "_depth.f32");
    const auto normal = read_float_map(stem + "_normal.f32");
    const std::size_t count = static_cast<std::size_t>(width) * height;
    if (depth.size() != count || normal.size() != 3 * count)
      throw ConfigError("dataset maps do not match image size in " + dir);
    view.depth.assign(depth.begin(), depth.end());
    view.normal.resize(count);
    view.foreground.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
      view.normal[i] = Vec3(normal[3 * i], normal[3 * i + 1], normal[3 * i + 2]);
      view.foreground[i] = view.depth[i] > 0.0 ? 1 : 0;
    }
    data.views.push_back(std::move(view));
  }
  return data;
}

}  // namespace surfreg
