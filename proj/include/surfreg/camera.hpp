#pragma once

#include <string>
#include <vector>

#include "surfreg/common.hpp"
#include "surfreg/ray_geometry.hpp"

namespace surfreg {

/// Pinhole camera: position, look-at point, up hint and vertical fov.
struct Camera {
  int view_id = 0;
  Vec3 position = Vec3(0.0, 0.0, 2.0);
  Vec3 look_at = Vec3::Zero();
  Vec3 up = Vec3(0.0, 0.0, 1.0);
  double fov_deg = 45.0;
  int width = 48;
  int height = 48;

  /// Ray through pixel center (px + 0.5, py + 0.5). The footprint rate is
  /// the pixel width at unit distance scaled by 2/sqrt(12) (the variance-
  /// matched disc radius of a square pixel).
  Ray pixel_ray(int px, int py) const;
};

std::vector<Camera> read_cameras_csv(const std::string& path, int width, int height);
void write_cameras_csv(const std::string& path, const std::vector<Camera>& cameras);

}  // namespace surfreg
