#include "surfreg/camera.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace surfreg {

Ray Camera::pixel_ray(int px, int py) const {
  const Vec3 forward = (look_at - position).normalized();
  Vec3 right = forward.cross(up);
  const double rn = right.norm();
  if (rn < 1e-12) throw ConfigError("camera up vector is parallel to the view direction");
  right /= rn;
  const Vec3 cam_up = right.cross(forward);

  const double tan_half = std::tan(0.5 * fov_deg * M_PI / 180.0);
  const double aspect = static_cast<double>(width) / static_cast<double>(height);
  const double ndc_x = (2.0 * (px + 0.5) / width - 1.0) * tan_half * aspect;
  const double ndc_y = (1.0 - 2.0 * (py + 0.5) / height) * tan_half;

  Ray ray;
  ray.origin = position;
  ray.direction = (forward + ndc_x * right + ndc_y * cam_up).normalized();
  ray.radius_rate = (2.0 * tan_half / height) * (2.0 / std::sqrt(12.0));
  return ray;
}

std::vector<Camera> read_cameras_csv(const std::string& path, int width, int height) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open camera csv: " + path);
  std::vector<Camera> cameras;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (header) {  // skip the column names row
      header = false;
      continue;
    }
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
    if (vals.size() != 11)
      throw ConfigError("camera csv row must have 11 columns, got " +
                        std::to_string(vals.size()));
    Camera cam;
    cam.view_id = static_cast<int>(vals[0]);
    cam.position = Vec3(vals[1], vals[2], vals[3]);
    cam.look_at = Vec3(vals[4], vals[5], vals[6]);
    cam.up = Vec3(vals[7], vals[8], vals[9]);
    cam.fov_deg = vals[10];
    cam.width = width;
    cam.height = height;
    cameras.push_back(cam);
  }
  return cameras;
}

void write_cameras_csv(const std::string& path, const std::vector<Camera>& cameras) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write camera csv: " + path);
  out << "view_id,pos_x,pos_y,pos_z,look_x,look_y,look_z,up_x,up_y,up_z,fov_deg\n";
  out.precision(17);
  for (const Camera& c : cameras) {
    out << c.view_id << ',' << c.position.x() << ',' << c.position.y() << ','
        << c.position.z() << ',' << c.look_at.x() << ',' << c.look_at.y() << ','
        << c.look_at.z() << ',' << c.up.x() << ',' << c.up.y() << ',' << c.up.z() << ','
        << c.fov_deg << '\n';
  }
}

}  // namespace surfreg
