#pragma once

#include <optional>
#include <vector>

#include "surfreg/analytic_scene.hpp"
#include "surfreg/camera.hpp"
#include "surfreg/field.hpp"
#include "surfreg/ray_geometry.hpp"

namespace surfreg {

/// Pixels whose accumulated rendering weight falls below this are treated as
/// background in masks and metrics.
inline constexpr double kForegroundWeight = 0.05;

/// One ray's quadrature samples: K+1 strictly increasing interval endpoints
/// with a conical Gaussian and a field response per interval.
struct RaySamples {
  Ray ray;
  std::vector<double> t;                    // K+1 endpoints
  std::vector<ConicalGaussian> gaussians;   // K
  std::vector<FieldOutput> outputs;         // K
  int interval_count() const { return static_cast<int>(gaussians.size()); }
};

struct RenderResult {
  Vec3 color = Vec3::Zero();
  std::vector<double> weights;
  double transmittance_rest = 1.0;  // T_K
  double weight_sum = 0.0;
  double depth = 0.0;
  double disparity = 0.0;
  Vec3 rendered_normal = Vec3::Zero();
  bool background = true;
  Vec3 diffuse_color = Vec3::Zero();    // sum w * c_d
  Vec3 specular_color = Vec3::Zero();   // sum w * (s * c_s)
};

/// First-surface candidate: the first interval whose rendering weight
/// strictly exceeds the ray's median weight.
struct SurfaceCandidate {
  Vec3 x_star = Vec3::Zero();
  Vec3 n_star = Vec3(0.0, 0.0, 1.0);
  double w_star = 0.0;
  Mat3 cov_star = Mat3::Zero();
  double sigma_r_star = 0.0;
  std::size_t interval_index = 0;
};

/// Stratified interval endpoints over [t_near, t_far]; rng == nullptr gives
/// the deterministic midpoint grid used at evaluation time.
std::vector<double> stratified_endpoints(double t_near, double t_far, int intervals, Rng* rng);

/// Samples a field along a pixel cone. `with_normals` controls whether the
/// per-interval outputs carry density-gradient normals.
RaySamples sample_ray(const RadianceField& field, const Ray& ray,
                      const std::vector<double>& endpoints, bool with_normals = true);

/// Quadrature volumetric rendering: w_i = T_i (1 - exp(-tau_i delta_i)),
/// color composed as clamp(c_d + s * c_s), depth from interval midpoints,
/// disparity = sum(w) / max(sum(w t_mid), eps).
RenderResult render_ray(const RaySamples& samples);

/// Lower median (sorted element at floor((K-1)/2)), then the first index
/// whose weight strictly exceeds it; nullopt when nothing does.
std::optional<std::size_t> select_surface_index(const std::vector<double>& weights);

/// Surface candidate of a rendered ray; nullopt when no weight exceeds the
/// median or the field normal at the candidate is degenerate.
std::optional<SurfaceCandidate> select_surface(const RaySamples& samples,
                                               const RenderResult& result);

/// Adjoint of the compositing weights: given dL/dw_i, accumulates dL/dtau_i.
/// Weights and taus must come from the matching forward render.
void composite_weight_vjp(const std::vector<double>& t, const std::vector<double>& taus,
                          const std::vector<double>& weights,
                          const std::vector<double>& weight_bar, std::vector<double>& tau_bar);

struct ViewMaps {
  Image image;
  Image diffuse;
  Image specular;
  std::vector<double> depth;
  std::vector<double> disparity;
  std::vector<Vec3> normal;
  std::vector<double> weight_sum;
};

ViewMaps render_view(const RadianceField& field, const Camera& camera, int n_samples,
                     double t_near, double t_far);

struct Metrics {
  double psnr_db = 0.0;
  double normal_mae_deg = 0.0;
  double disparity_rmse = 0.0;
  std::size_t foreground_pixels = 0;
};

/// PSNR over all pixels; angular normal error and disparity RMSE over
/// pixels that are ground-truth foreground and rendered with accumulated
/// weight >= kForegroundWeight. Reductions use compensated summation.
Metrics compute_metrics(const std::vector<ViewMaps>& rendered,
                        const std::vector<GroundTruthView>& truth);

}  // namespace surfreg
