#include "surfreg/renderer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace surfreg {

std::vector<double> stratified_endpoints(double t_near, double t_far, int intervals, Rng* rng) {
  if (intervals < 1) throw std::invalid_argument("stratified_endpoints: intervals must be >= 1");
  if (!(t_near > 0.0) || t_far <= t_near)
    throw std::invalid_argument("stratified_endpoints: need 0 < t_near < t_far");
  const double delta = (t_far - t_near) / intervals;
  std::vector<double> t(intervals + 1);
  t[0] = t_near;
  t[intervals] = t_far;
  for (int i = 1; i < intervals; ++i) {
    const double u = rng ? rng->next_double() : 0.5;
    t[i] = t_near + delta * (i + (u - 0.5));
  }
  return t;
}

RaySamples sample_ray(const RadianceField& field, const Ray& ray,
                      const std::vector<double>& endpoints, bool with_normals) {
  RaySamples samples;
  samples.ray = ray;
  samples.t = endpoints;
  const int k = static_cast<int>(endpoints.size()) - 1;
  samples.gaussians.reserve(k);
  samples.outputs.reserve(k);
  for (int i = 0; i < k; ++i) {
    const FrustumMoments m = frustum_moments(endpoints[i], endpoints[i + 1], ray.radius_rate);
    const ConicalGaussian g = lift_gaussian(ray, m);
    FieldQuery q;
    q.position = g.mean3;
    q.direction = ray.direction;
    q.covariance = g.cov3;
    FieldOutput out = field.query(q);
    if (!with_normals) {
      out.normal = Vec3::Zero();
      out.degenerate_normal = true;
    }
    samples.gaussians.push_back(g);
    samples.outputs.push_back(out);
  }
  return samples;
}

RenderResult render_ray(const RaySamples& samples) {
  const int k = samples.interval_count();
  RenderResult res;
  res.weights.resize(k);
  double transmittance = 1.0;
  double depth_num = 0.0;
  Vec3 normal_acc = Vec3::Zero();
  for (int i = 0; i < k; ++i) {
    const double delta = samples.t[i + 1] - samples.t[i];
    const double e = std::exp(-samples.outputs[i].tau * delta);
    const double w = transmittance * (1.0 - e);
    res.weights[i] = w;
    transmittance *= e;

    const FieldOutput& out = samples.outputs[i];
    res.color += w * composite_color(out);
    res.diffuse_color += w * out.diffuse;
    res.specular_color += w * out.tint.cwiseProduct(out.specular);
    const double t_mid = 0.5 * (samples.t[i] + samples.t[i + 1]);
    depth_num += w * t_mid;
    res.weight_sum += w;
    if (!out.degenerate_normal) normal_acc += w * out.normal;
  }
  res.transmittance_rest = transmittance;
  constexpr double kEps = 1e-12;
  res.depth = depth_num / std::max(res.weight_sum, kEps);
  res.disparity = res.weight_sum / std::max(depth_num, kEps);
  const double nn = normal_acc.norm();
  res.rendered_normal = nn > 1e-12 ? Vec3(normal_acc / nn) : Vec3::Zero();
  res.background = res.weight_sum < kForegroundWeight;
  return res;
}

std::optional<std::size_t> select_surface_index(const std::vector<double>& weights) {
  if (weights.empty()) return std::nullopt;
  std::vector<double> sorted(weights);
  const std::size_t mid = (sorted.size() - 1) / 2;  // lower median
  std::nth_element(sorted.begin(), sorted.begin() + mid, sorted.end());
  const double median = sorted[mid];
  for (std::size_t i = 0; i < weights.size(); ++i)
    if (weights[i] > median) return i;
  return std::nullopt;
}

std::optional<SurfaceCandidate> select_surface(const RaySamples& samples,
                                               const RenderResult& result) {
  const auto idx = select_surface_index(result.weights);
  if (!idx) return std::nullopt;
  const FieldOutput& out = samples.outputs[*idx];
  if (out.degenerate_normal) return std::nullopt;  // nothing to orient against
  SurfaceCandidate cand;
  cand.interval_index = *idx;
  cand.x_star = samples.gaussians[*idx].mean3;
  cand.n_star = out.normal;
  cand.w_star = result.weights[*idx];
  cand.cov_star = samples.gaussians[*idx].cov3;
  cand.sigma_r_star = std::sqrt(std::max(0.0, samples.gaussians[*idx].sigma_r2));
  return cand;
}

void composite_weight_vjp(const std::vector<double>& t, const std::vector<double>& taus,
                          const std::vector<double>& weights,
                          const std::vector<double>& weight_bar, std::vector<double>& tau_bar) {
  const int k = static_cast<int>(taus.size());
  tau_bar.assign(k, 0.0);
  // dw_i/dtau_i = delta_i (T_i - w_i); dw_k/dtau_i = -delta_i w_k for k > i.
  double transmittance = 1.0;
  std::vector<double> t_before(k);
  for (int i = 0; i < k; ++i) {
    t_before[i] = transmittance;
    const double delta = t[i + 1] - t[i];
    transmittance *= std::exp(-taus[i] * delta);
  }
  double suffix = 0.0;  // sum_{k>i} weight_bar_k * w_k
  for (int i = k - 1; i >= 0; --i) {
    const double delta = t[i + 1] - t[i];
    tau_bar[i] = delta * (weight_bar[i] * (t_before[i] - weights[i]) - suffix);
    suffix += weight_bar[i] * weights[i];
  }
}

ViewMaps render_view(const RadianceField& field, const Camera& camera, int n_samples,
                     double t_near, double t_far) {
  ViewMaps maps;
  maps.image = Image::filled(camera.width, camera.height);
  maps.diffuse = Image::filled(camera.width, camera.height);
  maps.specular = Image::filled(camera.width, camera.height);
  const std::size_t count = static_cast<std::size_t>(camera.width) * camera.height;
  maps.depth.assign(count, 0.0);
  maps.disparity.assign(count, 0.0);
  maps.normal.assign(count, Vec3::Zero());
  maps.weight_sum.assign(count, 0.0);
  const std::vector<double> endpoints = stratified_endpoints(t_near, t_far, n_samples, nullptr);
  for (int py = 0; py < camera.height; ++py) {
    for (int px = 0; px < camera.width; ++px) {
      const Ray ray = camera.pixel_ray(px, py);
      const RaySamples samples = sample_ray(field, ray, endpoints, true);
      const RenderResult res = render_ray(samples);
      const std::size_t idx = static_cast<std::size_t>(py) * camera.width + px;
      maps.image.pixels[idx] = res.color;
      maps.diffuse.pixels[idx] = res.diffuse_color;
      maps.specular.pixels[idx] = res.specular_color;
      maps.depth[idx] = res.depth;
      maps.disparity[idx] = res.disparity;
      maps.normal[idx] = res.rendered_normal;
      maps.weight_sum[idx] = res.weight_sum;
    }
  }
  return maps;
}

Metrics compute_metrics(const std::vector<ViewMaps>& rendered,
                        const std::vector<GroundTruthView>& truth) {
  if (rendered.size() != truth.size())
    throw std::invalid_argument("compute_metrics: view count mismatch");
  KahanSum sq_err;
  KahanSum angle_sum;
  KahanSum disp_sq;
  std::size_t pixel_channels = 0;
  std::size_t fg = 0;
  for (std::size_t v = 0; v < rendered.size(); ++v) {
    const ViewMaps& r = rendered[v];
    const GroundTruthView& g = truth[v];
    if (r.image.pixels.size() != g.image.pixels.size())
      throw std::invalid_argument("compute_metrics: image size mismatch");
    for (std::size_t i = 0; i < r.image.pixels.size(); ++i) {
      const Vec3 diff = r.image.pixels[i] - g.image.pixels[i];
      sq_err.add(diff.squaredNorm());
      pixel_channels += 3;
      if (!g.foreground[i] || r.weight_sum[i] < kForegroundWeight) continue;
      ++fg;
      const double dot = r.normal[i].dot(g.normal[i]);
      angle_sum.add(std::acos(std::min(1.0, std::max(-1.0, dot))) * 180.0 / M_PI);
      const double d = r.disparity[i] - 1.0 / g.depth[i];
      disp_sq.add(d * d);
    }
  }
  Metrics m;
  const double mse = sq_err.value() / static_cast<double>(pixel_channels);
  m.psnr_db = mse > 0.0 ? -10.0 * std::log10(mse) : std::numeric_limits<double>::infinity();
  m.normal_mae_deg = fg > 0 ? angle_sum.value() / static_cast<double>(fg) : 0.0;
  m.disparity_rmse = fg > 0 ? std::sqrt(disp_sq.value() / static_cast<double>(fg)) : 0.0;
  m.foreground_pixels = fg;
  return m;
}

}  // namespace surfreg
